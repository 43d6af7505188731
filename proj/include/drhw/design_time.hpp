#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "drhw/graph.hpp"
#include "drhw/prefetch.hpp"

namespace drhw {

/// Critical subtasks ordered by descending ALAP weight (lower id first on
/// ties), with the weights they were ranked by.
struct CriticalSet {
  std::vector<SubtaskId> ids;
  std::map<SubtaskId, Millis> weights;

  bool contains(SubtaskId id) const;
  bool operator==(const CriticalSet&) const = default;
};

struct DesignTimeEntry {
  TaskId task = 0;
  ScenarioId scenario = 0;
  Millis ideal = 0;
  WeightMap weights;
  CriticalSet critical;
  /// Members in the order the extraction loop added them.
  std::vector<SubtaskId> extraction_sequence;
  /// Schedule assuming `critical` reused and every other DRHW subtask loaded.
  TimedSchedule stored_schedule;
  LoadOrder stored_order;
  LoadOrder init_order;
  /// Zero-reuse schedule: every DRHW subtask loaded, best order found.
  LoadOrder full_load_order;
  Millis full_makespan = 0;
  bool used_optimal = true;

  bool operator==(const DesignTimeEntry&) const = default;
};

struct ScheduleStore {
  Millis latency = 0;
  std::size_t bb_limit = 12;
  std::vector<DesignTimeEntry> entries;  // ordered by (task, scenario)

  const DesignTimeEntry* find(TaskId task, ScenarioId scenario) const;
  bool operator==(const ScheduleStore&) const = default;
};

/// Malformed or inconsistent store document.
class StoreFormatError : public Error {
 public:
  using Error::Error;
};

/// Store was built for a different reconfiguration latency.
class LatencyMismatch : public Error {
 public:
  using Error::Error;
};

/// Runs the critical-subtask loop: starting from an empty set, while the
/// penalty is non-zero add the heaviest delayed subtask.
DesignTimeEntry extract_critical_subtasks(const ScenarioIndex& index, TaskId task, Millis latency,
                                          const PrefetchOptions& options = {});
DesignTimeEntry extract_critical_subtasks(const Scenario& scenario, TaskId task, Millis latency,
                                          const PrefetchOptions& options = {});

/// Extracts every scenario of every task. Scenarios are independent and are
/// processed in parallel when OpenMP is available.
ScheduleStore build_store(const Workload& workload, Millis latency, const PrefetchOptions& options = {});
/// Single-threaded reference for build_store.
ScheduleStore build_store_serial(const Workload& workload, Millis latency, const PrefetchOptions& options = {});

inline constexpr const char* kStoreSchema = "drhw-store/1";

void save_store(const ScheduleStore& store, std::ostream& out);
void save_store(const ScheduleStore& store, const std::filesystem::path& path);
ScheduleStore load_store(std::istream& in);
ScheduleStore load_store(const std::filesystem::path& path);
/// Loads and requires the store to have been built for `expected_latency`.
ScheduleStore load_store(const std::filesystem::path& path, Millis expected_latency);

/// Throws StoreFormatError if an entry breaks its invariants.
void check_entry(const DesignTimeEntry& entry);

}  // namespace drhw
