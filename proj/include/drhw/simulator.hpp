#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drhw/design_time.hpp"
#include "drhw/graph.hpp"
#include "drhw/runtime.hpp"

namespace drhw {

/// Which tasks run in an iteration. RandomSubset draws a non-empty subset in
/// random order; AllShuffled runs every task in random order.
enum class Selection { RandomSubset, AllShuffled };
const char* to_string(Selection selection);
std::optional<Selection> parse_selection(std::string_view name);

struct SimConfig {
  int tiles = 4;
  Millis latency = 4;
  int iterations = 1000;
  std::uint64_t seed = 1;
  std::vector<Mode> modes{all_modes().begin(), all_modes().end()};
  bool trace = false;
  Selection selection = Selection::RandomSubset;

  void check() const;  // throws std::invalid_argument
};

struct Metrics {
  Millis ideal = 0;   // sum of scenario ideal makespans
  Millis actual = 0;  // end of the last task instance
  double overhead_pct = 0;
  std::optional<double> hidden_pct;  // against NoPrefetch at the same tile count
  double reuse_pct = 0;
  double cs_fraction = 0;  // critical share of executed DRHW subtask instances
  long task_instances = 0;
  long drhw_instances = 0;
  long reused_instances = 0;
  long critical_instances = 0;
  long loads_issued = 0;  // every load put on the controller, prefetches included
  long loads_cancelled = 0;
  long init_loads = 0;
  long prefetch_loads = 0;
};

double overhead_pct(Millis ideal, Millis actual);
double hidden_pct(double baseline_overhead, double achieved_overhead);

struct TraceEvent {
  Mode mode = Mode::Hybrid;
  int tiles = 0;
  int iteration = 0;
  TaskId task = 0;
  ScenarioId scenario = 0;
  std::string resource;
  TraceKind kind = TraceKind::Exec;
  SubtaskId subtask = 0;
  Millis start = 0;
  Millis end = 0;
  bool operator==(const TraceEvent&) const = default;
};

using Invocation = std::pair<TaskId, ScenarioId>;

/// Task order and scenarios of one iteration; a function of (seed, iteration)
/// only.
std::vector<Invocation> select_iteration(const Workload& workload, std::uint64_t seed, int iteration,
                                         Selection selection = Selection::RandomSubset);

/// Prepared scenarios for every (task, scenario) of a workload, checked
/// against the store.
class Catalog {
 public:
  /// Throws LatencyMismatch when the store was built for another latency and
  /// ConsistencyError when an entry is missing or disagrees with the workload.
  Catalog(const Workload& workload, const ScheduleStore& store, Millis latency);
  Catalog(const Catalog&) = delete;
  Catalog& operator=(const Catalog&) = delete;

  const PreparedScenario& at(TaskId task, ScenarioId scenario) const;
  const Workload& workload() const { return *workload_; }
  Millis latency() const { return latency_; }

 private:
  const Workload* workload_;
  Millis latency_;
  std::deque<ScenarioIndex> indexes_;
  std::map<Invocation, PreparedScenario> prepared_;
};

struct ModeRun {
  Mode mode = Mode::Hybrid;
  int tiles = 0;
  Metrics metrics;
  std::vector<TraceEvent> trace;
};

/// One experiment: a single mode at a single tile count, strictly sequential.
ModeRun run_mode(const Catalog& catalog, const std::vector<std::vector<Invocation>>& plan, Mode mode, int tiles,
                 const SimConfig& config);

std::vector<std::vector<Invocation>> plan_iterations(const Workload& workload, const SimConfig& config);

struct SimResult {
  int tiles = 0;
  std::vector<ModeRun> runs;  // in config.modes order
};

/// Every enabled mode at config.tiles.
SimResult run_simulation(const Workload& workload, const ScheduleStore& store, const SimConfig& config);

/// Every (mode, tile count) cell; cells run concurrently, results are
/// ordered by tile count, then by mode as listed in the config.
std::vector<SimResult> run_sweep(const Workload& workload, const ScheduleStore& store, const SimConfig& config,
                                 const std::vector<int>& tiles);
std::vector<SimResult> run_sweep_serial(const Workload& workload, const ScheduleStore& store,
                                        const SimConfig& config, const std::vector<int>& tiles);

// ---------------------------------------------------------------------------
// Reports and traces

inline constexpr const char* kReportSchema = "drhw-report/1";
inline constexpr const char* kTraceHeader = "# drhw-trace v1";
inline constexpr const char* kToolVersion = "drhwsim 1.0.0";

struct RunManifest {
  std::string workload_path;
  std::string store_path;
  std::vector<int> tiles;
  Millis latency = 4;
  int iterations = 1000;
  std::uint64_t seed = 1;
  std::vector<Mode> modes;
  Selection selection = Selection::RandomSubset;
  std::string report_path;
  std::string trace_path;  // empty when no trace was requested
  std::string tool_version = kToolVersion;
};

void write_report(const RunManifest& manifest, const std::vector<SimResult>& results, std::ostream& out);
/// Manifest embedded in a report written by write_report.
RunManifest read_manifest(std::istream& in);

void write_trace(const std::vector<SimResult>& results, std::ostream& out);
void write_trace_events(const std::vector<TraceEvent>& events, std::ostream& out);
/// Throws Error naming the line on malformed input.
std::vector<TraceEvent> read_trace(std::istream& in);

/// Final exec end per (mode, tiles) cell of a trace.
std::map<std::pair<Mode, int>, Millis> trace_makespans(const std::vector<TraceEvent>& events);

}  // namespace drhw
