#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drhw {

/// Durations and instants, in milliseconds.
using Millis = double;

/// Absolute tolerance for every time comparison that is not an exact max/plus.
inline constexpr Millis kTimeEps = 1e-9;

using SubtaskId = int;
using TaskId = int;
using ScenarioId = int;

enum class Target { Isp, Drhw };

/// A configuration is identified by the task and subtask it implements,
/// independently of the scenario that runs it.
struct ConfigId {
  TaskId task = 0;
  SubtaskId subtask = 0;
  auto operator<=>(const ConfigId&) const = default;
};

struct Subtask {
  SubtaskId id = 0;
  Millis exec_ms = 0;
  Target target = Target::Drhw;
  std::string slot;  // virtual tile for DRHW, processor name for ISP
  bool operator==(const Subtask&) const = default;
};

struct SubtaskGraph {
  std::vector<Subtask> subtasks;
  std::vector<std::pair<SubtaskId, SubtaskId>> edges;  // (pred, succ)

  const Subtask* find(SubtaskId id) const;
};

/// Per processing element, the order in which its subtasks run when
/// reconfiguration latency is ignored.
struct InitialSchedule {
  std::map<std::string, std::vector<SubtaskId>> per_pe;
};

struct Scenario {
  ScenarioId id = 0;
  SubtaskGraph graph;
  InitialSchedule schedule;
};

struct Task {
  TaskId id = 0;
  std::vector<Scenario> scenarios;

  const Scenario* find(ScenarioId id) const;
};

/// One scenario id per task, in task order.
using Combination = std::vector<ScenarioId>;

struct Workload {
  std::string description;
  std::vector<Task> tasks;
  std::optional<std::vector<Combination>> feasible_combinations;
  Millis default_latency = 4.0;

  const Task* find(TaskId id) const;
  std::size_t scenario_count() const;
};

using WeightMap = std::map<SubtaskId, Millis>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cyclic graph or timing structure.
class StructuralError : public Error {
 public:
  using Error::Error;
};

class InvalidScenario : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string kind;  // "cycle", "coverage", "edge", "duplicate", ...
  std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Checks every invariant of the scenario types. Empty report means valid.
ValidationReport validate(const Scenario& scenario);

/// Throws InvalidScenario carrying the first violations when invalid.
void require_valid(const Scenario& scenario, const std::string& context = {});

/// Longest execution-time path from each subtask's start to the end of the
/// graph. One reverse-topological pass; throws StructuralError on cycles.
WeightMap alap_weights(const SubtaskGraph& graph);

/// Makespan of the zero-latency timing induced by the initial schedule.
Millis ideal_makespan(const Scenario& scenario);

// ---------------------------------------------------------------------------

/// Dense, index-based view of a valid scenario used by the schedulers.
///
/// Subtasks are indexed in the order they appear in the graph. The
/// "combined" DAG is the union of precedence edges and per-PE chains; the
/// zero-latency timing is well defined iff it is acyclic.
class ScenarioIndex {
 public:
  explicit ScenarioIndex(const Scenario& scenario);

  ScenarioId scenario_id() const { return scenario_id_; }
  int size() const { return static_cast<int>(ids_.size()); }
  int index_of(SubtaskId id) const;
  SubtaskId id_at(int i) const { return ids_[i]; }

  Millis exec(int i) const { return exec_[i]; }
  bool is_drhw(int i) const { return drhw_[i]; }
  const std::string& pe(int i) const { return pe_[i]; }
  std::span<const int> preds(int i) const { return preds_[i]; }
  std::span<const int> succs(int i) const { return succs_[i]; }
  int pe_prev(int i) const { return pe_prev_[i]; }
  int pe_next(int i) const { return pe_next_[i]; }
  /// First subtask on its PE.
  bool is_slot_head(int i) const { return pe_prev_[i] < 0; }

  std::span<const int> combined_topo_order() const { return topo_; }
  Millis weight(int i) const { return weight_[i]; }
  /// Longest path to the end through precedence and PE order together.
  Millis scheduled_tail(int i) const { return sched_tail_[i]; }
  Millis ideal_makespan() const { return ideal_makespan_; }
  Millis ideal_start(int i) const { return ideal_start_[i]; }

  /// DRHW subtask indices, ascending id.
  std::span<const int> drhw() const { return drhw_list_; }
  /// Number of distinct DRHW virtual slots.
  int drhw_slot_count() const { return drhw_slots_; }

 private:
  ScenarioId scenario_id_ = 0;
  std::vector<SubtaskId> ids_;
  std::map<SubtaskId, int> index_;
  std::vector<Millis> exec_;
  std::vector<char> drhw_;
  std::vector<std::string> pe_;
  std::vector<std::vector<int>> preds_, succs_;
  std::vector<int> pe_prev_, pe_next_;
  std::vector<int> topo_;
  std::vector<Millis> weight_;
  std::vector<Millis> sched_tail_;
  std::vector<Millis> ideal_start_;
  std::vector<int> drhw_list_;
  int drhw_slots_ = 0;
  Millis ideal_makespan_ = 0;
};

}  // namespace drhw
