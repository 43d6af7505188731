#pragma once

#include <set>
#include <string>
#include <vector>

#include "drhw/graph.hpp"

namespace drhw {

/// DRHW subtasks that must be loaded (i.e. not assumed reused).
using LoadSet = std::set<SubtaskId>;
/// Issue order of the loads on the single reconfiguration controller.
using LoadOrder = std::vector<SubtaskId>;

struct ExecInterval {
  SubtaskId subtask = 0;
  std::string pe;
  Millis start = 0;
  Millis end = 0;
  bool operator==(const ExecInterval&) const = default;
};

struct LoadInterval {
  SubtaskId subtask = 0;
  std::string tile;  // virtual slot the configuration is loaded for
  Millis start = 0;
  Millis end = 0;
  bool operator==(const LoadInterval&) const = default;
};

/// A timeline: exec intervals (graph order) and load intervals (issue order).
struct TimedSchedule {
  Millis origin = 0;
  Millis makespan = 0;  // latest exec end minus origin
  std::vector<ExecInterval> execs;
  std::vector<LoadInterval> loads;

  Millis end() const { return origin + makespan; }
  const ExecInterval* exec_of(SubtaskId id) const;
  const LoadInterval* load_of(SubtaskId id) const;
  /// Copy with every instant moved by `offset`.
  TimedSchedule shifted(Millis offset) const;

  bool operator==(const TimedSchedule&) const = default;
};

enum class EventKind { Exec, Load };

/// Flat record used by trace writers: (resource, kind, subtask, start, end).
struct ScheduleEvent {
  std::string resource;
  EventKind kind = EventKind::Exec;
  SubtaskId subtask = 0;
  Millis start = 0;
  Millis end = 0;
  bool operator==(const ScheduleEvent&) const = default;
};

/// Loads in issue order, then execs ordered by (start, subtask).
std::vector<ScheduleEvent> to_events(const TimedSchedule& schedule);
const char* to_string(EventKind kind);

struct PenaltyReport {
  Millis penalty = 0;
  std::set<SubtaskId> delayed;
  TimedSchedule schedule;
  LoadOrder order;
  bool used_optimal = false;
};

struct ScheduledLoads {
  LoadOrder order;
  TimedSchedule schedule;
};

class InfeasibleOrder : public Error {
 public:
  using Error::Error;
};

class LimitExceeded : public Error {
 public:
  using Error::Error;
};

/// How compute_penalty decides which subtasks "generate delays".
enum class DelayRule {
  BindingLoad,  // the subtask's own load end is its binding start constraint
  LateStart,    // a loaded subtask starts later than in the ideal timing
};

struct PrefetchOptions {
  std::size_t bb_limit = 12;
  DelayRule delay_rule = DelayRule::BindingLoad;
};

inline constexpr std::size_t kOracleLimit = 8;

// All functions are pure. Scenario overloads build a ScenarioIndex first.

/// Places `order` on the controller with head-of-line semantics. Throws
/// InfeasibleOrder when the order deadlocks (a load waits for a tile whose
/// previous subtask depends on a load issued later).
TimedSchedule place_loads(const ScenarioIndex& index, const LoadSet& load_set, const LoadOrder& order,
                          Millis latency, Millis origin = 0);
TimedSchedule place_loads(const Scenario& scenario, const LoadSet& load_set, const LoadOrder& order,
                          Millis latency, Millis origin = 0);

/// Loads issued on demand, once the subtask itself is ready to run.
TimedSchedule schedule_no_prefetch(const ScenarioIndex& index, const LoadSet& load_set, Millis latency,
                                   Millis origin = 0);
TimedSchedule schedule_no_prefetch(const Scenario& scenario, const LoadSet& load_set, Millis latency,
                                   Millis origin = 0);

/// Exact minimum-makespan order; lexicographically smallest among optima.
ScheduledLoads schedule_optimal_bb(const ScenarioIndex& index, const LoadSet& load_set, Millis latency,
                                   Millis origin = 0, std::size_t bb_limit = 12);
ScheduledLoads schedule_optimal_bb(const Scenario& scenario, const LoadSet& load_set, Millis latency,
                                   Millis origin = 0, std::size_t bb_limit = 12);

/// Descending-ALAP-weight list scheduling over the issuable loads.
ScheduledLoads schedule_list_heuristic(const ScenarioIndex& index, const LoadSet& load_set, Millis latency,
                                       Millis origin = 0);
ScheduledLoads schedule_list_heuristic(const Scenario& scenario, const LoadSet& load_set, Millis latency,
                                       Millis origin = 0);

/// Enumerates every permutation. Test oracle; |load_set| <= kOracleLimit.
ScheduledLoads brute_force_oracle(const ScenarioIndex& index, const LoadSet& load_set, Millis latency,
                                  Millis origin = 0);
ScheduledLoads brute_force_oracle(const Scenario& scenario, const LoadSet& load_set, Millis latency,
                                  Millis origin = 0);

/// Reconfiguration penalty when `assumed_reused` need no load and every
/// other DRHW subtask does.
PenaltyReport compute_penalty(const ScenarioIndex& index, const std::set<SubtaskId>& assumed_reused,
                              Millis latency, const PrefetchOptions& options = {});
PenaltyReport compute_penalty(const Scenario& scenario, const std::set<SubtaskId>& assumed_reused,
                              Millis latency, const PrefetchOptions& options = {});

/// DRHW subtasks of the scenario not in `reused`.
LoadSet loads_excluding(const ScenarioIndex& index, const std::set<SubtaskId>& reused);

}  // namespace drhw
