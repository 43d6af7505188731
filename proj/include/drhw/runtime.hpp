#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drhw/design_time.hpp"
#include "drhw/graph.hpp"
#include "drhw/prefetch.hpp"

namespace drhw {

struct TileState {
  int id = 0;
  std::optional<ConfigId> resident;
  Millis last_use = 0;  // last exec end or load end on this tile
  Millis ready_at = 0;  // instant the resident configuration became usable
  bool operator==(const TileState&) const = default;
};

/// Which configuration each physical tile holds. A configuration resides on
/// at most one tile.
class ResidencyMap {
 public:
  ResidencyMap() = default;
  explicit ResidencyMap(int tiles);

  int size() const { return static_cast<int>(tiles_.size()); }
  const TileState& tile(int id) const { return tiles_.at(id); }
  std::span<const TileState> tiles() const { return tiles_; }
  std::optional<int> find(const ConfigId& config) const;

  /// Installs `config` on `tile`, dropping any other copy of it.
  void install(int tile, const ConfigId& config, Millis ready_at, Millis last_use);
  void touch(int tile, Millis when);

  bool operator==(const ResidencyMap&) const = default;

 private:
  std::vector<TileState> tiles_;
};

enum class Mode { NoPrefetch, DesignTimePrefetch, RuntimeHeuristic, RuntimeInterTask, Hybrid };

const char* to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);
std::span<const Mode> all_modes();

/// More tile demand than physical tiles.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Run-time inputs disagree with the design-time data.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A scenario with its design-time entry and the tables the run-time phase
/// scans. Built once per scenario, before any simulation.
struct PreparedScenario {
  TaskId task = 0;
  const ScenarioIndex* index = nullptr;
  const DesignTimeEntry* entry = nullptr;
  std::vector<int> claim_order;  // DRHW indices: critical first, then weight desc, id asc
  std::vector<char> critical;    // per subtask index
  int critical_non_heads = 0;
  std::set<ConfigId> configs;
  std::set<ConfigId> critical_configs;

  static PreparedScenario make(TaskId task, const ScenarioIndex& index, const DesignTimeEntry& entry);
  ConfigId config_of(int subtask_index) const { return {task, index->id_at(subtask_index)}; }
};

struct ReuseResult {
  std::map<SubtaskId, int> tiles;  // reused subtask -> tile holding its configuration
  std::set<SubtaskId> ids() const;
};

struct PhysicalLoad {
  TaskId task = 0;
  ScenarioId scenario = 0;
  SubtaskId subtask = 0;
  int tile = 0;
  Millis start = 0;
  Millis end = 0;
  bool operator==(const PhysicalLoad&) const = default;
};

struct RuntimeDecision {
  std::map<SubtaskId, int> reused;
  std::set<SubtaskId> cancelled_loads;
  std::vector<std::pair<SubtaskId, int>> init_loads;  // issue order, bound tile
  std::map<SubtaskId, int> bindings;                  // every DRHW subtask -> tile
  std::vector<PhysicalLoad> prefetched;               // next task's loads issued here
};

/// Tile selection for a load. Isolated so alternative replacement policies
/// can be swapped in.
class ReplacementPolicy {
 public:
  virtual ~ReplacementPolicy() = default;
  virtual int choose(std::span<const int> candidates, const ResidencyMap& residency,
                     const std::set<ConfigId>& current, const std::set<ConfigId>& lookahead) const = 0;
};

/// Prefers empty tiles, then tiles whose configuration neither the current
/// nor the next task needs, then the least recently used; ties by tile id.
class LookaheadLruPolicy final : public ReplacementPolicy {
 public:
  int choose(std::span<const int> candidates, const ResidencyMap& residency, const std::set<ConfigId>& current,
             const std::set<ConfigId>& lookahead) const override;
};

const ReplacementPolicy& default_policy();

/// Finds the subtasks whose configuration is resident on an unclaimed tile.
/// Claims go to critical subtasks first, then by descending weight. A reused
/// subtask that is not first on its slot needs a tile of its own, so it is
/// only claimed while the tile demand fits; `reserve_critical` keeps room
/// for every critical subtask of that kind.
ReuseResult reuse_scan(const PreparedScenario& scenario, const ResidencyMap& residency, bool reserve_critical);

/// Critical subtasks that still have to be loaded, heaviest first.
LoadOrder plan_initialization(const DesignTimeEntry& entry, const std::set<SubtaskId>& reused);

/// Stored schedule minus the loads of reused subtasks; every other interval
/// keeps its stored time. Throws ConsistencyError for unknown subtasks.
TimedSchedule cancel_reused_loads(const DesignTimeEntry& entry, const std::set<SubtaskId>& reused);

struct BindResult {
  std::map<SubtaskId, int> bindings;
  ResidencyMap residency;  // after every load and exec of the instance
};

/// Assigns a physical tile to every load of `schedule` (absolute times),
/// in start order. A tile is free once its last exec has finished; reused
/// subtasks keep their tiles until they finish.
BindResult bind_tiles(const PreparedScenario& scenario, const TimedSchedule& schedule,
                      const std::map<SubtaskId, int>& reused, const ResidencyMap& residency,
                      const PreparedScenario* lookahead, const ReplacementPolicy& policy = default_policy());

/// Uses the controller's idle tail to load the next task's non-resident
/// critical subtasks, in init order. A load starts at max(controller free,
/// tile free) and is issued only if that is before the current task ends.
std::vector<PhysicalLoad> intertask_prefetch(const PreparedScenario& current, Millis current_end,
                                             Millis controller_free, const PreparedScenario& next,
                                             ResidencyMap& residency, Millis latency,
                                             const ReplacementPolicy& policy = default_policy());

enum class TraceKind { Exec, Load, InitLoad, PrefetchLoad, Cancel, Reuse };
const char* to_string(TraceKind kind);
std::optional<TraceKind> parse_trace_kind(std::string_view name);

struct InstanceEvent {
  std::string resource;
  TraceKind kind = TraceKind::Exec;
  TaskId task = 0;
  ScenarioId scenario = 0;
  SubtaskId subtask = 0;
  Millis start = 0;
  Millis end = 0;
};

/// Controller and tile state carried from one task instance to the next.
struct RuntimeState {
  ResidencyMap residency;
  Millis now = 0;              // end of the previous task
  Millis controller_free = 0;  // includes prefetch loads that overhang `now`
};

struct InstanceOptions {
  Millis latency = 4;
  bool intertask = true;  // only used by RuntimeInterTask and Hybrid
  const ReplacementPolicy* policy = nullptr;
};

struct InstanceResult {
  RuntimeState state;
  TimedSchedule schedule;  // absolute; execs plus every load issued for this task
  RuntimeDecision decision;
  Millis start = 0;
  Millis end = 0;
  int loads_issued = 0;  // init and scheduled loads of this task
  std::vector<InstanceEvent> events;
};

/// Runs one task instance starting at `state.now`.
InstanceResult execute_task_instance(const PreparedScenario& scenario, const RuntimeState& state, Mode mode,
                                     const PreparedScenario* lookahead, const InstanceOptions& options);

std::string tile_name(int tile);

}  // namespace drhw
