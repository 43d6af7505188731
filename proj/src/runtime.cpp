#include "drhw/runtime.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

namespace drhw {

ResidencyMap::ResidencyMap(int tiles) {
  if (tiles < 1) throw std::invalid_argument("tile count must be >= 1");
  tiles_.resize(tiles);
  for (int i = 0; i < tiles; ++i) tiles_[i].id = i;
}

std::optional<int> ResidencyMap::find(const ConfigId& config) const {
  for (const auto& t : tiles_)
    if (t.resident && *t.resident == config) return t.id;
  return std::nullopt;
}

void ResidencyMap::install(int tile, const ConfigId& config, Millis ready_at, Millis last_use) {
  for (auto& t : tiles_)
    if (t.resident && *t.resident == config) t.resident.reset();
  auto& t = tiles_.at(tile);
  t.resident = config;
  t.ready_at = ready_at;
  t.last_use = std::max(t.last_use, last_use);
}

void ResidencyMap::touch(int tile, Millis when) {
  auto& t = tiles_.at(tile);
  t.last_use = std::max(t.last_use, when);
}

namespace {

constexpr std::array<Mode, 5> kModes = {Mode::NoPrefetch, Mode::DesignTimePrefetch, Mode::RuntimeHeuristic,
                                        Mode::RuntimeInterTask, Mode::Hybrid};

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::NoPrefetch: return "no-prefetch";
    case Mode::DesignTimePrefetch: return "design-time";
    case Mode::RuntimeHeuristic: return "run-time";
    case Mode::RuntimeInterTask: return "run-time+inter-task";
    case Mode::Hybrid: return "hybrid";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : kModes)
    if (name == to_string(m)) return m;
  return std::nullopt;
}

std::span<const Mode> all_modes() { return kModes; }

const char* to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::Exec: return "exec";
    case TraceKind::Load: return "load";
    case TraceKind::InitLoad: return "init_load";
    case TraceKind::PrefetchLoad: return "prefetch_load";
    case TraceKind::Cancel: return "cancel";
    case TraceKind::Reuse: return "reuse";
  }
  return "?";
}

std::optional<TraceKind> parse_trace_kind(std::string_view name) {
  for (auto k : {TraceKind::Exec, TraceKind::Load, TraceKind::InitLoad, TraceKind::PrefetchLoad, TraceKind::Cancel,
                 TraceKind::Reuse})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

std::string tile_name(int tile) { return "T" + std::to_string(tile); }

// ---------------------------------------------------------------------------

PreparedScenario PreparedScenario::make(TaskId task, const ScenarioIndex& index, const DesignTimeEntry& entry) {
  auto where = "task " + std::to_string(task) + " scenario " + std::to_string(index.scenario_id());
  if (entry.task != task || entry.scenario != index.scenario_id())
    throw ConsistencyError(where + ": design-time entry belongs to task " + std::to_string(entry.task) +
                           " scenario " + std::to_string(entry.scenario));
  if (std::abs(entry.ideal - index.ideal_makespan()) > kTimeEps)
    throw ConsistencyError(where + ": stored ideal makespan does not match the workload");
  if (entry.weights.size() != static_cast<std::size_t>(index.size()))
    throw ConsistencyError(where + ": stored weights do not cover the scenario");
  for (int i = 0; i < index.size(); ++i)
    if (!entry.weights.count(index.id_at(i)))
      throw ConsistencyError(where + ": no stored weight for s" + std::to_string(index.id_at(i)));

  PreparedScenario p;
  p.task = task;
  p.index = &index;
  p.entry = &entry;
  p.critical.assign(index.size(), 0);
  for (SubtaskId id : entry.critical.ids) {
    int i = index.index_of(id);
    p.critical[i] = 1;
    p.critical_configs.insert({task, id});
    if (!index.is_slot_head(i)) ++p.critical_non_heads;
  }
  for (int i : index.drhw()) {
    p.claim_order.push_back(i);
    p.configs.insert({task, index.id_at(i)});
  }
  auto key = [&](int i) {
    return std::make_tuple(!p.critical[i], -entry.weights.at(index.id_at(i)), index.id_at(i));
  };
  std::sort(p.claim_order.begin(), p.claim_order.end(), [&](int a, int b) { return key(a) < key(b); });
  return p;
}

std::set<SubtaskId> ReuseResult::ids() const {
  std::set<SubtaskId> out;
  for (const auto& [id, tile] : tiles) out.insert(id);
  return out;
}

ReuseResult reuse_scan(const PreparedScenario& sc, const ResidencyMap& residency, bool reserve_critical) {
  ReuseResult out;
  const auto& ix = *sc.index;
  int spare = residency.size() - ix.drhw_slot_count() - (reserve_critical ? sc.critical_non_heads : 0);
  std::vector<char> claimed(residency.size(), 0);
  for (int i : sc.claim_order) {
    auto tile = residency.find(sc.config_of(i));
    if (!tile || claimed[*tile]) continue;
    if (!ix.is_slot_head(i) && !(reserve_critical && sc.critical[i])) {
      if (spare <= 0) continue;
      --spare;
    }
    claimed[*tile] = 1;
    out.tiles[ix.id_at(i)] = *tile;
  }
  return out;
}

LoadOrder plan_initialization(const DesignTimeEntry& entry, const std::set<SubtaskId>& reused) {
  LoadOrder out;
  for (SubtaskId id : entry.init_order)
    if (!reused.count(id)) out.push_back(id);
  return out;
}

TimedSchedule cancel_reused_loads(const DesignTimeEntry& entry, const std::set<SubtaskId>& reused) {
  TimedSchedule out = entry.stored_schedule;
  for (SubtaskId id : reused)
    if (!out.exec_of(id))
      throw ConsistencyError("reused s" + std::to_string(id) + " is not in the stored schedule of task " +
                             std::to_string(entry.task) + " scenario " + std::to_string(entry.scenario));
  std::erase_if(out.loads, [&](const LoadInterval& l) { return reused.count(l.subtask) > 0; });
  return out;
}

int LookaheadLruPolicy::choose(std::span<const int> candidates, const ResidencyMap& residency,
                               const std::set<ConfigId>& current, const std::set<ConfigId>& lookahead) const {
  auto key = [&](int id) {
    const auto& t = residency.tile(id);
    int category = 2;
    if (!t.resident)
      category = 0;
    else if (!current.count(*t.resident) && !lookahead.count(*t.resident))
      category = 1;
    return std::make_tuple(category, t.last_use, id);
  };
  return *std::min_element(candidates.begin(), candidates.end(), [&](int a, int b) { return key(a) < key(b); });
}

const ReplacementPolicy& default_policy() {
  static const LookaheadLruPolicy policy;
  return policy;
}

BindResult bind_tiles(const PreparedScenario& sc, const TimedSchedule& schedule,
                      const std::map<SubtaskId, int>& reused, const ResidencyMap& residency,
                      const PreparedScenario* lookahead, const ReplacementPolicy& policy) {
  const auto& ix = *sc.index;
  BindResult out{{}, residency};
  auto& res = out.residency;
  static const std::set<ConfigId> kNoConfigs;
  const auto& ahead = lookahead ? lookahead->configs : kNoConfigs;

  auto exec_end = [&](SubtaskId id) {
    const auto* e = schedule.exec_of(id);
    if (!e) throw ConsistencyError("s" + std::to_string(id) + " has no exec interval");
    return e->end;
  };

  std::vector<Millis> busy_until(res.size());
  for (int t = 0; t < res.size(); ++t) busy_until[t] = std::max(res.tile(t).ready_at, res.tile(t).last_use);
  for (const auto& [id, tile] : reused) {
    busy_until[tile] = std::max(busy_until[tile], exec_end(id));
    out.bindings[id] = tile;
  }

  std::vector<const LoadInterval*> loads;
  for (const auto& l : schedule.loads) loads.push_back(&l);
  std::stable_sort(loads.begin(), loads.end(), [](const LoadInterval* a, const LoadInterval* b) {
    return a->start != b->start ? a->start < b->start : a->subtask < b->subtask;
  });

  std::vector<int> candidates;
  for (const LoadInterval* l : loads) {
    candidates.clear();
    for (int t = 0; t < res.size(); ++t)
      if (busy_until[t] <= l->start) candidates.push_back(t);
    if (candidates.empty())
      throw CapacityError("task " + std::to_string(sc.task) + " scenario " + std::to_string(ix.scenario_id()) +
                          ": no free tile for the load of s" + std::to_string(l->subtask) + " at " +
                          std::to_string(l->start) + " ms");
    int tile = policy.choose(candidates, res, sc.configs, ahead);
    Millis done = exec_end(l->subtask);
    res.install(tile, {sc.task, l->subtask}, l->end, done);
    busy_until[tile] = done;
    out.bindings[l->subtask] = tile;
  }
  for (const auto& [id, tile] : reused) res.touch(tile, exec_end(id));
  return out;
}

std::vector<PhysicalLoad> intertask_prefetch(const PreparedScenario& current, Millis current_end,
                                             Millis controller_free, const PreparedScenario& next,
                                             ResidencyMap& residency, Millis latency,
                                             const ReplacementPolicy& policy) {
  std::vector<PhysicalLoad> out;
  std::vector<char> excluded(residency.size(), 0);
  for (const auto& t : residency.tiles())
    if (t.resident && next.critical_configs.count(*t.resident)) excluded[t.id] = 1;
  Millis controller = controller_free;
  std::vector<int> candidates;
  for (SubtaskId id : next.entry->init_order) {
    ConfigId config{next.task, id};
    if (residency.find(config)) continue;
    candidates.clear();
    for (const auto& t : residency.tiles())
      if (!excluded[t.id] && std::max(controller, t.last_use) < current_end) candidates.push_back(t.id);
    if (candidates.empty()) break;
    int tile = policy.choose(candidates, residency, current.configs, next.configs);
    Millis start = std::max(controller, residency.tile(tile).last_use);
    Millis end = start + latency;
    residency.install(tile, config, end, end);
    excluded[tile] = 1;
    controller = end;
    out.push_back({next.task, next.index->scenario_id(), id, tile, start, end});
  }
  return out;
}

// ---------------------------------------------------------------------------

InstanceResult execute_task_instance(const PreparedScenario& sc, const RuntimeState& state, Mode mode,
                                     const PreparedScenario* lookahead, const InstanceOptions& options) {
  const auto& ix = *sc.index;
  const auto& entry = *sc.entry;
  const Millis latency = options.latency;
  const ReplacementPolicy& policy = options.policy ? *options.policy : default_policy();
  const int tiles = state.residency.size();
  const ScenarioId scenario_id = ix.scenario_id();
  auto where = [&] { return "task " + std::to_string(sc.task) + " scenario " + std::to_string(scenario_id); };

  if (ix.drhw_slot_count() > tiles)
    throw CapacityError(where() + " uses " + std::to_string(ix.drhw_slot_count()) +
                        " virtual slots but only " + std::to_string(tiles) + " tiles exist");
  if (mode == Mode::Hybrid && ix.drhw_slot_count() + sc.critical_non_heads > tiles)
    throw CapacityError(where() + " needs " + std::to_string(ix.drhw_slot_count() + sc.critical_non_heads) +
                        " tiles (slots plus critical subtasks sharing a slot) but only " + std::to_string(tiles) +
                        " exist");

  InstanceResult out;
  out.start = state.now;
  const Millis start = state.now;
  const Millis controller0 = std::max(start, state.controller_free);

  ReuseResult reuse;
  if (mode == Mode::Hybrid || mode == Mode::RuntimeHeuristic || mode == Mode::RuntimeInterTask)
    reuse = reuse_scan(sc, state.residency, mode == Mode::Hybrid);
  const auto reused_ids = reuse.ids();
  Millis resident_ready = start;
  for (const auto& [id, tile] : reuse.tiles)
    resident_ready = std::max(resident_ready, state.residency.tile(tile).ready_at);

  TimedSchedule sched;
  std::vector<LoadInterval> init_loads;
  std::vector<LoadInterval> cancelled;
  switch (mode) {
    case Mode::NoPrefetch: {
      sched = schedule_no_prefetch(ix, loads_excluding(ix, {}), latency, 0).shifted(controller0);
      break;
    }
    case Mode::DesignTimePrefetch: {
      sched = place_loads(ix, loads_excluding(ix, {}), entry.full_load_order, latency, 0).shifted(controller0);
      break;
    }
    case Mode::RuntimeHeuristic:
    case Mode::RuntimeInterTask: {
      Millis t0 = std::max(controller0, resident_ready);
      sched = schedule_list_heuristic(ix, loads_excluding(ix, reused_ids), latency, 0).schedule.shifted(t0);
      break;
    }
    case Mode::Hybrid: {
      Millis controller = controller0;
      for (SubtaskId id : plan_initialization(entry, reused_ids)) {
        init_loads.push_back({id, ix.pe(ix.index_of(id)), controller, controller + latency});
        controller += latency;
      }
      Millis origin = std::max(controller, resident_ready);
      sched = cancel_reused_loads(entry, reused_ids).shifted(origin);
      for (const auto& l : entry.stored_schedule.loads)
        if (reused_ids.count(l.subtask)) {
          cancelled.push_back(l);
          cancelled.back().start += origin;
          cancelled.back().end += origin;
          out.decision.cancelled_loads.insert(l.subtask);
        }
      sched.loads.insert(sched.loads.begin(), init_loads.begin(), init_loads.end());
      break;
    }
  }
  out.end = std::max(start, sched.end());
  sched.origin = start;
  sched.makespan = out.end - start;

  const PreparedScenario* ahead = lookahead;
  auto bound = bind_tiles(sc, sched, reuse.tiles, state.residency, ahead, policy);

  Millis controller_after = controller0;
  for (const auto& l : sched.loads) controller_after = std::max(controller_after, l.end);

  std::vector<PhysicalLoad> prefetched;
  const bool intertask = options.intertask && (mode == Mode::Hybrid || mode == Mode::RuntimeInterTask);
  if (intertask && lookahead)
    prefetched = intertask_prefetch(sc, out.end, controller_after, *lookahead, bound.residency, latency, policy);
  for (const auto& p : prefetched) controller_after = std::max(controller_after, p.end);

  out.decision.reused = reuse.tiles;
  for (const auto& l : init_loads) out.decision.init_loads.emplace_back(l.subtask, bound.bindings.at(l.subtask));
  out.decision.bindings = bound.bindings;
  out.decision.prefetched = prefetched;
  out.loads_issued = static_cast<int>(sched.loads.size());

  out.state.residency = std::move(bound.residency);
  out.state.now = out.end;
  out.state.controller_free = controller_after;

  // Trace records: reuse markers, cancellations, loads, execs, prefetches.
  auto& ev = out.events;
  auto tile_of = [&](SubtaskId id) { return tile_name(out.decision.bindings.at(id)); };
  for (const auto& [id, tile] : reuse.tiles) {
    const auto* e = sched.exec_of(id);
    ev.push_back({tile_name(tile), TraceKind::Reuse, sc.task, scenario_id, id, e->start, e->start});
  }
  for (const auto& l : cancelled) ev.push_back({tile_of(l.subtask), TraceKind::Cancel, sc.task, scenario_id,
                                                l.subtask, l.start, l.end});
  for (std::size_t k = 0; k < sched.loads.size(); ++k) {
    const auto& l = sched.loads[k];
    auto kind = k < init_loads.size() ? TraceKind::InitLoad : TraceKind::Load;
    ev.push_back({tile_of(l.subtask), kind, sc.task, scenario_id, l.subtask, l.start, l.end});
  }
  std::vector<const ExecInterval*> execs;
  for (const auto& e : sched.execs) execs.push_back(&e);
  std::stable_sort(execs.begin(), execs.end(), [](const ExecInterval* a, const ExecInterval* b) {
    return a->start != b->start ? a->start < b->start : a->subtask < b->subtask;
  });
  for (const auto* e : execs) {
    bool drhw = ix.is_drhw(ix.index_of(e->subtask));
    ev.push_back({drhw ? tile_of(e->subtask) : e->pe, TraceKind::Exec, sc.task, scenario_id, e->subtask, e->start,
                  e->end});
  }
  for (const auto& p : prefetched)
    ev.push_back({tile_name(p.tile), TraceKind::PrefetchLoad, p.task, p.scenario, p.subtask, p.start, p.end});

  out.schedule = std::move(sched);
  return out;
}

}  // namespace drhw
