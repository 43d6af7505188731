#include "drhw/prefetch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>

namespace drhw {

const ExecInterval* TimedSchedule::exec_of(SubtaskId id) const {
  for (const auto& e : execs)
    if (e.subtask == id) return &e;
  return nullptr;
}

const LoadInterval* TimedSchedule::load_of(SubtaskId id) const {
  for (const auto& l : loads)
    if (l.subtask == id) return &l;
  return nullptr;
}

TimedSchedule TimedSchedule::shifted(Millis offset) const {
  TimedSchedule out = *this;
  out.origin += offset;
  for (auto& e : out.execs) {
    e.start += offset;
    e.end += offset;
  }
  for (auto& l : out.loads) {
    l.start += offset;
    l.end += offset;
  }
  return out;
}

const char* to_string(EventKind kind) { return kind == EventKind::Exec ? "exec" : "load"; }

std::vector<ScheduleEvent> to_events(const TimedSchedule& schedule) {
  std::vector<ScheduleEvent> out;
  out.reserve(schedule.loads.size() + schedule.execs.size());
  for (const auto& l : schedule.loads) out.push_back({l.tile, EventKind::Load, l.subtask, l.start, l.end});
  std::vector<ScheduleEvent> execs;
  for (const auto& e : schedule.execs) execs.push_back({e.pe, EventKind::Exec, e.subtask, e.start, e.end});
  std::stable_sort(execs.begin(), execs.end(), [](const auto& a, const auto& b) {
    return a.start != b.start ? a.start < b.start : a.subtask < b.subtask;
  });
  out.insert(out.end(), execs.begin(), execs.end());
  return out;
}

namespace {

constexpr Millis kNone = std::numeric_limits<Millis>::quiet_NaN();

void check_latency(Millis latency) {
  if (!(latency >= 0) || !std::isfinite(latency))
    throw std::invalid_argument("reconfiguration latency must be a finite value >= 0");
}

std::vector<char> load_flags(const ScenarioIndex& ix, const LoadSet& load_set) {
  std::vector<char> loaded(ix.size(), 0);
  for (SubtaskId id : load_set) {
    int i = ix.index_of(id);
    if (!ix.is_drhw(i))
      throw std::invalid_argument("s" + std::to_string(id) + " is not a DRHW subtask and needs no load");
    loaded[i] = 1;
  }
  return loaded;
}

struct EngineResult {
  bool feasible = true;
  std::vector<Millis> start, end, load_start, load_end;
  Millis controller_free = 0;
  Millis last_end = 0;
};

// Head-of-line controller placement. `order` holds subtask indices issued in
// sequence. Subtasks flagged `pending` are loaded but not yet ordered: they
// are released at (controller free after `order`) + latency, which is a lower
// bound on any completion of the order.
EngineResult run_engine(const ScenarioIndex& ix, const std::vector<int>& order, const std::vector<char>& loaded,
                        const std::vector<char>* pending, Millis latency, Millis t0) {
  const int n = ix.size();
  EngineResult r;
  r.start.assign(n, kNone);
  r.end.assign(n, kNone);
  r.load_start.assign(n, kNone);
  r.load_end.assign(n, kNone);
  std::vector<int> deps(n);
  std::vector<Millis> ready(n, t0);
  std::vector<int> stack;
  for (int i = 0; i < n; ++i) {
    deps[i] = static_cast<int>(ix.preds(i).size()) + (ix.pe_prev(i) >= 0 ? 1 : 0) + (loaded[i] ? 1 : 0);
    if (deps[i] == 0) stack.push_back(i);
  }
  auto release = [&](int v, Millis t) {
    ready[v] = std::max(ready[v], t);
    if (--deps[v] == 0) stack.push_back(v);
  };

  std::size_t head = 0;
  bool pending_released = (pending == nullptr);
  Millis controller = t0;
  int done = 0;
  for (;;) {
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      r.start[u] = ready[u];
      r.end[u] = ready[u] + ix.exec(u);
      ++done;
      for (int v : ix.succs(u)) release(v, r.end[u]);
      if (ix.pe_next(u) >= 0) release(ix.pe_next(u), r.end[u]);
    }
    if (head < order.size()) {
      int x = order[head];
      int prev = ix.pe_prev(x);
      if (prev >= 0 && std::isnan(r.end[prev])) break;  // head blocked
      Millis eligible = prev >= 0 ? r.end[prev] : t0;
      Millis ls = std::max(controller, eligible);
      r.load_start[x] = ls;
      r.load_end[x] = ls + latency;
      controller = r.load_end[x];
      ++head;
      release(x, r.load_end[x]);
      continue;
    }
    if (!pending_released) {
      pending_released = true;
      for (int i = 0; i < n; ++i)
        if ((*pending)[i]) release(i, controller + latency);
      continue;
    }
    break;
  }
  r.feasible = (done == n);
  r.controller_free = controller;
  r.last_end = t0;
  for (int i = 0; i < n; ++i)
    if (!std::isnan(r.end[i])) r.last_end = std::max(r.last_end, r.end[i]);
  return r;
}

TimedSchedule to_schedule(const ScenarioIndex& ix, const EngineResult& r, const std::vector<int>& issue_order,
                          Millis t0) {
  TimedSchedule s;
  s.origin = t0;
  s.makespan = r.last_end - t0;
  for (int i = 0; i < ix.size(); ++i) s.execs.push_back({ix.id_at(i), ix.pe(i), r.start[i], r.end[i]});
  for (int x : issue_order) s.loads.push_back({ix.id_at(x), ix.pe(x), r.load_start[x], r.load_end[x]});
  return s;
}

// Loads of `load_idx` (positions 0..N-1, ascending id) that must be issued
// before load k can become eligible: the loaded members of the combined-DAG
// closure of k's tile predecessor.
std::vector<std::uint64_t> blocking_masks(const ScenarioIndex& ix, const std::vector<int>& load_idx) {
  const int n = ix.size();
  std::vector<int> pos(n, -1);
  for (std::size_t k = 0; k < load_idx.size(); ++k) pos[load_idx[k]] = static_cast<int>(k);
  std::vector<std::uint64_t> masks(load_idx.size(), 0);
  std::vector<char> seen(n);
  std::vector<int> stack;
  for (std::size_t k = 0; k < load_idx.size(); ++k) {
    int prev = ix.pe_prev(load_idx[k]);
    if (prev < 0) continue;
    std::fill(seen.begin(), seen.end(), 0);
    stack.assign(1, prev);
    seen[prev] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (pos[u] >= 0) masks[k] |= std::uint64_t{1} << pos[u];
      auto visit = [&](int p) {
        if (p >= 0 && !seen[p]) {
          seen[p] = 1;
          stack.push_back(p);
        }
      };
      for (int p : ix.preds(u)) visit(p);
      visit(ix.pe_prev(u));
    }
  }
  return masks;
}

std::vector<int> sorted_load_indices(const ScenarioIndex& ix, const LoadSet& load_set) {
  std::vector<int> idx;
  for (SubtaskId id : load_set) idx.push_back(ix.index_of(id));  // std::set iterates ascending id
  return idx;
}

class BranchAndBound {
 public:
  BranchAndBound(const ScenarioIndex& ix, const LoadSet& load_set, Millis latency, Millis t0)
      : ix_(ix), loaded_(load_flags(ix, load_set)), loads_(sorted_load_indices(ix, load_set)),
        need_(blocking_masks(ix, loads_)), latency_(latency), t0_(t0), pending_(ix.size(), 0) {}

  ScheduledLoads solve(const ScheduledLoads& seed) {
    best_ = seed.schedule.makespan;
    for (SubtaskId id : seed.order) best_order_.push_back(ix_.index_of(id));
    std::vector<int> prefix;
    dfs(prefix, 0);
    ScheduledLoads out;
    for (int x : best_order_) out.order.push_back(ix_.id_at(x));
    auto r = run_engine(ix_, best_order_, loaded_, nullptr, latency_, t0_);
    out.schedule = to_schedule(ix_, r, best_order_, t0_);
    return out;
  }

 private:
  Millis bound(const std::vector<int>& prefix, std::uint64_t mask) {
    int remaining = 0;
    Millis min_weight = std::numeric_limits<Millis>::infinity();
    for (std::size_t k = 0; k < loads_.size(); ++k) {
      bool open = !((mask >> k) & 1);
      pending_[loads_[k]] = open;
      if (open) {
        ++remaining;
        min_weight = std::min(min_weight, ix_.weight(loads_[k]));
      }
    }
    auto r = run_engine(ix_, prefix, loaded_, &pending_, latency_, t0_);
    Millis lb = r.last_end - t0_;
    if (remaining > 0) lb = std::max(lb, r.controller_free + remaining * latency_ + min_weight - t0_);
    return lb;
  }

  void dfs(std::vector<int>& prefix, std::uint64_t mask) {
    const Millis lb = bound(prefix, mask);
    if (prefix.size() == loads_.size()) {
      if ((!found_ && lb <= best_ + kTimeEps) || (found_ && lb < best_ - kTimeEps)) {
        best_ = lb;
        best_order_ = prefix;
        found_ = true;
      }
      return;
    }
    if (lb > best_ + kTimeEps) return;
    if (found_ && lb >= best_ - kTimeEps) return;
    for (std::size_t k = 0; k < loads_.size(); ++k) {
      if ((mask >> k) & 1) continue;
      if (need_[k] & ~mask) continue;
      prefix.push_back(loads_[k]);
      dfs(prefix, mask | (std::uint64_t{1} << k));
      prefix.pop_back();
    }
  }

  const ScenarioIndex& ix_;
  std::vector<char> loaded_;
  std::vector<int> loads_;
  std::vector<std::uint64_t> need_;
  Millis latency_, t0_;
  std::vector<char> pending_;
  Millis best_ = 0;
  std::vector<int> best_order_;
  bool found_ = false;
};

}  // namespace

LoadSet loads_excluding(const ScenarioIndex& index, const std::set<SubtaskId>& reused) {
  LoadSet out;
  for (int i : index.drhw())
    if (!reused.count(index.id_at(i))) out.insert(index.id_at(i));
  return out;
}

TimedSchedule place_loads(const ScenarioIndex& ix, const LoadSet& load_set, const LoadOrder& order,
                          Millis latency, Millis origin) {
  check_latency(latency);
  auto loaded = load_flags(ix, load_set);
  if (order.size() != load_set.size())
    throw std::invalid_argument("load order is not a permutation of the load set");
  std::vector<int> seq;
  std::vector<char> used(ix.size(), 0);
  for (SubtaskId id : order) {
    if (!load_set.count(id)) throw std::invalid_argument("load order is not a permutation of the load set");
    int i = ix.index_of(id);
    if (used[i]) throw std::invalid_argument("load order repeats s" + std::to_string(id));
    used[i] = 1;
    seq.push_back(i);
  }
  auto r = run_engine(ix, seq, loaded, nullptr, latency, origin);
  if (!r.feasible)
    throw InfeasibleOrder("load order deadlocks: a queued load waits on a subtask that needs a later load");
  return to_schedule(ix, r, seq, origin);
}

TimedSchedule schedule_no_prefetch(const ScenarioIndex& ix, const LoadSet& load_set, Millis latency,
                                   Millis t0) {
  check_latency(latency);
  auto loaded = load_flags(ix, load_set);
  const int n = ix.size();
  std::vector<Millis> start(n, kNone), end(n, kNone), ls(n, kNone), le(n, kNone);
  std::vector<int> deps(n);  // combined predecessors only
  std::vector<Millis> ready(n, t0);
  std::vector<int> stack;
  std::set<std::pair<Millis, SubtaskId>> eligible;
  auto on_ready = [&](int v) {
    if (loaded[v])
      eligible.insert({ready[v], ix.id_at(v)});
    else
      stack.push_back(v);
  };
  for (int i = 0; i < n; ++i) {
    deps[i] = static_cast<int>(ix.preds(i).size()) + (ix.pe_prev(i) >= 0 ? 1 : 0);
    if (deps[i] == 0) on_ready(i);
  }
  auto release = [&](int v, Millis t) {
    ready[v] = std::max(ready[v], t);
    if (--deps[v] == 0) on_ready(v);
  };
  std::vector<int> issue;
  Millis controller = t0;
  for (;;) {
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      start[u] = std::max(ready[u], loaded[u] ? le[u] : t0);
      end[u] = start[u] + ix.exec(u);
      for (int v : ix.succs(u)) release(v, end[u]);
      if (ix.pe_next(u) >= 0) release(ix.pe_next(u), end[u]);
    }
    if (eligible.empty()) break;
    auto [when, id] = *eligible.begin();
    eligible.erase(eligible.begin());
    int x = ix.index_of(id);
    ls[x] = std::max(controller, when);
    le[x] = ls[x] + latency;
    controller = le[x];
    issue.push_back(x);
    stack.push_back(x);
  }
  EngineResult r;
  r.start = std::move(start);
  r.end = std::move(end);
  r.load_start = std::move(ls);
  r.load_end = std::move(le);
  r.last_end = t0;
  for (int i = 0; i < n; ++i) r.last_end = std::max(r.last_end, r.end[i]);
  return to_schedule(ix, r, issue, t0);
}

ScheduledLoads schedule_list_heuristic(const ScenarioIndex& ix, const LoadSet& load_set, Millis latency,
                                       Millis t0) {
  check_latency(latency);
  auto loaded = load_flags(ix, load_set);
  const int n = ix.size();
  // Event-driven list scheduling. A load becomes a candidate once its tile
  // predecessor has a known end time (its eligibility). At each controller
  // decision the earliest possible completion is s + R, s being the earliest
  // issue time; the heaviest candidate eligible before that completion is
  // issued, the controller idling for it if needed (active schedules).
  std::vector<int> deps(n);
  std::vector<Millis> ready(n, t0), start(n, kNone), end(n, kNone), ls(n, kNone), le(n, kNone), elig(n, t0);
  // Priority: longest remaining path in the scheduled graph, then ALAP
  // weight, then lower id.
  auto heavier = [&](int a, int b) {
    if (ix.scheduled_tail(a) != ix.scheduled_tail(b)) return ix.scheduled_tail(a) < ix.scheduled_tail(b);
    if (ix.weight(a) != ix.weight(b)) return ix.weight(a) < ix.weight(b);
    return ix.id_at(a) > ix.id_at(b);
  };
  auto later = [&](int a, int b) {
    if (elig[a] != elig[b]) return elig[a] > elig[b];
    return heavier(a, b);
  };
  std::priority_queue<int, std::vector<int>, decltype(heavier)> eligible(heavier);
  std::priority_queue<int, std::vector<int>, decltype(later)> waiting(later);
  std::vector<int> stack;
  for (int i = 0; i < n; ++i) {
    deps[i] = static_cast<int>(ix.preds(i).size()) + (ix.pe_prev(i) >= 0 ? 1 : 0) + (loaded[i] ? 1 : 0);
    if (loaded[i] && ix.pe_prev(i) < 0) waiting.push(i);
    if (deps[i] == 0) stack.push_back(i);
  }
  auto release = [&](int v, Millis t) {
    ready[v] = std::max(ready[v], t);
    if (--deps[v] == 0) stack.push_back(v);
  };
  auto drain = [&] {
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      start[u] = ready[u];
      end[u] = ready[u] + ix.exec(u);
      for (int v : ix.succs(u)) release(v, end[u]);
      int next = ix.pe_next(u);
      if (next >= 0) {
        if (loaded[next]) {
          elig[next] = end[u];
          waiting.push(next);
        }
        release(next, end[u]);
      }
    }
  };
  drain();
  std::vector<int> seq;
  seq.reserve(load_set.size());
  Millis controller = t0;
  while (!waiting.empty() || !eligible.empty()) {
    Millis earliest = eligible.empty() ? std::max(controller, elig[waiting.top()]) : controller;
    Millis horizon = earliest + latency;
    while (!waiting.empty() && (elig[waiting.top()] < horizon || elig[waiting.top()] <= earliest)) {
      eligible.push(waiting.top());
      waiting.pop();
    }
    int x = eligible.top();
    eligible.pop();
    ls[x] = std::max(controller, elig[x]);
    le[x] = ls[x] + latency;
    controller = le[x];
    seq.push_back(x);
    release(x, le[x]);
    drain();
  }
  EngineResult r;
  r.start = std::move(start);
  r.end = std::move(end);
  r.load_start = std::move(ls);
  r.load_end = std::move(le);
  r.last_end = t0;
  for (int i = 0; i < n; ++i) r.last_end = std::max(r.last_end, r.end[i]);
  ScheduledLoads out;
  for (int x : seq) out.order.push_back(ix.id_at(x));
  out.schedule = to_schedule(ix, r, seq, t0);
  return out;
}

ScheduledLoads schedule_optimal_bb(const ScenarioIndex& ix, const LoadSet& load_set, Millis latency, Millis t0,
                                   std::size_t bb_limit) {
  check_latency(latency);
  if (load_set.size() > bb_limit || load_set.size() > 63)
    throw LimitExceeded("branch and bound limited to " + std::to_string(std::min<std::size_t>(bb_limit, 63)) +
                        " loads, got " + std::to_string(load_set.size()));
  auto seed = schedule_list_heuristic(ix, load_set, latency, t0);
  return BranchAndBound(ix, load_set, latency, t0).solve(seed);
}

ScheduledLoads brute_force_oracle(const ScenarioIndex& ix, const LoadSet& load_set, Millis latency, Millis t0) {
  check_latency(latency);
  if (load_set.size() > kOracleLimit)
    throw LimitExceeded("oracle enumerates at most " + std::to_string(kOracleLimit) + " loads");
  auto loaded = load_flags(ix, load_set);
  std::vector<int> perm = sorted_load_indices(ix, load_set);
  std::vector<int> best_perm;
  Millis best = std::numeric_limits<Millis>::infinity();
  // Ascending ids == ascending positions in `perm`, so next_permutation on
  // ids walks orders lexicographically.
  std::vector<SubtaskId> ids(load_set.begin(), load_set.end());
  do {
    for (std::size_t k = 0; k < ids.size(); ++k) perm[k] = ix.index_of(ids[k]);
    auto r = run_engine(ix, perm, loaded, nullptr, latency, t0);
    if (!r.feasible) continue;
    Millis ms = r.last_end - t0;
    if (ms < best - kTimeEps) {
      best = ms;
      best_perm = perm;
    }
  } while (std::next_permutation(ids.begin(), ids.end()));
  auto r = run_engine(ix, best_perm, loaded, nullptr, latency, t0);
  ScheduledLoads out;
  for (int x : best_perm) out.order.push_back(ix.id_at(x));
  out.schedule = to_schedule(ix, r, best_perm, t0);
  return out;
}

PenaltyReport compute_penalty(const ScenarioIndex& ix, const std::set<SubtaskId>& assumed_reused, Millis latency,
                              const PrefetchOptions& options) {
  for (SubtaskId id : assumed_reused)
    if (!ix.is_drhw(ix.index_of(id)))
      throw std::invalid_argument("assumed-reused s" + std::to_string(id) + " is not a DRHW subtask");
  LoadSet loads = loads_excluding(ix, assumed_reused);
  PenaltyReport rep;
  ScheduledLoads sched;
  if (loads.size() <= options.bb_limit) {
    sched = schedule_optimal_bb(ix, loads, latency, 0, options.bb_limit);
    rep.used_optimal = true;
  } else {
    sched = schedule_list_heuristic(ix, loads, latency, 0);
  }
  rep.penalty = sched.schedule.makespan - ix.ideal_makespan();
  if (rep.penalty <= kTimeEps) rep.penalty = 0;
  rep.schedule = std::move(sched.schedule);
  rep.order = std::move(sched.order);
  if (rep.penalty == 0) return rep;  // a binding load with slack delays nothing

  for (const auto& l : rep.schedule.loads) {
    int i = ix.index_of(l.subtask);
    const ExecInterval& e = rep.schedule.execs[i];
    bool delayed = false;
    if (options.delay_rule == DelayRule::BindingLoad) {
      Millis other = rep.schedule.origin;
      for (int p : ix.preds(i)) other = std::max(other, rep.schedule.execs[p].end);
      if (ix.pe_prev(i) >= 0) other = std::max(other, rep.schedule.execs[ix.pe_prev(i)].end);
      delayed = l.end > other + kTimeEps;
    } else {
      delayed = e.start > ix.ideal_start(i) + kTimeEps;
    }
    if (delayed) rep.delayed.insert(l.subtask);
  }
  return rep;
}

// Scenario overloads.

TimedSchedule place_loads(const Scenario& s, const LoadSet& ls, const LoadOrder& o, Millis r, Millis t0) {
  return place_loads(ScenarioIndex(s), ls, o, r, t0);
}
TimedSchedule schedule_no_prefetch(const Scenario& s, const LoadSet& ls, Millis r, Millis t0) {
  return schedule_no_prefetch(ScenarioIndex(s), ls, r, t0);
}
ScheduledLoads schedule_optimal_bb(const Scenario& s, const LoadSet& ls, Millis r, Millis t0, std::size_t lim) {
  return schedule_optimal_bb(ScenarioIndex(s), ls, r, t0, lim);
}
ScheduledLoads schedule_list_heuristic(const Scenario& s, const LoadSet& ls, Millis r, Millis t0) {
  return schedule_list_heuristic(ScenarioIndex(s), ls, r, t0);
}
ScheduledLoads brute_force_oracle(const Scenario& s, const LoadSet& ls, Millis r, Millis t0) {
  return brute_force_oracle(ScenarioIndex(s), ls, r, t0);
}
PenaltyReport compute_penalty(const Scenario& s, const std::set<SubtaskId>& reused, Millis r,
                              const PrefetchOptions& o) {
  return compute_penalty(ScenarioIndex(s), reused, r, o);
}

}  // namespace drhw
