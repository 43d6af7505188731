#pragma once

// Test-side fixtures and oracles. Nothing here calls into the schedulers
// under test except where noted.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drhw/graph.hpp"
#include "drhw/prefetch.hpp"
#include "drhw/rng.hpp"
#include "drhw/simulator.hpp"

namespace drhw::test {

inline Scenario chain4() {
  Scenario s;
  s.id = 1;
  for (int i = 1; i <= 4; ++i) s.graph.subtasks.push_back({i, 10, Target::Drhw, i % 2 ? "A" : "B"});
  s.graph.edges = {{1, 2}, {2, 3}, {3, 4}};
  s.schedule.per_pe["A"] = {1, 3};
  s.schedule.per_pe["B"] = {2, 4};
  return s;
}

inline Workload single_task(Scenario s, TaskId id = 1) {
  Workload w;
  w.tasks.push_back(Task{id, {std::move(s)}});
  return w;
}

/// Random valid scenario. Exec times are multiples of 0.5 ms so every sum is
/// exact. Subtask ids are shuffled so that id order and topological order
/// differ.
inline Scenario random_scenario(std::uint64_t seed, int min_n, int max_n, int slots, int isps = 1,
                                double density = 0.35, double isp_share = 0.2) {
  Rng rng(seed);
  int n = static_cast<int>(rng.uniform_int(min_n, max_n));
  std::vector<SubtaskId> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i + 1;
  rng.shuffle(ids);  // ids[k] is the k-th subtask in topological order
  Scenario s;
  s.id = 1;
  for (int k = 0; k < n; ++k) {
    bool isp = isps > 0 && rng.bernoulli(isp_share);
    Millis exec = 0.5 * static_cast<double>(rng.uniform_int(1, 24));
    std::string pe = isp ? "P" + std::to_string(rng.uniform_int(0, isps - 1))
                         : std::string(1, static_cast<char>('A' + rng.uniform_int(0, slots - 1)));
    s.graph.subtasks.push_back({ids[k], exec, isp ? Target::Isp : Target::Drhw, pe});
    s.schedule.per_pe[pe].push_back(ids[k]);  // topological order per PE
  }
  for (int b = 1; b < n; ++b)
    for (int a = 0; a < b; ++a)
      if (rng.bernoulli(density)) s.graph.edges.emplace_back(ids[a], ids[b]);
  return s;
}

inline LoadSet drhw_ids(const Scenario& s) {
  LoadSet out;
  for (const auto& st : s.graph.subtasks)
    if (st.target == Target::Drhw) out.insert(st.id);
  return out;
}

struct OracleTimeline {
  bool deadlock = false;
  std::map<SubtaskId, Millis> start, end, load_start, load_end;
  Millis makespan = 0;  // relative to origin
};

/// Least fixed point of the timeline constraints, found by repeated
/// relaxation from the origin. No fixed point within n + m + 1 rounds means
/// a positive cycle, i.e. the order deadlocks.
inline OracleTimeline oracle_timeline(const Scenario& s, const LoadSet& loads, const LoadOrder& order, Millis R,
                                      Millis t0 = 0) {
  OracleTimeline t;
  std::map<SubtaskId, std::vector<SubtaskId>> preds;
  for (const auto& [p, q] : s.graph.edges) preds[q].push_back(p);
  std::map<SubtaskId, std::optional<SubtaskId>> prev;
  for (const auto& [pe, seq] : s.schedule.per_pe)
    for (std::size_t k = 0; k < seq.size(); ++k) prev[seq[k]] = k ? std::optional(seq[k - 1]) : std::nullopt;
  std::map<SubtaskId, Millis> exec;
  for (const auto& st : s.graph.subtasks) {
    exec[st.id] = st.exec_ms;
    t.start[st.id] = t0;
    t.end[st.id] = t0 + st.exec_ms;
  }
  for (SubtaskId id : order) t.load_start[id] = t0, t.load_end[id] = t0 + R;

  const std::size_t rounds = s.graph.subtasks.size() + order.size() + 2;
  bool changed = true;
  for (std::size_t r = 0; r < rounds && changed; ++r) {
    changed = false;
    auto raise = [&](Millis& v, Millis x) {
      if (x > v + 1e-12) v = x, changed = true;
    };
    for (std::size_t k = 0; k < order.size(); ++k) {
      SubtaskId id = order[k];
      Millis ls = t0;
      if (k) ls = std::max(ls, t.load_end[order[k - 1]]);
      if (prev[id]) ls = std::max(ls, t.end[*prev[id]]);
      raise(t.load_start[id], ls);
      raise(t.load_end[id], t.load_start[id] + R);
    }
    for (const auto& st : s.graph.subtasks) {
      Millis st0 = t0;
      for (SubtaskId p : preds[st.id]) st0 = std::max(st0, t.end[p]);
      if (prev[st.id]) st0 = std::max(st0, t.end[*prev[st.id]]);
      if (loads.count(st.id)) st0 = std::max(st0, t.load_end[st.id]);
      raise(t.start[st.id], st0);
      raise(t.end[st.id], t.start[st.id] + exec[st.id]);
    }
    if (r + 1 == rounds && changed) t.deadlock = true;
  }
  for (const auto& [id, e] : t.end) t.makespan = std::max(t.makespan, e - t0);
  return t;
}

/// Minimum oracle makespan over every feasible permutation.
inline std::optional<Millis> oracle_best(const Scenario& s, const LoadSet& loads, Millis R) {
  LoadOrder order(loads.begin(), loads.end());
  std::optional<Millis> best;
  do {
    auto t = oracle_timeline(s, loads, order, R);
    if (!t.deadlock && (!best || t.makespan < *best)) best = t.makespan;
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

/// Every timeline invariant; returns the first violation or an empty string.
inline std::string check_schedule(const Scenario& s, const LoadSet& loads, const TimedSchedule& ts, Millis R) {
  const Millis eps = 1e-9;
  std::map<SubtaskId, const ExecInterval*> ex;
  for (const auto& e : ts.execs) ex[e.subtask] = &e;
  if (ex.size() != s.graph.subtasks.size()) return "exec count";
  for (const auto& st : s.graph.subtasks) {
    const auto* e = ex[st.id];
    if (!e) return "missing exec";
    if (std::abs(e->end - e->start - st.exec_ms) > eps) return "exec length";
    if (e->pe != st.slot) return "exec pe";
    if (e->start < ts.origin - eps) return "exec before origin";
  }
  for (const auto& [p, q] : s.graph.edges)
    if (ex[q]->start < ex[p]->end - eps) return "precedence";
  for (const auto& [pe, seq] : s.schedule.per_pe)
    for (std::size_t k = 1; k < seq.size(); ++k)
      if (ex[seq[k]]->start < ex[seq[k - 1]]->end - eps) return "pe order";
  if (ts.loads.size() != loads.size()) return "load count";
  std::vector<std::pair<Millis, Millis>> ctrl;
  for (const auto& l : ts.loads) {
    if (!loads.count(l.subtask)) return "unexpected load";
    if (std::abs(l.end - l.start - R) > eps) return "load length";
    if (l.end > ex[l.subtask]->start + eps) return "load after exec start";
    if (l.start < ts.origin - eps) return "load before origin";
    ctrl.emplace_back(l.start, l.end);
    // The tile's previous subtask must have finished before the load starts.
    for (const auto& [pe, seq] : s.schedule.per_pe) {
      auto it = std::find(seq.begin(), seq.end(), l.subtask);
      if (it != seq.end() && it != seq.begin() && l.start < ex[*(it - 1)]->end - eps) return "load over tile";
    }
  }
  std::sort(ctrl.begin(), ctrl.end());
  for (std::size_t k = 1; k < ctrl.size(); ++k)
    if (ctrl[k].first < ctrl[k - 1].second - eps) return "controller overlap";
  Millis last = ts.origin;
  for (const auto& e : ts.execs) last = std::max(last, e.end);
  if (std::abs(last - ts.origin - ts.makespan) > eps) return "makespan";
  return {};
}

/// Residency soundness over a simulator trace: every DRHW exec finds its own
/// configuration as the last load on its tile, loaded before it starts, and
/// no load touches the tile while it runs. Loads never overlap on the
/// controller. Returns the first violation or an empty string.
inline std::string check_trace(const std::vector<TraceEvent>& events) {
  const Millis eps = 1e-9;
  struct Load {
    Millis start, end;
    ConfigId config;
  };
  std::map<std::pair<Mode, int>, std::map<std::string, std::vector<Load>>> loads;
  std::map<std::pair<Mode, int>, std::vector<std::pair<Millis, Millis>>> ctrl;
  auto is_load = [](TraceKind k) {
    return k == TraceKind::Load || k == TraceKind::InitLoad || k == TraceKind::PrefetchLoad;
  };
  for (const auto& e : events)
    if (is_load(e.kind)) {
      loads[{e.mode, e.tiles}][e.resource].push_back({e.start, e.end, {e.task, e.subtask}});
      ctrl[{e.mode, e.tiles}].emplace_back(e.start, e.end);
    }
  for (auto& [cell, c] : ctrl) {
    std::sort(c.begin(), c.end());
    for (std::size_t k = 1; k < c.size(); ++k)
      if (c[k].first < c[k - 1].second - eps) return "controller overlap";
  }
  for (auto& [cell, tiles] : loads)
    for (auto& [tile, ls] : tiles)
      std::stable_sort(ls.begin(), ls.end(), [](const Load& a, const Load& b) { return a.start < b.start; });
  for (const auto& e : events) {
    if (e.kind != TraceKind::Exec || e.resource.empty() || e.resource[0] != 'T') continue;
    const auto& ls = loads[{e.mode, e.tiles}][e.resource];
    const Load* last = nullptr;
    for (const auto& l : ls) {
      if (l.start <= e.start + eps) last = &l;
      if (l.start > e.start + eps && l.start < e.end - eps) return "load during exec on " + e.resource;
    }
    if (!last) return "exec on never-loaded tile " + e.resource;
    if (!(last->config == ConfigId{e.task, e.subtask})) return "wrong configuration on " + e.resource;
    if (last->end > e.start + eps) return "exec before its load ended on " + e.resource;
  }
  return {};
}

}  // namespace drhw::test
