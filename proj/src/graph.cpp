#include "drhw/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace drhw {

const Subtask* SubtaskGraph::find(SubtaskId id) const {
  for (const auto& s : subtasks)
    if (s.id == id) return &s;
  return nullptr;
}

const Scenario* Task::find(ScenarioId id) const {
  for (const auto& s : scenarios)
    if (s.id == id) return &s;
  return nullptr;
}

const Task* Workload::find(TaskId id) const {
  for (const auto& t : tasks)
    if (t.id == id) return &t;
  return nullptr;
}

std::size_t Workload::scenario_count() const {
  std::size_t n = 0;
  for (const auto& t : tasks) n += t.scenarios.size();
  return n;
}

namespace {

std::string sid(SubtaskId id) { return "s" + std::to_string(id); }

// Kahn's algorithm over adjacency lists. Returns an empty vector when a cycle
// exists (and n > 0).
std::vector<int> topo_sort(const std::vector<std::vector<int>>& succs) {
  const int n = static_cast<int>(succs.size());
  std::vector<int> indeg(n, 0);
  for (const auto& out : succs)
    for (int v : out) ++indeg[v];
  std::vector<int> stack;
  for (int i = n - 1; i >= 0; --i)
    if (indeg[i] == 0) stack.push_back(i);
  std::vector<int> order;
  order.reserve(n);
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    order.push_back(u);
    for (int v : succs[u])
      if (--indeg[v] == 0) stack.push_back(v);
  }
  if (static_cast<int>(order.size()) != n) return {};
  return order;
}

}  // namespace

ValidationReport validate(const Scenario& scenario) {
  ValidationReport report;
  auto add = [&](std::string kind, std::string msg) {
    report.push_back({std::move(kind), std::move(msg)});
  };

  const auto& subs = scenario.graph.subtasks;
  std::map<SubtaskId, int> index;
  for (int i = 0; i < static_cast<int>(subs.size()); ++i) {
    const auto& s = subs[i];
    if (!index.emplace(s.id, i).second) add("duplicate", "subtask id " + sid(s.id) + " appears twice");
    if (!std::isfinite(s.exec_ms) || s.exec_ms < 0)
      add("exec", sid(s.id) + " has invalid exec time");
    if (s.slot.empty()) add("slot", sid(s.id) + " has no slot");
  }

  const int n = static_cast<int>(subs.size());
  std::vector<std::vector<int>> succs(n);
  bool edges_ok = true;
  for (const auto& [p, q] : scenario.graph.edges) {
    auto ip = index.find(p), iq = index.find(q);
    if (ip == index.end() || iq == index.end()) {
      add("edge", "edge (" + sid(p) + "," + sid(q) + ") names an unknown subtask");
      edges_ok = false;
      continue;
    }
    succs[ip->second].push_back(iq->second);
  }
  const bool acyclic = edges_ok && (n == 0 || !topo_sort(succs).empty());
  if (edges_ok && !acyclic) add("cycle", "precedence edges contain a cycle");

  // PE kinds must be homogeneous.
  std::map<std::string, Target> pe_kind;
  for (const auto& s : subs) {
    auto [it, fresh] = pe_kind.emplace(s.slot, s.target);
    if (!fresh && it->second != s.target)
      add("pe-kind", "PE '" + s.slot + "' hosts both ISP and DRHW subtasks");
  }

  // Coverage and placement.
  std::map<SubtaskId, int> seen;
  for (const auto& [pe, seq] : scenario.schedule.per_pe) {
    for (SubtaskId id : seq) {
      ++seen[id];
      auto it = index.find(id);
      if (it == index.end()) {
        add("coverage", "schedule names unknown subtask " + sid(id));
        continue;
      }
      if (subs[it->second].slot != pe)
        add("placement", sid(id) + " scheduled on '" + pe + "' but assigned to '" +
                             subs[it->second].slot + "'");
    }
  }
  for (const auto& s : subs) {
    auto it = seen.find(s.id);
    if (it == seen.end())
      add("coverage", sid(s.id) + " missing from the initial schedule");
    else if (it->second > 1)
      add("coverage", sid(s.id) + " scheduled " + std::to_string(it->second) + " times");
  }

  if (!report.empty() || !acyclic) return report;

  // Per-PE order must not place a subtask before one of its ancestors.
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  auto order = topo_sort(succs);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int u = *it;
    for (int v : succs[u]) {
      reach[u][v] = 1;
      for (int w = 0; w < n; ++w)
        if (reach[v][w]) reach[u][w] = 1;
    }
  }
  for (const auto& [pe, seq] : scenario.schedule.per_pe) {
    for (std::size_t a = 0; a < seq.size(); ++a)
      for (std::size_t b = a + 1; b < seq.size(); ++b)
        if (reach[index[seq[b]]][index[seq[a]]])
          add("order", "on '" + pe + "' " + sid(seq[a]) + " runs before its ancestor " + sid(seq[b]));
  }
  if (!report.empty()) return report;

  // Combined timing structure must be acyclic.
  auto combined = succs;
  for (const auto& [pe, seq] : scenario.schedule.per_pe)
    for (std::size_t a = 0; a + 1 < seq.size(); ++a) combined[index[seq[a]]].push_back(index[seq[a + 1]]);
  if (n > 0 && topo_sort(combined).empty())
    add("timing", "precedence and per-PE orders form a cycle; zero-latency timing undefined");
  return report;
}

void require_valid(const Scenario& scenario, const std::string& context) {
  auto report = validate(scenario);
  if (report.empty()) return;
  std::ostringstream os;
  if (!context.empty()) os << context << ": ";
  os << "scenario " << scenario.id << " invalid: ";
  for (std::size_t i = 0; i < report.size(); ++i) {
    if (i) os << "; ";
    os << report[i].kind << ": " << report[i].message;
  }
  throw InvalidScenario(os.str());
}

WeightMap alap_weights(const SubtaskGraph& graph) {
  const int n = static_cast<int>(graph.subtasks.size());
  std::map<SubtaskId, int> index;
  for (int i = 0; i < n; ++i) index[graph.subtasks[i].id] = i;
  std::vector<std::vector<int>> succs(n);
  for (const auto& [p, q] : graph.edges) {
    auto ip = index.find(p), iq = index.find(q);
    if (ip == index.end() || iq == index.end())
      throw StructuralError("edge names an unknown subtask");
    succs[ip->second].push_back(iq->second);
  }
  auto order = topo_sort(succs);
  if (order.empty() && n > 0) throw StructuralError("graph contains a cycle");
  std::vector<Millis> w(n, 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Millis tail = 0;
    for (int v : succs[*it]) tail = std::max(tail, w[v]);
    w[*it] = graph.subtasks[*it].exec_ms + tail;
  }
  WeightMap out;
  for (int i = 0; i < n; ++i) out[graph.subtasks[i].id] = w[i];
  return out;
}

Millis ideal_makespan(const Scenario& scenario) { return ScenarioIndex(scenario).ideal_makespan(); }

// ---------------------------------------------------------------------------

ScenarioIndex::ScenarioIndex(const Scenario& scenario) : scenario_id_(scenario.id) {
  require_valid(scenario);
  const auto& subs = scenario.graph.subtasks;
  const int n = static_cast<int>(subs.size());
  ids_.reserve(n);
  for (int i = 0; i < n; ++i) {
    ids_.push_back(subs[i].id);
    index_[subs[i].id] = i;
    exec_.push_back(subs[i].exec_ms);
    drhw_.push_back(subs[i].target == Target::Drhw);
    pe_.push_back(subs[i].slot);
  }
  preds_.assign(n, {});
  succs_.assign(n, {});
  for (const auto& [p, q] : scenario.graph.edges) {
    int a = index_.at(p), b = index_.at(q);
    succs_[a].push_back(b);
    preds_[b].push_back(a);
  }
  pe_prev_.assign(n, -1);
  pe_next_.assign(n, -1);
  std::set<std::string> slots;
  for (const auto& [pe, seq] : scenario.schedule.per_pe) {
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
      int a = index_.at(seq[k]), b = index_.at(seq[k + 1]);
      pe_next_[a] = b;
      pe_prev_[b] = a;
    }
  }
  for (int i = 0; i < n; ++i)
    if (drhw_[i]) slots.insert(pe_[i]);
  drhw_slots_ = static_cast<int>(slots.size());

  std::vector<std::vector<int>> combined = succs_;
  for (int i = 0; i < n; ++i)
    if (pe_next_[i] >= 0) combined[i].push_back(pe_next_[i]);
  topo_ = topo_sort(combined);

  weight_.assign(n, 0);
  for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
    Millis tail = 0;
    for (int v : succs_[*it]) tail = std::max(tail, weight_[v]);
    weight_[*it] = exec_[*it] + tail;
  }
  sched_tail_.assign(n, 0);
  for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
    Millis tail = 0;
    for (int v : combined[*it]) tail = std::max(tail, sched_tail_[v]);
    sched_tail_[*it] = exec_[*it] + tail;
  }

  ideal_start_.assign(n, 0);
  std::vector<Millis> end(n, 0);
  for (int u : topo_) {
    Millis start = 0;
    for (int p : preds_[u]) start = std::max(start, end[p]);
    if (pe_prev_[u] >= 0) start = std::max(start, end[pe_prev_[u]]);
    ideal_start_[u] = start;
    end[u] = start + exec_[u];
    ideal_makespan_ = std::max(ideal_makespan_, end[u]);
  }

  for (int i = 0; i < n; ++i)
    if (drhw_[i]) drhw_list_.push_back(i);
  std::sort(drhw_list_.begin(), drhw_list_.end(), [&](int a, int b) { return ids_[a] < ids_[b]; });
}

int ScenarioIndex::index_of(SubtaskId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::invalid_argument("unknown subtask s" + std::to_string(id));
  return it->second;
}

}  // namespace drhw
