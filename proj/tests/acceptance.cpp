// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "drhw/simulator.hpp"
#include "drhw/workload_gen.hpp"
#include "support.hpp"

using namespace drhw;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail.clear();
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

std::string num(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

SimConfig sim(std::uint64_t seed, int iterations = 1000) {
  SimConfig c;
  c.seed = seed;
  c.iterations = iterations;
  return c;
}

const Metrics& metrics_of(const SimResult& r, Mode m) {
  for (const auto& run : r.runs)
    if (run.mode == m) return run.metrics;
  throw std::logic_error("mode missing from result");
}

// Sweeps shared by the ordering and magnitude criteria.
struct PresetSweep {
  std::string preset;
  std::uint64_t seed;
  std::vector<SimResult> results;
  double seconds;
};

const std::vector<PresetSweep>& preset_sweeps() {
  static const std::vector<PresetSweep> sweeps = [] {
    std::vector<PresetSweep> out;
    for (const std::string preset : {"table1", "pocketgl"})
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto t0 = Clock::now();
        auto w = make_preset(preset, seed);
        auto store = build_store(w, 4);
        auto results = run_sweep(w, store, sim(seed), {4, 5, 6, 7, 8});
        out.push_back({preset, seed, std::move(results), ms_since(t0) / 1000});
      }
    return out;
  }();
  return sweeps;
}

Outcome oracle_equivalence() {
  Outcome o;
  int instances = 0;
  for (std::uint64_t seed = 0; instances < 200; ++seed) {
    auto s = test::random_scenario(20000 + seed, 1, 8, 3);
    auto loads = test::drhw_ids(s);
    if (loads.size() > 6) continue;
    ++instances;
    Millis R = 0.5 * static_cast<double>(seed % 14);
    ScenarioIndex ix(s);
    Millis bb = schedule_optimal_bb(ix, loads, R).schedule.makespan;
    Millis brute = brute_force_oracle(ix, loads, R).schedule.makespan;
    auto independent = test::oracle_best(s, loads, R);
    if (bb != brute) o.fail("seed " + std::to_string(seed) + ": bb " + num(bb) + " vs oracle " + num(brute));
    if (!independent || *independent != bb) o.fail("seed " + std::to_string(seed) + ": test oracle disagrees");
  }
  if (o.pass) o.detail = std::to_string(instances) + " instances, B&B equals exhaustive search exactly";
  return o;
}

Outcome cs_definition() {
  Outcome o;
  std::vector<Workload> workloads;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) workloads.push_back(preset_table1(seed));
  workloads.push_back(preset_pocketgl(1));
  GenParams gp;
  gp.min_subtasks = 3;
  gp.max_subtasks = 12;
  gp.scenarios = 2;
  gp.isps = 1;
  gp.drhw_fraction = 0.8;
  Workload random;
  for (int t = 1; t <= 20; ++t) random.tasks.push_back(gen_task(gp, 77, t));
  workloads.push_back(std::move(random));

  int scenarios = 0, prefixes = 0;
  for (const auto& w : workloads)
    for (const auto& task : w.tasks)
      for (const auto& s : task.scenarios) {
        ++scenarios;
        auto entry = extract_critical_subtasks(s, task.id, 4);
        std::set<SubtaskId> prefix;
        for (SubtaskId id : entry.extraction_sequence) {
          ++prefixes;
          if (!(compute_penalty(s, prefix, 4).penalty > 0))
            o.fail("task " + std::to_string(task.id) + " scenario " + std::to_string(s.id) +
                   ": proper prefix with zero penalty");
          prefix.insert(id);
        }
        if (compute_penalty(s, prefix, 4).penalty != 0)
          o.fail("task " + std::to_string(task.id) + " scenario " + std::to_string(s.id) + ": CS penalty not zero");
      }
  if (scenarios < 50) o.fail("only " + std::to_string(scenarios) + " scenarios");
  if (o.pass)
    o.detail = std::to_string(scenarios) + " scenarios, " + std::to_string(prefixes) +
               " proper prefixes all positive, every final CS penalty zero";
  return o;
}

Outcome canonical_fixture() {
  Outcome o;
  auto s = test::chain4();
  auto all = test::drhw_ids(s);
  auto expect = [&](const std::string& what, Millis got, Millis want) {
    if (got != want) o.fail(what + " " + num(got) + " (expected " + num(want) + ")");
  };
  expect("no-prefetch", schedule_no_prefetch(s, all, 4).makespan, 56);
  expect("optimal prefetch", schedule_optimal_bb(s, all, 4).schedule.makespan, 44);
  expect("oracle cross-check", test::oracle_best(s, all, 4).value_or(-1), 44);

  auto w = test::single_task(s);
  auto store = build_store(w, 4);
  Catalog catalog(w, store, 4);
  const auto& p = catalog.at(1, 1);
  if (p.entry->critical.ids != std::vector<SubtaskId>{1}) o.fail("CS is not {s1}");

  InstanceOptions opt;
  opt.latency = 4;
  RuntimeState cold{ResidencyMap(2), 0, 0};
  expect("hybrid cold", execute_task_instance(p, cold, Mode::Hybrid, nullptr, opt).end, 44);
  RuntimeState warm = cold;
  warm.residency.install(0, {1, 1}, 0, 0);
  expect("hybrid with s1 resident", execute_task_instance(p, warm, Mode::Hybrid, nullptr, opt).end, 40);

  auto first = execute_task_instance(p, cold, Mode::Hybrid, &p, opt);
  auto second = execute_task_instance(p, first.state, Mode::Hybrid, nullptr, opt);
  expect("two instances", second.end, 84);
  expect("two instances ideal", 2 * ideal_makespan(s), 80);
  if (o.pass) o.detail = "56 / 44 / {s1} / 44 / 40 / 84 vs 80, exact";
  return o;
}

Outcome mode_ordering() {
  Outcome o;
  double worst_gap = 0;
  int cells = 0;
  for (const auto& sw : preset_sweeps())
    for (const auto& r : sw.results) {
      ++cells;
      double np = metrics_of(r, Mode::NoPrefetch).overhead_pct;
      double dt = metrics_of(r, Mode::DesignTimePrefetch).overhead_pct;
      double rh = metrics_of(r, Mode::RuntimeHeuristic).overhead_pct;
      double it = metrics_of(r, Mode::RuntimeInterTask).overhead_pct;
      double hy = metrics_of(r, Mode::Hybrid).overhead_pct;
      std::string where = sw.preset + " seed " + std::to_string(sw.seed) + " " + std::to_string(r.tiles) + " tiles";
      if (np < dt) o.fail(where + ": no-prefetch " + num(np) + " < design-time " + num(dt));
      if (dt < rh) o.fail(where + ": design-time " + num(dt) + " < run-time " + num(rh));
      if (rh < it) o.fail(where + ": run-time " + num(rh) + " < run-time+inter-task " + num(it));
      if (hy > it + 1.5) o.fail(where + ": hybrid " + num(hy) + " > run-time+inter-task " + num(it) + " + 1.5");
      worst_gap = std::max(worst_gap, hy - it);
    }
  if (o.pass)
    o.detail = std::to_string(cells) + " cells ordered, largest hybrid excess " + num(worst_gap) + " pp";
  return o;
}

Outcome magnitudes() {
  Outcome o;
  std::string summary;
  double slowest = 0;
  for (const auto& sw : preset_sweeps()) {
    slowest = std::max(slowest, sw.seconds);
    for (const auto& r : sw.results) {
      if (r.tiles != 8) continue;
      auto hidden = metrics_of(r, Mode::Hybrid).hidden_pct;
      double h = hidden.value_or(0);
      summary += (summary.empty() ? "" : ", ") + sw.preset + "/" + std::to_string(sw.seed) + " " + num(h, 1) + "%";
      if (h < 90) o.fail(sw.preset + " seed " + std::to_string(sw.seed) + ": hidden " + num(h, 1) + "% at 8 tiles");
    }
  }
  if (slowest > 180) o.fail("a preset sweep took " + num(slowest, 1) + " s");
  if (o.pass) o.detail = "hidden at 8 tiles: " + summary + "; slowest sweep " + num(slowest, 1) + " s";
  return o;
}

Outcome monotonicity() {
  Outcome o;
  // Optimal penalty under growing reuse.
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto s = test::random_scenario(30000 + seed, 2, 9, 3);
    auto all = test::drhw_ids(s);
    std::vector<SubtaskId> ids(all.begin(), all.end());
    Rng rng(seed);
    rng.shuffle(ids);
    std::set<SubtaskId> reused;
    Millis prev = compute_penalty(s, reused, 4).penalty;
    for (SubtaskId id : ids) {
      reused.insert(id);
      Millis p = compute_penalty(s, reused, 4).penalty;
      if (p > prev + kTimeEps) o.fail("penalty grew on instance " + std::to_string(seed));
      prev = p;
    }
  }
  // Hybrid overhead against tile count.
  auto w = preset_pocketgl(1);
  auto store = build_store(w, 4);
  auto sweep = run_sweep(w, store, sim(1), {2, 3, 4, 5, 6, 7, 8});
  std::string curve;
  double prev = 1e300;
  for (const auto& r : sweep) {
    double h = metrics_of(r, Mode::Hybrid).overhead_pct;
    curve += (curve.empty() ? "" : " ") + num(h);
    if (h > prev + 1e-9) o.fail("hybrid overhead rose at " + std::to_string(r.tiles) + " tiles");
    prev = h;
  }
  // Inter-task prefetch on two-task sequences.
  GenParams gp;
  gp.min_subtasks = 2;
  gp.max_subtasks = 10;
  gp.isps = 1;
  gp.drhw_fraction = 0.8;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Workload pair;
    pair.tasks = {gen_task(gp, 500 + seed, 1), gen_task(gp, 500 + seed, 2)};
    auto st = build_store(pair, 4);
    Catalog catalog(pair, st, 4);
    const auto& a = catalog.at(1, 1);
    const auto& b = catalog.at(2, 1);
    int tiles = 0;
    for (const auto* p : {&a, &b}) tiles = std::max(tiles, p->index->drhw_slot_count() + p->critical_non_heads);
    for (Mode mode : {Mode::Hybrid, Mode::RuntimeInterTask}) {
      auto total = [&](bool intertask) {
        InstanceOptions opt;
        opt.latency = 4;
        opt.intertask = intertask;
        RuntimeState s{ResidencyMap(tiles), 0, 0};
        auto first = execute_task_instance(a, s, mode, &b, opt);
        return execute_task_instance(b, first.state, mode, nullptr, opt).end;
      };
      if (total(true) > total(false) + kTimeEps)
        o.fail("inter-task prefetch lengthened sequence " + std::to_string(seed) + " in " + to_string(mode));
    }
  }
  if (o.pass)
    o.detail = "100 penalty chains, 50 two-task sequences; pocketgl hybrid overhead 2..8 tiles: " + curve;
  return o;
}

Outcome runtime_cost() {
  Outcome o;
  GenParams gp;
  gp.min_subtasks = gp.max_subtasks = 14;
  gp.slots = 4;
  gp.isps = 1;
  gp.drhw_fraction = 0.85;
  Workload w;
  for (int t = 1; t <= 20; ++t) w.tasks.push_back(gen_task(gp, 42, t));
  int subtasks = 0;
  for (const auto& t : w.tasks) subtasks += static_cast<int>(t.scenarios[0].graph.subtasks.size());
  auto store = build_store(w, 4);
  Catalog catalog(w, store, 4);
  std::vector<const PreparedScenario*> seq;
  for (const auto& t : w.tasks) seq.push_back(&catalog.at(t.id, 1));

  // Residency seen by each task during a Hybrid run.
  InstanceOptions opt;
  opt.latency = 4;
  std::vector<ResidencyMap> seen;
  RuntimeState state{ResidencyMap(12), 0, 0};
  for (std::size_t k = 0; k < seq.size(); ++k) {
    seen.push_back(state.residency);
    state = execute_task_instance(*seq[k], state, Mode::Hybrid, k + 1 < seq.size() ? seq[k + 1] : nullptr, opt).state;
  }

  // Best of several passes to keep scheduler noise out.
  double hybrid = 1e300, heuristic = 1e300, end_to_end = 1e300;
  std::size_t sink = 0;
  for (int rep = 0; rep < 30; ++rep) {
    auto t0 = Clock::now();
    for (std::size_t k = 0; k < seq.size(); ++k) {
      auto reuse = reuse_scan(*seq[k], seen[k], true);
      auto ids = reuse.ids();
      auto init = plan_initialization(*seq[k]->entry, ids);
      auto sched = cancel_reused_loads(*seq[k]->entry, ids).shifted(static_cast<Millis>(init.size()) * 4);
      sink += sched.loads.size() + init.size();
    }
    hybrid = std::min(hybrid, ms_since(t0));

    t0 = Clock::now();
    for (std::size_t k = 0; k < seq.size(); ++k) {
      auto reuse = reuse_scan(*seq[k], seen[k], false);
      auto h = schedule_list_heuristic(*seq[k]->index, loads_excluding(*seq[k]->index, reuse.ids()), 4);
      sink += h.order.size();
    }
    heuristic = std::min(heuristic, ms_since(t0));

    t0 = Clock::now();
    RuntimeState s{ResidencyMap(12), 0, 0};
    for (std::size_t k = 0; k < seq.size(); ++k)
      s = execute_task_instance(*seq[k], s, Mode::Hybrid, k + 1 < seq.size() ? seq[k + 1] : nullptr, opt).state;
    end_to_end = std::min(end_to_end, ms_since(t0));
  }
  if (sink == 0) o.fail("nothing scheduled");
  if (end_to_end >= 10) o.fail("hybrid run-time phase took " + num(end_to_end, 3) + " ms");
  if (hybrid >= heuristic)
    o.fail("hybrid decision " + num(hybrid, 4) + " ms not below list heuristic " + num(heuristic, 4) + " ms");
  if (o.pass)
    o.detail = std::to_string(w.tasks.size()) + " tasks, " + std::to_string(subtasks) + " subtasks: hybrid decision " +
               num(hybrid, 4) + " ms vs list heuristic " + num(heuristic, 4) + " ms; full hybrid phase with binding " +
               num(end_to_end, 3) + " ms";
  return o;
}

Outcome determinism() {
  Outcome o;
  auto produce = [](const RunManifest& m) {
    auto w = make_preset("table1", 1);
    auto store = build_store(w, m.latency);
    SimConfig c;
    c.latency = m.latency;
    c.iterations = m.iterations;
    c.seed = m.seed;
    c.modes = m.modes;
    c.selection = m.selection;
    c.trace = true;
    auto results = run_sweep(w, store, c, m.tiles);
    std::ostringstream report, trace;
    write_report(m, results, report);
    write_trace(results, trace);
    return std::make_pair(report.str(), trace.str());
  };
  RunManifest m;
  m.workload_path = "table1-1.txt";
  m.store_path = "table1-1.store.json";
  m.tiles = {4, 6, 8};
  m.iterations = 300;
  m.seed = 5;
  m.modes = {all_modes().begin(), all_modes().end()};
  m.report_path = "report.json";
  m.trace_path = "trace.csv";
  auto a = produce(m);
  auto b = produce(m);
  if (a != b) o.fail("two runs differ");
  std::istringstream in(a.first);
  auto again = produce(read_manifest(in));
  if (again != a) o.fail("re-running the embedded manifest differs");
  if (o.pass)
    o.detail = "report " + std::to_string(a.first.size()) + " bytes and trace " + std::to_string(a.second.size()) +
               " bytes identical across runs and manifest replay";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"critical subtask definition", cs_definition},
      {"canonical fixture", canonical_fixture},
      {"mode ordering", mode_ordering},
      {"overhead hidden on presets", magnitudes},
      {"monotonicity", monotonicity},
      {"run-time cost", runtime_cost},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome out;
    auto t0 = Clock::now();
    try {
      out = criteria[k].second();
    } catch (const std::exception& e) {
      out.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %zu %s (%.1f s): %s\n", out.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                ms_since(t0) / 1000, out.detail.c_str());
    std::fflush(stdout);
    failed += out.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
