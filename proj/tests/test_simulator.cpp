#include <doctest.h>

#include <set>
#include <sstream>

#include "drhw/simulator.hpp"
#include "drhw/workload_gen.hpp"
#include "support.hpp"

using namespace drhw;

namespace {

SimConfig config(int iterations, int tiles = 4, std::uint64_t seed = 1) {
  SimConfig c;
  c.iterations = iterations;
  c.tiles = tiles;
  c.seed = seed;
  c.trace = true;
  return c;
}

const ModeRun& run_of(const SimResult& r, Mode m) {
  for (const auto& x : r.runs)
    if (x.mode == m) return x;
  throw std::logic_error("mode missing");
}

std::string report_text(const Workload& w, const ScheduleStore& store, const SimConfig& c,
                        const std::vector<int>& tiles) {
  RunManifest m;
  m.workload_path = "w.txt";
  m.store_path = "s.json";
  m.tiles = tiles;
  m.latency = c.latency;
  m.iterations = c.iterations;
  m.seed = c.seed;
  m.modes = c.modes;
  m.report_path = "r.json";
  m.trace_path = "t.csv";
  std::ostringstream os;
  write_report(m, run_sweep(w, store, c, tiles), os);
  return os.str();
}

}  // namespace

TEST_CASE("overhead and hidden percentages") {
  CHECK(overhead_pct(94, 109.98) == doctest::Approx(17).epsilon(1e-3));
  CHECK(overhead_pct(33, 51.48) == doctest::Approx(56).epsilon(1e-3));
  CHECK(overhead_pct(40, 40) == 0);
  CHECK_THROWS_AS(overhead_pct(0, 3), std::invalid_argument);
  CHECK(hidden_pct(71, 5) == doctest::Approx(92.96).epsilon(1e-3));
  CHECK(hidden_pct(12, 12) == 0);
  CHECK(hidden_pct(12, 0) == 100);
  CHECK_THROWS_AS(hidden_pct(0, 0), std::invalid_argument);
}

TEST_CASE("config validation") {
  SimConfig c;
  CHECK_NOTHROW(c.check());
  c.tiles = 0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = SimConfig{};
  c.iterations = 0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = SimConfig{};
  c.latency = -1;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = SimConfig{};
  c.modes.clear();
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  CHECK(parse_selection("all-shuffled") == Selection::AllShuffled);
  CHECK_FALSE(parse_selection("some"));
}

TEST_CASE("iteration selection") {
  auto w = preset_table1(1);
  std::set<std::size_t> sizes;
  for (int i = 0; i < 300; ++i) {
    auto a = select_iteration(w, 9, i);
    CHECK(a == select_iteration(w, 9, i));
    REQUIRE_FALSE(a.empty());
    std::set<TaskId> tasks;
    for (const auto& [t, s] : a) tasks.insert(t);
    CHECK(tasks.size() == a.size());
    sizes.insert(a.size());
    CHECK(select_iteration(w, 9, i, Selection::AllShuffled).size() == w.tasks.size());
  }
  CHECK(sizes == std::set<std::size_t>{1, 2, 3, 4});

  // Draws depend on the iteration index only, never on how many iterations run.
  auto c = config(20);
  auto longer = plan_iterations(w, c);
  c.iterations = 7;
  auto shorter = plan_iterations(w, c);
  CHECK(std::equal(shorter.begin(), shorter.end(), longer.begin()));
  CHECK(select_iteration(w, 9, 3) != select_iteration(w, 10, 3));
}

TEST_CASE("pocketgl iterations follow feasible combinations") {
  auto w = preset_pocketgl(2);
  REQUIRE(w.feasible_combinations);
  std::set<Combination> seen;
  for (int i = 0; i < 400; ++i) {
    auto inv = select_iteration(w, 4, i, Selection::AllShuffled);
    Combination combo(w.tasks.size());
    for (const auto& [t, s] : inv) combo[static_cast<std::size_t>(t - 1)] = s;
    CHECK(std::find(w.feasible_combinations->begin(), w.feasible_combinations->end(), combo) !=
          w.feasible_combinations->end());
    seen.insert(combo);
  }
  CHECK(seen.size() == w.feasible_combinations->size());
}

TEST_CASE("chain4 over many iterations") {
  auto w = preset_chain4();
  auto store = build_store(w, 4);
  auto c = config(1000, 2);
  auto r = run_simulation(w, store, c);
  const auto& hy = run_of(r, Mode::Hybrid).metrics;
  CHECK(hy.ideal == 40000);
  CHECK(hy.actual == 40004);  // only the very first initialization load shows
  CHECK(hy.init_loads == 1);
  CHECK(hy.prefetch_loads == 999);
  CHECK(run_of(r, Mode::NoPrefetch).metrics.actual == 56000);
  CHECK(run_of(r, Mode::DesignTimePrefetch).metrics.actual == 44000);
  CHECK(run_of(r, Mode::RuntimeInterTask).metrics.actual <= run_of(r, Mode::RuntimeHeuristic).metrics.actual);
  CHECK(hy.hidden_pct);
  CHECK(*hy.hidden_pct == doctest::Approx(100.0 * (1 - 4.0 / 16000)));
  CHECK(run_of(r, Mode::NoPrefetch).metrics.hidden_pct == 0.0);
}

TEST_CASE("zero latency costs nothing in any mode") {
  auto w = preset_table1(4);
  auto store = build_store(w, 0);
  auto c = config(200);
  c.latency = 0;
  for (const auto& run : run_simulation(w, store, c).runs) {
    CHECK(run.metrics.overhead_pct == 0);
    CHECK(run.metrics.actual == doctest::Approx(run.metrics.ideal));
    CHECK_FALSE(run.metrics.hidden_pct);  // no baseline overhead to hide
  }
}

TEST_CASE("traces agree with metrics and stay sound") {
  for (auto w : {preset_table1(5), preset_pocketgl(5)}) {
    auto store = build_store(w, 4);
    auto c = config(150);
    auto results = run_sweep(w, store, c, {4, 6});
    std::vector<TraceEvent> all;
    for (const auto& r : results)
      for (const auto& run : r.runs) all.insert(all.end(), run.trace.begin(), run.trace.end());
    auto spans = trace_makespans(all);
    for (const auto& r : results)
      for (const auto& run : r.runs) {
        CHECK(spans.at({run.mode, r.tiles}) == run.metrics.actual);
        CHECK(test::check_trace(run.trace) == "");
        const auto& m = run.metrics;
        // Every DRHW subtask instance is either reused or loaded once.
        CHECK(m.loads_issued == m.drhw_instances - m.reused_instances + m.prefetch_loads);
        CHECK(m.overhead_pct >= 0);
      }
    std::stringstream ss;
    write_trace(results, ss);
    auto back = read_trace(ss);
    CHECK(back == all);
  }
}

TEST_CASE("trace reader errors name the line") {
  std::istringstream bad(std::string(kTraceHeader) +
                         "\nmode,tiles,iteration,task,scenario,resource,kind,subtask,start_ms,end_ms\n"
                         "hybrid,2,0,1,1,T0,exec,1,0,4\nhybrid,2,0,1,1,T0,warp,1,0,4\n");
  try {
    read_trace(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::istringstream nohead("mode,tiles\n");
  CHECK_THROWS_AS(read_trace(nohead), Error);
}

TEST_CASE("parallel sweep matches the serial reference") {
  auto w = preset_pocketgl(3);
  auto store = build_store(w, 4);
  auto c = config(200);
  std::vector<int> tiles{2, 4, 8};
  auto par = run_sweep(w, store, c, tiles);
  auto ser = run_sweep_serial(w, store, c, tiles);
  REQUIRE(par.size() == ser.size());
  for (std::size_t k = 0; k < par.size(); ++k) {
    CHECK(par[k].tiles == tiles[k]);
    REQUIRE(par[k].runs.size() == ser[k].runs.size());
    for (std::size_t j = 0; j < par[k].runs.size(); ++j) {
      CHECK(par[k].runs[j].mode == c.modes[j]);
      CHECK(par[k].runs[j].metrics.actual == ser[k].runs[j].metrics.actual);
      CHECK(par[k].runs[j].metrics.hidden_pct == ser[k].runs[j].metrics.hidden_pct);
      CHECK(par[k].runs[j].trace == ser[k].runs[j].trace);
    }
  }
}

TEST_CASE("reports are deterministic and carry their manifest") {
  auto w = preset_table1(6);
  auto store = build_store(w, 4);
  auto c = config(100);
  c.trace = false;
  auto a = report_text(w, store, c, {4, 5});
  CHECK(a == report_text(w, store, c, {4, 5}));
  CHECK(a.find(kReportSchema) != std::string::npos);
  std::istringstream in(a);
  auto m = read_manifest(in);
  CHECK(m.tiles == std::vector<int>{4, 5});
  CHECK(m.iterations == 100);
  CHECK(m.seed == 1);
  CHECK(m.modes == c.modes);
  CHECK(m.trace_path == "t.csv");
  CHECK(m.tool_version == kToolVersion);
  c.seed = 2;
  CHECK(a != report_text(w, store, c, {4, 5}));
}

TEST_CASE("store and simulation must agree") {
  auto w = preset_chain4();
  auto store = build_store(w, 4);
  CHECK_THROWS_AS(Catalog(w, store, 2), LatencyMismatch);
  auto other = preset_table1(1);
  CHECK_THROWS_AS(Catalog(other, store, 4), ConsistencyError);
}

TEST_CASE("capacity errors name the run") {
  auto w = preset_table1(1);
  auto store = build_store(w, 4);
  auto c = config(5, 2);
  try {
    run_simulation(w, store, c);
    FAIL("expected an error");
  } catch (const CapacityError& e) {
    std::string msg = e.what();
    CHECK(msg.find("2 tiles") != std::string::npos);
    CHECK(msg.find("iteration") != std::string::npos);
  }
}
