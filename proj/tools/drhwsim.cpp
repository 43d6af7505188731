// drhwsim: generate workloads, build design-time stores, simulate, render traces.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "drhw/design_time.hpp"
#include "drhw/simulator.hpp"
#include "drhw/workload_gen.hpp"
#include "drhw/workload_io.hpp"

using namespace drhw;

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw UsageError("bad number '" + s + "' in '" + text + "'");
    return v;
  };
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (auto dots = part.find(".."); dots != std::string::npos) {
      int a = number(part.substr(0, dots)), b = number(part.substr(dots + 2));
      if (b < a) throw UsageError("empty range '" + part + "'");
      for (int v = a; v <= b; ++v) out.push_back(v);
    } else {
      out.push_back(number(part));
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::vector<Mode> parse_modes(const std::string& text) {
  if (text == "all") return {all_modes().begin(), all_modes().end()};
  std::vector<Mode> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    auto m = parse_mode(part);
    if (!m) throw UsageError("unknown mode '" + part + "'");
    if (std::find(out.begin(), out.end(), *m) == out.end()) out.push_back(*m);
  }
  if (out.empty()) throw UsageError("no mode given");
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string preset;
  std::uint64_t seed = 1;
  std::string out;
  int tasks = 4;
  std::string subtasks = "4..10";
  Millis exec_low = 1, exec_high = 20;
  double density = 0.3, drhw_fraction = 1.0;
  int slots = 3, isps = 1, scenarios = 1;
};

int cmd_gen(const GenArgs& a) {
  Workload w;
  if (!a.preset.empty()) {
    w = make_preset(a.preset, a.seed);
  } else {
    auto range = parse_int_list(a.subtasks);
    GenParams p;
    p.min_subtasks = *std::min_element(range.begin(), range.end());
    p.max_subtasks = *std::max_element(range.begin(), range.end());
    p.exec_low = a.exec_low;
    p.exec_high = a.exec_high;
    p.edge_density = a.density;
    p.drhw_fraction = a.drhw_fraction;
    p.slots = a.slots;
    p.isps = a.isps;
    p.scenarios = a.scenarios;
    p.check();
    w.description = "generated, seed " + std::to_string(a.seed);
    for (int t = 1; t <= a.tasks; ++t) w.tasks.push_back(gen_task(p, a.seed, t));
  }
  std::ostringstream os;
  write_workload(w, os);
  if (a.out.empty() || a.out == "-") {
    std::cout << os.str();
  } else {
    write_file(a.out, os.str());
    std::cout << "wrote " << a.out << ": " << w.tasks.size() << " tasks, " << w.scenario_count() << " scenarios\n";
  }
  return 0;
}

struct AnalyzeArgs {
  std::string workload;
  std::optional<Millis> latency;
  std::size_t bb_limit = 12;
  std::string out;
};

int cmd_analyze(const AnalyzeArgs& a) {
  Workload w = load_workload(a.workload);
  Millis latency = a.latency.value_or(w.default_latency);
  PrefetchOptions opt;
  opt.bb_limit = a.bb_limit;
  ScheduleStore store = build_store(w, latency, opt);
  if (!a.out.empty()) save_store(store, a.out);

  std::cout << "latency " << format_ms(latency) << " ms, " << store.entries.size() << " scenarios\n";
  std::cout << "task scenario drhw cs ideal_ms penalty_before_ms penalty_after_ms search\n";
  long drhw = 0, critical = 0;
  for (const auto& e : store.entries) {
    const auto* sc = w.find(e.task)->find(e.scenario);
    long n = std::count_if(sc->graph.subtasks.begin(), sc->graph.subtasks.end(),
                           [](const Subtask& s) { return s.target == Target::Drhw; });
    drhw += n;
    critical += static_cast<long>(e.critical.ids.size());
    std::cout << e.task << ' ' << e.scenario << ' ' << n << ' ' << e.critical.ids.size() << ' '
              << format_ms(e.ideal) << ' ' << fixed(e.full_makespan - e.ideal, 3) << ' '
              << fixed(e.stored_schedule.makespan - e.ideal, 3) << ' ' << (e.used_optimal ? "optimal" : "heuristic")
              << '\n';
  }
  double fraction = drhw ? 100.0 * critical / drhw : 0.0;
  std::cout << "critical subtasks: " << critical << " of " << drhw << " DRHW subtasks (" << fixed(fraction, 1)
            << "%)\n";
  if (!a.out.empty()) std::cout << "wrote " << a.out << '\n';
  return 0;
}

struct SimulateArgs {
  std::string workload, store, out, trace, manifest;
  std::string tiles = "4";
  std::optional<Millis> latency;
  int iterations = 1000;
  std::uint64_t seed = 1;
  std::string modes = "all";
  std::string selection = "random-subset";
  bool serial = false;
};

int cmd_simulate(const SimulateArgs& a) {
  RunManifest m;
  std::string report_out = a.out, trace_out = a.trace;
  if (!a.manifest.empty()) {
    std::ifstream in(a.manifest, std::ios::binary);
    if (!in) throw Error("cannot read manifest '" + a.manifest + "'");
    m = read_manifest(in);
    if (report_out.empty()) report_out = m.report_path;
    if (trace_out.empty()) trace_out = m.trace_path;
  } else {
    if (a.workload.empty() || a.store.empty()) throw UsageError("--workload and --store are required");
    m.workload_path = a.workload;
    m.store_path = a.store;
    m.tiles = parse_int_list(a.tiles);
    m.iterations = a.iterations;
    m.seed = a.seed;
    m.modes = parse_modes(a.modes);
    auto sel = parse_selection(a.selection);
    if (!sel) throw UsageError("unknown selection '" + a.selection + "'");
    m.selection = *sel;
    m.report_path = a.out;
    m.trace_path = a.trace;
  }

  Workload w = load_workload(m.workload_path);
  ScheduleStore store = load_store(m.store_path);
  if (a.manifest.empty()) m.latency = a.latency.value_or(store.latency);

  SimConfig cfg;
  cfg.latency = m.latency;
  cfg.iterations = m.iterations;
  cfg.seed = m.seed;
  cfg.modes = m.modes;
  cfg.selection = m.selection;
  cfg.trace = !trace_out.empty();
  auto results = a.serial ? run_sweep_serial(w, store, cfg, m.tiles) : run_sweep(w, store, cfg, m.tiles);

  std::ostringstream report;
  write_report(m, results, report);
  if (!report_out.empty()) write_file(report_out, report.str());
  if (!trace_out.empty()) {
    std::ostringstream trace;
    write_trace(results, trace);
    write_file(trace_out, trace.str());
  }

  if (!w.description.empty()) std::cout << w.description << '\n';
  std::cout << std::left << std::setw(22) << "mode" << std::right << std::setw(6) << "tiles" << std::setw(11)
            << "overhead%" << std::setw(9) << "hidden%" << std::setw(8) << "reuse%" << std::setw(9) << "loads"
            << std::setw(10) << "cancelled" << '\n';
  for (const auto& r : results)
    for (const auto& run : r.runs) {
      const auto& x = run.metrics;
      std::cout << std::left << std::setw(22) << to_string(run.mode) << std::right << std::setw(6) << run.tiles
                << std::setw(11) << fixed(x.overhead_pct, 2) << std::setw(9)
                << (x.hidden_pct ? fixed(*x.hidden_pct, 1) : std::string("-")) << std::setw(8)
                << fixed(x.reuse_pct, 1) << std::setw(9) << x.loads_issued << std::setw(10) << x.loads_cancelled
                << '\n';
    }
  if (!report_out.empty()) std::cout << "wrote " << report_out << '\n';
  if (!trace_out.empty()) std::cout << "wrote " << trace_out << '\n';
  return 0;
}

struct TraceArgs {
  std::string in;
  std::string format = "gantt";
  std::string mode;
  std::optional<int> tiles, iteration;
  int width = 80;
};

char glyph(TraceKind k) {
  switch (k) {
    case TraceKind::Exec: return '#';
    case TraceKind::Load: return 'L';
    case TraceKind::InitLoad: return 'I';
    case TraceKind::PrefetchLoad: return 'P';
    case TraceKind::Cancel: return 'x';
    case TraceKind::Reuse: return 'R';
  }
  return '?';
}

void render_gantt(const std::vector<TraceEvent>& events, int width) {
  std::map<std::pair<Mode, int>, std::vector<const TraceEvent*>> cells;
  for (const auto& e : events) cells[{e.mode, e.tiles}].push_back(&e);
  for (const auto& [key, evs] : cells) {
    Millis t0 = evs.front()->start, t1 = evs.front()->end;
    for (const auto* e : evs) t0 = std::min(t0, e->start), t1 = std::max(t1, e->end);
    double scale = t1 > t0 ? width / (t1 - t0) : 1.0;
    std::cout << "== " << to_string(key.first) << ", " << key.second << " tiles, " << format_ms(t0) << " .. "
              << format_ms(t1) << " ms ==\n";
    std::map<std::string, std::string> rows;
    std::vector<std::string> order;
    auto row = [&](const std::string& name) -> std::string& {
      auto [it, fresh] = rows.try_emplace(name, std::string(width, '.'));
      if (fresh) order.push_back(name);
      return it->second;
    };
    for (const auto* e : evs) {
      if (e->kind == TraceKind::Reuse) continue;
      auto& r = row(e->kind == TraceKind::Cancel ? "cancel" : e->resource);
      int a = static_cast<int>((e->start - t0) * scale);
      int b = std::max(a + 1, static_cast<int>((e->end - t0) * scale + 0.5));
      for (int c = std::max(0, a); c < std::min(width, b); ++c) r[c] = glyph(e->kind);
    }
    std::sort(order.begin(), order.end());
    std::size_t name_width = 6;
    for (const auto& n : order) name_width = std::max(name_width, n.size());
    for (const auto& n : order) std::cout << std::left << std::setw(static_cast<int>(name_width)) << n << " |" << rows[n] << "|\n";
  }
  if (!cells.empty()) std::cout << "# exec  L load  I init load  P prefetch  x cancelled\n";
}

void render_table(const std::vector<TraceEvent>& events) {
  std::cout << "mode tiles iteration task scenario subtask resource kind start_ms end_ms\n";
  for (const auto& e : events)
    std::cout << to_string(e.mode) << ' ' << e.tiles << ' ' << e.iteration << ' ' << e.task << ' ' << e.scenario << ' '
              << e.subtask << ' ' << e.resource << ' ' << to_string(e.kind) << ' ' << format_ms(e.start) << ' '
              << format_ms(e.end) << '\n';
}

int cmd_trace(const TraceArgs& a) {
  std::ifstream in(a.in, std::ios::binary);
  if (!in) throw Error("cannot read trace '" + a.in + "'");
  auto events = read_trace(in);
  std::optional<Mode> mode;
  if (!a.mode.empty()) {
    mode = parse_mode(a.mode);
    if (!mode) throw UsageError("unknown mode '" + a.mode + "'");
  }
  std::erase_if(events, [&](const TraceEvent& e) {
    return (mode && e.mode != *mode) || (a.tiles && e.tiles != *a.tiles) || (a.iteration && e.iteration != *a.iteration);
  });
  if (a.format == "gantt")
    render_gantt(events, a.width);
  else
    render_table(events);
  return 0;
}

std::string mode_names() {
  std::string s = "all";
  for (Mode m : all_modes()) s += std::string(", ") + to_string(m);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Configuration prefetch scheduling for dynamically reconfigurable hardware"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write a workload file from a preset or random parameters");
  g->add_option("--preset", gen.preset, "table1, pocketgl or chain4")->check(CLI::IsMember(preset_names()));
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output file (stdout when omitted)");
  g->add_option("--tasks", gen.tasks, "Task count")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--subtasks", gen.subtasks, "Subtasks per task, n or a..b")->capture_default_str();
  g->add_option("--exec-low", gen.exec_low, "Shortest exec time (ms)")->capture_default_str();
  g->add_option("--exec-high", gen.exec_high, "Longest exec time (ms)")->capture_default_str();
  g->add_option("--density", gen.density, "Edge density")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  g->add_option("--drhw-fraction", gen.drhw_fraction, "Share of DRHW subtasks")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  g->add_option("--slots", gen.slots, "DRHW slots per task")->capture_default_str();
  g->add_option("--isps", gen.isps, "Processors per task")->capture_default_str();
  g->add_option("--scenarios", gen.scenarios, "Scenarios per task")->capture_default_str();

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Extract critical subtasks and build the design-time store");
  a->add_option("--workload", an.workload, "Workload file")->required()->check(CLI::ExistingFile);
  a->add_option("--latency-ms", an.latency, "Reconfiguration latency (default: the workload's)");
  a->add_option("--bb-limit", an.bb_limit, "Largest load set searched exactly")
      ->capture_default_str()
      ->check(CLI::Range(0, 63));
  a->add_option("--out", an.out, "Store file");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run the workload under every prefetch mode");
  s->add_option("--workload", sim.workload, "Workload file");
  s->add_option("--store", sim.store, "Store file from analyze");
  s->add_option("--manifest", sim.manifest, "Re-run the manifest embedded in an earlier report");
  s->add_option("--tiles", sim.tiles, "Tile counts, n, a..b or a list")->capture_default_str();
  s->add_option("--latency-ms", sim.latency, "Reconfiguration latency (default: the store's)");
  s->add_option("--iterations", sim.iterations, "Iterations")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "Selection seed")->capture_default_str();
  s->add_option("--modes", sim.modes, "Modes: " + mode_names())->capture_default_str();
  s->add_option("--selection", sim.selection, "Per-iteration task choice")
      ->capture_default_str()
      ->check(CLI::IsMember({"random-subset", "all-shuffled"}));
  s->add_option("--out", sim.out, "Report file (JSON)");
  s->add_option("--trace", sim.trace, "Trace file (CSV)");
  s->add_flag("--serial", sim.serial, "Run cells one after another");

  TraceArgs tr;
  auto* t = app.add_subcommand("trace", "Render a trace file");
  t->add_option("trace", tr.in, "Trace file")->required()->check(CLI::ExistingFile);
  t->add_option("--format", tr.format, "gantt or table")->capture_default_str()->check(CLI::IsMember({"gantt", "table"}));
  t->add_option("--mode", tr.mode, "Only this mode");
  t->add_option("--tiles", tr.tiles, "Only this tile count");
  t->add_option("--iteration", tr.iteration, "Only this iteration");
  t->add_option("--width", tr.width, "Gantt width in characters")->capture_default_str()->check(CLI::Range(10, 1000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (a->parsed()) return cmd_analyze(an);
    if (s->parsed()) return cmd_simulate(sim);
    if (t->parsed()) return cmd_trace(tr);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
