#include "drhw/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "drhw/rng.hpp"
#include "drhw/workload_io.hpp"

namespace drhw {

using ojson = nlohmann::ordered_json;

const char* to_string(Selection selection) {
  return selection == Selection::RandomSubset ? "random-subset" : "all-shuffled";
}

std::optional<Selection> parse_selection(std::string_view name) {
  if (name == "random-subset") return Selection::RandomSubset;
  if (name == "all-shuffled") return Selection::AllShuffled;
  return std::nullopt;
}

void SimConfig::check() const {
  if (tiles < 1) throw std::invalid_argument("tiles must be >= 1");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(latency >= 0)) throw std::invalid_argument("latency must be >= 0");
  if (modes.empty()) throw std::invalid_argument("no mode selected");
}

double overhead_pct(Millis ideal, Millis actual) {
  if (!(ideal > 0)) throw std::invalid_argument("ideal time must be positive");
  return 100.0 * (actual - ideal) / ideal;
}

double hidden_pct(double baseline, double achieved) {
  if (!(baseline > 0)) throw std::invalid_argument("baseline overhead must be positive");
  return 100.0 * (1.0 - achieved / baseline);
}

std::vector<Invocation> select_iteration(const Workload& workload, std::uint64_t seed, int iteration,
                                         Selection selection) {
  if (workload.tasks.empty()) throw std::invalid_argument("workload has no task");
  Rng rng(substream_seed(seed, static_cast<std::uint64_t>(iteration)));
  const std::size_t n = workload.tasks.size();
  Combination combo(n);
  if (workload.feasible_combinations) {
    const auto& all = *workload.feasible_combinations;
    if (all.empty()) throw std::invalid_argument("workload lists no feasible combination");
    combo = all[rng.uniform_int(0, static_cast<std::int64_t>(all.size()) - 1)];
  } else {
    for (std::size_t t = 0; t < n; ++t) {
      const auto& sc = workload.tasks[t].scenarios;
      combo[t] = sc[rng.uniform_int(0, static_cast<std::int64_t>(sc.size()) - 1)].id;
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t t = 0; t < n; ++t) order[t] = t;
  rng.shuffle(order);
  std::size_t count = n;
  if (selection == Selection::RandomSubset) count = static_cast<std::size_t>(rng.uniform_int(1, n));
  std::vector<Invocation> out;
  for (std::size_t k = 0; k < count; ++k) out.emplace_back(workload.tasks[order[k]].id, combo[order[k]]);
  return out;
}

std::vector<std::vector<Invocation>> plan_iterations(const Workload& workload, const SimConfig& config) {
  std::vector<std::vector<Invocation>> plan;
  plan.reserve(config.iterations);
  for (int i = 0; i < config.iterations; ++i) plan.push_back(select_iteration(workload, config.seed, i, config.selection));
  return plan;
}

Catalog::Catalog(const Workload& workload, const ScheduleStore& store, Millis latency)
    : workload_(&workload), latency_(latency) {
  if (std::abs(store.latency - latency) > kTimeEps) {
    std::ostringstream os;
    os << "store was built for latency " << format_ms(store.latency) << " ms but the simulation uses "
       << format_ms(latency) << " ms";
    throw LatencyMismatch(os.str());
  }
  if (store.entries.size() != workload.scenario_count())
    throw ConsistencyError("store has " + std::to_string(store.entries.size()) + " entries but the workload has " +
                           std::to_string(workload.scenario_count()) + " scenarios");
  for (const auto& task : workload.tasks)
    for (const auto& s : task.scenarios) {
      const auto* entry = store.find(task.id, s.id);
      if (!entry)
        throw ConsistencyError("store has no entry for task " + std::to_string(task.id) + " scenario " +
                               std::to_string(s.id));
      indexes_.emplace_back(s);
      prepared_.emplace(Invocation{task.id, s.id}, PreparedScenario::make(task.id, indexes_.back(), *entry));
    }
}

const PreparedScenario& Catalog::at(TaskId task, ScenarioId scenario) const {
  auto it = prepared_.find({task, scenario});
  if (it == prepared_.end())
    throw ConsistencyError("unknown task " + std::to_string(task) + " scenario " + std::to_string(scenario));
  return it->second;
}

ModeRun run_mode(const Catalog& catalog, const std::vector<std::vector<Invocation>>& plan, Mode mode, int tiles,
                 const SimConfig& config) {
  ModeRun run;
  run.mode = mode;
  run.tiles = tiles;
  auto& m = run.metrics;

  std::vector<std::pair<int, const PreparedScenario*>> flat;
  for (std::size_t i = 0; i < plan.size(); ++i)
    for (const auto& [task, scenario] : plan[i]) flat.emplace_back(static_cast<int>(i), &catalog.at(task, scenario));

  RuntimeState state{ResidencyMap(tiles), 0, 0};
  InstanceOptions options;
  options.latency = catalog.latency();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const auto& [iteration, prep] = flat[k];
    const PreparedScenario* next = k + 1 < flat.size() ? flat[k + 1].second : nullptr;
    InstanceResult r;
    try {
      r = execute_task_instance(*prep, state, mode, next, options);
    } catch (const CapacityError& e) {
      throw CapacityError(std::string(to_string(mode)) + ", " + std::to_string(tiles) + " tiles, iteration " +
                          std::to_string(iteration) + ": " + e.what());
    }
    m.ideal += prep->index->ideal_makespan();
    ++m.task_instances;
    m.drhw_instances += static_cast<long>(prep->index->drhw().size());
    m.reused_instances += static_cast<long>(r.decision.reused.size());
    m.critical_instances += static_cast<long>(prep->entry->critical.ids.size());
    m.loads_issued += r.loads_issued + static_cast<long>(r.decision.prefetched.size());
    m.loads_cancelled += static_cast<long>(r.decision.cancelled_loads.size());
    m.init_loads += static_cast<long>(r.decision.init_loads.size());
    m.prefetch_loads += static_cast<long>(r.decision.prefetched.size());
    if (config.trace)
      for (auto& ev : r.events)
        run.trace.push_back({mode, tiles, iteration, ev.task, ev.scenario, std::move(ev.resource), ev.kind,
                             ev.subtask, ev.start, ev.end});
    state = std::move(r.state);
  }
  m.actual = state.now;
  m.overhead_pct = m.ideal > 0 ? overhead_pct(m.ideal, m.actual) : 0.0;
  if (m.overhead_pct < 0) m.overhead_pct = 0;
  m.reuse_pct = m.drhw_instances ? 100.0 * m.reused_instances / m.drhw_instances : 0.0;
  m.cs_fraction = m.drhw_instances ? static_cast<double>(m.critical_instances) / m.drhw_instances : 0.0;
  return run;
}

namespace {

void fill_hidden(SimResult& result) {
  const ModeRun* base = nullptr;
  for (const auto& r : result.runs)
    if (r.mode == Mode::NoPrefetch) base = &r;
  if (!base || !(base->metrics.overhead_pct > 0)) return;
  for (auto& r : result.runs) r.metrics.hidden_pct = hidden_pct(base->metrics.overhead_pct, r.metrics.overhead_pct);
}

struct Cell {
  int tiles;
  Mode mode;
};

std::vector<Cell> cells_of(const SimConfig& config, const std::vector<int>& tiles) {
  std::vector<Cell> cells;
  for (int t : tiles)
    for (Mode m : config.modes) cells.push_back({t, m});
  return cells;
}

std::vector<SimResult> assemble(const std::vector<int>& tiles, std::vector<ModeRun>&& runs, std::size_t per_tile) {
  std::vector<SimResult> out;
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    SimResult r;
    r.tiles = tiles[k];
    for (std::size_t j = 0; j < per_tile; ++j) r.runs.push_back(std::move(runs[k * per_tile + j]));
    fill_hidden(r);
    out.push_back(std::move(r));
  }
  return out;
}

void check_tiles(const SimConfig& config, const std::vector<int>& tiles) {
  config.check();
  if (tiles.empty()) throw std::invalid_argument("no tile count given");
  for (int t : tiles)
    if (t < 1) throw std::invalid_argument("tiles must be >= 1");
}

}  // namespace

std::vector<SimResult> run_sweep_serial(const Workload& workload, const ScheduleStore& store,
                                        const SimConfig& config, const std::vector<int>& tiles) {
  check_tiles(config, tiles);
  Catalog catalog(workload, store, config.latency);
  auto plan = plan_iterations(workload, config);
  std::vector<ModeRun> runs;
  for (const auto& c : cells_of(config, tiles)) runs.push_back(run_mode(catalog, plan, c.mode, c.tiles, config));
  return assemble(tiles, std::move(runs), config.modes.size());
}

std::vector<SimResult> run_sweep(const Workload& workload, const ScheduleStore& store, const SimConfig& config,
                                 const std::vector<int>& tiles) {
  check_tiles(config, tiles);
  Catalog catalog(workload, store, config.latency);
  const auto plan = plan_iterations(workload, config);
  const auto cells = cells_of(config, tiles);
  const long n = static_cast<long>(cells.size());
  std::vector<ModeRun> runs(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    try {
      runs[k] = run_mode(catalog, plan, cells[k].mode, cells[k].tiles, config);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return assemble(tiles, std::move(runs), config.modes.size());
}

SimResult run_simulation(const Workload& workload, const ScheduleStore& store, const SimConfig& config) {
  return std::move(run_sweep_serial(workload, store, config, {config.tiles}).front());
}

// ---------------------------------------------------------------------------

namespace {

ojson metrics_json(const ModeRun& r, int iterations) {
  const auto& m = r.metrics;
  ojson j;
  j["mode"] = to_string(r.mode);
  j["tiles"] = r.tiles;
  j["iterations"] = iterations;
  j["task_instances"] = m.task_instances;
  j["ideal_ms"] = m.ideal;
  j["actual_ms"] = m.actual;
  j["overhead_pct"] = m.overhead_pct;
  j["hidden_pct"] = m.hidden_pct ? ojson(*m.hidden_pct) : ojson(nullptr);
  j["reuse_pct"] = m.reuse_pct;
  j["cs_fraction"] = m.cs_fraction;
  j["drhw_instances"] = m.drhw_instances;
  j["reused_instances"] = m.reused_instances;
  j["loads_issued"] = m.loads_issued;
  j["loads_cancelled"] = m.loads_cancelled;
  j["init_loads"] = m.init_loads;
  j["prefetch_loads"] = m.prefetch_loads;
  return j;
}

}  // namespace

void write_report(const RunManifest& manifest, const std::vector<SimResult>& results, std::ostream& out) {
  ojson root;
  root["schema"] = kReportSchema;
  ojson man;
  man["tool_version"] = manifest.tool_version;
  man["workload"] = manifest.workload_path;
  man["store"] = manifest.store_path;
  man["tiles"] = manifest.tiles;
  man["latency_ms"] = manifest.latency;
  man["iterations"] = manifest.iterations;
  man["seed"] = manifest.seed;
  ojson modes = ojson::array();
  for (Mode m : manifest.modes) modes.push_back(to_string(m));
  man["modes"] = std::move(modes);
  man["selection"] = to_string(manifest.selection);
  man["report"] = manifest.report_path;
  man["trace"] = manifest.trace_path;
  root["manifest"] = std::move(man);
  ojson cells = ojson::array();
  for (const auto& r : results)
    for (const auto& run : r.runs) cells.push_back(metrics_json(run, manifest.iterations));
  root["cells"] = std::move(cells);
  out << root.dump(2) << '\n';
}

RunManifest read_manifest(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw Error("report parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  RunManifest m;
  try {
    if (root.at("schema").get<std::string>() != kReportSchema) throw Error("not a drhw report");
    const auto& j = root.at("manifest");
    m.tool_version = j.at("tool_version").get<std::string>();
    m.workload_path = j.at("workload").get<std::string>();
    m.store_path = j.at("store").get<std::string>();
    m.tiles = j.at("tiles").get<std::vector<int>>();
    m.latency = j.at("latency_ms").get<Millis>();
    m.iterations = j.at("iterations").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& name : j.at("modes")) {
      auto mode = parse_mode(name.get<std::string>());
      if (!mode) throw Error("unknown mode '" + name.get<std::string>() + "' in manifest");
      m.modes.push_back(*mode);
    }
    auto sel = parse_selection(j.at("selection").get<std::string>());
    if (!sel) throw Error("unknown selection in manifest");
    m.selection = *sel;
    m.report_path = j.at("report").get<std::string>();
    m.trace_path = j.at("trace").get<std::string>();
  } catch (const ojson::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

namespace {

constexpr const char* kTraceColumns = "mode,tiles,iteration,task,scenario,resource,kind,subtask,start_ms,end_ms";

void write_event(const TraceEvent& e, std::ostream& out) {
  out << to_string(e.mode) << ',' << e.tiles << ',' << e.iteration << ',' << e.task << ',' << e.scenario << ','
      << e.resource << ',' << to_string(e.kind) << ',' << e.subtask << ',' << format_ms(e.start) << ','
      << format_ms(e.end) << '\n';
}

}  // namespace

void write_trace_events(const std::vector<TraceEvent>& events, std::ostream& out) {
  out << kTraceHeader << '\n' << kTraceColumns << '\n';
  for (const auto& e : events) write_event(e, out);
}

void write_trace(const std::vector<SimResult>& results, std::ostream& out) {
  out << kTraceHeader << '\n' << kTraceColumns << '\n';
  for (const auto& r : results)
    for (const auto& run : r.runs)
      for (const auto& e : run.trace) write_event(e, out);
}

std::vector<TraceEvent> read_trace(std::istream& in) {
  std::vector<TraceEvent> out;
  std::string line;
  int n = 0;
  bool header = false;
  auto fail = [&](const std::string& msg) { return Error("trace line " + std::to_string(n) + ": " + msg); };
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != kTraceHeader) throw fail(std::string("expected '") + kTraceHeader + "'");
      header = true;
      continue;
    }
    if (line == kTraceColumns) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 10) throw fail("expected 10 fields, got " + std::to_string(f.size()));
    TraceEvent e;
    auto mode = parse_mode(f[0]);
    if (!mode) throw fail("unknown mode '" + f[0] + "'");
    auto kind = parse_trace_kind(f[6]);
    if (!kind) throw fail("unknown event kind '" + f[6] + "'");
    try {
      std::size_t used = 0;
      auto integer = [&](const std::string& s) {
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      };
      auto number = [&](const std::string& s) {
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      };
      e.mode = *mode;
      e.tiles = integer(f[1]);
      e.iteration = integer(f[2]);
      e.task = integer(f[3]);
      e.scenario = integer(f[4]);
      e.resource = f[5];
      e.kind = *kind;
      e.subtask = integer(f[7]);
      e.start = number(f[8]);
      e.end = number(f[9]);
    } catch (const std::logic_error&) {
      throw fail("malformed number");
    }
    if (e.end < e.start) throw fail("event ends before it starts");
    out.push_back(std::move(e));
  }
  return out;
}

std::map<std::pair<Mode, int>, Millis> trace_makespans(const std::vector<TraceEvent>& events) {
  std::map<std::pair<Mode, int>, Millis> out;
  for (const auto& e : events)
    if (e.kind == TraceKind::Exec) {
      auto& v = out[{e.mode, e.tiles}];
      v = std::max(v, e.end);
    }
  return out;
}

}  // namespace drhw
