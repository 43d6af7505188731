#include "drhw/design_time.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace drhw {

using ojson = nlohmann::ordered_json;

bool CriticalSet::contains(SubtaskId id) const {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

const DesignTimeEntry* ScheduleStore::find(TaskId task, ScenarioId scenario) const {
  for (const auto& e : entries)
    if (e.task == task && e.scenario == scenario) return &e;
  return nullptr;
}

DesignTimeEntry extract_critical_subtasks(const ScenarioIndex& ix, TaskId task, Millis latency,
                                          const PrefetchOptions& options) {
  DesignTimeEntry entry;
  entry.task = task;
  entry.scenario = ix.scenario_id();
  entry.ideal = ix.ideal_makespan();
  for (int i = 0; i < ix.size(); ++i) entry.weights[ix.id_at(i)] = ix.weight(i);

  std::set<SubtaskId> critical;
  PenaltyReport rep = compute_penalty(ix, critical, latency, options);
  while (rep.penalty != 0) {
    // A positive penalty always has a delayed subtask: the earliest subtask
    // that starts late is held back by its own load.
    SubtaskId pick = *rep.delayed.begin();
    for (SubtaskId id : rep.delayed)
      if (entry.weights[id] > entry.weights[pick]) pick = id;
    critical.insert(pick);
    entry.extraction_sequence.push_back(pick);
    rep = compute_penalty(ix, critical, latency, options);
  }

  entry.critical.ids.assign(critical.begin(), critical.end());
  std::stable_sort(entry.critical.ids.begin(), entry.critical.ids.end(),
                   [&](SubtaskId a, SubtaskId b) { return entry.weights[a] > entry.weights[b]; });
  for (SubtaskId id : entry.critical.ids) entry.critical.weights[id] = entry.weights[id];
  entry.init_order = entry.critical.ids;
  entry.stored_schedule = std::move(rep.schedule);
  entry.stored_order = std::move(rep.order);
  entry.used_optimal = rep.used_optimal;

  LoadSet all = loads_excluding(ix, {});
  ScheduledLoads full = all.size() <= options.bb_limit
                            ? schedule_optimal_bb(ix, all, latency, 0, options.bb_limit)
                            : schedule_list_heuristic(ix, all, latency, 0);
  entry.full_load_order = std::move(full.order);
  entry.full_makespan = full.schedule.makespan;
  return entry;
}

DesignTimeEntry extract_critical_subtasks(const Scenario& scenario, TaskId task, Millis latency,
                                          const PrefetchOptions& options) {
  return extract_critical_subtasks(ScenarioIndex(scenario), task, latency, options);
}

namespace {

struct Job {
  TaskId task;
  const Scenario* scenario;
};

std::vector<Job> jobs_of(const Workload& workload) {
  std::vector<Job> jobs;
  for (const auto& t : workload.tasks)
    for (const auto& s : t.scenarios) jobs.push_back({t.id, &s});
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return a.task != b.task ? a.task < b.task : a.scenario->id < b.scenario->id;
  });
  return jobs;
}

DesignTimeEntry run_job(const Job& job, Millis latency, const PrefetchOptions& options) {
  try {
    return extract_critical_subtasks(*job.scenario, job.task, latency, options);
  } catch (const InvalidScenario& e) {
    throw InvalidScenario("task " + std::to_string(job.task) + ", " + e.what());
  }
}

}  // namespace

ScheduleStore build_store_serial(const Workload& workload, Millis latency, const PrefetchOptions& options) {
  ScheduleStore store;
  store.latency = latency;
  store.bb_limit = options.bb_limit;
  for (const auto& job : jobs_of(workload)) store.entries.push_back(run_job(job, latency, options));
  return store;
}

ScheduleStore build_store(const Workload& workload, Millis latency, const PrefetchOptions& options) {
  const auto jobs = jobs_of(workload);
  const long n = static_cast<long>(jobs.size());
  std::vector<DesignTimeEntry> entries(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    try {
      entries[k] = run_job(jobs[k], latency, options);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  ScheduleStore store;
  store.latency = latency;
  store.bb_limit = options.bb_limit;
  store.entries = std::move(entries);
  return store;
}

// ---------------------------------------------------------------------------
// Persistence

void check_entry(const DesignTimeEntry& e) {
  auto where = "entry (task " + std::to_string(e.task) + ", scenario " + std::to_string(e.scenario) + "): ";
  if (std::abs(e.stored_schedule.makespan - e.ideal) > kTimeEps)
    throw StoreFormatError(where + "stored schedule makespan differs from the ideal makespan");
  auto init = e.init_order, crit = e.critical.ids;
  std::sort(init.begin(), init.end());
  std::sort(crit.begin(), crit.end());
  if (init != crit) throw StoreFormatError(where + "init order is not a permutation of the critical set");
  if (std::adjacent_find(crit.begin(), crit.end()) != crit.end())
    throw StoreFormatError(where + "critical set repeats a subtask");
  for (std::size_t k = 0; k < e.critical.ids.size(); ++k) {
    SubtaskId id = e.critical.ids[k];
    auto w = e.weights.find(id);
    if (w == e.weights.end()) throw StoreFormatError(where + "critical s" + std::to_string(id) + " has no weight");
    if (k > 0) {
      Millis prev = e.weights.at(e.critical.ids[k - 1]);
      if (prev < w->second || (prev == w->second && e.critical.ids[k - 1] > id))
        throw StoreFormatError(where + "critical set is not in descending weight order");
    }
  }
  for (SubtaskId id : e.critical.ids)
    if (e.stored_schedule.load_of(id)) throw StoreFormatError(where + "critical subtask has a stored load");
}

namespace {

ojson schedule_to_json(const TimedSchedule& s) {
  ojson events = ojson::array();
  for (const auto& l : s.loads) events.push_back(ojson::array({l.tile, "load", l.subtask, l.start, l.end}));
  for (const auto& x : s.execs) events.push_back(ojson::array({x.pe, "exec", x.subtask, x.start, x.end}));
  ojson j;
  j["origin_ms"] = s.origin;
  j["makespan_ms"] = s.makespan;
  j["events"] = std::move(events);
  return j;
}

TimedSchedule schedule_from_json(const ojson& j) {
  TimedSchedule s;
  s.origin = j.at("origin_ms").get<Millis>();
  s.makespan = j.at("makespan_ms").get<Millis>();
  for (const auto& ev : j.at("events")) {
    if (!ev.is_array() || ev.size() != 5) throw StoreFormatError("schedule event must have 5 fields");
    auto kind = ev[1].get<std::string>();
    if (kind == "load")
      s.loads.push_back({ev[2].get<SubtaskId>(), ev[0].get<std::string>(), ev[3].get<Millis>(), ev[4].get<Millis>()});
    else if (kind == "exec")
      s.execs.push_back({ev[2].get<SubtaskId>(), ev[0].get<std::string>(), ev[3].get<Millis>(), ev[4].get<Millis>()});
    else
      throw StoreFormatError("unknown schedule event kind '" + kind + "'");
  }
  return s;
}

}  // namespace

void save_store(const ScheduleStore& store, std::ostream& out) {
  ojson root;
  root["schema"] = kStoreSchema;
  root["latency_ms"] = store.latency;
  root["bb_limit"] = store.bb_limit;
  ojson entries = ojson::array();
  for (const auto& e : store.entries) {
    ojson j;
    j["task"] = e.task;
    j["scenario"] = e.scenario;
    j["ideal_ms"] = e.ideal;
    j["used_optimal"] = e.used_optimal;
    ojson weights = ojson::array();
    for (const auto& [id, w] : e.weights) weights.push_back(ojson::array({id, w}));
    j["weights"] = std::move(weights);
    j["critical"] = e.critical.ids;
    j["extraction_sequence"] = e.extraction_sequence;
    j["init_order"] = e.init_order;
    j["load_order"] = e.stored_order;
    j["full_load_order"] = e.full_load_order;
    j["full_makespan_ms"] = e.full_makespan;
    j["schedule"] = schedule_to_json(e.stored_schedule);
    entries.push_back(std::move(j));
  }
  root["entries"] = std::move(entries);
  out << root.dump(1) << '\n';
}

void save_store(const ScheduleStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write store '" + path.string() + "'");
  save_store(store, out);
}

ScheduleStore load_store(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw StoreFormatError("store parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  ScheduleStore store;
  try {
    if (root.at("schema").get<std::string>() != kStoreSchema)
      throw StoreFormatError("unsupported store schema '" + root.at("schema").get<std::string>() + "'");
    store.latency = root.at("latency_ms").get<Millis>();
    store.bb_limit = root.at("bb_limit").get<std::size_t>();
    for (const auto& j : root.at("entries")) {
      DesignTimeEntry e;
      e.task = j.at("task").get<TaskId>();
      e.scenario = j.at("scenario").get<ScenarioId>();
      e.ideal = j.at("ideal_ms").get<Millis>();
      e.used_optimal = j.at("used_optimal").get<bool>();
      for (const auto& w : j.at("weights")) e.weights[w.at(0).get<SubtaskId>()] = w.at(1).get<Millis>();
      e.critical.ids = j.at("critical").get<std::vector<SubtaskId>>();
      for (SubtaskId id : e.critical.ids) {
        auto w = e.weights.find(id);
        if (w == e.weights.end()) throw StoreFormatError("critical s" + std::to_string(id) + " has no weight");
        e.critical.weights[id] = w->second;
      }
      e.extraction_sequence = j.at("extraction_sequence").get<std::vector<SubtaskId>>();
      e.init_order = j.at("init_order").get<LoadOrder>();
      e.stored_order = j.at("load_order").get<LoadOrder>();
      e.full_load_order = j.at("full_load_order").get<LoadOrder>();
      e.full_makespan = j.at("full_makespan_ms").get<Millis>();
      e.stored_schedule = schedule_from_json(j.at("schedule"));
      check_entry(e);
      store.entries.push_back(std::move(e));
    }
  } catch (const ojson::exception& e) {
    throw StoreFormatError(std::string("malformed store: ") + e.what());
  }
  return store;
}

ScheduleStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read store '" + path.string() + "'");
  return load_store(in);
}

ScheduleStore load_store(const std::filesystem::path& path, Millis expected_latency) {
  auto store = load_store(path);
  if (std::abs(store.latency - expected_latency) > kTimeEps) {
    std::ostringstream os;
    os << "store '" << path.string() << "' was built for latency " << store.latency
       << " ms but the simulation uses " << expected_latency << " ms";
    throw LatencyMismatch(os.str());
  }
  return store;
}

}  // namespace drhw
