#include "drhw/workload_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace drhw {

std::string format_ms(Millis value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

int parse_int(const std::string& tok, int line, const char* what) {
  int v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw WorkloadParseError(line, std::string("expected integer ") + what + ", got '" + tok + "'");
  return v;
}

Millis parse_ms(const std::string& tok, int line, const char* what) {
  double v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw WorkloadParseError(line, std::string("expected number ") + what + ", got '" + tok + "'");
  return v;
}

class Parser {
 public:
  Workload run(std::istream& in) {
    std::string raw;
    int line = 0;
    bool header = false;
    while (std::getline(in, raw)) {
      ++line;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      auto tok = split(raw);
      if (tok.empty()) continue;
      if (!header) {
        if (tok.size() != 2 || tok[0] != "drhw-workload")
          throw WorkloadParseError(line, std::string("expected header '") + kWorkloadHeader + "'");
        if (tok[1] != "1") throw WorkloadParseError(line, "unsupported workload version " + tok[1]);
        header = true;
        continue;
      }
      record(tok, raw, line);
    }
    if (!header) throw WorkloadParseError(line, "empty workload document");
    close_task(line);
    finish(line);
    return std::move(w_);
  }

 private:
  void record(const std::vector<std::string>& tok, const std::string& raw, int line) {
    const auto& key = tok[0];
    auto arity = [&](std::size_t n) {
      if (tok.size() != n)
        throw WorkloadParseError(line, "'" + key + "' takes " + std::to_string(n - 1) + " field(s)");
    };
    if (key == "description") {
      auto pos = raw.find("description") + std::string("description").size();
      auto text = raw.substr(pos);
      text.erase(0, text.find_first_not_of(" \t"));
      text.erase(text.find_last_not_of(" \t\r") + 1);
      w_.description = text;
    } else if (key == "latency_ms") {
      arity(2);
      w_.default_latency = parse_ms(tok[1], line, "latency");
      if (w_.default_latency < 0) throw WorkloadParseError(line, "latency must be >= 0");
    } else if (key == "task") {
      arity(2);
      close_task(line);
      int id = parse_int(tok[1], line, "task id");
      if (!task_ids_.insert(id).second) throw WorkloadParseError(line, "duplicate task id " + tok[1]);
      w_.tasks.push_back(Task{id, {}});
      task_line_ = line;
    } else if (key == "scenario") {
      arity(2);
      if (w_.tasks.empty()) throw WorkloadParseError(line, "scenario outside of a task");
      close_scenario();
      int id = parse_int(tok[1], line, "scenario id");
      auto& task = w_.tasks.back();
      if (task.find(id)) throw WorkloadParseError(line, "duplicate scenario id " + tok[1] + " in task " +
                                                            std::to_string(task.id));
      task.scenarios.push_back(Scenario{id, {}, {}});
      scenario_line_ = line;
      open_ = true;
    } else if (key == "subtask") {
      arity(5);
      auto& s = current(line);
      Subtask st;
      st.id = parse_int(tok[1], line, "subtask id");
      st.exec_ms = parse_ms(tok[2], line, "exec time");
      if (tok[3] == "DRHW")
        st.target = Target::Drhw;
      else if (tok[3] == "ISP")
        st.target = Target::Isp;
      else
        throw WorkloadParseError(line, "target must be DRHW or ISP, got '" + tok[3] + "'");
      st.slot = tok[4];
      s.graph.subtasks.push_back(st);
    } else if (key == "edge") {
      arity(3);
      auto& s = current(line);
      s.graph.edges.emplace_back(parse_int(tok[1], line, "pred id"), parse_int(tok[2], line, "succ id"));
    } else if (key == "order") {
      if (tok.size() < 2) throw WorkloadParseError(line, "'order' needs a PE name");
      auto& s = current(line);
      if (s.schedule.per_pe.count(tok[1])) throw WorkloadParseError(line, "duplicate order for PE " + tok[1]);
      auto& seq = s.schedule.per_pe[tok[1]];
      for (std::size_t k = 2; k < tok.size(); ++k) seq.push_back(parse_int(tok[k], line, "subtask id"));
    } else if (key == "feasible") {
      close_task(line);
      Combination c;
      for (std::size_t k = 1; k < tok.size(); ++k) c.push_back(parse_int(tok[k], line, "scenario id"));
      if (!w_.feasible_combinations) w_.feasible_combinations.emplace();
      w_.feasible_combinations->push_back(std::move(c));
      feasible_lines_.push_back(line);
    } else {
      throw WorkloadParseError(line, "unknown record '" + key + "'");
    }
  }

  Scenario& current(int line) {
    if (!open_) throw WorkloadParseError(line, "record outside of a scenario");
    return w_.tasks.back().scenarios.back();
  }

  void close_scenario() {
    if (!open_) return;
    open_ = false;
    const auto& task = w_.tasks.back();
    const auto& s = task.scenarios.back();
    auto report = validate(s);
    if (report.empty()) return;
    std::string msg = "task " + std::to_string(task.id) + " scenario " + std::to_string(s.id) + ": ";
    for (std::size_t i = 0; i < report.size(); ++i) {
      if (i) msg += "; ";
      msg += report[i].kind + ": " + report[i].message;
    }
    throw WorkloadParseError(scenario_line_, msg);
  }

  void close_task(int) {
    close_scenario();
    if (!w_.tasks.empty() && w_.tasks.back().scenarios.empty())
      throw WorkloadParseError(task_line_, "task " + std::to_string(w_.tasks.back().id) + " has no scenario");
  }

  void finish(int line) {
    if (w_.tasks.empty()) throw WorkloadParseError(line, "workload has no task");
    if (!w_.feasible_combinations) return;
    for (std::size_t k = 0; k < w_.feasible_combinations->size(); ++k) {
      const auto& c = (*w_.feasible_combinations)[k];
      if (c.size() != w_.tasks.size())
        throw WorkloadParseError(feasible_lines_[k], "feasible combination must name one scenario per task");
      for (std::size_t t = 0; t < c.size(); ++t)
        if (!w_.tasks[t].find(c[t]))
          throw WorkloadParseError(feasible_lines_[k], "task " + std::to_string(w_.tasks[t].id) +
                                                           " has no scenario " + std::to_string(c[t]));
    }
  }

  Workload w_;
  std::set<int> task_ids_;
  bool open_ = false;
  int task_line_ = 0, scenario_line_ = 0;
  std::vector<int> feasible_lines_;
};

}  // namespace

Workload parse_workload(std::istream& in) { return Parser().run(in); }

Workload load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw WorkloadParseError(0, "cannot read workload '" + path.string() + "'");
  return parse_workload(in);
}

void write_workload(const Workload& w, std::ostream& out) {
  out << kWorkloadHeader << '\n';
  if (!w.description.empty()) out << "description " << w.description << '\n';
  out << "latency_ms " << format_ms(w.default_latency) << '\n';
  for (const auto& t : w.tasks) {
    out << "task " << t.id << '\n';
    for (const auto& s : t.scenarios) {
      out << "scenario " << s.id << '\n';
      for (const auto& st : s.graph.subtasks)
        out << "subtask " << st.id << ' ' << format_ms(st.exec_ms) << ' '
            << (st.target == Target::Drhw ? "DRHW" : "ISP") << ' ' << st.slot << '\n';
      for (const auto& [p, q] : s.graph.edges) out << "edge " << p << ' ' << q << '\n';
      for (const auto& [pe, seq] : s.schedule.per_pe) {
        out << "order " << pe;
        for (SubtaskId id : seq) out << ' ' << id;
        out << '\n';
      }
    }
  }
  if (w.feasible_combinations)
    for (const auto& c : *w.feasible_combinations) {
      out << "feasible";
      for (ScenarioId id : c) out << ' ' << id;
      out << '\n';
    }
}

void save_workload(const Workload& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write workload '" + path.string() + "'");
  write_workload(w, out);
}

}  // namespace drhw
