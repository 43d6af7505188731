#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "drhw/graph.hpp"

namespace drhw {

/// Workload document rejected; `line()` is 1-based (0 when not line-bound).
class WorkloadParseError : public Error {
 public:
  WorkloadParseError(int line, const std::string& message)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline constexpr const char* kWorkloadHeader = "drhw-workload 1";

/// Line-oriented workload format:
///
///   drhw-workload 1
///   description <free text>            (optional)
///   latency_ms <ms>                    (optional, default 4)
///   task <id>
///   scenario <id>
///   subtask <id> <exec_ms> <DRHW|ISP> <slot>
///   edge <pred> <succ>
///   order <slot> <id> <id> ...
///   feasible <scenario id per task, in task order>
///
/// `subtask`, `edge` and `order` belong to the most recent scenario. `#`
/// starts a comment. Every scenario is validated when it closes.
Workload parse_workload(std::istream& in);
Workload load_workload(const std::filesystem::path& path);

/// Deterministic writer; times use the shortest round-trip decimal form.
void write_workload(const Workload& workload, std::ostream& out);
void save_workload(const Workload& workload, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_ms(Millis value);

}  // namespace drhw
