#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drhw/graph.hpp"

namespace drhw {

struct GenParams {
  int min_subtasks = 4;
  int max_subtasks = 10;
  Millis exec_low = 1;
  Millis exec_high = 20;
  double edge_density = 0.3;  // probability of an edge between two subtasks in topological order
  double drhw_fraction = 1.0;
  int slots = 3;  // DRHW virtual slots available to the placement
  int isps = 1;   // instruction-set processors available to the placement
  int scenarios = 1;
  Millis granularity = 0.25;  // exec times are multiples of this

  void check() const;  // throws std::invalid_argument
};

/// Random DAG with the requested statistics. Scenarios of a task share the
/// subtask ids, edges and targets; exec times are drawn per scenario. The
/// initial schedule comes from a weight-priority list placement.
Task gen_task(const GenParams& params, std::uint64_t seed, TaskId id = 1);

/// List placement onto `slots` DRHW slots and `isps` processors (zero
/// latency). Slots are named A, B, ...; processors ISP0, ISP1, ...
InitialSchedule place_subtasks(SubtaskGraph& graph, int slots, int isps);

/// Four tasks shaped after the multimedia benchmark set: pattern recognition,
/// JPEG decoder, parallel JPEG decoder and an MPEG encoder with three
/// scenarios. Graphs are synthetic; the generator matches subtask counts,
/// ideal execution times and the all-loaded overhead.
Workload preset_table1(std::uint64_t seed);

/// Six small dynamic tasks (10 subtasks, 40 scenarios, 20 feasible
/// combinations) shaped after a 3D rendering pipeline.
Workload preset_pocketgl(std::uint64_t seed);

/// Four-subtask chain on two slots, exec 10 ms each.
Workload preset_chain4();

struct PresetTarget {
  std::string name;
  int subtasks;
  Millis ideal;
  double overhead_pct;  // all-loaded, without prefetch, at 4 ms latency
  double prefetch_pct;  // all-loaded, optimal prefetch; a soft target
};
const std::vector<PresetTarget>& table1_targets();

/// Mean all-loaded no-prefetch overhead over the scenarios of a task.
double no_prefetch_overhead_pct(const Task& task, Millis latency);

/// Mean all-loaded overhead under the optimal prefetch order.
double optimal_prefetch_overhead_pct(const Task& task, Millis latency);

std::vector<std::string> preset_names();
Workload make_preset(const std::string& name, std::uint64_t seed);

}  // namespace drhw
