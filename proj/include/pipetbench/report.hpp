#ifndef PIPETBENCH_REPORT_HPP
#define PIPETBENCH_REPORT_HPP

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <vector>

#include "json.hpp"
#include "pipetbench/sim.hpp"

namespace pipetbench {

inline nlohmann::ordered_json run_json(const RunMetrics& m) {
  return {{"attempted", m.attempted},
          {"successes", m.successes},
          {"gave_up", m.gave_up},
          {"insert_failed", m.insert_failed},
          {"unreachable", m.unreachable},
          {"skipped_empty", m.skipped_empty},
          {"total_steps", m.total_steps},
          {"average_steps", m.average_steps()},
          {"max_infeasible", m.max_infeasible},
          {"teach_rms_mm", m.teach_rms * 1e3},
          {"max_drift_mm", m.max_drift * 1e3},
          {"planning_failures", m.planning_failures}};
}

/// Aggregate over a batch plus one entry per trial.
inline nlohmann::ordered_json batch_json(const std::vector<RunMetrics>& runs, const char* mode) {
  const BatchSummary b = summarize(runs);
  std::size_t perfect = 0, gave_up = 0, insert_failed = 0, unreachable = 0, planning_failures = 0;
  double max_drift = 0.0;
  nlohmann::ordered_json trials = nlohmann::ordered_json::array();
  for (const RunMetrics& m : runs) {
    if (m.attempted > 0 && m.successes == m.attempted) ++perfect;
    gave_up += m.gave_up;
    insert_failed += m.insert_failed;
    unreachable += m.unreachable;
    planning_failures += m.planning_failures;
    max_drift = std::max(max_drift, m.max_drift);
    trials.push_back(run_json(m));
  }
  return {{"mode", mode},
          {"trials", b.trials},
          {"attempted", b.attempted},
          {"successes", b.successes},
          {"success_rate", b.success_fraction()},
          {"average_steps", b.average_steps()},
          {"perfect_runs", perfect},
          {"gave_up", gave_up},
          {"insert_failed", insert_failed},
          {"unreachable", unreachable},
          {"planning_failures", planning_failures},
          {"max_infeasible", b.max_infeasible},
          {"max_drift_mm", max_drift * 1e3},
          {"per_trial", trials}};
}

inline void write_tip_csv(std::ostream& os, const RunMetrics& m) {
  os << "tip_id,row,col,outcome,steps,infeasible_goals,initial_deviation_mm,final_deviation_mm,bounces,cycle_time_s\n";
  std::vector<const TipRecord*> order;
  for (const auto& t : m.tips) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const TipRecord* a, const TipRecord* b) { return a->tip_id < b->tip_id; });
  for (const TipRecord* t : order) {
    os << t->tip_id << ',' << t->slot.row << ',' << t->slot.col << ',' << to_string(t->outcome) << ',' << t->steps
       << ',' << t->infeasible_goals << ',' << t->initial_deviation * 1e3 << ',' << t->final_deviation * 1e3 << ','
       << t->bounces << ',' << t->cycle_time << '\n';
  }
}

}  // namespace pipetbench

#endif  // PIPETBENCH_REPORT_HPP
