#pragma once

// File emission for the command-line tool. Every writer has an ostream form
// (used by the tests) and the CLI wraps them with write_file().

#include <functional>
#include <iosfwd>
#include <string>

#include "rigidform/curve.hpp"
#include "rigidform/formation.hpp"
#include "rigidform/mission.hpp"

namespace rigidform {

// Shortest round-trip representation used in every CSV and JSON number.
std::string format_number(double x);

// Opens `path` for writing, runs `body`, throws std::runtime_error on failure.
void write_file(const std::string& path, const std::function<void(std::ostream&)>& body);

void write_solution_json(std::ostream& os, const FormationSolution& solution, const Curve& curve,
                         const FinderConfig& config);
// start, kind, iterations, cost, residual_norm, center_x, center_y, mean_side, feasible, convex, accepted, stop
void write_starts_csv(std::ostream& os, const MultistartResult& result);
// start, iteration, cost
void write_cost_trace_csv(std::ostream& os, const MultistartResult& result);

// t, min_distance, mean_adherence, sigma_<i>..., vertex_error_<i>...
void write_metrics_csv(std::ostream& os, const MissionMetrics& metrics);
// t, agent, x, y, psi, v, z, v_z, revs, sigma, alpha, a, omega, a_z
void write_trajectory_csv(std::ostream& os, const MissionResult& result);
// Curve, trails up to the snapshot time, agents with headings, targets and the formation polygon.
void write_snapshot_svg(std::ostream& os, const Curve& curve, const MissionResult& result, const Snapshot& snapshot);
void write_mission_summary_json(std::ostream& os, const MissionResult& result, const MissionConfig& config);

// s, x, y, tangent_x, tangent_y, normal_x, normal_y, kappa, signed_kappa, speed.
// `rows` samples over [0, 2*pi] inclusive, so the first and last rows coincide.
void write_curve_samples_csv(std::ostream& os, const Curve& curve, int rows);

}  // namespace rigidform
