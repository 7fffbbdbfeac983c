#pragma once

// Fixed-step closed-loop simulation of the sweep-then-form mission.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rigidform/control.hpp"
#include "rigidform/curve.hpp"
#include "rigidform/formation.hpp"

namespace rigidform {

inline constexpr double kMaxTimeStep = 0.02;

// Controller settings with distances expressed as fractions of the curve
// scale; resolved into absolute ControllerParams once the curve is known.
struct ControlSettings {
  Eigen::Vector3d K_p{15.0, 15.0, 3.0};
  Eigen::Vector3d K_d{10.0, 10.0, 3.0};
  double k_p = 3.0;
  double k_v = 4.0;
  double k_psi = 5.0;
  double k_z = 2.0;
  double revs_target = 1.0;
  double d_sw = 0.15;
  double d_ao = 0.12;
  double d_safe = 0.06;
  double k_avoid = 0.8;
  double k_va = 5.0;
  double k_wa = 10.0;
  double k_za = 1.0;
  double sigma_accept = 0.7;
  double delta_sigma = 0.2;
  double codir_factor = 0.3;
  double omega_ref = 0.5;
  double v_min_factor = 0.05;  // v_min = v_min_factor * v_ref
  double v_max_factor = 2.0;   // v_max = v_max_factor * omega_ref * max |gamma'|
  double ref_blend = 0.5;
  double shrink_sigma = 0.85;
  double shrink_radius_factor = 1.5;
  double sensing_factor = 2.0;
  BlendStrategy blend = BlendStrategy::AntiDeadlock;

  bool operator==(const ControlSettings&) const = default;
};

// K_L = scale / 2 pi, v_ref = omega_ref * length / 2 pi.
ControllerParams resolve_controller(const ControlSettings& settings, const Curve& curve);

struct InitialConditionSpec {
  double normal_offset = 0.1;         // offsets drawn from +-normal_offset * scale
  double heading_perturbation = 0.3;  // rad
  double min_separation = 1.0;        // in units of d_ao; resampled until met
  // Agents sweep in lockstep, so two agents whose addresses differ by D meet
  // wherever gamma(s + D) comes close to gamma(s) (self-crossings, both
  // sides of a cusp). Placements whose pairwise sweep clearance falls below
  // this many d_ao are resampled.
  double sweep_clearance = 1.0;

  bool operator==(const InitialConditionSpec&) const = default;
};

struct MissionConfig {
  CurveSpec curve{"deltoid", {}};
  int n = 4;
  std::optional<Vec2> target;
  FinderConfig finder;
  ControlSettings control;
  InitialConditionSpec init;
  double dt = 0.01;
  double horizon = 120.0;
  std::vector<double> snapshots{0.0, 20.0, 100.0};
  std::uint64_t seed = 1;  // finder uses seed, initial conditions use seed + 1

  void validate() const;
  bool operator==(const MissionConfig&) const = default;
};

struct MissionMetrics {
  std::vector<double> time;
  std::vector<double> min_distance;
  std::vector<double> adherence;                  // mean distance to the curve
  std::vector<std::vector<double>> sigma;         // [agent][step]
  std::vector<std::vector<double>> vertex_error;  // [agent][step]
  std::vector<double> final_vertex_error;
  double min_distance_overall = 0.0;
  double max_control = 0.0;
  bool collision = false;
  bool aborted = false;
  std::string abort_reason;
};

struct TrajectoryRow {
  double t = 0.0;
  int agent = 0;
  LiftedAgentState state;
  ControlOutput control;
};

struct Snapshot {
  double t = 0.0;
  std::vector<LiftedAgentState> states;
};

struct MissionResult {
  FormationSolution formation;
  FormationAssignment assignment;
  ControllerParams params;
  MissionMetrics metrics;
  std::vector<TrajectoryRow> trajectory;
  std::vector<Snapshot> snapshots;
  double scale = 0.0;
  bool formation_found = false;  // false: no feasible formation, nothing simulated
};

// One classical RK4 step of the lifted unicycle per agent with the controls
// held over the step. Throws SimulationAbort on a non-finite result and
// std::invalid_argument when dt is outside (0, kMaxTimeStep].
std::vector<LiftedAgentState> integrate_step(std::span<const LiftedAgentState> states,
                                             std::span<const ControlOutput> controls, double dt);

struct CurveProjection {
  double distance = 0.0;
  double parameter = 0.0;
  Vec2 point = Vec2::Zero();
};

// Nearest point on the curve: the best local minima of a uniform sample
// table, each refined by ternary search on its bracket.
class CurveProjector {
 public:
  explicit CurveProjector(const Curve& curve, int samples = 2048);
  CurveProjection project(const Vec2& p) const;

 private:
  const Curve* curve_;
  std::vector<double> params_;
  std::vector<Vec2> points_;
};

double distance_to_curve(const Vec2& p, const Curve& curve);

// min over s of |gamma(s + gap) - gamma(s)|, sampled on `samples` points.
double sweep_clearance(const Curve& curve, double gap, int samples = 1024);

std::vector<LiftedAgentState> initial_conditions(const Curve& curve, int n, const InitialConditionSpec& spec,
                                                 const ControllerParams& params, std::uint64_t seed);

MissionResult run_mission(const MissionConfig& config);

// Single agent tracking an unbounded constant-rate sweep with the path
// following law alone.
struct PathFollowingRun {
  std::vector<double> time;
  std::vector<double> adherence;
  std::vector<double> e_n;
  std::vector<double> e_t;
  std::vector<LiftedAgentState> states;
};

PathFollowingRun simulate_path_following(const Curve& curve, const LiftedAgentState& start,
                                         const ControllerParams& params, double dt, double horizon);

}  // namespace rigidform
