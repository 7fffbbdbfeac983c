#pragma once

// Per-agent feedback stack for the lifted unicycle
//   x' = v cos psi, y' = v sin psi, psi' = omega, v' = a, z' = v_z, v_z' = a_z.
// The lifted coordinate z addresses the curve point gamma(z / K_L). Path
// following uses transverse feedback linearization on the outputs
// (e_n, e_t, z - z_ref); near the assigned vertex a pose regulator takes
// over, and a repulsive avoidance law is blended in around neighbours.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "rigidform/curve.hpp"
#include "rigidform/formation.hpp"

namespace rigidform {

struct LiftedAgentState {
  Vec2 p = Vec2::Zero();
  double psi = 0.0;
  double v = 0.0;
  double z = 0.0;
  double v_z = 0.0;
  double revs = 0.0;   // completed revolutions, derived from z
  double sigma = 0.0;  // last blend value, read by neighbours
};

enum class BlendStrategy { Product, AntiDeadlock };

struct ControllerParams {
  Eigen::Vector3d K_p{15.0, 15.0, 3.0};
  Eigen::Vector3d K_d{10.0, 10.0, 3.0};
  double k_p = 3.0;
  double k_v = 4.0;
  double k_psi = 5.0;
  double k_z = 2.0;
  double K_L = 1.0;  // lifted length per unit of curve parameter
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
  double v_min = 0.025;
  double v_ref = 0.5;        // mean travel speed of the reference sweep
  double omega_ref = 0.5;    // reference parameter rate (rad/s)
  double v_max = 2.0;
  double ref_blend = 0.5;    // half-width (rad) of the reference slow-down at the lap target
  // Above this sigma an agent's own activation radius shrinks to
  // shrink_radius_factor * d_safe.
  double shrink_sigma = 0.85;
  double shrink_radius_factor = 1.5;
  double sensing_factor = 2.0;  // sensing radius in units of d_ao
  BlendStrategy blend = BlendStrategy::AntiDeadlock;

  void validate() const;
};

struct ControlOutput {
  double a = 0.0;
  double omega = 0.0;
  double a_z = 0.0;
  double sigma = 0.0;
  double alpha = 0.0;
  double duty = 0.0;

  Eigen::Vector3d u() const { return {a, omega, a_z}; }
};

struct AgentTarget {
  int vertex = 0;  // index into the formation's vertex list
  double theta = 0.0;
  Vec2 point = Vec2::Zero();
  double heading = 0.0;
  double z_start = 0.0;   // lifted coordinate at assignment time
  double z_target = 0.0;  // lifted coordinate at which the sweep ends on the vertex
};

struct FormationAssignment {
  std::vector<AgentTarget> targets;  // indexed by agent
  double total_distance = 0.0;       // along-curve forward distance of the chosen matching
  int offset = 0;
};

// Lifted reference z_ref(t) and its first two derivatives.
struct ReferenceSample {
  double z = 0.0;
  double dz = 0.0;
  double ddz = 0.0;
};

// Advances at K_L * omega_ref from z_start and eases into z_target with a
// quadratic blend, so the reference is C1 and comes to rest on the vertex.
ReferenceSample lifted_reference(const AgentTarget& target, const ControllerParams& params, double t);
// Unbounded constant-rate reference from z_start.
ReferenceSample sweep_reference(double z_start, const ControllerParams& params, double t);

struct TransverseOutputs {
  double e_n = 0.0, e_t = 0.0, h3 = 0.0;
  double de_n = 0.0, de_t = 0.0, dh3 = 0.0;
  double parameter = 0.0;  // s = z / K_L (after any singular-point fallback)
  FrenetFrame frame;
  double speed_rate = 0.0;    // d|gamma'|/ds
  double turn_rate = 0.0;     // d(tangent angle)/ds = signed curvature * |gamma'|
  double turn_accel = 0.0;    // d(turn_rate)/ds
  double heading_error = 0.0; // psi - tangent angle, wrapped
};

TransverseOutputs transverse_outputs(const LiftedAgentState& state, const Curve& curve, double K_L,
                                     const ReferenceSample& ref = {});

// Rows (e_n, e_t, h3), columns (a, omega, a_z); det = -v.
Eigen::Matrix3d decoupling_matrix(const LiftedAgentState& state, const Curve& curve, double K_L);
Eigen::Matrix3d decoupling_matrix(const LiftedAgentState& state, const TransverseOutputs& out, double K_L);

// Second output derivative with zero input.
Eigen::Vector3d output_drift(const LiftedAgentState& state, const TransverseOutputs& out, double K_L,
                             const ReferenceSample& ref);

ControlOutput tfl_control(const LiftedAgentState& state, const Curve& curve, const ControllerParams& params,
                          const ReferenceSample& ref);
ControlOutput pose_control(const LiftedAgentState& state, const AgentTarget& target, const ControllerParams& params);

// Smoothstep on [0, 1] with clamping outside.
double beta(double xi);
double blend_sigma(double revs, double d, const ControllerParams& params);
double revolutions(const LiftedAgentState& state, const AgentTarget& target, const ControllerParams& params);

struct AvoidanceForce {
  Vec2 force = Vec2::Zero();
  double duty = 0.0;
  double alpha = 0.0;  // proximity-weighted activation, max over neighbours
  int neighbours = 0;
};

// Repulsion on agent i from every other agent within the sensing radius.
// Throws CollisionFault when two agents coincide.
AvoidanceForce avoidance_force(int i, std::span<const LiftedAgentState> states, const ControllerParams& params);
ControlOutput avoidance_control(const LiftedAgentState& state, const Vec2& force, const ControllerParams& params);

// Complete control of agent i from one synchronous snapshot at time t. The
// snapshot's revs/sigma fields of agent i are ignored and recomputed.
ControlOutput final_control(int i, std::span<const LiftedAgentState> states, const Curve& curve,
                            const FormationAssignment& assignment, const ControllerParams& params, double t);

// Cyclic-order matching of agents to formation vertices and the lap plan:
// each agent sweeps at least revs_target revolutions and stops on its vertex
// without overtaking the agent ahead of it.
FormationAssignment assign_vertices(std::span<const LiftedAgentState> agents, const FormationSolution& solution,
                                    const Curve& curve, const ControllerParams& params);

}  // namespace rigidform
