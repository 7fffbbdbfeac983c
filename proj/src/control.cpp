#include "rigidform/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/LU>

#include "rigidform/errors.hpp"

namespace rigidform {

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError("controller." + field + ": " + why);
}

// Clamped sign with a linear ramp of width v_min around zero.
double soft_sign(double v, double v_min) { return std::clamp(v / v_min, -1.0, 1.0); }

// Heading error modulo pi: facing either way along the tangent is aligned.
double axial_error(double psi, double target) { return 0.5 * wrap_angle(2.0 * (psi - target)); }

// Smooth min(q, cap) with a quadratic blend on [cap - b, cap + b].
struct Eased {
  double value, rate, accel;
};

Eased ease_to(double q, double cap, double b) {
  if (q <= cap - b) return {q, 1.0, 0.0};
  if (q >= cap + b) return {cap, 0.0, 0.0};
  const double u = cap + b - q;
  return {cap - u * u / (4.0 * b), u / (2.0 * b), -1.0 / (2.0 * b)};
}

}  // namespace

void ControllerParams::validate() const {
  for (int k = 0; k < 3; ++k) {
    require(K_p[k] > 0.0, "K_p", "gains must be positive");
    require(K_d[k] > 0.0, "K_d", "gains must be positive");
  }
  require(k_p > 0.0, "k_p", "must be positive");
  require(k_v > 0.0, "k_v", "must be positive");
  require(k_psi > 0.0, "k_psi", "must be positive");
  require(k_z > 0.0, "k_z", "must be positive");
  require(K_L > 0.0, "K_L", "must be positive");
  require(revs_target > 0.0, "revs_target", "must be positive");
  require(d_sw > 0.0, "d_sw", "must be positive");
  require(d_safe > 0.0, "d_safe", "must be positive");
  require(d_safe < d_ao, "d_ao", "must exceed d_safe");
  require(k_avoid > 0.0, "k_avoid", "must be positive");
  require(k_va > 0.0, "k_va", "must be positive");
  require(k_wa > 0.0, "k_wa", "must be positive");
  require(k_za > 0.0, "k_za", "must be positive");
  require(sigma_accept > 0.0 && sigma_accept <= 1.0, "sigma_accept", "must lie in (0, 1]");
  require(delta_sigma > 0.0, "delta_sigma", "must be positive");
  require(codir_factor > 0.0 && codir_factor <= 1.0, "codir_factor", "must lie in (0, 1]");
  require(v_min > 0.0, "v_min", "must be positive");
  require(v_ref > 0.0, "v_ref", "must be positive");
  require(omega_ref > 0.0, "omega_ref", "must be positive");
  require(v_max > 0.0, "v_max", "must be positive");
  require(ref_blend > 0.0, "ref_blend", "must be positive");
  require(shrink_sigma > 0.0 && shrink_sigma < 1.0, "shrink_sigma", "must lie in (0, 1)");
  require(shrink_radius_factor * d_safe > d_safe, "shrink_radius_factor", "must exceed 1");
  require(sensing_factor >= 1.0, "sensing_factor", "must be at least 1");
}

ReferenceSample sweep_reference(double z_start, const ControllerParams& params, double t) {
  const double rate = params.K_L * params.omega_ref;
  return {z_start + rate * t, rate, 0.0};
}

ReferenceSample lifted_reference(const AgentTarget& target, const ControllerParams& params, double t) {
  const double span = (target.z_target - target.z_start) / params.K_L;
  if (span <= 0.0) return {target.z_start, 0.0, 0.0};
  const double b = std::min(params.ref_blend, 0.5 * span);
  const double w = params.omega_ref;
  const Eased e = ease_to(w * t, span, b);
  return {target.z_start + params.K_L * e.value, params.K_L * w * e.rate, params.K_L * w * w * e.accel};
}

TransverseOutputs transverse_outputs(const LiftedAgentState& state, const Curve& curve, double K_L,
                                     const ReferenceSample& ref) {
  TransverseOutputs out;
  out.frame = curve.frenet(state.z / K_L);
  const double s = out.frame.parameter;
  out.parameter = s;
  const CurveJet j = curve.jet(s);
  const double g = out.frame.speed;
  const double g2 = g * g;
  const double c12 = cross(j.d1, j.d2);
  const double dot12 = j.d1.dot(j.d2);
  out.speed_rate = dot12 / g;
  out.turn_rate = c12 / g2;
  out.turn_accel = cross(j.d1, j.d3) / g2 - 2.0 * c12 * dot12 / (g2 * g2);
  out.heading_error = wrap_angle(state.psi - out.frame.tangent_angle);

  const Vec2 d = state.p - j.point;
  const double sdot = state.v_z / K_L;
  const double G = out.turn_rate;
  out.e_n = out.frame.normal.dot(d);
  out.e_t = out.frame.tangent.dot(d);
  out.h3 = state.z - ref.z;
  out.de_n = state.v * std::sin(out.heading_error) - G * sdot * out.e_t;
  out.de_t = state.v * std::cos(out.heading_error) - g * sdot + G * sdot * out.e_n;
  out.dh3 = state.v_z - ref.dz;
  return out;
}

Eigen::Matrix3d decoupling_matrix(const LiftedAgentState& state, const TransverseOutputs& out, double K_L) {
  const double sd = std::sin(out.heading_error), cd = std::cos(out.heading_error);
  const double G = out.turn_rate, g = out.frame.speed;
  Eigen::Matrix3d D;
  D << sd, state.v * cd, -G * out.e_t / K_L,
       cd, -state.v * sd, (G * out.e_n - g) / K_L,
       0.0, 0.0, 1.0;
  return D;
}

Eigen::Matrix3d decoupling_matrix(const LiftedAgentState& state, const Curve& curve, double K_L) {
  return decoupling_matrix(state, transverse_outputs(state, curve, K_L), K_L);
}

Eigen::Vector3d output_drift(const LiftedAgentState& state, const TransverseOutputs& out, double K_L,
                             const ReferenceSample& ref) {
  const double sdot = state.v_z / K_L;
  const double G = out.turn_rate, dG = out.turn_accel, dg = out.speed_rate;
  const double sd = std::sin(out.heading_error), cd = std::cos(out.heading_error);
  const double vG = state.v * G * sdot;
  return {-dG * sdot * sdot * out.e_t - G * sdot * out.de_t - vG * cd,
          dG * sdot * sdot * out.e_n + G * sdot * out.de_n + vG * sd - dg * sdot * sdot,
          -ref.ddz};
}

ControlOutput tfl_control(const LiftedAgentState& state, const Curve& curve, const ControllerParams& params,
                          const ReferenceSample& ref) {
  const TransverseOutputs out = transverse_outputs(state, curve, params.K_L, ref);
  const Eigen::Vector3d y(out.e_n, out.e_t, out.h3);
  const Eigen::Vector3d dy(out.de_n, out.de_t, out.dh3);
  const Eigen::Vector3d virt = -params.K_p.cwiseProduct(y) - params.K_d.cwiseProduct(dy);
  const Eigen::Vector3d rhs = virt - output_drift(state, out, params.K_L, ref);

  LiftedAgentState reg = state;
  const double sign = state.v < 0.0 ? -1.0 : 1.0;
  reg.v = sign * std::max(std::abs(state.v), params.v_min);
  const Eigen::Vector3d u = decoupling_matrix(reg, out, params.K_L).partialPivLu().solve(rhs);
  return {u[0], u[1], u[2], 0.0, 0.0, 0.0};
}

ControlOutput pose_control(const LiftedAgentState& state, const AgentTarget& target, const ControllerParams& params) {
  const Vec2 h(std::cos(state.psi), std::sin(state.psi));
  ControlOutput u;
  u.a = -params.k_v * state.v - params.k_p * (state.p - target.point).dot(h);
  u.omega = -params.k_psi * axial_error(state.psi, target.heading);
  u.a_z = -params.k_z * state.v_z;
  u.sigma = 1.0;
  return u;
}

double beta(double xi) {
  const double x = std::clamp(xi, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

double blend_sigma(double revs, double d, const ControllerParams& params) {
  const double sweep = beta(revs / params.revs_target);
  const double near = 1.0 - beta(d / params.d_sw);
  const double product = sweep * near;
  if (params.blend == BlendStrategy::Product) return product;
  const double w = beta(std::abs(sweep - near));
  return (1.0 - w) * product + w * std::min(sweep, near);
}

double revolutions(const LiftedAgentState& state, const AgentTarget& target, const ControllerParams& params) {
  return std::max(0.0, (state.z - target.z_start) / (kTwoPi * params.K_L));
}

AvoidanceForce avoidance_force(int i, std::span<const LiftedAgentState> states, const ControllerParams& params) {
  const LiftedAgentState& me = states[i];
  AvoidanceForce out;
  out.duty = beta((params.sigma_accept - me.sigma) / params.delta_sigma);
  const double sensing = params.sensing_factor * params.d_ao;
  // A nearly settled agent works with a smaller activation radius; the switch
  // is ramped over sigma in [shrink_sigma, shrink_sigma + 0.1] for continuity.
  const double settled = beta((me.sigma - params.shrink_sigma) / 0.1);
  const double radius = params.d_ao - (params.d_ao - params.shrink_radius_factor * params.d_safe) * settled;
  for (int j = 0; j < static_cast<int>(states.size()); ++j) {
    if (j == i) continue;
    const Vec2 rel = me.p - states[j].p;
    const double r = rel.norm();
    if (r == 0.0) throw CollisionFault("agents " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
    if (r > sensing) continue;
    ++out.neighbours;
    if (r >= radius) continue;
    const double cos_motion = std::cos(me.psi - states[j].psi) * soft_sign(me.v, params.v_min) *
                              soft_sign(states[j].v, params.v_min);
    const double codir = 1.0 - (1.0 - params.codir_factor) * beta((cos_motion + 0.1) / 0.2);
    const double psi_ij = params.k_avoid * (1.0 / r - 1.0 / radius) / (r * r);
    out.force += codir * psi_ij * rel;
    out.alpha = std::max(out.alpha, out.duty * beta((radius - r) / (radius - params.d_safe)));
  }
  out.force *= out.duty;
  return out;
}

ControlOutput avoidance_control(const LiftedAgentState& state, const Vec2& force, const ControllerParams& params) {
  const double psi_des = std::atan2(force.y(), force.x());
  const double err = wrap_angle(psi_des - state.psi);
  const double v_des = params.v_max * std::cos(err);
  ControlOutput u;
  u.a = params.k_va * (v_des - state.v);
  u.omega = params.k_wa * err;
  u.a_z = -params.k_za * state.v_z;
  return u;
}

ControlOutput final_control(int i, std::span<const LiftedAgentState> states, const Curve& curve,
                            const FormationAssignment& assignment, const ControllerParams& params, double t) {
  const AgentTarget& target = assignment.targets.at(i);
  LiftedAgentState me = states[i];
  me.revs = revolutions(me, target, params);
  me.sigma = blend_sigma(me.revs, (me.p - target.point).norm(), params);

  const ControlOutput tfl = tfl_control(me, curve, params, lifted_reference(target, params, t));
  const ControlOutput pose = pose_control(me, target, params);
  const double s = me.sigma;
  Eigen::Vector3d u = (1.0 - s) * tfl.u() + s * pose.u();

  std::vector<LiftedAgentState> snapshot(states.begin(), states.end());
  snapshot[i] = me;
  const AvoidanceForce rep = avoidance_force(i, snapshot, params);
  double alpha = 0.0;
  if (rep.alpha > 0.0 && rep.force.squaredNorm() > 0.0) {
    alpha = rep.alpha;
    u = (1.0 - alpha) * u + alpha * avoidance_control(me, rep.force, params).u();
  }
  return {u[0], u[1], u[2], s, alpha, rep.duty};
}

namespace {

double forward_length(const Curve& curve, double from, double to) {
  const double gap = wrap_parameter(to - from);
  return gap == 0.0 ? 0.0 : curve.arclength(from, from + gap);
}

}  // namespace

FormationAssignment assign_vertices(std::span<const LiftedAgentState> agents, const FormationSolution& solution,
                                    const Curve& curve, const ControllerParams& params) {
  const int n = static_cast<int>(agents.size());
  if (n == 0 || n != static_cast<int>(solution.vertices.size()))
    throw std::invalid_argument("assign_vertices: " + std::to_string(n) + " agents for " +
                                std::to_string(solution.vertices.size()) + " vertices");

  std::vector<double> base(n);
  for (int i = 0; i < n; ++i) base[i] = wrap_parameter(agents[i].z / params.K_L);
  std::vector<int> agent_order(n), vertex_order(n);
  std::iota(agent_order.begin(), agent_order.end(), 0);
  std::iota(vertex_order.begin(), vertex_order.end(), 0);
  std::stable_sort(agent_order.begin(), agent_order.end(), [&](int a, int b) { return base[a] < base[b]; });
  std::stable_sort(vertex_order.begin(), vertex_order.end(),
                   [&](int a, int b) { return wrap_parameter(solution.theta[a]) < wrap_parameter(solution.theta[b]); });

  FormationAssignment out;
  out.total_distance = std::numeric_limits<double>::infinity();
  for (int o = 0; o < n; ++o) {
    double total = 0.0;
    for (int k = 0; k < n; ++k)
      total += forward_length(curve, base[agent_order[k]], solution.theta[vertex_order[(k + o) % n]]);
    if (total < out.total_distance - 1e-12 * curve.length()) {
      out.total_distance = total;
      out.offset = o;
    }
  }

  // Lap plan in sorted order: end parameters F_k = base_k + span_k with
  // span_k >= 2 pi revs_target, F increasing and F_last < F_0 + 2 pi.
  std::vector<double> span(n);
  for (int k = 0; k < n; ++k) {
    const double th = wrap_parameter(solution.theta[vertex_order[(k + out.offset) % n]]);
    double sp = wrap_parameter(th - base[agent_order[k]]);
    while (sp < kTwoPi * params.revs_target) sp += kTwoPi;
    span[k] = sp;
  }
  auto end_of = [&](int k) { return base[agent_order[k]] + span[k]; };
  for (int guard = 0; guard < 4 * n + 4; ++guard) {
    for (int k = 1; k < n; ++k)
      while (end_of(k) <= end_of(k - 1)) span[k] += kTwoPi;
    if (n == 1 || end_of(n - 1) < end_of(0) + kTwoPi) break;
    span[0] += kTwoPi;
  }

  out.targets.resize(n);
  for (int k = 0; k < n; ++k) {
    const int agent = agent_order[k];
    const int vertex = vertex_order[(k + out.offset) % n];
    AgentTarget& tg = out.targets[agent];
    tg.vertex = vertex;
    tg.theta = wrap_parameter(solution.theta[vertex]);
    tg.point = solution.vertices[vertex];
    tg.z_start = agents[agent].z;
    tg.z_target = agents[agent].z + params.K_L * span[k];
    tg.heading = curve.frenet(tg.theta).tangent_angle;
  }
  return out;
}

}  // namespace rigidform
