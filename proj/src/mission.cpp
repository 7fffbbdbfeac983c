#include "rigidform/mission.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "rigidform/errors.hpp"

namespace rigidform {

namespace {

using State6 = Eigen::Matrix<double, 6, 1>;

State6 pack(const LiftedAgentState& s) { return (State6() << s.p.x(), s.p.y(), s.psi, s.v, s.z, s.v_z).finished(); }

State6 rates(const State6& x, const ControlOutput& u) {
  return (State6() << x[3] * std::cos(x[2]), x[3] * std::sin(x[2]), u.omega, u.a, x[5], u.a_z).finished();
}

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError(field + ": " + why);
}

double min_pairwise(std::span<const LiftedAgentState> states) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < states.size(); ++i)
    for (size_t j = i + 1; j < states.size(); ++j) best = std::min(best, (states[i].p - states[j].p).norm());
  return best;
}

}  // namespace

ControllerParams resolve_controller(const ControlSettings& c, const Curve& curve) {
  const double scale = curve.scale();
  ControllerParams p;
  p.K_p = c.K_p;
  p.K_d = c.K_d;
  p.k_p = c.k_p;
  p.k_v = c.k_v;
  p.k_psi = c.k_psi;
  p.k_z = c.k_z;
  p.K_L = scale / kTwoPi;
  p.revs_target = c.revs_target;
  p.d_sw = c.d_sw * scale;
  p.d_ao = c.d_ao * scale;
  p.d_safe = c.d_safe * scale;
  p.k_avoid = c.k_avoid;
  p.k_va = c.k_va;
  p.k_wa = c.k_wa;
  p.k_za = c.k_za;
  p.sigma_accept = c.sigma_accept;
  p.delta_sigma = c.delta_sigma;
  p.codir_factor = c.codir_factor;
  p.omega_ref = c.omega_ref;
  p.v_ref = c.omega_ref * curve.length() / kTwoPi;
  p.v_min = c.v_min_factor * p.v_ref;
  p.v_max = c.v_max_factor * c.omega_ref * curve.max_speed();
  p.ref_blend = c.ref_blend;
  p.shrink_sigma = c.shrink_sigma;
  p.shrink_radius_factor = c.shrink_radius_factor;
  p.sensing_factor = c.sensing_factor;
  p.blend = c.blend;
  p.validate();
  return p;
}

void MissionConfig::validate() const {
  require(n >= 3, "n", "at least 3 agents are required");
  require(dt > 0.0 && dt <= kMaxTimeStep, "dt", "must lie in (0, " + std::to_string(kMaxTimeStep) + "]");
  require(horizon > 0.0, "horizon", "must be positive");
  require(init.normal_offset >= 0.0, "init.normal_offset", "must be non-negative");
  require(init.heading_perturbation >= 0.0, "init.heading_perturbation", "must be non-negative");
  require(init.sweep_clearance >= 0.0, "init.sweep_clearance", "must be non-negative");
  require(init.min_separation >= 0.0, "init.min_separation", "must be non-negative");
  for (double t : snapshots) require(t >= 0.0 && t <= horizon, "snapshots", "times must lie in [0, horizon]");
  FinderConfig f = finder;
  f.n = n;
  f.target = target;
  f.validate();
}

std::vector<LiftedAgentState> integrate_step(std::span<const LiftedAgentState> states,
                                             std::span<const ControlOutput> controls, double dt) {
  if (!(dt > 0.0 && dt <= kMaxTimeStep)) throw std::invalid_argument("integrate_step: dt out of range");
  if (states.size() != controls.size()) throw std::invalid_argument("integrate_step: one control per agent");
  std::vector<LiftedAgentState> out(states.begin(), states.end());
  for (size_t i = 0; i < states.size(); ++i) {
    const ControlOutput& u = controls[i];
    if (!std::isfinite(u.a) || !std::isfinite(u.omega) || !std::isfinite(u.a_z))
      throw SimulationAbort("non-finite control for agent " + std::to_string(i));
    const State6 x = pack(states[i]);
    const State6 k1 = rates(x, u);
    const State6 k2 = rates(x + 0.5 * dt * k1, u);
    const State6 k3 = rates(x + 0.5 * dt * k2, u);
    const State6 k4 = rates(x + dt * k3, u);
    const State6 y = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) throw SimulationAbort("non-finite state for agent " + std::to_string(i));
    out[i].p = y.head<2>();
    out[i].psi = y[2];
    out[i].v = y[3];
    out[i].z = y[4];
    out[i].v_z = y[5];
  }
  return out;
}

CurveProjector::CurveProjector(const Curve& curve, int samples) : curve_(&curve) {
  params_.resize(samples);
  points_.resize(samples);
  for (int k = 0; k < samples; ++k) {
    params_[k] = kTwoPi * k / samples;
    points_[k] = curve.eval(params_[k]);
  }
}

CurveProjection CurveProjector::project(const Vec2& p) const {
  const int m = static_cast<int>(points_.size());
  std::vector<double> d2(m);
  for (int k = 0; k < m; ++k) d2[k] = (points_[k] - p).squaredNorm();
  std::vector<int> minima;
  for (int k = 0; k < m; ++k)
    if (d2[k] <= d2[(k + m - 1) % m] && d2[k] <= d2[(k + 1) % m]) minima.push_back(k);
  std::sort(minima.begin(), minima.end(), [&](int a, int b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
  if (minima.size() > 4) minima.resize(4);

  const double h = kTwoPi / m;
  CurveProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (int k : minima) {
    double lo = params_[k] - h, hi = params_[k] + h;
    auto f = [&](double s) { return (curve_->eval(s) - p).squaredNorm(); };
    for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (f(m1) < f(m2)) hi = m2; else lo = m1;
    }
    const double s = 0.5 * (lo + hi);
    const Vec2 q = curve_->eval(s);
    const double dist = std::sqrt(std::min((q - p).squaredNorm(), d2[k]));
    if (dist < best.distance) {
      best.distance = dist;
      best.parameter = (q - p).squaredNorm() <= d2[k] ? wrap_parameter(s) : params_[k];
      best.point = (q - p).squaredNorm() <= d2[k] ? q : points_[k];
    }
  }
  return best;
}

double distance_to_curve(const Vec2& p, const Curve& curve) { return CurveProjector(curve).project(p).distance; }

double sweep_clearance(const Curve& curve, double gap, int samples) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double s = kTwoPi * k / samples;
    best = std::min(best, (curve.eval(s + gap) - curve.eval(s)).norm());
  }
  return best;
}

std::vector<LiftedAgentState> initial_conditions(const Curve& curve, int n, const InitialConditionSpec& spec,
                                                 const ControllerParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> param_dist(0.0, kTwoPi);
  const double scale = curve.scale();
  const CurveProjector projector(curve);

  auto clear_sweep = [&](const std::vector<LiftedAgentState>& agents) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double gap = (agents[j].z - agents[i].z) / params.K_L;
        if (sweep_clearance(curve, gap, 256) < spec.sweep_clearance * params.d_ao) return false;
      }
    return true;
  };

  std::vector<LiftedAgentState> agents(n);
  for (int attempt = 0; attempt < 20000; ++attempt) {
    for (int i = 0; i < n; ++i) {
      const FrenetFrame f = curve.frenet(param_dist(rng));
      LiftedAgentState& a = agents[i];
      a.p = curve.eval(f.parameter) + spec.normal_offset * scale * unit(rng) * f.normal;
      a.psi = wrap_angle(f.tangent_angle + spec.heading_perturbation * unit(rng));
      const CurveProjection proj = projector.project(a.p);
      a.z = params.K_L * proj.parameter;
      a.v = std::max(params.omega_ref * curve.deriv(proj.parameter, 1).norm(), params.v_min);
      a.v_z = params.K_L * params.omega_ref;
      a.revs = 0.0;
      a.sigma = 0.0;
    }
    if (min_pairwise(agents) < spec.min_separation * params.d_ao) continue;
    if (spec.sweep_clearance > 0.0 && !clear_sweep(agents)) continue;
    return agents;
  }
  throw ConfigError("init: could not place agents with the requested separation and sweep clearance");
}

MissionResult run_mission(const MissionConfig& config) {
  config.validate();
  MissionResult result;
  const Curve curve(config.curve);
  result.scale = curve.scale();

  FinderConfig finder = config.finder;
  finder.n = config.n;
  finder.target = config.target;
  finder.seed = config.seed;
  result.formation = multistart(curve, finder);
  result.params = resolve_controller(config.control, curve);
  if (!result.formation.feasible) return result;
  result.formation_found = true;
  const ControllerParams& params = result.params;

  std::vector<LiftedAgentState> states =
      initial_conditions(curve, config.n, config.init, params, config.seed + 1);
  result.assignment = assign_vertices(states, result.formation, curve, params);

  const int n = config.n;
  const long steps = std::lround(config.horizon / config.dt);
  const CurveProjector projector(curve);
  MissionMetrics& m = result.metrics;
  m.sigma.assign(n, {});
  m.vertex_error.assign(n, {});
  m.min_distance_overall = std::numeric_limits<double>::infinity();
  result.trajectory.reserve(static_cast<size_t>(steps + 1) * n);

  std::vector<long> snapshot_steps;
  for (double t : config.snapshots) snapshot_steps.push_back(std::lround(t / config.dt));

  std::vector<ControlOutput> controls(n);
  for (long k = 0; k <= steps; ++k) {
    const double t = k * config.dt;
    for (int i = 0; i < n; ++i) {
      const AgentTarget& tg = result.assignment.targets[i];
      states[i].revs = revolutions(states[i], tg, params);
      states[i].sigma = blend_sigma(states[i].revs, (states[i].p - tg.point).norm(), params);
    }
    const double dmin = min_pairwise(states);
    try {
      for (int i = 0; i < n; ++i) controls[i] = final_control(i, states, curve, result.assignment, params, t);
    } catch (const CollisionFault& e) {
      m.collision = true;
      m.aborted = true;
      m.abort_reason = e.what();
    }

    m.time.push_back(t);
    m.min_distance.push_back(dmin);
    m.min_distance_overall = std::min(m.min_distance_overall, dmin);
    double adherence = 0.0;
    for (int i = 0; i < n; ++i) {
      adherence += projector.project(states[i].p).distance;
      m.sigma[i].push_back(states[i].sigma);
      m.vertex_error[i].push_back((states[i].p - result.assignment.targets[i].point).norm());
      if (!m.aborted) {
        m.max_control = std::max({m.max_control, std::abs(controls[i].a), std::abs(controls[i].omega),
                                  std::abs(controls[i].a_z)});
        result.trajectory.push_back({t, i, states[i], controls[i]});
      }
    }
    m.adherence.push_back(adherence / n);
    if (std::find(snapshot_steps.begin(), snapshot_steps.end(), k) != snapshot_steps.end())
      result.snapshots.push_back({t, states});
    if (m.aborted) break;
    if (dmin < 0.5 * params.d_safe) {
      m.collision = true;
      m.aborted = true;
      m.abort_reason = "agents closer than half the safety distance at t = " + std::to_string(t);
      break;
    }
    if (k == steps) break;
    try {
      states = integrate_step(states, controls, config.dt);
    } catch (const SimulationAbort& e) {
      m.aborted = true;
      m.abort_reason = e.what();
      break;
    }
  }
  for (int i = 0; i < n; ++i) m.final_vertex_error.push_back((states[i].p - result.assignment.targets[i].point).norm());
  return result;
}

PathFollowingRun simulate_path_following(const Curve& curve, const LiftedAgentState& start,
                                         const ControllerParams& params, double dt, double horizon) {
  PathFollowingRun run;
  const CurveProjector projector(curve);
  LiftedAgentState state = start;
  const long steps = std::lround(horizon / dt);
  for (long k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const ReferenceSample ref = sweep_reference(start.z, params, t);
    const TransverseOutputs out = transverse_outputs(state, curve, params.K_L, ref);
    run.time.push_back(t);
    run.adherence.push_back(projector.project(state.p).distance);
    run.e_n.push_back(out.e_n);
    run.e_t.push_back(out.e_t);
    run.states.push_back(state);
    if (k == steps) break;
    const ControlOutput u = tfl_control(state, curve, params, ref);
    state = integrate_step(std::span(&state, 1), std::span(&u, 1), dt).front();
  }
  return run;
}

}  // namespace rigidform
