#include <array>
#include <cmath>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "rigidform/control.hpp"
#include "rigidform/errors.hpp"
#include "rigidform/formation.hpp"

using namespace rigidform;

namespace {

Curve make(const std::string& family) { return Curve(CurveSpec{family, {}}); }

ControllerParams params_for(const Curve& c) {
  ControllerParams p;
  p.K_L = c.scale() / kTwoPi;
  p.d_sw = 0.15 * c.scale();
  p.d_ao = 0.12 * c.scale();
  p.d_safe = 0.06 * c.scale();
  p.v_ref = p.omega_ref * c.length() / kTwoPi;
  p.v_min = 0.05 * p.v_ref;
  p.v_max = 2 * p.omega_ref * c.max_speed();
  return p;
}

LiftedAgentState random_state(const Curve& c, double K_L, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LiftedAgentState s;
  const double param = 3.0 + 3.0 * u(rng);
  const FrenetFrame f = c.frenet(param);
  s.p = c.eval(param) + 0.1 * c.scale() * Vec2(u(rng), u(rng));
  s.psi = f.tangent_angle + 0.5 * u(rng);
  s.v = 1.0 + 0.5 * u(rng);
  s.z = K_L * param;
  s.v_z = K_L * (0.5 + 0.2 * u(rng));
  return s;
}

// Lifted unicycle with constant inputs, integrated with small classical RK4
// steps kept local to the test.
using Vec6 = std::array<double, 6>;

Vec6 rhs(const Vec6& x, const Eigen::Vector3d& u) {
  return {x[3] * std::cos(x[2]), x[3] * std::sin(x[2]), u[1], u[0], x[5], u[2]};
}

LiftedAgentState flow(const LiftedAgentState& s, const Eigen::Vector3d& u, double t) {
  Vec6 x{s.p.x(), s.p.y(), s.psi, s.v, s.z, s.v_z};
  const int steps = 200;
  const double h = t / steps;
  auto axpy = [](const Vec6& a, double k, const Vec6& b) {
    Vec6 r;
    for (int i = 0; i < 6; ++i) r[i] = a[i] + k * b[i];
    return r;
  };
  for (int k = 0; k < steps; ++k) {
    const Vec6 k1 = rhs(x, u), k2 = rhs(axpy(x, h / 2, k1), u), k3 = rhs(axpy(x, h / 2, k2), u),
               k4 = rhs(axpy(x, h, k3), u);
    for (int i = 0; i < 6; ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  LiftedAgentState out = s;
  out.p = {x[0], x[1]};
  out.psi = x[2];
  out.v = x[3];
  out.z = x[4];
  out.v_z = x[5];
  return out;
}

Eigen::Vector3d outputs(const LiftedAgentState& s, const Curve& c, double K_L, const ReferenceSample& ref) {
  const TransverseOutputs o = transverse_outputs(s, c, K_L, ref);
  return {o.e_n, o.e_t, o.h3};
}

}  // namespace

TEST(Decoupling, DeterminantIsMinusSpeed) {
  std::mt19937_64 rng(1);
  for (const char* family : {"ellipse", "lissajous", "rose"}) {
    const Curve c = make(family);
    const double K_L = c.scale() / kTwoPi;
    for (int k = 0; k < 200; ++k) {
      const LiftedAgentState s = random_state(c, K_L, rng);
      EXPECT_NEAR(decoupling_matrix(s, c, K_L).determinant(), -s.v, 1e-12);
    }
  }
}

TEST(Outputs, RatesMatchTimeDerivativeAlongFreeMotion) {
  std::mt19937_64 rng(2);
  const Curve c = make("lissajous");
  const double K_L = c.scale() / kTwoPi;
  const ReferenceSample ref{0.0, 0.3, 0.0};
  for (int k = 0; k < 20; ++k) {
    const LiftedAgentState s = random_state(c, K_L, rng);
    const double h = 1e-5;
    // Zero inputs: straight line at constant speed, z drifting at v_z.
    LiftedAgentState fwd = s, back = s;
    fwd.p += h * s.v * Vec2(std::cos(s.psi), std::sin(s.psi));
    back.p -= h * s.v * Vec2(std::cos(s.psi), std::sin(s.psi));
    fwd.z += h * s.v_z;
    back.z -= h * s.v_z;
    const ReferenceSample rf{ref.z + h * ref.dz, ref.dz, 0.0}, rb{ref.z - h * ref.dz, ref.dz, 0.0};
    const Eigen::Vector3d numeric = (outputs(fwd, c, K_L, rf) - outputs(back, c, K_L, rb)) / (2 * h);
    const TransverseOutputs o = transverse_outputs(s, c, K_L, ref);
    EXPECT_NEAR(o.de_n, numeric[0], 1e-6);
    EXPECT_NEAR(o.de_t, numeric[1], 1e-6);
    EXPECT_NEAR(o.dh3, numeric[2], 1e-6);
  }
}

TEST(Outputs, SecondDerivativeIsDriftPlusDecouplingTimesInput) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uu(-1.0, 1.0);
  for (const char* family : {"ellipse", "lissajous", "peanut"}) {
    const Curve c = make(family);
    const double K_L = c.scale() / kTwoPi;
    for (int k = 0; k < 10; ++k) {
      const LiftedAgentState s = random_state(c, K_L, rng);
      const Eigen::Vector3d u(uu(rng), uu(rng), 0.2 * uu(rng));
      const ReferenceSample ref{s.z, 0.0, 0.0};  // fixed reference: third output is z itself
      const double h = 1e-3;
      const Eigen::Vector3d y0 = outputs(s, c, K_L, ref);
      const Eigen::Vector3d yp = outputs(flow(s, u, h), c, K_L, ref);
      const Eigen::Vector3d ym = outputs(flow(s, u, -h), c, K_L, ref);
      const Eigen::Vector3d numeric = (yp - 2 * y0 + ym) / (h * h);
      const TransverseOutputs o = transverse_outputs(s, c, K_L, ref);
      const Eigen::Vector3d model = output_drift(s, o, K_L, ref) + decoupling_matrix(s, o, K_L) * u;
      EXPECT_LT((model - numeric).cwiseAbs().maxCoeff(), 1e-4 * std::max(1.0, numeric.norm()))
          << family << " model " << model.transpose() << " numeric " << numeric.transpose();
    }
  }
}

TEST(Tfl, ClosedLoopAccelerationFollowsLinearErrorDynamics) {
  std::mt19937_64 rng(4);
  const Curve c = make("rose");
  ControllerParams p = params_for(c);
  for (int k = 0; k < 20; ++k) {
    LiftedAgentState s = random_state(c, p.K_L, rng);
    const ReferenceSample ref{s.z + 0.01, p.K_L * p.omega_ref, 0.0};
    const ControlOutput u = tfl_control(s, c, p, ref);
    const TransverseOutputs o = transverse_outputs(s, c, p.K_L, ref);
    const Eigen::Vector3d y(o.e_n, o.e_t, o.h3), dy(o.de_n, o.de_t, o.dh3);
    const Eigen::Vector3d ddy = output_drift(s, o, p.K_L, ref) + decoupling_matrix(s, o, p.K_L) * u.u();
    const Eigen::Vector3d wanted = -p.K_p.cwiseProduct(y) - p.K_d.cwiseProduct(dy);
    EXPECT_LT((ddy - wanted).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Blend, SmoothstepShape) {
  EXPECT_DOUBLE_EQ(beta(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(beta(0.0), 0.0);
  EXPECT_DOUBLE_EQ(beta(0.5), 0.5);
  EXPECT_DOUBLE_EQ(beta(1.0), 1.0);
  EXPECT_DOUBLE_EQ(beta(4.0), 1.0);
  EXPECT_NEAR((beta(1e-6) - beta(0.0)) / 1e-6, 0.0, 1e-5);
  EXPECT_NEAR((beta(1.0) - beta(1.0 - 1e-6)) / 1e-6, 0.0, 1e-5);
}

TEST(Blend, ProductAndAntiDeadlock) {
  ControllerParams p;
  p.d_sw = 1.0;
  p.revs_target = 1.0;
  p.blend = BlendStrategy::Product;
  EXPECT_DOUBLE_EQ(blend_sigma(0.0, 0.0, p), 0.0);
  EXPECT_DOUBLE_EQ(blend_sigma(1.0, 0.0, p), 1.0);
  EXPECT_DOUBLE_EQ(blend_sigma(1.0, 0.5, p), 0.5);
  p.blend = BlendStrategy::AntiDeadlock;
  EXPECT_DOUBLE_EQ(blend_sigma(1.0, 0.0, p), 1.0);
  // sweep = 1, near = 1 - beta(0.25) = 0.84375; divergence weight beta(0.15625)
  const double near = 1 - 0.25 * 0.25 * (3 - 0.5);
  const double w = beta(1 - near);
  EXPECT_NEAR(blend_sigma(1.0, 0.25, p), (1 - w) * near + w * near, 1e-15);
  // sweep = beta(0.5) = 0.5, near = 1: product 0.5, min 0.5
  EXPECT_NEAR(blend_sigma(0.5, 0.0, p), 0.5, 1e-15);
}

TEST(Reference, StartsAtSweepRateAndSettlesOnTarget) {
  const Curve c = Curve::circle();
  const ControllerParams p = params_for(c);
  AgentTarget tg;
  tg.z_start = 0.3;
  tg.z_target = 0.3 + p.K_L * 7.0;
  const ReferenceSample r0 = lifted_reference(tg, p, 0.0);
  EXPECT_DOUBLE_EQ(r0.z, 0.3);
  EXPECT_DOUBLE_EQ(r0.dz, p.K_L * p.omega_ref);
  const ReferenceSample end = lifted_reference(tg, p, 100.0);
  EXPECT_DOUBLE_EQ(end.z, tg.z_target);
  EXPECT_DOUBLE_EQ(end.dz, 0.0);
  // continuous with a continuous rate through the slow-down window
  for (double t = 12.0; t < 16.0; t += 0.01) {
    const double h = 1e-7;
    const ReferenceSample a = lifted_reference(tg, p, t), b = lifted_reference(tg, p, t + h);
    EXPECT_NEAR((b.z - a.z) / h, a.dz, 1e-5);
    EXPECT_LE(a.z, tg.z_target);
  }
}

TEST(Pose, RestsAtTargetAndTreatsReversedHeadingAsAligned) {
  ControllerParams p;
  AgentTarget tg;
  tg.point = {1.0, 2.0};
  tg.heading = 0.7;
  LiftedAgentState s;
  s.p = tg.point;
  s.psi = 0.7;
  ControlOutput u = pose_control(s, tg, p);
  EXPECT_DOUBLE_EQ(u.a, 0.0);
  EXPECT_DOUBLE_EQ(u.omega, 0.0);
  s.psi = 0.7 + std::numbers::pi;
  u = pose_control(s, tg, p);
  EXPECT_NEAR(u.omega, 0.0, 1e-12);
  // Ahead of the target along the heading: decelerate backwards.
  s.psi = 0.0;
  s.p = tg.point + Vec2(0.5, 0.0);
  s.v = 0.2;
  u = pose_control(s, tg, p);
  EXPECT_NEAR(u.a, -p.k_v * 0.2 - p.k_p * 0.5, 1e-12);
}

TEST(Avoidance, RepulsionOnlyInsideRadiusAndGatedBySigma) {
  ControllerParams p;
  p.d_ao = 1.0;
  p.d_safe = 0.4;
  p.k_avoid = 1.0;
  std::vector<LiftedAgentState> s(2);
  s[0].p = {0.0, 0.0};
  s[0].psi = 0.0;
  s[1].psi = std::numbers::pi;  // head-on: no co-directional reduction
  s[0].v = s[1].v = 1.0;

  s[1].p = {2.5, 0.0};  // beyond sensing (2 d_ao)
  AvoidanceForce f = avoidance_force(0, s, p);
  EXPECT_EQ(f.neighbours, 0);
  EXPECT_EQ(f.force, Vec2::Zero());

  s[1].p = {1.5, 0.0};  // sensed but outside the activation radius
  f = avoidance_force(0, s, p);
  EXPECT_EQ(f.neighbours, 1);
  EXPECT_EQ(f.force, Vec2::Zero());
  EXPECT_EQ(f.alpha, 0.0);

  s[1].p = {0.5, 0.0};
  f = avoidance_force(0, s, p);
  const double r = 0.5;
  EXPECT_NEAR(f.force.x(), -(1 / r - 1.0) / (r * r) * r, 1e-12);
  EXPECT_NEAR(f.force.y(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(f.duty, 1.0);
  EXPECT_NEAR(f.alpha, beta((1.0 - r) / (1.0 - 0.4)), 1e-15);

  s[0].sigma = 0.95;  // settled: duty switched off
  f = avoidance_force(0, s, p);
  EXPECT_DOUBLE_EQ(f.duty, 0.0);
  EXPECT_EQ(f.force, Vec2::Zero());
}

TEST(Avoidance, CoDirectionalMotionIsDamped) {
  ControllerParams p;
  p.d_ao = 1.0;
  p.d_safe = 0.4;
  std::vector<LiftedAgentState> s(2);
  s[1].p = {0.5, 0.0};
  s[0].v = s[1].v = 1.0;
  s[1].psi = std::numbers::pi;
  const double head_on = avoidance_force(0, s, p).force.norm();
  s[1].psi = 0.0;
  const double same_way = avoidance_force(0, s, p).force.norm();
  EXPECT_NEAR(same_way / head_on, p.codir_factor, 1e-12);
}

TEST(Avoidance, CoincidentAgentsRaise) {
  ControllerParams p;
  std::vector<LiftedAgentState> s(2);
  EXPECT_THROW(avoidance_force(0, s, p), CollisionFault);
}

TEST(Avoidance, ControlSteersAlongForce) {
  ControllerParams p;
  LiftedAgentState s;
  s.psi = 0.0;
  s.v = 0.5;
  s.v_z = 0.2;
  const ControlOutput u = avoidance_control(s, Vec2(3.0, 0.0), p);
  EXPECT_NEAR(u.omega, 0.0, 1e-15);
  EXPECT_NEAR(u.a, p.k_va * (p.v_max - 0.5), 1e-15);
  EXPECT_NEAR(u.a_z, -p.k_za * 0.2, 1e-15);
  const ControlOutput turn = avoidance_control(s, Vec2(0.0, 1.0), p);
  EXPECT_NEAR(turn.omega, p.k_wa * std::numbers::pi / 2, 1e-12);
}

TEST(Assignment, CyclicMatchingAndLapPlan) {
  const Curve c = make("deltoid");
  const ControllerParams p = params_for(c);
  FinderConfig cfg;
  cfg.n = 4;
  const FormationSolution sol = multistart(c, cfg);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LiftedAgentState> agents(4);
    for (auto& a : agents) a.z = p.K_L * u(rng) + (trial % 3) * p.K_L * kTwoPi;
    const FormationAssignment asg = assign_vertices(agents, sol, c, p);

    std::vector<int> used(4, 0);
    std::vector<std::pair<double, double>> order;  // (start address, end address)
    for (int i = 0; i < 4; ++i) {
      const AgentTarget& tg = asg.targets[i];
      ++used[tg.vertex];
      const double span = (tg.z_target - tg.z_start) / p.K_L;
      EXPECT_GE(span, kTwoPi * p.revs_target - 1e-12);
      const double end = wrap_parameter(agents[i].z / p.K_L) + span;
      EXPECT_NEAR(std::remainder(end - tg.theta, kTwoPi), 0.0, 1e-9);
      order.emplace_back(wrap_parameter(agents[i].z / p.K_L), end);
    }
    for (int v : used) EXPECT_EQ(v, 1);
    std::sort(order.begin(), order.end());
    for (int k = 1; k < 4; ++k) EXPECT_GT(order[k].second, order[k - 1].second);
    EXPECT_LT(order[3].second, order[0].second + kTwoPi);

    // Brute force over the cyclic offsets: the chosen matching is the shortest.
    std::vector<double> verts;
    for (int v = 0; v < 4; ++v) verts.push_back(wrap_parameter(sol.theta[v]));
    std::sort(verts.begin(), verts.end());
    double best = 1e300;
    for (int o = 0; o < 4; ++o) {
      double total = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double gap = wrap_parameter(verts[(k + o) % 4] - order[k].first);
        total += c.arclength(order[k].first, order[k].first + gap);
      }
      best = std::min(best, total);
    }
    EXPECT_NEAR(asg.total_distance, best, 1e-9 * c.length());
  }
}

TEST(Params, ValidationNamesField) {
  ControllerParams p;
  p.d_safe = 0.5;
  p.d_ao = 0.4;
  try {
    p.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("controller.d_ao"), std::string::npos);
  }
}
