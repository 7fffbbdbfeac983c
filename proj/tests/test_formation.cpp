#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rigidform/curve.hpp"
#include "rigidform/errors.hpp"
#include "rigidform/formation.hpp"

using namespace rigidform;

namespace {

Curve make(const std::string& family) { return Curve(CurveSpec{family, {}}); }

Eigen::VectorXd random_theta(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) t[i] = u(rng);
  return t;
}

// Residuals written out directly: e_i = p_i - p_{i-1},
// length_i = |e_{i+1}|^2 - |e_i|^2, angle_i = e_{i+1}.e_i - e_{i+2}.e_{i+1}.
Eigen::VectorXd reference_residuals(const Eigen::VectorXd& theta, const Curve& c) {
  const int n = static_cast<int>(theta.size());
  std::vector<Vec2> p(n), e(n);
  for (int i = 0; i < n; ++i) p[i] = c.eval(theta[i]);
  for (int i = 0; i < n; ++i) e[i] = p[i] - p[(i + n - 1) % n];
  Eigen::VectorXd r(2 * n);
  for (int i = 0; i < n; ++i) {
    const Vec2& a = e[i];
    const Vec2& b = e[(i + 1) % n];
    const Vec2& d = e[(i + 2) % n];
    r[i] = b.squaredNorm() - a.squaredNorm();
    r[n + i] = b.dot(a) - d.dot(b);
  }
  return r;
}

Eigen::MatrixXd central_difference_jacobian(const Eigen::VectorXd& theta, const Curve& c, bool square) {
  const double h = 1e-6;
  const Eigen::Index m = residuals(theta, c, square).size();
  Eigen::MatrixXd J(m, theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    J.col(k) = (residuals(tp, c, square).values - residuals(tm, c, square).values) / (2 * h);
  }
  return J;
}

int cyclic_offset(int j, int i, int n) { return ((j - i) % n + n) % n; }

}  // namespace

TEST(Residuals, VanishOnRegularPolygonsOfTheCircle) {
  const Curve c = Curve::circle(1.3);
  for (int n = 3; n <= 8; ++n) {
    Eigen::VectorXd theta(n);
    for (int i = 0; i < n; ++i) theta[i] = 0.4 + kTwoPi * i / n;
    EXPECT_LT(residuals(theta, c).values.cwiseAbs().maxCoeff(), 1e-14) << "n = " << n;
  }
}

TEST(Residuals, MatchDirectEvaluation) {
  std::mt19937_64 rng(3);
  for (const char* family : {"ellipse", "deltoid", "lissajous"}) {
    const Curve c = make(family);
    for (int n : {3, 4, 6}) {
      const Eigen::VectorXd theta = random_theta(n, rng);
      const ResidualVector r = residuals(theta, c);
      EXPECT_LT((r.values - reference_residuals(theta, c)).cwiseAbs().maxCoeff(), 1e-12) << family;
      EXPECT_DOUBLE_EQ(r.length(1), r.values[1]);
      EXPECT_DOUBLE_EQ(r.angle(1), r.values[n + 1]);
    }
  }
}

TEST(Residuals, SquareModeAddsDiagonals) {
  const Curve c = Curve::circle();
  Eigen::VectorXd theta(4);
  theta << 0.0, 1.5, 3.0, 4.8;
  const ResidualVector r = residuals(theta, c, true);
  ASSERT_EQ(r.size(), 10);
  std::vector<Vec2> p(4);
  for (int i = 0; i < 4; ++i) p[i] = c.eval(theta[i]);
  double mean = 0.0;
  for (int i = 0; i < 4; ++i) mean += (p[i] - p[(i + 3) % 4]).norm() / 4;
  EXPECT_NEAR(r.diagonal(0), (p[0] - p[2]).norm() - std::sqrt(2.0) * mean, 1e-14);
  EXPECT_NEAR(r.diagonal(1), (p[1] - p[3]).norm() - std::sqrt(2.0) * mean, 1e-14);
  EXPECT_THROW(residuals(Eigen::VectorXd::Zero(5), c, true), ConfigError);
}

TEST(Cost, IsHalfWeightedSquaredNorm) {
  const Curve c = make("peanut");
  FinderConfig cfg;
  cfg.w_length = 2.0;
  cfg.w_angle = 0.5;
  Eigen::VectorXd theta(4);
  theta << 0.1, 1.9, 3.3, 5.0;
  const Eigen::VectorXd r = reference_residuals(theta, c);
  const double expected = 0.5 * (2.0 * r.head(4).squaredNorm() + 0.5 * r.tail(4).squaredNorm());
  EXPECT_NEAR(cost(theta, c, cfg), expected, 1e-12 * expected);
}

TEST(Jacobian, MatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  for (const char* family : {"ellipse", "rose", "lissajous", "deltoid"}) {
    const Curve c = make(family);
    for (int n : {3, 4, 7}) {
      const Eigen::VectorXd theta = random_theta(n, rng);
      const Eigen::MatrixXd diff = jacobian(theta, c) - central_difference_jacobian(theta, c, false);
      EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-5) << family << " n = " << n;
    }
    const Eigen::VectorXd theta = random_theta(4, rng);
    const Eigen::MatrixXd diff = jacobian(theta, c, true) - central_difference_jacobian(theta, c, true);
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-5) << family << " square mode";
  }
}

TEST(Jacobian, EntriesOutsideStencilsAreExactlyZero) {
  const int n = 7;
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd J = jacobian(random_theta(n, rng), make("nephroid"));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int d = cyclic_offset(j, i, n);
      // length row i touches theta_{i-1..i+1}; angle row i touches theta_{i-1..i+2}
      if (d > 1 && d != n - 1) {
        EXPECT_EQ(J(i, j), 0.0) << i << "," << j;
      }
      if (d > 2 && d != n - 1) {
        EXPECT_EQ(J(n + i, j), 0.0) << i << "," << j;
      }
    }
  }
}

TEST(GaussNewton, ConvergesToRegularPolygonOnCircle) {
  const Curve c = Curve::circle();
  FinderConfig cfg;
  cfg.n = 5;
  Eigen::VectorXd theta(5);
  theta << 0.0, 1.1, 2.6, 3.7, 5.2;
  const FormationSolution s = gauss_newton_solve(theta, c, cfg);
  EXPECT_LT(s.residual_norm, 1e-10);
  EXPECT_TRUE(s.accepted);
  EXPECT_TRUE(s.feasible);
  EXPECT_TRUE(s.convex);
  // A regular pentagon inscribed in the unit circle has side 2 sin(pi/5).
  EXPECT_NEAR(s.mean_side, 2 * std::sin(std::numbers::pi / 5), 1e-9);
  EXPECT_LT(s.center.norm(), 1e-9);
  ASSERT_GE(s.cost_trace.size(), 2u);
  for (size_t k = 1; k < s.cost_trace.size(); ++k) EXPECT_LE(s.cost_trace[k], s.cost_trace[k - 1]);
}

TEST(Polygon, ConvexityTest) {
  EXPECT_TRUE(is_convex({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  EXPECT_TRUE(is_convex({{0, 1}, {1, 1}, {1, 0}, {0, 0}}));
  EXPECT_FALSE(is_convex({{0, 0}, {1, 1}, {1, 0}, {0, 1}}));  // bow tie
}

TEST(Polygon, CollapsedConfigurationIsInfeasible) {
  const Curve c = Curve::circle();
  FinderConfig cfg;
  cfg.n = 3;
  Eigen::VectorXd theta(3);
  theta << 1.0, 1.0 + 1e-5, 1.0 + 2e-5;
  const FormationSolution s = evaluate_formation(theta, c, cfg);
  EXPECT_LT(s.residual_norm, 1e-8);
  EXPECT_FALSE(s.feasible);
}

TEST(Multistart, DeterministicForSeedAndWorkerCount) {
  const Curve c = make("lissajous");
  FinderConfig cfg;
  cfg.n = 4;
  cfg.seed = 42;
  cfg.workers = 1;
  const MultistartResult a = multistart_all(c, cfg);
  cfg.workers = 4;
  const MultistartResult b = multistart_all(c, cfg);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  EXPECT_EQ(a.best.start_index, b.best.start_index);
  EXPECT_EQ(a.best.theta, b.best.theta);
  for (size_t k = 0; k < a.runs.size(); ++k) EXPECT_EQ(a.runs[k].cost, b.runs[k].cost);
  EXPECT_EQ(a.runs.front().init_kind, InitKind::CurvatureWeighted);
  EXPECT_EQ(static_cast<int>(a.runs.size()), cfg.n_init);
}

TEST(Multistart, TargetPicksClosestAcceptedConvexCenter) {
  const Curve c = make("lissajous");
  FinderConfig cfg;
  cfg.n = 4;
  cfg.target = Vec2(0.5, 0.5);
  const MultistartResult r = multistart_all(c, cfg);
  ASSERT_TRUE(r.best.accepted && r.best.feasible);
  const double chosen = (r.best.center - *cfg.target).norm();
  for (const FormationSolution& s : r.runs) {
    if (!(s.accepted && s.feasible && (s.convex || !r.best.convex))) continue;
    EXPECT_LE(chosen, (s.center - *cfg.target).norm() + 1e-6 * c.scale()) << "start " << s.start_index;
  }
}

TEST(SquareMode, EllipseSquareHasEqualDiagonals) {
  const Curve c = make("ellipse");
  FinderConfig cfg;
  cfg.n = 4;
  cfg.square_mode = true;
  const FormationSolution s = multistart(c, cfg);
  ASSERT_TRUE(s.accepted);
  EXPECT_LT(s.residual_norm, 1e-9);
  const double d0 = (s.vertices[0] - s.vertices[2]).norm();
  const double d1 = (s.vertices[1] - s.vertices[3]).norm();
  EXPECT_NEAR(d0, d1, 1e-8);
  EXPECT_NEAR(d0, std::sqrt(2.0) * s.mean_side, 1e-8);
  // The ellipse x^2/4 + y^2 = 1 has the axis-aligned inscribed square with half side 2/sqrt(5).
  EXPECT_NEAR(s.mean_side, 4 / std::sqrt(5.0), 1e-8);
}

TEST(FinderConfig, ValidationNamesField) {
  FinderConfig cfg;
  cfg.n = 2;
  try {
    cfg.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("n"), std::string::npos);
  }
  cfg.n = 5;
  cfg.square_mode = true;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
