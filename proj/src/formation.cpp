#include "rigidform/formation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include <Eigen/Cholesky>

#include "rigidform/errors.hpp"

namespace rigidform {

namespace {

inline int wrap_index(int i, int n) { return ((i % n) + n) % n; }

struct Sampled {
  std::vector<Vec2> point;
  std::vector<Vec2> tangent;  // gamma'
};

Sampled sample(const Eigen::VectorXd& theta, const Curve& curve, bool with_derivative) {
  Sampled s;
  const auto n = static_cast<std::size_t>(theta.size());
  s.point.resize(n);
  if (with_derivative) s.tangent.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.point[i] = curve.eval(theta[static_cast<Eigen::Index>(i)]);
    if (with_derivative) s.tangent[i] = curve.deriv(theta[static_cast<Eigen::Index>(i)], 1);
  }
  return s;
}

// e_i = gamma_i - gamma_{i-1}
std::vector<Vec2> edges(const std::vector<Vec2>& p) {
  const int n = static_cast<int>(p.size());
  std::vector<Vec2> e(p.size());
  for (int i = 0; i < n; ++i) e[i] = p[i] - p[wrap_index(i - 1, n)];
  return e;
}

double circular_distance(double a, double b) {
  const double d = std::abs(wrap_parameter(a) - wrap_parameter(b));
  return std::min(d, kTwoPi - d);
}

}  // namespace

std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::CurvatureWeighted:
      return "curvature-weighted";
    case InitKind::Random:
      return "random";
    case InitKind::User:
      return "user";
  }
  return "unknown";
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::StepTolerance:
      return "step-tolerance";
    case StopReason::CostTolerance:
      return "cost-tolerance";
    case StopReason::ZeroCost:
      return "zero-cost";
    case StopReason::MaxIterations:
      return "max-iterations";
    case StopReason::LineSearchStalled:
      return "line-search-stalled";
    case StopReason::Failed:
      return "failed";
  }
  return "unknown";
}

void FinderConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* msg) {
    if (!ok) throw ConfigError(std::string("finder.") + field + ": " + msg);
  };
  require(n >= 3, "n", "need at least 3 vertices");
  require(w_length > 0.0, "w_length", "must be positive");
  require(w_angle > 0.0, "w_angle", "must be positive");
  require(w_diagonal > 0.0, "w_diagonal", "must be positive");
  require(n_init >= 1, "n_init", "must be at least 1");
  require(k_max >= 1, "k_max", "must be at least 1");
  require(armijo_c1 > 0.0 && armijo_c1 < 1.0, "armijo_c1", "must lie in (0, 1)");
  require(backtrack > 0.0 && backtrack < 1.0, "backtrack", "must lie in (0, 1)");
  require(eta0 > 0.0 && eta0 <= 1.0, "eta0", "must lie in (0, 1]");
  require(eta_min > 0.0 && eta_min < eta0, "eta_min", "must lie in (0, eta0)");
  require(step_tol > 0.0, "step_tol", "must be positive");
  require(cost_rel_tol > 0.0, "cost_rel_tol", "must be positive");
  require(cost_accept > 0.0, "cost_accept", "must be positive");
  require(lambda0 > 0.0 && lambda0 < lambda_max, "lambda0", "must lie in (0, lambda_max)");
  require(!square_mode || n == 4, "square_mode", "requires n = 4");
  require(workers >= 0, "workers", "must be non-negative");
}

ResidualVector residuals(const Eigen::VectorXd& theta, const Curve& curve, bool square_mode) {
  const int n = static_cast<int>(theta.size());
  if (n < 3) throw ConfigError("residuals: need at least 3 parameters");
  if (square_mode && n != 4) throw ConfigError("residuals: square mode requires n = 4");
  const Sampled s = sample(theta, curve, false);
  const std::vector<Vec2> e = edges(s.point);

  ResidualVector r;
  r.n = n;
  r.square_mode = square_mode;
  r.values.resize(2 * n + (square_mode ? 2 : 0));
  for (int i = 0; i < n; ++i) {
    const Vec2& ei = e[i];
    const Vec2& e1 = e[wrap_index(i + 1, n)];
    const Vec2& e2 = e[wrap_index(i + 2, n)];
    r.values[i] = e1.squaredNorm() - ei.squaredNorm();
    r.values[n + i] = e1.dot(ei) - e2.dot(e1);
  }
  if (square_mode) {
    double mean = 0.0;
    for (const auto& ei : e) mean += ei.norm();
    mean /= n;
    r.values[2 * n] = (s.point[0] - s.point[2]).norm() - std::numbers::sqrt2 * mean;
    r.values[2 * n + 1] = (s.point[1] - s.point[3]).norm() - std::numbers::sqrt2 * mean;
  }
  return r;
}

Eigen::VectorXd residual_weights(const FinderConfig& config, int n) {
  Eigen::VectorXd w(2 * n + (config.square_mode ? 2 : 0));
  w.head(n).setConstant(config.w_length);
  w.segment(n, n).setConstant(config.w_angle);
  if (config.square_mode) w.tail(2).setConstant(config.w_diagonal);
  return w;
}

double cost(const Eigen::VectorXd& theta, const Curve& curve, const FinderConfig& config) {
  const ResidualVector r = residuals(theta, curve, config.square_mode);
  const Eigen::VectorXd w = residual_weights(config, r.n);
  return 0.5 * (w.array() * r.values.array().square()).sum();
}

Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta, const Curve& curve, bool square_mode) {
  const int n = static_cast<int>(theta.size());
  if (n < 3) throw ConfigError("jacobian: need at least 3 parameters");
  if (square_mode && n != 4) throw ConfigError("jacobian: square mode requires n = 4");
  const Sampled s = sample(theta, curve, true);
  const std::vector<Vec2> e = edges(s.point);
  const auto& g = s.tangent;

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n + (square_mode ? 2 : 0), n);
  // For n = 3 the index i + 2 coincides with i - 1, hence the accumulation.
  for (int i = 0; i < n; ++i) {
    const int im1 = wrap_index(i - 1, n), ip1 = wrap_index(i + 1, n), ip2 = wrap_index(i + 2, n);
    const Vec2& ei = e[i];
    const Vec2& e1 = e[ip1];
    const Vec2& e2 = e[ip2];

    jac(i, im1) += 2.0 * ei.dot(g[im1]);
    jac(i, i) += -2.0 * (e1 + ei).dot(g[i]);
    jac(i, ip1) += 2.0 * e1.dot(g[ip1]);

    const int row = n + i;
    jac(row, im1) += -e1.dot(g[im1]);
    jac(row, i) += (e1 - ei + e2).dot(g[i]);
    jac(row, ip1) += (ei + e1 - e2).dot(g[ip1]);
    jac(row, ip2) += -e1.dot(g[ip2]);
  }

  if (square_mode) {
    // d(mean side)/d theta_j: theta_j ends edge j and starts edge j+1.
    Eigen::VectorXd dmean = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
      const Vec2& ej = e[j];
      const Vec2& ej1 = e[wrap_index(j + 1, n)];
      if (ej.norm() > 0.0) dmean[j] += ej.dot(g[j]) / ej.norm();
      if (ej1.norm() > 0.0) dmean[j] -= ej1.dot(g[j]) / ej1.norm();
    }
    dmean /= n;
    const int pairs[2][2] = {{0, 2}, {1, 3}};
    for (int k = 0; k < 2; ++k) {
      const int a = pairs[k][0], b = pairs[k][1];
      const Vec2 d = s.point[a] - s.point[b];
      const int row = 2 * n + k;
      jac.row(row) = -std::numbers::sqrt2 * dmean.transpose();
      if (d.norm() > 0.0) {
        const Vec2 u = d / d.norm();
        jac(row, a) += u.dot(g[a]);
        jac(row, b) -= u.dot(g[b]);
      }
    }
  }
  return jac;
}

bool is_convex(const std::vector<Vec2>& vertices) {
  const int n = static_cast<int>(vertices.size());
  const std::vector<Vec2> e = edges(vertices);
  int pos = 0, neg = 0;
  for (int i = 0; i < n; ++i) {
    const double c = cross(e[i], e[wrap_index(i + 1, n)]);
    if (c > 0.0) ++pos;
    if (c < 0.0) ++neg;
  }
  return pos == n || neg == n;
}

bool is_feasible(const FormationSolution& s, const Curve& curve, const Eigen::VectorXd& theta) {
  const double scale = curve.scale();
  if (!(s.mean_side >= 0.05 * scale)) return false;
  const auto n = s.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((s.vertices[i] - s.vertices[j]).norm() < 0.01 * scale) return false;
      if (circular_distance(theta[static_cast<Eigen::Index>(i)], theta[static_cast<Eigen::Index>(j)]) < 1e-3)
        return false;
    }
  }
  return true;
}

FormationSolution evaluate_formation(const Eigen::VectorXd& theta, const Curve& curve, const FinderConfig& config) {
  FormationSolution sol;
  const int n = static_cast<int>(theta.size());
  sol.theta = theta.unaryExpr([](double t) { return wrap_parameter(t); });
  sol.vertices.resize(n);
  for (int i = 0; i < n; ++i) {
    sol.vertices[i] = curve.eval(sol.theta[i]);
    sol.center += sol.vertices[i];
  }
  sol.center /= n;
  for (int i = 0; i < n; ++i) sol.mean_side += (sol.vertices[wrap_index(i + 1, n)] - sol.vertices[i]).norm();
  sol.mean_side /= n;

  const ResidualVector r = residuals(sol.theta, curve, config.square_mode);
  const Eigen::VectorXd w = residual_weights(config, n);
  sol.residual_norm = r.values.norm();
  sol.cost = 0.5 * (w.array() * r.values.array().square()).sum();
  sol.feasible = is_feasible(sol, curve, sol.theta);
  sol.convex = is_convex(sol.vertices);
  sol.accepted = sol.cost < config.cost_accept;
  return sol;
}

FormationSolution gauss_newton_solve(const Eigen::VectorXd& theta0, const Curve& curve, const FinderConfig& config) {
  const int n = static_cast<int>(theta0.size());
  if (n < 3) throw ConfigError("gauss_newton_solve: need at least 3 parameters");
  const Eigen::VectorXd w = residual_weights(config, n);

  Eigen::VectorXd theta = theta0;
  Eigen::VectorXd r = residuals(theta, curve, config.square_mode).values;
  double J = 0.5 * (w.array() * r.array().square()).sum();
  double lambda = config.lambda0;
  std::vector<double> trace{J};
  StopReason stop = StopReason::MaxIterations;
  int k = 0;

  for (; k < config.k_max; ++k) {
    if (J == 0.0) {
      stop = StopReason::ZeroCost;
      break;
    }
    const Eigen::MatrixXd jac = jacobian(theta, curve, config.square_mode);
    const Eigen::MatrixXd jw = w.asDiagonal() * jac;
    const Eigen::VectorXd grad = jw.transpose() * r;
    const Eigen::MatrixXd normal = jac.transpose() * jw;

    bool accepted = false, converged = false;
    Eigen::VectorXd next;
    Eigen::VectorXd r_next;
    double J_next = J;
    while (!accepted) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal().array() += lambda;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      Eigen::VectorXd step;
      bool solved = ldlt.info() == Eigen::Success && ldlt.isPositive();
      if (solved) {
        step = ldlt.solve(-grad);
        solved = step.allFinite();
      }
      if (!solved) {
        lambda *= 10.0;
        if (lambda > config.lambda_max)
          throw NormalEquationsSingular("damped normal equations singular at lambda = " + std::to_string(lambda));
        continue;
      }
      if (step.norm() < config.step_tol) {
        converged = true;
        break;
      }
      const double slope = grad.dot(step);
      for (double eta = config.eta0; eta >= config.eta_min; eta *= config.backtrack) {
        Eigen::VectorXd trial = theta + eta * step;
        Eigen::VectorXd r_trial = residuals(trial, curve, config.square_mode).values;
        const double J_trial = 0.5 * (w.array() * r_trial.array().square()).sum();
        if (J_trial <= J + config.armijo_c1 * eta * slope && J_trial <= J) {
          next = std::move(trial);
          r_next = std::move(r_trial);
          J_next = J_trial;
          accepted = true;
          break;
        }
      }
      if (accepted) {
        lambda = std::max(lambda / 10.0, config.lambda0);
      } else {
        lambda *= 10.0;
        if (lambda > config.lambda_max) break;
      }
    }
    if (converged) {
      stop = StopReason::StepTolerance;
      break;
    }
    if (!accepted) {
      stop = StopReason::LineSearchStalled;
      break;
    }
    const double rel = (J - J_next) / J;
    theta = std::move(next);
    r = std::move(r_next);
    J = J_next;
    trace.push_back(J);
    if (rel < config.cost_rel_tol) {
      stop = StopReason::CostTolerance;
      ++k;
      break;
    }
  }

  FormationSolution sol = evaluate_formation(theta, curve, config);
  sol.iterations = k;
  sol.stop = stop;
  sol.cost_trace = std::move(trace);
  return sol;
}

Eigen::VectorXd init_curvature_weighted(const Curve& curve, int n) {
  Eigen::VectorXd theta(n);
  for (int i = 0; i < n; ++i) theta[i] = curve.arclength_inverse(static_cast<double>(i) / n);
  return theta;
}

Eigen::VectorXd init_random(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, kTwoPi);
  Eigen::VectorXd theta(n);
  for (int i = 0; i < n; ++i) theta[i] = unif(rng);
  std::sort(theta.begin(), theta.end());
  return theta;
}

namespace {

// Selection among accepted candidates. Keys within `tol` are treated as equal
// and fall through to the next key: primary key, larger mean side, lower
// cost, lower start index.
const FormationSolution* select_candidate(const std::vector<const FormationSolution*>& cands,
                                          const FinderConfig& config, double scale) {
  const double tol = 1e-6 * scale;
  auto primary = [&](const FormationSolution& s) {
    return config.target ? (s.center - *config.target).norm() : -s.mean_side;
  };
  const FormationSolution* best = nullptr;
  for (const auto* c : cands) {
    if (!best) {
      best = c;
      continue;
    }
    const double pc = primary(*c), pb = primary(*best);
    if (pc < pb - tol) {
      best = c;
      continue;
    }
    if (pc > pb + tol) continue;
    if (c->mean_side > best->mean_side + tol) {
      best = c;
      continue;
    }
    if (c->mean_side < best->mean_side - tol) continue;
    if (c->cost < best->cost || (c->cost == best->cost && c->start_index < best->start_index)) best = c;
  }
  return best;
}

}  // namespace

MultistartResult multistart_all(const Curve& curve, const FinderConfig& config) {
  config.validate();
  const int n = config.n;
  std::vector<Eigen::VectorXd> starts;
  starts.reserve(config.n_init);
  starts.push_back(init_curvature_weighted(curve, n));
  std::mt19937_64 rng(config.seed);
  for (int m = 1; m < config.n_init; ++m) starts.push_back(init_random(n, rng));

  MultistartResult out;
  out.runs.resize(starts.size());
  auto run_one = [&](std::size_t m) {
    FormationSolution sol;
    try {
      sol = gauss_newton_solve(starts[m], curve, config);
    } catch (const NormalEquationsSingular&) {
      sol = evaluate_formation(starts[m], curve, config);
      sol.stop = StopReason::Failed;
      sol.feasible = false;
      sol.accepted = false;
      sol.cost = std::numeric_limits<double>::infinity();
    }
    sol.start_index = static_cast<int>(m);
    sol.init_kind = m == 0 ? InitKind::CurvatureWeighted : InitKind::Random;
    out.runs[m] = std::move(sol);
  };

  unsigned workers = config.workers > 0 ? static_cast<unsigned>(config.workers) : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(starts.size()));
  if (workers == 1) {
    for (std::size_t m = 0; m < starts.size(); ++m) run_one(m);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t m = next++; m < starts.size(); m = next++) run_one(m);
      });
  }

  // Sequential reduction in start order, independent of completion order.
  std::vector<const FormationSolution*> accepted, convex;
  for (const auto& s : out.runs)
    if (s.accepted && s.feasible) {
      accepted.push_back(&s);
      if (s.convex) convex.push_back(&s);
    }
  if (!accepted.empty()) {
    out.best = *select_candidate(convex.empty() ? accepted : convex, config, curve.scale());
    return out;
  }

  // No exact formation: lowest-cost non-degenerate run (best fit), else the
  // lowest-cost run overall, which then carries feasible = false.
  const FormationSolution* best = nullptr;
  for (bool need_feasible : {true, false}) {
    for (const auto& s : out.runs) {
      if (need_feasible && !s.feasible) continue;
      if (!best || s.cost < best->cost) best = &s;
    }
    if (best) break;
  }
  out.best = *best;
  return out;
}

FormationSolution multistart(const Curve& curve, const FinderConfig& config) {
  return multistart_all(curve, config).best;
}

}  // namespace rigidform
