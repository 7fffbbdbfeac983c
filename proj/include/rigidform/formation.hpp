#pragma once

// Regular-polygon ("rigid formation") search on a closed curve.
//
// Vertices are gamma(theta_i), edges e_i = gamma_i - gamma_{i-1} (indices
// mod n). A configuration is a regular polygon when all side-length
// residuals ||e_{i+1}||^2 - ||e_i||^2 and all angle residuals
// e_{i+1}.e_i - e_{i+2}.e_{i+1} vanish. The square mode appends the two
// diagonal residuals ||gamma_0 - gamma_2|| - sqrt(2) l and
// ||gamma_1 - gamma_3|| - sqrt(2) l, l being the mean side length.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rigidform/curve.hpp"

namespace rigidform {

struct FinderConfig {
  int n = 4;
  double w_length = 1.0;
  double w_angle = 1.0;
  double w_diagonal = 1.0;
  int n_init = 32;
  int k_max = 100;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  double eta0 = 1.0;
  double eta_min = 1e-12;
  double step_tol = 1e-10;      // stop when ||delta theta|| falls below
  double cost_rel_tol = 1e-12;  // stop when the relative cost decrease falls below
  double cost_accept = 1e-9;    // a run counts as a rigid formation below this cost
  double lambda0 = 1e-8;
  double lambda_max = 1e6;
  std::optional<Vec2> target;
  bool square_mode = false;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: hardware concurrency

  // Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const FinderConfig&) const = default;
};

// Stacked residuals: n length entries, n angle entries, then two diagonal
// entries in square mode.
struct ResidualVector {
  Eigen::VectorXd values;
  int n = 0;
  bool square_mode = false;

  double length(int i) const { return values[i]; }
  double angle(int i) const { return values[n + i]; }
  double diagonal(int k) const { return values[2 * n + k]; }
  Eigen::Index size() const { return values.size(); }
};

enum class InitKind { CurvatureWeighted, Random, User };
enum class StopReason { StepTolerance, CostTolerance, ZeroCost, MaxIterations, LineSearchStalled, Failed };

std::string to_string(InitKind k);
std::string to_string(StopReason r);

struct FormationSolution {
  Eigen::VectorXd theta;  // wrapped into [0, 2*pi)
  std::vector<Vec2> vertices;
  Vec2 center = Vec2::Zero();
  double mean_side = 0.0;
  double residual_norm = 0.0;
  double cost = 0.0;
  int iterations = 0;
  InitKind init_kind = InitKind::User;
  int start_index = 0;
  bool feasible = false;  // non-degenerate polygon
  bool convex = false;
  bool accepted = false;  // cost below FinderConfig::cost_accept
  StopReason stop = StopReason::MaxIterations;
  std::vector<double> cost_trace;  // cost before the first and after every accepted step
};

ResidualVector residuals(const Eigen::VectorXd& theta, const Curve& curve, bool square_mode = false);
Eigen::VectorXd residual_weights(const FinderConfig& config, int n);
double cost(const Eigen::VectorXd& theta, const Curve& curve, const FinderConfig& config);

// Assembled from the closed-form three- and four-point stencils; entries
// outside the stencils are exactly zero. Square mode adds two dense rows.
Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta, const Curve& curve, bool square_mode = false);

// Fills center, side length, residuals, cost and the feasibility flags.
FormationSolution evaluate_formation(const Eigen::VectorXd& theta, const Curve& curve, const FinderConfig& config);

// Non-degeneracy: mean side >= 0.05 scale, closest vertex pair >= 0.01 scale,
// parameters pairwise distinct mod 2*pi by >= 1e-3.
bool is_feasible(const FormationSolution& s, const Curve& curve, const Eigen::VectorXd& theta);
bool is_convex(const std::vector<Vec2>& vertices);

// Damped Gauss-Newton with Armijo backtracking. Throws NormalEquationsSingular
// when the damped normal matrix cannot be factored up to lambda_max.
FormationSolution gauss_newton_solve(const Eigen::VectorXd& theta0, const Curve& curve, const FinderConfig& config);

// Equal-arclength parameters, theta_0 = 0.
Eigen::VectorXd init_curvature_weighted(const Curve& curve, int n);
Eigen::VectorXd init_random(int n, std::mt19937_64& rng);

struct MultistartResult {
  FormationSolution best;
  std::vector<FormationSolution> runs;  // indexed by start
};

// One curvature-weighted start followed by n_init - 1 random starts.
MultistartResult multistart_all(const Curve& curve, const FinderConfig& config);
FormationSolution multistart(const Curve& curve, const FinderConfig& config);

}  // namespace rigidform
