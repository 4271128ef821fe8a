#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "pgm/model.hpp"

namespace pgm {

// One gradient-matching instance: approximate `target` by a nonnegatively
// weighted sum of at most `budget` candidates, minimizing
//   E(w) = lambda * ||w||^2 + || sum_i w_i g_i - target ||
// with a plain (unsquared) Euclidean residual norm.
struct GMProblem {
  GradVec target;
  std::vector<GradVec> candidates;
  int budget = 0;
  double lambda = 0.0;
  double epsilon = 0.0;  // stop once the objective falls to this
};

struct GMResult {
  std::vector<int> selected;   // candidate indices in pick order, no repeats
  std::vector<double> weights; // aligned with selected, all >= 0
  double objective = 0.0;      // E at (selected, weights)
  int iterations = 0;
  std::vector<double> objective_trace;  // objective after each iteration
};

// Exact E(w) at the given support; index out of range throws.
double eval_objective(const GMProblem& problem, std::span<const int> selected,
                      std::span<const double> weights);

// argmin_{w >= 0} E(w) over the fixed support, to first-order stationarity.
// All-zero candidates yield all-zero weights (objective ||target||), not an
// error. Deterministic.
std::vector<double> solve_weights(const GMProblem& problem,
                                  std::span<const int> selected);

// Orthogonal matching pursuit on E: repeatedly add the unselected candidate
// with the largest inner product against the residual (ties -> smallest
// index), re-solve the weights, and stop at the budget, at objective <=
// epsilon, or when no candidate has positive alignment. The objective is
// non-increasing across iterations.
GMResult gradient_match(const GMProblem& problem);

// Lawson-Hanson style active-set solver for
//   min_{w >= 0} 0.5 w^T Q w - c^T w,   Q symmetric PSD.
// Exposed for the solver tests.
Eigen::VectorXd nnqp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c);

namespace detail {

// lambda * sum (w_i*scale)^2 + || sum (w_i*scale) g_i - target ||, summed in
// support order. eval_objective and the partition-bound check share this so
// identical inputs produce identical doubles.
double combo_objective(std::span<const GradVec> candidates,
                       std::span<const int> ids, std::span<const double> weights,
                       double scale, const GradVec& target, double lambda);

}  // namespace detail

}  // namespace pgm
