#include "pgm/gm.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgm {

namespace {

void check_problem(const GMProblem& p) {
  if (p.candidates.empty()) {
    throw std::invalid_argument("gradient matching needs at least one candidate");
  }
  const Eigen::Index dim = p.target.size();
  if (dim == 0) throw std::invalid_argument("target must be nonempty");
  for (const GradVec& g : p.candidates) {
    if (g.size() != dim) {
      throw std::invalid_argument("candidate dim does not match target dim");
    }
  }
  if (p.budget < 0 || p.budget > static_cast<int>(p.candidates.size())) {
    throw std::invalid_argument("budget must be in [0, #candidates]");
  }
  if (!(p.lambda >= 0.0) || !(p.epsilon >= 0.0)) {
    throw std::invalid_argument("lambda and epsilon must be nonnegative");
  }
}

void check_support(const GMProblem& p, std::span<const int> selected,
                   bool allow_empty) {
  if (!allow_empty && selected.empty()) {
    throw std::invalid_argument("selected set must be nonempty");
  }
  std::vector<char> seen(p.candidates.size(), 0);
  for (int i : selected) {
    if (i < 0 || i >= static_cast<int>(p.candidates.size())) {
      throw std::invalid_argument("selected index " + std::to_string(i) +
                                  " out of range");
    }
    if (seen[i]) throw std::invalid_argument("selected indices must be unique");
    seen[i] = 1;
  }
}

// argmin_{w >= 0} lambda ||w||^2 + ||G w - t||, parameterized by the Gram
// matrix of the support, ct = G^T t and tt = ||t||^2. The unsquared residual
// norm is handled by alternating exact ridge-NNLS solves with a fixed point
// on rho = ||G w - t||; the joint objective
//   lambda ||w||^2 + ||G w - t||^2 / (2 rho) + rho / 2
// is jointly convex (quadratic-over-linear), so alternating exact
// minimization drives it to the global optimum and never increases it.
Eigen::VectorXd ridge_residual_nnls(const Eigen::MatrixXd& gram,
                                    const Eigen::VectorXd& ct, double tt,
                                    double lambda,
                                    const Eigen::VectorXd* warm_start) {
  const Eigen::Index m = ct.size();
  auto residual_norm = [&](const Eigen::VectorXd& w) {
    const double r2 = w.dot(gram * w) - 2.0 * w.dot(ct) + tt;
    return std::sqrt(std::max(r2, 0.0));
  };

  if (lambda == 0.0) return nnqp(gram, ct);  // plain NNLS, rho drops out

  Eigen::VectorXd w =
      warm_start ? *warm_start : Eigen::VectorXd::Zero(m).eval();
  double rho = residual_norm(w);
  const double rho_floor = 1e-13 * std::max(1.0, std::sqrt(std::max(tt, 0.0)));
  Eigen::MatrixXd q(m, m);
  for (int it = 0; it < 200; ++it) {
    const double r = std::max(rho, rho_floor);
    q = gram;
    q.diagonal().array() += 2.0 * lambda * r;
    w = nnqp(q, ct);
    const double rho_new = residual_norm(w);
    const bool done = std::abs(rho_new - rho) <= 1e-14 * std::max(1.0, rho_new);
    rho = rho_new;
    if (done) break;
  }
  return w;
}

struct SupportData {
  Eigen::MatrixXd gram;
  Eigen::VectorXd ct;
};

SupportData build_support(const GMProblem& p, std::span<const int> selected) {
  const Eigen::Index m = static_cast<Eigen::Index>(selected.size());
  SupportData s;
  s.gram.resize(m, m);
  s.ct.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const GradVec& gi = p.candidates[selected[i]];
    s.ct[i] = gi.dot(p.target);
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = gi.dot(p.candidates[selected[j]]);
      s.gram(i, j) = v;
      s.gram(j, i) = v;
    }
  }
  return s;
}

}  // namespace

namespace detail {

double combo_objective(std::span<const GradVec> candidates,
                       std::span<const int> ids, std::span<const double> weights,
                       double scale, const GradVec& target, double lambda) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(target.size());
  double wsq = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double w = weights[i] * scale;
    wsq += w * w;
    acc += w * candidates[ids[i]];
  }
  return lambda * wsq + (acc - target).norm();
}

}  // namespace detail

Eigen::VectorXd nnqp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c) {
  const int m = static_cast<int>(c.size());
  if (Q.rows() != m || Q.cols() != m) {
    throw std::invalid_argument("Q must be square and match c");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  if (m == 0) return w;
  std::vector<char> passive(m, 0);
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;

  std::vector<int> support;
  Eigen::VectorXd grad(m);
  const int outer_cap = 3 * m + 30;
  for (int outer = 0; outer < outer_cap; ++outer) {
    grad = c - Q * w;
    int enter = -1;
    double best = tol;
    for (int i = 0; i < m; ++i) {
      if (!passive[i] && grad[i] > best) {
        best = grad[i];
        enter = i;
      }
    }
    if (enter < 0) break;  // dual feasible: KKT holds
    passive[enter] = 1;

    for (int inner = 0; inner <= m; ++inner) {
      support.clear();
      for (int i = 0; i < m; ++i) {
        if (passive[i]) support.push_back(i);
      }
      const int k = static_cast<int>(support.size());
      Eigen::MatrixXd qpp(k, k);
      Eigen::VectorXd cp(k);
      for (int a = 0; a < k; ++a) {
        cp[a] = c[support[a]];
        for (int b = 0; b < k; ++b) qpp(a, b) = Q(support[a], support[b]);
      }
      // c_P lies in range(Q_PP) by construction, so the rank-revealing solve
      // is exact even on singular supports.
      Eigen::VectorXd z = qpp.completeOrthogonalDecomposition().solve(cp);

      bool feasible = true;
      for (int a = 0; a < k; ++a) {
        if (!(z[a] > 0.0)) {
          feasible = false;
          break;
        }
      }
      if (feasible) {
        w.setZero();
        for (int a = 0; a < k; ++a) w[support[a]] = z[a];
        break;
      }

      // Step to the feasibility boundary and drop the blocking variables.
      double alpha = 1.0;
      for (int a = 0; a < k; ++a) {
        if (z[a] <= 0.0) {
          const double denom = w[support[a]] - z[a];
          const double step = denom > 0.0 ? w[support[a]] / denom : 0.0;
          alpha = std::min(alpha, step);
        }
      }
      for (int a = 0; a < k; ++a) {
        const int i = support[a];
        w[i] += alpha * (z[a] - w[i]);
      }
      bool dropped = false;
      for (int a = 0; a < k; ++a) {
        const int i = support[a];
        if (z[a] <= 0.0 && w[i] <= tol * 1e-4) {
          w[i] = 0.0;
          passive[i] = 0;
          dropped = true;
        }
      }
      if (!dropped) {
        // Roundoff left every blocker marginally positive; drop the smallest.
        int drop = -1;
        double wmin = std::numeric_limits<double>::infinity();
        for (int a = 0; a < k; ++a) {
          if (z[a] <= 0.0 && w[support[a]] < wmin) {
            wmin = w[support[a]];
            drop = support[a];
          }
        }
        if (drop < 0) break;
        w[drop] = 0.0;
        passive[drop] = 0;
      }
    }
  }
  return w.cwiseMax(0.0);
}

double eval_objective(const GMProblem& problem, std::span<const int> selected,
                      std::span<const double> weights) {
  check_problem(problem);
  if (selected.size() != weights.size()) {
    throw std::invalid_argument("selected and weights must align");
  }
  for (int i : selected) {
    if (i < 0 || i >= static_cast<int>(problem.candidates.size())) {
      throw std::invalid_argument("selected index " + std::to_string(i) +
                                  " out of range");
    }
  }
  return detail::combo_objective(problem.candidates, selected, weights, 1.0,
                         problem.target, problem.lambda);
}

std::vector<double> solve_weights(const GMProblem& problem,
                                  std::span<const int> selected) {
  check_problem(problem);
  check_support(problem, selected, /*allow_empty=*/false);
  const SupportData s = build_support(problem, selected);
  const Eigen::VectorXd w = ridge_residual_nnls(
      s.gram, s.ct, problem.target.squaredNorm(), problem.lambda, nullptr);
  return {w.data(), w.data() + w.size()};
}

GMResult gradient_match(const GMProblem& problem) {
  check_problem(problem);
  const int n = static_cast<int>(problem.candidates.size());
  const double tt = problem.target.squaredNorm();

  GMResult res;
  res.objective = problem.target.norm();
  if (problem.budget == 0) return res;

  // Candidate-candidate inner products; alignments against the residual then
  // never touch the full gradient dimension.
  Eigen::MatrixXd gram_all(n, n);
  Eigen::VectorXd ct_all(n);
  for (int i = 0; i < n; ++i) {
    ct_all[i] = problem.candidates[i].dot(problem.target);
    for (int j = 0; j <= i; ++j) {
      const double v = problem.candidates[i].dot(problem.candidates[j]);
      gram_all(i, j) = v;
      gram_all(j, i) = v;
    }
  }

  std::vector<int> selected;
  Eigen::VectorXd weights(0);
  std::vector<char> in_support(n, 0);
  Eigen::MatrixXd gram_sel(problem.budget, problem.budget);
  Eigen::VectorXd ct_sel(problem.budget);

  double objective = res.objective;
  while (static_cast<int>(selected.size()) < problem.budget &&
         objective > problem.epsilon) {
    // alignment of each candidate with the residual t - sum w_i g_i
    Eigen::VectorXd align = ct_all;
    for (std::size_t i = 0; i < selected.size(); ++i) {
      align -= weights[i] * gram_all.col(selected[i]);
    }
    int pick = -1;
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!in_support[j] && align[j] > best) {
        best = align[j];
        pick = j;
      }
    }
    if (pick < 0) break;  // nothing aligns positively with the residual

    const int m = static_cast<int>(selected.size());
    selected.push_back(pick);
    in_support[pick] = 1;
    ct_sel[m] = ct_all[pick];
    for (int i = 0; i <= m; ++i) {
      const double v = gram_all(selected[i], pick);
      gram_sel(i, m) = v;
      gram_sel(m, i) = v;
    }

    Eigen::VectorXd warm(m + 1);
    warm.head(m) = weights;
    warm[m] = 0.0;
    Eigen::VectorXd solved = ridge_residual_nnls(
        gram_sel.topLeftCorner(m + 1, m + 1), ct_sel.head(m + 1), tt,
        problem.lambda, &warm);
    double new_objective = detail::combo_objective(
        problem.candidates, selected,
        {solved.data(), static_cast<std::size_t>(solved.size())}, 1.0,
        problem.target, problem.lambda);
    if (new_objective > objective) {
      // The warm start extends the previous point with a zero weight, so its
      // objective is bit-identical to the previous one; keep it when the
      // re-solve gains nothing beyond roundoff.
      solved = warm;
      new_objective = objective;
    }
    weights = solved;
    objective = new_objective;
    res.iterations += 1;
    res.objective_trace.push_back(objective);
  }

  res.selected = std::move(selected);
  res.weights.assign(weights.data(), weights.data() + weights.size());
  res.objective = objective;
  return res;
}

}  // namespace pgm
