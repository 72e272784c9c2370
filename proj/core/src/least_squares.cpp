#include "isb/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "isb/errors.hpp"

namespace isb {

namespace {

struct Box {
  const Eigen::VectorXd& lo;
  const Eigen::VectorXd& hi;
  double lower(Eigen::Index i) const { return lo.size() ? lo[i] : -std::numeric_limits<double>::infinity(); }
  double upper(Eigen::Index i) const { return hi.size() ? hi[i] : std::numeric_limits<double>::infinity(); }
  Eigen::VectorXd clamp(Eigen::VectorXd x) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower(i), upper(i));
    return x;
  }
};

}  // namespace

LeastSquaresResult levenberg_marquardt(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& options) {
  const Eigen::Index n = x0.size();
  if (n == 0) throw DomainError("levenberg_marquardt: no parameters");
  if ((problem.lower.size() && problem.lower.size() != n) || (problem.upper.size() && problem.upper.size() != n)) {
    throw DomainError("levenberg_marquardt: bound dimension mismatch");
  }
  const Box box{problem.lower, problem.upper};
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(box.lower(i) <= box.upper(i))) throw DomainError("levenberg_marquardt: empty box");
  }

  LeastSquaresResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    Eigen::VectorXd r = problem.residuals(x);
    if (!r.allFinite()) throw NumericalError("levenberg_marquardt: non-finite residuals");
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
    Eigen::MatrixXd j(r.size(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double h = options.fd_rel_step * std::max(1.0, std::abs(x[k]));
      Eigen::VectorXd xp = x, xm = x;
      xp[k] = std::min(x[k] + h, box.upper(k));
      xm[k] = std::max(x[k] - h, box.lower(k));
      const double span = xp[k] - xm[k];
      if (span <= 0.0) {
        j.col(k).setZero();
        continue;
      }
      const Eigen::VectorXd rp = xp[k] == x[k] ? r : eval(xp);
      const Eigen::VectorXd rm = xm[k] == x[k] ? r : eval(xm);
      j.col(k) = (rp - rm) / span;
    }
    return j;
  };

  Eigen::VectorXd x = box.clamp(x0);
  Eigen::VectorXd r = eval(x);
  if (r.size() < n) throw DomainError("levenberg_marquardt: fewer residuals than parameters");
  double obj = r.squaredNorm();
  res.history.push_back(obj);
  double lambda = options.initial_damping;
  Eigen::MatrixXd j = jacobian(x, r);

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (obj == 0.0) {
      res.converged = true;
      res.message = "zero residual";
      break;
    }
    const Eigen::MatrixXd a = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    Eigen::VectorXd scale = a.diagonal();
    const double floor = std::max(1e-300, 1e-12 * scale.maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) scale[i] = std::max(scale[i], floor);

    bool accepted = false;
    bool tiny_step = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * scale;
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      const Eigen::VectorXd x_new = box.clamp(x + step);
      const Eigen::VectorXd taken = x_new - x;
      if (taken.norm() <= options.step_tol * (x.norm() + options.step_tol)) {
        tiny_step = true;
        break;
      }
      const Eigen::VectorXd r_new = eval(x_new);
      const double obj_new = r_new.squaredNorm();
      if (obj_new < obj) {
        x = x_new;
        r = r_new;
        obj = obj_new;
        res.history.push_back(obj);
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (taken.norm() <= options.step_tol * (x.norm() + options.step_tol)) tiny_step = true;
        break;
      }
      lambda *= 10.0;
    }
    if (tiny_step) {
      res.converged = true;
      res.message = "relative step below tolerance";
      if (accepted) j = jacobian(x, r);
      break;
    }
    if (!accepted) {
      res.converged = true;
      res.message = "no descent direction at maximal damping";
      break;
    }
    j = jacobian(x, r);
  }
  if (!res.converged) res.message = "iteration cap reached";

  res.params = x;
  res.residuals = r;
  res.jacobian = j;
  res.objective = obj;
  res.at_bound.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double tol = 1e-9 * std::max(1.0, std::abs(x[i]));
    res.at_bound[static_cast<std::size_t>(i)] =
        std::abs(x[i] - box.lower(i)) <= tol || std::abs(x[i] - box.upper(i)) <= tol;
  }
  return res;
}

Eigen::MatrixXd parameter_covariance(const LeastSquaresResult& result, bool scale_by_residual) {
  const Eigen::Index n = result.params.size();
  const Eigen::Index m = result.residuals.size();
  const Eigen::MatrixXd a = result.jacobian.transpose() * result.jacobian;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible() || !a.allFinite()) {
    return Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  }
  Eigen::MatrixXd cov = lu.inverse();
  if (scale_by_residual) {
    const double dof = static_cast<double>(std::max<Eigen::Index>(1, m - n));
    cov *= result.objective / dof;
  }
  return cov;
}

}  // namespace isb
