// SPDX-License-Identifier: Apache-2.0

#include "otfs_rsma/qcqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace otfs_rsma {

QuadraticFunction QuadraticFunction::linear(RVector g, double c) {
  QuadraticFunction f;
  f.gradient = std::move(g);
  f.constant = c;
  return f;
}

double QuadraticFunction::value(const RVector& x) const {
  double v = gradient.dot(x) + constant;
  if (!is_linear()) v += 0.5 * x.dot(hessian * x);
  return v;
}

RVector QuadraticFunction::grad(const RVector& x) const {
  if (is_linear()) return gradient;
  return hessian * x + gradient;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 0.01;
constexpr double kBacktrack = 0.5;
constexpr double kNewtonTol = 1e-11;

struct Centering {
  int steps = 0;
  bool budget_exhausted = false;
};

class BarrierSolver {
 public:
  BarrierSolver(const QuadraticFunction& objective, const std::vector<QuadraticFunction>& constraints,
                int dim)
      : f0_(objective), fi_(constraints), n_(dim) {}

  double merit(const RVector& x, double tau) const {
    double v = tau * f0_.value(x);
    for (const auto& f : fi_) {
      const double c = f.value(x);
      if (!(c < 0.0)) return kInf;
      v -= std::log(-c);
    }
    return v;
  }

  RVector gradient(const RVector& x, double tau) const {
    RVector g = tau * f0_.grad(x);
    for (const auto& f : fi_) g += f.grad(x) / (-f.value(x));
    return g;
  }

  RMatrix hessian(const RVector& x, double tau) const {
    RMatrix h = RMatrix::Zero(n_, n_);
    if (!f0_.is_linear()) h += tau * f0_.hessian;
    for (const auto& f : fi_) {
      const double c = -f.value(x);
      const RVector g = f.grad(x);
      if (!f.is_linear()) h += f.hessian / c;
      h.noalias() += g * g.transpose() / (c * c);
    }
    return h;
  }

  // Damped Newton on tau f0 + barrier. `stop` is checked after every step.
  template <typename Stop>
  Centering center(RVector& x, double tau, int budget, Stop stop) const {
    Centering out;
    while (true) {
      if (out.steps >= budget) {
        out.budget_exhausted = true;
        return out;
      }
      const RVector g = gradient(x, tau);
      RMatrix h = hessian(x, tau);
      RVector dx = newton_direction(h, g);
      const double decrement = -g.dot(dx);
      const double base = merit(x, tau);
      const double scale = std::max(1.0, std::abs(base));
      if (!(decrement > 2.0 * kNewtonTol)) return out;
      double s = 1.0;
      RVector trial = x + dx;
      double m = merit(trial, tau);
      while (!(m <= base - kArmijo * s * decrement)) {
        s *= kBacktrack;
        if (s < 1e-14) return out;  // stalled at working precision
        trial = x + s * dx;
        m = merit(trial, tau);
      }
      const bool stalled = base - m <= 1e-13 * scale;
      x = trial;
      ++out.steps;
      if (stalled) return out;
      if (stop(x)) return out;
    }
  }

 private:
  static RVector newton_direction(RMatrix& h, const RVector& g) {
    h = 0.5 * (h + h.transpose());
    Eigen::LLT<RMatrix> llt(h);
    if (llt.info() == Eigen::Success) return llt.solve(-g);
    const double ridge = 1e-12 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    for (double r = ridge; r < 1e6; r *= 100.0) {
      Eigen::LLT<RMatrix> shifted(h + r * RMatrix::Identity(h.rows(), h.cols()));
      if (shifted.info() == Eigen::Success) return shifted.solve(-g);
    }
    throw SolverError("qcqp: Newton system is singular");
  }

  const QuadraticFunction& f0_;
  const std::vector<QuadraticFunction>& fi_;
  int n_;
};

void check_function(const QuadraticFunction& f, int dim, double tol, const std::string& what) {
  if (f.gradient.size() != dim) throw DimensionError("qcqp: " + what + " gradient has the wrong length");
  if (f.is_linear()) return;
  if (f.hessian.rows() != dim || f.hessian.cols() != dim) {
    throw DimensionError("qcqp: " + what + " Hessian has the wrong shape");
  }
  const RMatrix sym = 0.5 * (f.hessian + f.hessian.transpose());
  Eigen::SelfAdjointEigenSolver<RMatrix> es(sym, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -tol * scale) {
    throw InvalidParameter("qcqp: " + what + " is not convex");
  }
}

bool is_constant(const QuadraticFunction& f) {
  return f.gradient.cwiseAbs().maxCoeff() == 0.0 &&
         (f.is_linear() || f.hessian.cwiseAbs().maxCoeff() == 0.0);
}

double max_constraint(const std::vector<QuadraticFunction>& fi, const RVector& x) {
  double v = -kInf;
  for (const auto& f : fi) v = std::max(v, f.value(x));
  return v;
}

// Finds x with every f_i(x) < 0 by minimizing r subject to f_i(x) <= r.
RVector phase_one(const std::vector<QuadraticFunction>& fi, int dim, RVector x0,
                  const QcqpOptions& opt, int& newton_used) {
  const int n = dim + 1;
  auto lift = [&](const QuadraticFunction& f) {
    QuadraticFunction g;
    g.gradient = RVector::Zero(n);
    g.gradient.head(dim) = f.gradient;
    g.gradient(dim) = -1.0;
    g.constant = f.constant;
    if (!f.is_linear()) {
      g.hessian = RMatrix::Zero(n, n);
      g.hessian.topLeftCorner(dim, dim) = f.hessian;
    }
    return g;
  };
  std::vector<QuadraticFunction> lifted;
  lifted.reserve(fi.size());
  for (const auto& f : fi) lifted.push_back(lift(f));
  RVector e = RVector::Zero(n);
  e(dim) = 1.0;
  const QuadraticFunction obj = QuadraticFunction::linear(e, 0.0);

  RVector z(n);
  z.head(dim) = x0;
  const double worst = max_constraint(fi, x0);
  z(dim) = worst + std::max(1.0, std::abs(worst));

  const BarrierSolver solver(obj, lifted, n);
  const double m = static_cast<double>(lifted.size());
  auto feasible = [&](const RVector& zz) { return max_constraint(fi, zz.head(dim)) < 0.0; };
  double tau = opt.tau_init;
  while (true) {
    const Centering c = solver.center(z, tau, opt.max_newton - newton_used, feasible);
    newton_used += c.steps;
    if (feasible(z)) return z.head(dim);
    if (c.budget_exhausted) break;
    if (m / tau < opt.tol_gap) break;
    tau *= opt.tau_growth;
  }
  throw SolverError("qcqp: no strictly feasible point (phase I optimum r = " +
                    std::to_string(z(dim)) + ")");
}

}  // namespace

QcqpResult qcqp_solve(const QcqpProblem& problem, const QcqpOptions& options,
                      const std::optional<RVector>& start) {
  const int n = problem.dim;
  if (n < 1) throw DimensionError("qcqp: dimension must be >= 1");
  check_function(problem.objective, n, options.psd_tolerance, "objective");

  std::vector<QuadraticFunction> active;
  std::vector<int> active_index;
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    const auto& f = problem.constraints[i];
    check_function(f, n, options.psd_tolerance, "constraint " + std::to_string(i));
    if (is_constant(f)) {
      if (f.constant > options.tol_feas) {
        throw SolverError("qcqp: constant constraint " + std::to_string(i) + " is violated");
      }
      continue;
    }
    active.push_back(f);
    active_index.push_back(static_cast<int>(i));
  }
  if (active.empty()) throw SolverError("qcqp: problem has no active constraints and may be unbounded");

  QcqpResult res;
  RVector x = start ? *start : RVector::Zero(n);
  if (x.size() != n) throw DimensionError("qcqp: start point has the wrong length");
  if (!(max_constraint(active, x) < 0.0)) x = phase_one(active, n, x, options, res.newton_iterations);

  const BarrierSolver solver(problem.objective, active, n);
  const double m = static_cast<double>(active.size());
  double tau = options.tau_init;
  bool exhausted = false;
  while (true) {
    const Centering c = solver.center(x, tau, options.max_newton - res.newton_iterations,
                                      [](const RVector&) { return false; });
    res.newton_iterations += c.steps;
    if (c.budget_exhausted) {
      exhausted = true;
      break;
    }
    if (m / tau < options.tol_gap) break;
    tau *= options.tau_growth;
  }

  res.x = x;
  res.objective = problem.objective.value(x);
  res.gap = m / tau;
  const RVector g0 = problem.objective.grad(x);
  RVector lambda(static_cast<Eigen::Index>(active.size()));
  RMatrix jac(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) {
    lambda(static_cast<Eigen::Index>(k)) = 1.0 / (-tau * active[k].value(x));
    jac.col(static_cast<Eigen::Index>(k)) = active[k].grad(x);
  }
  // least-squares multipliers on the near-active set, kept when they
  // reduce the stationarity residual
  {
    const double scale = std::max(1.0, std::abs(res.objective));
    std::vector<Eigen::Index> near;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (-active[k].value(x) <= 1e-6 * scale) near.push_back(static_cast<Eigen::Index>(k));
    }
    if (!near.empty()) {
      RVector rhs = -g0;
      RMatrix jn(n, static_cast<Eigen::Index>(near.size()));
      for (std::size_t k = 0; k < active.size(); ++k) {
        const auto it = std::find(near.begin(), near.end(), static_cast<Eigen::Index>(k));
        if (it == near.end()) {
          rhs -= lambda(static_cast<Eigen::Index>(k)) * jac.col(static_cast<Eigen::Index>(k));
        } else {
          jn.col(it - near.begin()) = jac.col(static_cast<Eigen::Index>(k));
        }
      }
      const RVector ln = jn.completeOrthogonalDecomposition().solve(rhs).cwiseMax(0.0);
      RVector polished = lambda;
      for (std::size_t i = 0; i < near.size(); ++i) polished(near[i]) = ln(static_cast<Eigen::Index>(i));
      if ((g0 + jac * polished).norm() < (g0 + jac * lambda).norm()) lambda = polished;
    }
  }
  res.duals = RVector::Zero(static_cast<Eigen::Index>(problem.constraints.size()));
  res.max_violation = 0.0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const double l = lambda(static_cast<Eigen::Index>(k));
    res.duals(active_index[k]) = l;
    res.kkt_complementarity = std::max(res.kkt_complementarity, std::abs(l * active[k].value(x)));
  }
  for (const auto& f : problem.constraints) res.max_violation = std::max(res.max_violation, f.value(x));
  res.kkt_stationarity = (g0 + jac * lambda).norm();
  res.status = (exhausted || res.gap >= options.tol_gap || res.max_violation > options.tol_feas)
                   ? QcqpStatus::Degraded
                   : QcqpStatus::Optimal;
  return res;
}

}  // namespace otfs_rsma
