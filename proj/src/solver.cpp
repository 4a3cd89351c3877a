#include "cfisac/solver.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace cfisac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_pd_2x2(const Eigen::Matrix2d& f) {
  return f(0, 0) > 0.0 && f.determinant() > 0.0;
}

Eigen::Matrix2d inverse_2x2(const Eigen::Matrix2d& f) {
  const double det = f.determinant();
  Eigen::Matrix2d inv;
  inv << f(1, 1), -f(0, 1), -f(1, 0), f(0, 0);
  return inv / det;
}

struct Evaluator {
  const ConvexProgram& prog;
  std::vector<int> positive_vars;  // indices that must stay > 0

  explicit Evaluator(const ConvexProgram& p) : prog(p) {
    std::vector<char> seen(static_cast<size_t>(p.n), 0);
    const auto mark = [&](int i) {
      if (i < 0 || i >= p.n)
        throw std::invalid_argument("solver: square-root index out of range");
      if (!seen[static_cast<size_t>(i)]) {
        seen[static_cast<size_t>(i)] = 1;
        positive_vars.push_back(i);
      }
    };
    for (const auto& qs : p.quadsqrt) {
      for (const auto& s : qs.sqrts) mark(s.index);
      for (const auto& s : qs.bisqrts) {
        mark(s.a);
        mark(s.b);
      }
    }
  }

  Eigen::Matrix2d trinv_matrix(const TraceInvConstraint& c,
                               const Eigen::VectorXd& x) const {
    Eigen::Matrix2d f = c.f0;
    for (size_t k = 0; k < c.idx.size(); ++k) f += x[c.idx[k]] * c.coef[k];
    return f;
  }

  Eigen::MatrixXd lmi_matrix(const LmiConstraint& c,
                             const Eigen::VectorXd& x) const {
    Eigen::MatrixXd g = c.g0;
    for (size_t k = 0; k < c.idx.size(); ++k) g += x[c.idx[k]] * c.coef[k];
    return g;
  }

  double quadsqrt_value(const QuadSqrtConstraint& c,
                        const Eigen::VectorXd& x) const {
    double g = c.d + c.w.dot(x);
    for (const auto& sq : c.squares) {
      const double v = sq.q.dot(x) + sq.r;
      g += v * v;
    }
    for (const auto& s : c.sqrts) g -= s.coef * std::sqrt(x[s.index]);
    for (const auto& s : c.bisqrts)
      g -= s.coef * std::sqrt(x[s.a] * x[s.b]);
    return g;
  }

  // Barrier value of the full constraint set; +infinity outside the
  // strictly feasible domain.
  double barrier(const Eigen::VectorXd& x) const {
    for (int i : positive_vars)
      if (!(x[i] > 0.0)) return kInf;
    double phi = 0.0;
    for (const auto& c : prog.linear) {
      const double g = c.w.dot(x) + c.d;
      if (!(g < 0.0)) return kInf;
      phi -= std::log(-g);
    }
    for (const auto& c : prog.quadsqrt) {
      const double g = quadsqrt_value(c, x);
      if (!(g < 0.0)) return kInf;
      phi -= std::log(-g);
    }
    for (const auto& c : prog.traceinv) {
      const Eigen::Matrix2d f = trinv_matrix(c, x);
      if (!is_pd_2x2(f)) return kInf;
      const double rhs =
          c.gamma + (c.g.size() > 0 ? c.g.dot(x) : 0.0);
      const double slack = rhs - inverse_2x2(f).trace();
      if (!(slack > 0.0)) return kInf;
      phi -= std::log(slack);
    }
    for (const auto& c : prog.lmi) {
      const Eigen::MatrixXd g = lmi_matrix(c, x);
      const Eigen::LLT<Eigen::MatrixXd> llt(g);
      if (llt.info() != Eigen::Success) return kInf;
      const Eigen::MatrixXd l = llt.matrixL();
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < l.rows(); ++i) {
        if (!(l(i, i) > 0.0)) return kInf;
        logdet += std::log(l(i, i));
      }
      phi -= 2.0 * logdet;
    }
    return phi;
  }

  // Accumulates the gradient and Hessian of the barrier at a strictly
  // feasible x. Returns false when x is outside the domain.
  bool barrier_derivatives(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                           Eigen::MatrixXd& hess) const {
    const int n = prog.n;
    grad.setZero(n);
    hess.setZero(n, n);
    for (int i : positive_vars)
      if (!(x[i] > 0.0)) return false;

    for (const auto& c : prog.linear) {
      const double g = c.w.dot(x) + c.d;
      if (!(g < 0.0)) return false;
      const double inv = 1.0 / (-g);
      grad.noalias() += inv * c.w;
      hess.noalias() += (inv * inv) * (c.w * c.w.transpose());
    }

    Eigen::VectorXd dg(n);
    for (const auto& c : prog.quadsqrt) {
      const double g = quadsqrt_value(c, x);
      if (!(g < 0.0)) return false;
      dg = c.w;
      for (const auto& sq : c.squares) {
        const double v = sq.q.dot(x) + sq.r;
        dg.noalias() += 2.0 * v * sq.q;
      }
      for (const auto& s : c.sqrts)
        dg[s.index] -= s.coef / (2.0 * std::sqrt(x[s.index]));
      for (const auto& s : c.bisqrts) {
        const double root = std::sqrt(x[s.a] * x[s.b]);
        dg[s.a] -= s.coef * root / (2.0 * x[s.a]);
        dg[s.b] -= s.coef * root / (2.0 * x[s.b]);
      }
      const double inv = 1.0 / (-g);
      grad.noalias() += inv * dg;
      hess.noalias() += (inv * inv) * (dg * dg.transpose());
      // curvature of the constraint itself
      for (const auto& sq : c.squares)
        hess.noalias() += (2.0 * inv) * (sq.q * sq.q.transpose());
      for (const auto& s : c.sqrts) {
        const double xi = x[s.index];
        hess(s.index, s.index) +=
            inv * s.coef / (4.0 * xi * std::sqrt(xi));
      }
      for (const auto& s : c.bisqrts) {
        const double root = std::sqrt(x[s.a] * x[s.b]);
        const double haa = s.coef * root / (4.0 * x[s.a] * x[s.a]);
        const double hbb = s.coef * root / (4.0 * x[s.b] * x[s.b]);
        const double hab = -s.coef * root / (4.0 * x[s.a] * x[s.b]);
        hess(s.a, s.a) += inv * haa;
        hess(s.b, s.b) += inv * hbb;
        hess(s.a, s.b) += inv * hab;
        hess(s.b, s.a) += inv * hab;
      }
    }

    for (const auto& c : prog.traceinv) {
      const Eigen::Matrix2d f = trinv_matrix(c, x);
      if (!is_pd_2x2(f)) return false;
      const Eigen::Matrix2d finv = inverse_2x2(f);
      const double rhs = c.gamma + (c.g.size() > 0 ? c.g.dot(x) : 0.0);
      const double slack = rhs - finv.trace();
      if (!(slack > 0.0)) return false;
      const size_t nk = c.idx.size();
      std::vector<Eigen::Matrix2d> a(nk);
      Eigen::VectorXd dh = Eigen::VectorXd::Zero(static_cast<int>(nk));
      for (size_t k = 0; k < nk; ++k) {
        a[k] = finv * c.coef[k] * finv;
        dh[static_cast<int>(k)] = -a[k].trace();
      }
      // gradient of slack: g - dh scattered to the variable indices
      dg.setZero(n);
      for (size_t k = 0; k < nk; ++k)
        dg[c.idx[k]] += dh[static_cast<int>(k)];
      if (c.g.size() > 0) dg -= c.g;
      // barrier of -log(rhs - h): grad = (dh - g)/slack
      const double inv = 1.0 / slack;
      grad.noalias() += inv * dg;
      hess.noalias() += (inv * inv) * (dg * dg.transpose());
      for (size_t k = 0; k < nk; ++k)
        for (size_t l = 0; l < nk; ++l) {
          const double hkl = 2.0 * (a[k] * c.coef[l] * finv).trace();
          hess(c.idx[k], c.idx[l]) += inv * hkl;
        }
    }

    for (const auto& c : prog.lmi) {
      const Eigen::MatrixXd g = lmi_matrix(c, x);
      const Eigen::LLT<Eigen::MatrixXd> llt(g);
      if (llt.info() != Eigen::Success) return false;
      const size_t nk = c.idx.size();
      std::vector<Eigen::MatrixXd> w(nk);
      for (size_t k = 0; k < nk; ++k) {
        // L^{-1} G_k L^{-T}, symmetric
        Eigen::MatrixXd tmp = llt.matrixL().solve(c.coef[k]);
        w[k] = llt.matrixL()
                   .solve(tmp.transpose())
                   .transpose();
        grad[c.idx[k]] -= w[k].trace();
      }
      for (size_t k = 0; k < nk; ++k)
        for (size_t l = k; l < nk; ++l) {
          const double hkl = (w[k].array() * w[l].array()).sum();
          hess(c.idx[k], c.idx[l]) += hkl;
          if (l != k) hess(c.idx[l], c.idx[k]) += hkl;
        }
    }
    return true;
  }

  // Worst constraint violation at x (positive outside, negative inside).
  double feasibility(const Eigen::VectorXd& x) const {
    double worst = -kInf;
    for (const auto& c : prog.linear)
      worst = std::max(worst, c.w.dot(x) + c.d);
    for (const auto& c : prog.quadsqrt) {
      for (const auto& s : c.sqrts)
        if (!(x[s.index] > 0.0)) return kInf;
      for (const auto& s : c.bisqrts)
        if (!(x[s.a] > 0.0 && x[s.b] > 0.0)) return kInf;
      worst = std::max(worst, quadsqrt_value(c, x));
    }
    for (const auto& c : prog.traceinv) {
      const Eigen::Matrix2d f = trinv_matrix(c, x);
      if (!is_pd_2x2(f)) return kInf;
      const double rhs = c.gamma + (c.g.size() > 0 ? c.g.dot(x) : 0.0);
      worst = std::max(worst, inverse_2x2(f).trace() - rhs);
    }
    for (const auto& c : prog.lmi) {
      const Eigen::MatrixXd g = lmi_matrix(c, x);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
      worst = std::max(worst, -eig.eigenvalues().minCoeff());
    }
    return worst;
  }

  // Per-family worst residuals, for error messages on a bad start.
  std::string residual_report(const Eigen::VectorXd& x) const {
    double lin = -kInf;
    for (const auto& c : prog.linear) lin = std::max(lin, c.w.dot(x) + c.d);
    double qs = -kInf;
    for (const auto& c : prog.quadsqrt) {
      bool domain = true;
      for (const auto& s : c.sqrts) domain = domain && x[s.index] > 0.0;
      for (const auto& s : c.bisqrts)
        domain = domain && x[s.a] > 0.0 && x[s.b] > 0.0;
      qs = std::max(qs, domain ? quadsqrt_value(c, x) : kInf);
    }
    double ti = -kInf;
    for (const auto& c : prog.traceinv) {
      const Eigen::Matrix2d f = trinv_matrix(c, x);
      if (!is_pd_2x2(f)) {
        ti = kInf;
        continue;
      }
      const double rhs = c.gamma + (c.g.size() > 0 ? c.g.dot(x) : 0.0);
      ti = std::max(ti, inverse_2x2(f).trace() - rhs);
    }
    double lm = -kInf;
    for (const auto& c : prog.lmi) {
      const Eigen::MatrixXd g = lmi_matrix(c, x);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
      lm = std::max(lm, -eig.eigenvalues().minCoeff());
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "linear %.3g, quadsqrt %.3g, traceinv %.3g, lmi %.3g", lin,
                  qs, ti, lm);
    return buf;
  }

  int total_degree() const {
    int m = static_cast<int>(prog.linear.size() + prog.quadsqrt.size() +
                             prog.traceinv.size());
    for (const auto& c : prog.lmi) m += static_cast<int>(c.g0.rows());
    return m;
  }
};

}  // namespace

SolveResult solve_convex_subproblem(const ConvexProgram& prog,
                                    const SolverOptions& opts) {
  if (prog.n <= 0) throw std::invalid_argument("solver: empty program");
  if (prog.maximize.size() != prog.n || prog.start.size() != prog.n)
    throw std::invalid_argument("solver: dimension mismatch");

  const Evaluator eval(prog);
  Eigen::VectorXd x = prog.start;
  if (!std::isfinite(eval.barrier(x)))
    throw std::invalid_argument("solver: start is not strictly feasible (" +
                                eval.residual_report(x) + ")");

  const int m = eval.total_degree();
  const double cnorm = std::max(1.0, prog.maximize.norm());
  double t = std::max(opts.t0,
                      m / std::max(1.0, std::abs(prog.maximize.dot(x))));

  SolveResult res;
  res.x = x;
  Eigen::VectorXd grad, step;
  Eigen::MatrixXd hess;
  double kkt = kInf;

  for (int stage = 0; stage < opts.max_stages; ++stage) {
    // center at the current barrier weight
    bool centered = false;
    double phi_prev = kInf;
    for (int it = 0; it < opts.max_newton; ++it) {
      if (!eval.barrier_derivatives(x, grad, hess)) {
        res.message = "solver: iterate left the domain";
        res.x = x;
        return res;
      }
      grad.noalias() -= t * prog.maximize;
      Eigen::MatrixXd h = hess;
      double reg = 0.0;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      while (ldlt.info() != Eigen::Success ||
             (ldlt.vectorD().array() <= 0.0).any()) {
        reg = (reg == 0.0) ? 1e-12 * std::max(1.0, h.trace() / prog.n)
                           : reg * 100.0;
        if (!std::isfinite(reg) || reg > 1e20) {
          res.message = "solver: Hessian factorization failed";
          res.x = x;
          res.kkt_residual = kkt;
          return res;
        }
        h = hess +
            reg * Eigen::MatrixXd::Identity(prog.n, prog.n);
        ldlt.compute(h);
      }
      step = ldlt.solve(-grad);
      const double decrement2 = -grad.dot(step);
      res.newton_iterations++;
      kkt = grad.norm() / (t * cnorm);
      if (decrement2 * 0.5 <= opts.newton_tol) {
        centered = true;
        break;
      }
      const double phi0 = t * (-prog.maximize.dot(x)) + eval.barrier(x);
      // once progress on the barrier objective falls below double-precision
      // resolution, a small decrement is the best certificate available
      if (phi0 >= phi_prev - 1e-13 * std::max(1.0, std::abs(phi_prev))) {
        centered = decrement2 * 0.5 <= 1e-4;
        break;
      }
      phi_prev = phi0;
      // backtracking line search on the barrier objective
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 70; ++ls) {
        const Eigen::VectorXd xn = x + alpha * step;
        const double phin =
            t * (-prog.maximize.dot(xn)) + eval.barrier(xn);
        if (phin <= phi0 + 0.25 * alpha * grad.dot(step)) {
          x = xn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) {
        centered = decrement2 * 0.5 <= 1e-4;  // stuck on rounding noise
        break;
      }
    }
    res.x = x;
    res.objective = prog.maximize.dot(x);
    res.duality_gap = m / t;
    res.kkt_residual = kkt;
    const double scale = std::max(1.0, std::abs(res.objective));
    if (!centered) {
      // the iterate is numerically saturated; the gap bound from the last
      // centered stage still certifies a solution well inside every
      // downstream tolerance
      if (res.duality_gap <= 1e-6 * scale) {
        res.duality_gap *= opts.mu;  // bound from the last centered stage
        res.converged = true;
        break;
      }
      res.message = "solver: centering did not converge";
      res.feasibility = eval.feasibility(x);
      return res;
    }
    if (res.duality_gap <= opts.gap_rel * scale) {
      res.converged = true;
      break;
    }
    t *= opts.mu;
  }
  if (!res.converged)
    res.message = "solver: stage limit reached before gap target";
  res.feasibility = eval.feasibility(res.x);
  return res;
}

}  // namespace cfisac
