#include "cfisac/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "cfisac/rng.hpp"

namespace cfisac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-scenario quantities rescaled for well-conditioned subproblems:
// powers enter as rho = eta * b (watts), SINR terms in noise units, and
// the position-information blocks are premultiplied by the inverse-trace
// budget so the sensing constraint reads tr(F^{-1}) <= 1.
struct NormalizedData {
  int n_ap = 0;
  int n_users = 0;
  int n_targets = 0;
  double budget = 0.0;       // watts per transmitting AP
  double crlb_budget = 0.0;  // m^2
  Eigen::MatrixXd amp;       // (p,q): sqrt(b_pq / noise_power)
  Eigen::MatrixXd b_user;    // raw gains for converting rho back to eta
  std::vector<Eigen::MatrixXd> cu;  // per p: (q,q') coupling per rho_pq'
  std::vector<Eigen::MatrixXd> cs;  // per p: (q,v) coupling per rho_pv
  // fhat[v][p][p']: budget-scaled position information per unit rho_pv
  std::vector<std::vector<std::vector<Eigen::Matrix2d>>> fhat;
};

NormalizedData build_data(const Scenario& sc, const OptimizerConfig& cfg) {
  NormalizedData d;
  d.n_ap = sc.n_ap();
  d.n_users = sc.n_users();
  d.n_targets = sc.n_targets();
  d.budget = sc.max_power;
  d.crlb_budget = cfg.peb_budget * cfg.peb_budget;
  if (d.n_users < 1)
    throw std::invalid_argument("optimizer: scenario has no users");
  if (d.n_targets < 1)
    throw std::invalid_argument("optimizer: scenario has no targets");

  const CommCoefficients co = comm_coefficients(sc);
  const double sigma2 = sc.noise_power;
  d.b_user = co.b_user;
  d.amp.resize(d.n_ap, d.n_users);
  d.cu.resize(d.n_ap);
  d.cs.resize(d.n_ap);
  for (int p = 0; p < d.n_ap; ++p) {
    d.cu[p].resize(d.n_users, d.n_users);
    d.cs[p].resize(d.n_users, d.n_targets);
    for (int q = 0; q < d.n_users; ++q) {
      d.amp(p, q) = std::sqrt(std::max(co.b_user(p, q), 0.0) / sigma2);
      for (int qp = 0; qp < d.n_users; ++qp) {
        const double b = co.b_user(p, qp);
        d.cu[p](q, qp) = b > 0.0 ? co.c_user[p](q, qp) / (b * sigma2) : 0.0;
      }
      for (int v = 0; v < d.n_targets; ++v)
        d.cs[p](q, v) = co.c_sense[p](q, v) / sigma2;
    }
  }

  d.fhat.resize(d.n_targets);
  for (int v = 0; v < d.n_targets; ++v) {
    d.fhat[v].resize(d.n_ap);
    for (int p = 0; p < d.n_ap; ++p) {
      d.fhat[v][p].resize(d.n_ap);
      for (int pp = 0; pp < d.n_ap; ++pp)
        d.fhat[v][p][pp] =
            d.crlb_budget * approx_position_block(sc, p, pp, v);
    }
  }
  return d;
}

double interference_ratio(const NormalizedData& d, const Eigen::MatrixXd& ru,
                          const Eigen::MatrixXd& rs, int p, int q) {
  double mu = 0.0;
  for (int qp = 0; qp < d.n_users; ++qp) mu += ru(p, qp) * d.cu[p](q, qp);
  for (int v = 0; v < d.n_targets; ++v) mu += rs(p, v) * d.cs[p](q, v);
  return mu;
}

// Exact SINR of user q in noise units under fractional modes a.
double sinr_fractional(const NormalizedData& d, const Eigen::VectorXd& a,
                       const Eigen::MatrixXd& ru, const Eigen::MatrixXd& rs,
                       int q) {
  double num = 0.0;
  double den = 1.0;
  for (int p = 0; p < d.n_ap; ++p) {
    num += std::sqrt(std::max(a[p] * ru(p, q), 0.0)) * d.amp(p, q);
    den += a[p] * interference_ratio(d, ru, rs, p, q);
  }
  return num * num / den;
}

// Exact budget-normalized inverse-trace of the mode-weighted position
// information of target v; +infinity when the matrix is not positive
// definite.
double crlb_fractional(const NormalizedData& d, const Eigen::VectorXd& a,
                       const Eigen::MatrixXd& rs, int v) {
  Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
  for (int p = 0; p < d.n_ap; ++p)
    for (int pp = 0; pp < d.n_ap; ++pp)
      f += a[p] * (1.0 - a[pp]) * rs(p, v) * d.fhat[v][p][pp];
  if (!(f(0, 0) > 0.0 && f.determinant() > 0.0)) return kInf;
  return (f(0, 0) + f(1, 1)) / f.determinant();
}

struct FeasibleSensing {
  bool ok = false;
  Eigen::MatrixXd rho;  // n_blocks rows indexed like the block list
  double normalized_crlb = kInf;  // min achievable max_v tr(F^{-1})
  std::string message;
};

// Minimizes the worst budget-normalized inverse trace over the sensing
// powers alone; `blocks[v][k]` is the information of power k toward target
// v and `budgets[k_ap]` caps each AP row (rows = APs, columns = targets).
FeasibleSensing sensing_feasibility(
    const std::vector<std::vector<std::vector<Eigen::Matrix2d>>>& blocks,
    const std::vector<double>& budgets, const SolverOptions& sopts) {
  const int n_rows = static_cast<int>(budgets.size());
  const int n_tgt = static_cast<int>(blocks.size());
  const int n = n_rows * n_tgt + 1;
  const int it = n - 1;
  const auto ir = [&](int row, int v) { return row * n_tgt + v; };

  ConvexProgram prog;
  prog.n = n;
  prog.maximize = Eigen::VectorXd::Zero(n);
  prog.maximize[it] = -1.0;

  for (int v = 0; v < n_tgt; ++v) {
    TraceInvConstraint c;
    c.gamma = 0.0;
    c.g = Eigen::VectorXd::Zero(n);
    c.g[it] = 1.0;
    for (int row = 0; row < n_rows; ++row) {
      c.idx.push_back(ir(row, v));
      c.coef.push_back(blocks[v][row][0]);
    }
    prog.traceinv.push_back(std::move(c));
  }
  for (int row = 0; row < n_rows; ++row) {
    LinearConstraint c;
    c.w = Eigen::VectorXd::Zero(n);
    for (int v = 0; v < n_tgt; ++v) c.w[ir(row, v)] = 1.0;
    c.d = -0.98 * budgets[row];
    prog.linear.push_back(std::move(c));
  }
  for (int row = 0; row < n_rows; ++row)
    for (int v = 0; v < n_tgt; ++v) {
      LinearConstraint c;
      c.w = Eigen::VectorXd::Zero(n);
      c.w[ir(row, v)] = -1.0;
      prog.linear.push_back(std::move(c));
    }

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  double worst = 0.0;
  for (int v = 0; v < n_tgt; ++v) {
    Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
    for (int row = 0; row < n_rows; ++row) {
      const double r0 = 0.97 * budgets[row] / n_tgt;
      x0[ir(row, v)] = r0;
      f += r0 * blocks[v][row][0];
    }
    if (!(f(0, 0) > 0.0 && f.determinant() > 0.0)) {
      FeasibleSensing out;
      out.message = "sensing information is singular at full power";
      return out;
    }
    worst = std::max(worst, (f(0, 0) + f(1, 1)) / f.determinant());
  }
  x0[it] = 1.2 * worst + 0.1;

  prog.start = x0;
  const SolveResult res = solve_convex_subproblem(prog, sopts);
  FeasibleSensing out;
  out.normalized_crlb = res.x[it];
  out.rho.resize(n_rows, n_tgt);
  for (int row = 0; row < n_rows; ++row)
    for (int v = 0; v < n_tgt; ++v) out.rho(row, v) = res.x[ir(row, v)];
  out.ok = res.converged;
  if (!res.converged) out.message = res.message;
  return out;
}

// ---------------------------------------------------------------------------
// Fixed-mode power allocation (quadratic-transform iteration)

struct FixedModeProblem {
  const NormalizedData* d = nullptr;
  std::vector<int> tx;
  std::vector<int> rx;
  // g[v][pi]: information per unit rho toward target v from the pi-th
  // transmitting AP, already summed over receiving APs.
  std::vector<std::vector<Eigen::Matrix2d>> g;
  int n_tx = 0;

  int iu(int pi, int q) const { return pi * d->n_users + q; }
  int is(int pi, int v) const {
    return n_tx * d->n_users + pi * d->n_targets + v;
  }
  int iz() const { return n_tx * (d->n_users + d->n_targets); }
  int n_base() const { return iz() + 1; }

  double mu(const Eigen::VectorXd& x, int pi, int q) const {
    const int p = tx[pi];
    double m = 0.0;
    for (int qp = 0; qp < d->n_users; ++qp)
      m += x[iu(pi, qp)] * d->cu[p](q, qp);
    for (int v = 0; v < d->n_targets; ++v)
      m += x[is(pi, v)] * d->cs[p](q, v);
    return m;
  }

  double amplitude(const Eigen::VectorXd& x, int q) const {
    double s = 0.0;
    for (int pi = 0; pi < n_tx; ++pi)
      s += std::sqrt(std::max(x[iu(pi, q)], 0.0)) * d->amp(tx[pi], q);
    return s;
  }

  double sinr(const Eigen::VectorXd& x, int q) const {
    double den = 1.0;
    for (int pi = 0; pi < n_tx; ++pi) den += mu(x, pi, q);
    const double a = amplitude(x, q);
    return a * a / den;
  }

  double yq(const Eigen::VectorXd& x, int q) const {
    double den = 1.0;
    for (int pi = 0; pi < n_tx; ++pi) den += mu(x, pi, q);
    return amplitude(x, q) / den;
  }

  Eigen::Matrix2d fim(const Eigen::VectorXd& x, int v) const {
    Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
    for (int pi = 0; pi < n_tx; ++pi) f += x[is(pi, v)] * g[v][pi];
    return f;
  }

  double crlb(const Eigen::VectorXd& x, int v) const {
    const Eigen::Matrix2d f = fim(x, v);
    if (!(f(0, 0) > 0.0 && f.determinant() > 0.0)) return kInf;
    return (f(0, 0) + f(1, 1)) / f.determinant();
  }
};

FixedModeProblem make_fixed_problem(const NormalizedData& d,
                                    const std::vector<int>& modes) {
  FixedModeProblem fp;
  fp.d = &d;
  for (int p = 0; p < d.n_ap; ++p)
    (modes[p] ? fp.tx : fp.rx).push_back(p);
  fp.n_tx = static_cast<int>(fp.tx.size());
  if (fp.tx.empty() || fp.rx.empty())
    throw std::invalid_argument(
        "power allocation requires at least one transmitting and one "
        "receiving access point");
  fp.g.resize(d.n_targets);
  for (int v = 0; v < d.n_targets; ++v) {
    fp.g[v].resize(fp.n_tx, Eigen::Matrix2d::Zero());
    for (int pi = 0; pi < fp.n_tx; ++pi)
      for (int r : fp.rx) fp.g[v][pi] += d.fhat[v][fp.tx[pi]][r];
  }
  return fp;
}

// Assembles the convex subproblem for fixed modes and fixed auxiliary
// variables y; the sensing constraint uses the requested encoding.
ConvexProgram build_fixed_subproblem(const FixedModeProblem& fp,
                                     const Eigen::VectorXd& y, CrlbForm form,
                                     const Eigen::VectorXd& x_prev) {
  const NormalizedData& d = *fp.d;
  const int n_base = fp.n_base();
  const int n_schur = form == CrlbForm::schur ? 3 * d.n_targets : 0;
  ConvexProgram prog;
  prog.n = n_base + n_schur;
  prog.maximize = Eigen::VectorXd::Zero(prog.n);
  prog.maximize[fp.iz()] = 1.0;

  // user rate constraints: z - 2 y_q sum_p sqrt(rho_pq) amp + y_q^2 (mu+1) <= 0
  for (int q = 0; q < d.n_users; ++q) {
    QuadSqrtConstraint c;
    c.w = Eigen::VectorXd::Zero(prog.n);
    c.w[fp.iz()] = 1.0;
    c.d = y[q] * y[q];
    for (int pi = 0; pi < fp.n_tx; ++pi) {
      const int p = fp.tx[pi];
      for (int qp = 0; qp < d.n_users; ++qp)
        c.w[fp.iu(pi, qp)] += y[q] * y[q] * d.cu[p](q, qp);
      for (int v = 0; v < d.n_targets; ++v)
        c.w[fp.is(pi, v)] += y[q] * y[q] * d.cs[p](q, v);
      c.sqrts.push_back({fp.iu(pi, q), 2.0 * y[q] * d.amp(p, q)});
    }
    prog.quadsqrt.push_back(std::move(c));
  }

  // per-AP power budgets
  for (int pi = 0; pi < fp.n_tx; ++pi) {
    LinearConstraint c;
    c.w = Eigen::VectorXd::Zero(prog.n);
    for (int q = 0; q < d.n_users; ++q) c.w[fp.iu(pi, q)] = 1.0;
    for (int v = 0; v < d.n_targets; ++v) c.w[fp.is(pi, v)] = 1.0;
    c.d = -d.budget;
    prog.linear.push_back(std::move(c));
  }
  // nonnegative powers
  for (int i = 0; i < n_base - 1; ++i) {
    LinearConstraint c;
    c.w = Eigen::VectorXd::Zero(prog.n);
    c.w[i] = -1.0;
    prog.linear.push_back(std::move(c));
  }

  prog.start = Eigen::VectorXd::Zero(prog.n);
  prog.start.head(n_base) = x_prev;

  for (int v = 0; v < d.n_targets; ++v) {
    if (form == CrlbForm::smooth) {
      TraceInvConstraint c;
      c.gamma = 1.0;
      for (int pi = 0; pi < fp.n_tx; ++pi) {
        c.idx.push_back(fp.is(pi, v));
        c.coef.push_back(fp.g[v][pi]);
      }
      prog.traceinv.push_back(std::move(c));
    } else {
      const int s0 = n_base + 3 * v;
      LmiConstraint c;
      c.g0 = Eigen::MatrixXd::Zero(4, 4);
      c.g0(0, 2) = c.g0(2, 0) = 1.0;
      c.g0(1, 3) = c.g0(3, 1) = 1.0;
      for (int pi = 0; pi < fp.n_tx; ++pi) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
        m.topLeftCorner<2, 2>() = fp.g[v][pi];
        c.idx.push_back(fp.is(pi, v));
        c.coef.push_back(std::move(m));
      }
      const auto s_entry = [&](int i, int j) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
        m(2 + i, 2 + j) = 1.0;
        m(2 + j, 2 + i) = 1.0;
        return m;
      };
      c.idx.push_back(s0);
      c.coef.push_back(s_entry(0, 0));
      c.idx.push_back(s0 + 1);
      c.coef.push_back(s_entry(0, 1));
      c.idx.push_back(s0 + 2);
      c.coef.push_back(s_entry(1, 1));
      prog.lmi.push_back(std::move(c));

      LinearConstraint tr;
      tr.w = Eigen::VectorXd::Zero(prog.n);
      tr.w[s0] = 1.0;
      tr.w[s0 + 2] = 1.0;
      tr.d = -1.0;
      prog.linear.push_back(std::move(tr));

      // start: S slightly above F^{-1} with trace strictly under budget
      const Eigen::Matrix2d f = fp.fim(x_prev, v);
      const Eigen::Matrix2d finv = f.inverse();
      const double slack = 1.0 - finv.trace();
      const double delta = std::max(slack / 4.0, 1e-12);
      prog.start[s0] = finv(0, 0) + delta;
      prog.start[s0 + 1] = finv(0, 1);
      prog.start[s0 + 2] = finv(1, 1) + delta;
    }
  }
  return prog;
}

std::string infeasibility_certificate(double normalized_crlb,
                                      const OptimizerConfig& cfg) {
  const double best_peb =
      cfg.peb_budget * std::sqrt(std::max(normalized_crlb, 0.0));
  return "infeasible accuracy budget: full sensing power reaches a position "
         "error bound of " +
         std::to_string(best_peb) + " m against a budget of " +
         std::to_string(cfg.peb_budget) + " m";
}

ResourceAllocation finalize_fixed(const Scenario& sc,
                                  const NormalizedData& d,
                                  const FixedModeProblem& fp,
                                  const std::vector<int>& modes,
                                  const Eigen::VectorXd& x,
                                  SolverDiagnostics diag) {
  ResourceAllocation ra;
  ra.modes = modes;
  ra.a = Eigen::VectorXd::Zero(d.n_ap);
  for (int p : fp.tx) ra.a[p] = 1.0;
  ra.eta_user = Eigen::MatrixXd::Zero(d.n_ap, d.n_users);
  ra.eta_target = Eigen::MatrixXd::Zero(d.n_ap, d.n_targets);
  for (int pi = 0; pi < fp.n_tx; ++pi) {
    const int p = fp.tx[pi];
    for (int q = 0; q < d.n_users; ++q) {
      const double b = d.b_user(p, q);
      ra.eta_user(p, q) = b > 0.0 ? x[fp.iu(pi, q)] / b : 0.0;
    }
    for (int v = 0; v < d.n_targets; ++v)
      ra.eta_target(p, v) = x[fp.is(pi, v)];
  }
  double min_sinr = kInf;
  for (int q = 0; q < d.n_users; ++q)
    min_sinr = std::min(min_sinr, fp.sinr(x, q));
  ra.min_sinr = min_sinr;
  ra.min_se = spectral_efficiency(std::max(min_sinr, 0.0), sc.grid,
                                  sc.grid.waveform);

  // feasibility audit on the exact constraints
  bool ok = true;
  for (int v = 0; v < d.n_targets; ++v)
    ok = ok && fp.crlb(x, v) <= 1.0 + 1e-6;
  for (int pi = 0; pi < fp.n_tx; ++pi) {
    double pw = 0.0;
    for (int q = 0; q < d.n_users; ++q) pw += x[fp.iu(pi, q)];
    for (int v = 0; v < d.n_targets; ++v) pw += x[fp.is(pi, v)];
    ok = ok && pw <= d.budget * (1.0 + 1e-6);
  }
  diag.feasible = ok;
  ra.diagnostics = std::move(diag);
  return ra;
}

ResourceAllocation infeasible_result(const Scenario& sc,
                                     const NormalizedData& d,
                                     const std::vector<int>& modes,
                                     std::string message) {
  ResourceAllocation ra;
  ra.modes = modes;
  ra.a = Eigen::VectorXd::Zero(d.n_ap);
  for (int p = 0; p < d.n_ap; ++p) ra.a[p] = modes[p] ? 1.0 : 0.0;
  ra.eta_user = Eigen::MatrixXd::Zero(d.n_ap, d.n_users);
  ra.eta_target = Eigen::MatrixXd::Zero(d.n_ap, d.n_targets);
  ra.min_sinr = 0.0;
  ra.min_se = 0.0;
  ra.diagnostics.feasible = false;
  ra.diagnostics.message = std::move(message);
  (void)sc;
  return ra;
}

ResourceAllocation run_fixed_modes(const Scenario& sc,
                                   const NormalizedData& d,
                                   const std::vector<int>& modes,
                                   const OptimizerConfig& cfg) {
  const FixedModeProblem fp = make_fixed_problem(d, modes);

  // strictly feasible start: cover the sensing budget first, then give the
  // slack to the users
  std::vector<std::vector<std::vector<Eigen::Matrix2d>>> blocks(d.n_targets);
  for (int v = 0; v < d.n_targets; ++v) {
    blocks[v].resize(fp.n_tx);
    for (int pi = 0; pi < fp.n_tx; ++pi)
      blocks[v][pi].push_back(fp.g[v][pi]);
  }
  const std::vector<double> budgets(static_cast<size_t>(fp.n_tx), d.budget);
  const FeasibleSensing fs =
      sensing_feasibility(blocks, budgets, cfg.solver);
  if (!fs.message.empty())
    return infeasible_result(sc, d, modes, fs.message);
  if (!(fs.normalized_crlb <= 0.99))
    return infeasible_result(sc, d, modes,
                             infeasibility_certificate(fs.normalized_crlb, cfg));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(fp.n_base());
  const double scale = fs.normalized_crlb / 0.99;
  for (int pi = 0; pi < fp.n_tx; ++pi) {
    double used = 0.0;
    for (int v = 0; v < d.n_targets; ++v) {
      x[fp.is(pi, v)] = std::max(scale * fs.rho(pi, v), 1e-12 * d.budget);
      used += x[fp.is(pi, v)];
    }
    const double leftover = std::max(d.budget - used, 1e-6 * d.budget);
    for (int q = 0; q < d.n_users; ++q)
      x[fp.iu(pi, q)] = 0.5 * leftover / d.n_users;
  }
  x[fp.iz()] = 0.0;

  SolverDiagnostics diag;
  Eigen::VectorXd y(d.n_users);
  double z_prev = 0.0;
  for (int it = 1; it <= cfg.fp_max_iterations; ++it) {
    for (int q = 0; q < d.n_users; ++q) y[q] = fp.yq(x, q);
    // keep the start strictly below every rate surrogate
    double z0 = x[fp.iz()];
    for (int q = 0; q < d.n_users; ++q) {
      double den = 1.0;
      for (int pi = 0; pi < fp.n_tx; ++pi) den += fp.mu(x, pi, q);
      const double surrogate =
          2.0 * y[q] * fp.amplitude(x, q) - y[q] * y[q] * den;
      z0 = std::min(z0, surrogate * (1.0 - 1e-9) - 1e-15);
    }
    x[fp.iz()] = z0;

    ConvexProgram prog = build_fixed_subproblem(fp, y, cfg.crlb_form, x);
    SolveResult res;
    try {
      res = solve_convex_subproblem(prog, cfg.solver);
    } catch (const std::invalid_argument& e) {
      if (it == 1)
        return infeasible_result(sc, d, modes,
                                 std::string("subproblem start rejected: ") +
                                     e.what());
      break;
    }
    x = res.x.head(fp.n_base());
    const double z = x[fp.iz()];
    diag.kkt_residual = std::max(diag.kkt_residual, res.kkt_residual);
    diag.iterations = it;
    double true_min = kInf;
    for (int q = 0; q < d.n_users; ++q)
      true_min = std::min(true_min, fp.sinr(x, q));
    double worst_crlb = 0.0;
    for (int v = 0; v < d.n_targets; ++v)
      worst_crlb = std::max(worst_crlb, fp.crlb(x, v));
    diag.trace.push_back({it, z, 0.0, res.kkt_residual,
                          worst_crlb * d.crlb_budget, true_min});
    if (std::abs(z - z_prev) <= cfg.fp_tol * std::max(1.0, std::abs(z_prev)))
      { z_prev = z; break; }
    z_prev = z;
  }
  return finalize_fixed(sc, d, fp, modes, x, std::move(diag));
}

// ---------------------------------------------------------------------------
// Joint mode selection (successive convex approximation)

struct JointProblem {
  const NormalizedData* d = nullptr;
  int ia(int p) const { return p; }
  int iu(int p, int q) const { return d->n_ap + p * d->n_users + q; }
  int is(int p, int v) const {
    return d->n_ap * (1 + d->n_users) + p * d->n_targets + v;
  }
  int iz() const { return d->n_ap * (1 + d->n_users + d->n_targets); }
  int n_base() const { return iz() + 1; }
};

struct JointIterate {
  Eigen::VectorXd a;
  Eigen::MatrixXd ru;  // n_ap x n_users
  Eigen::MatrixXd rs;  // n_ap x n_targets
  double z = 0.0;
};

ConvexProgram build_joint_subproblem(const JointProblem& jp,
                                     const JointIterate& cur, double lambda,
                                     double budget_watts, CrlbForm form) {
  const NormalizedData& d = *jp.d;
  const int n_base = jp.n_base();
  const int n_schur = form == CrlbForm::schur ? 3 * d.n_targets : 0;
  ConvexProgram prog;
  prog.n = n_base + n_schur;
  prog.maximize = Eigen::VectorXd::Zero(prog.n);
  prog.maximize[jp.iz()] = 1.0;
  for (int p = 0; p < d.n_ap; ++p)
    prog.maximize[jp.ia(p)] = lambda * (2.0 * cur.a[p] - 1.0);

  // linearization caches
  Eigen::MatrixXd mu_i(d.n_ap, d.n_users);
  for (int p = 0; p < d.n_ap; ++p)
    for (int q = 0; q < d.n_users; ++q)
      mu_i(p, q) = interference_ratio(d, cur.ru, cur.rs, p, q);
  Eigen::VectorXd fq(d.n_users);
  for (int q = 0; q < d.n_users; ++q) {
    double s = 0.0;
    for (int p = 0; p < d.n_ap; ++p)
      s += std::sqrt(std::max(cur.a[p] * cur.ru(p, q), 0.0)) * d.amp(p, q);
    fq[q] = 2.0 * s / cur.z;
  }

  // rate constraints, difference-of-squares split in noise units
  for (int q = 0; q < d.n_users; ++q) {
    QuadSqrtConstraint c;
    c.w = Eigen::VectorXd::Zero(prog.n);
    c.d = 4.0;
    c.w[jp.iz()] = fq[q] * fq[q];
    for (int p = 0; p < d.n_ap; ++p) {
      const double delta_i = cur.a[p] - mu_i(p, q);
      c.d += delta_i * delta_i;
      c.w[jp.ia(p)] += -2.0 * delta_i;
      for (int qp = 0; qp < d.n_users; ++qp)
        c.w[jp.iu(p, qp)] += 2.0 * delta_i * d.cu[p](q, qp);
      for (int v = 0; v < d.n_targets; ++v)
        c.w[jp.is(p, v)] += 2.0 * delta_i * d.cs[p](q, v);

      AffineSquare sq;
      sq.q = Eigen::VectorXd::Zero(prog.n);
      sq.q[jp.ia(p)] = 1.0;
      for (int qp = 0; qp < d.n_users; ++qp)
        sq.q[jp.iu(p, qp)] = d.cu[p](q, qp);
      for (int v = 0; v < d.n_targets; ++v)
        sq.q[jp.is(p, v)] = d.cs[p](q, v);
      c.squares.push_back(std::move(sq));

      c.bisqrts.push_back({jp.ia(p), jp.iu(p, q), 4.0 * fq[q] * d.amp(p, q)});
    }
    prog.quadsqrt.push_back(std::move(c));
  }

  // . sensing constraints on the linearized trilinear coefficients
  std::vector<Eigen::Matrix2d> fstart(static_cast<size_t>(d.n_targets));
  std::vector<double> gammas(static_cast<size_t>(d.n_targets));
  for (int v = 0; v < d.n_targets; ++v) {
    Eigen::Matrix2d f0 = Eigen::Matrix2d::Zero();
    std::vector<Eigen::Matrix2d> acc_a(d.n_ap, Eigen::Matrix2d::Zero());
    std::vector<Eigen::Matrix2d> acc_s(d.n_ap, Eigen::Matrix2d::Zero());
    for (int p = 0; p < d.n_ap; ++p)
      for (int pp = 0; pp < d.n_ap; ++pp) {
        const Eigen::Matrix2d& b = d.fhat[v][p][pp];
        const double ai = cur.a[p];
        const double aj = cur.a[pp];
        const double ri = cur.rs(p, v);
        acc_s[p] += ai * (1.0 - aj) * b;
        acc_a[p] += (1.0 - aj) * ri * b;
        acc_a[pp] += -ai * ri * b;
        f0 += ai * (2.0 * aj - 1.0) * ri * b;
      }
    // tangency inflation: the Taylor plane equals the current value at the
    // iterate, which may sit just outside the budget. The value is taken in
    // the same accumulation order the barrier uses, so the start keeps its
    // relative headroom even when the information matrix is near singular.
    Eigen::Matrix2d fs = f0;
    for (int p = 0; p < d.n_ap; ++p) {
      fs += cur.a[p] * acc_a[p];
      fs += cur.rs(p, v) * acc_s[p];
    }
    const double det = fs.determinant();
    double exact = kInf;
    if (fs(0, 0) > 0.0 && det > 0.0)
      exact = fs(1, 1) / det + fs(0, 0) / det;
    if (!std::isfinite(exact)) exact = crlb_fractional(d, cur.a, cur.rs, v);
    if (!std::isfinite(exact)) exact = 1.0;
    const double gamma = std::max(1.0, exact * (1.0 + 1e-8));
    fstart[static_cast<size_t>(v)] = fs;
    gammas[static_cast<size_t>(v)] = gamma;

    if (form == CrlbForm::smooth) {
      TraceInvConstraint c;
      c.f0 = f0;
      c.gamma = gamma;
      for (int p = 0; p < d.n_ap; ++p) {
        c.idx.push_back(jp.ia(p));
        c.coef.push_back(acc_a[p]);
        c.idx.push_back(jp.is(p, v));
        c.coef.push_back(acc_s[p]);
      }
      prog.traceinv.push_back(std::move(c));
    } else {
      const int s0 = n_base + 3 * v;
      LmiConstraint c;
      c.g0 = Eigen::MatrixXd::Zero(4, 4);
      c.g0.topLeftCorner<2, 2>() = f0;
      c.g0(0, 2) = c.g0(2, 0) = 1.0;
      c.g0(1, 3) = c.g0(3, 1) = 1.0;
      const auto push = [&](int idx, const Eigen::Matrix2d& blk) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
        m.topLeftCorner<2, 2>() = blk;
        c.idx.push_back(idx);
        c.coef.push_back(std::move(m));
      };
      for (int p = 0; p < d.n_ap; ++p) {
        push(jp.ia(p), acc_a[p]);
        push(jp.is(p, v), acc_s[p]);
      }
      const auto s_entry = [&](int i, int j) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
        m(2 + i, 2 + j) = 1.0;
        m(2 + j, 2 + i) = 1.0;
        return m;
      };
      c.idx.push_back(s0);
      c.coef.push_back(s_entry(0, 0));
      c.idx.push_back(s0 + 1);
      c.coef.push_back(s_entry(0, 1));
      c.idx.push_back(s0 + 2);
      c.coef.push_back(s_entry(1, 1));
      prog.lmi.push_back(std::move(c));

      LinearConstraint tr;
      tr.w = Eigen::VectorXd::Zero(prog.n);
      tr.w[s0] = 1.0;
      tr.w[s0 + 2] = 1.0;
      tr.d = -gamma;
      prog.linear.push_back(std::move(tr));
    }
  }

  // power budgets against the concave-bound mode variables
  for (int p = 0; p < d.n_ap; ++p) {
    LinearConstraint c;
    c.w = Eigen::VectorXd::Zero(prog.n);
    for (int q = 0; q < d.n_users; ++q) c.w[jp.iu(p, q)] = 1.0;
    for (int v = 0; v < d.n_targets; ++v) c.w[jp.is(p, v)] = 1.0;
    c.w[jp.ia(p)] = -2.0 * cur.a[p] * budget_watts;
    c.d = cur.a[p] * cur.a[p] * budget_watts;
    prog.linear.push_back(std::move(c));
  }
  // 0 <= a <= 1, rho >= 0
  for (int p = 0; p < d.n_ap; ++p) {
    LinearConstraint lo;
    lo.w = Eigen::VectorXd::Zero(prog.n);
    lo.w[jp.ia(p)] = -1.0;
    prog.linear.push_back(std::move(lo));
    LinearConstraint hi;
    hi.w = Eigen::VectorXd::Zero(prog.n);
    hi.w[jp.ia(p)] = 1.0;
    hi.d = -1.0;
    prog.linear.push_back(std::move(hi));
  }
  for (int i = d.n_ap; i < jp.iz(); ++i) {
    LinearConstraint c;
    c.w = Eigen::VectorXd::Zero(prog.n);
    c.w[i] = -1.0;
    prog.linear.push_back(std::move(c));
  }

  prog.start = Eigen::VectorXd::Zero(prog.n);
  for (int p = 0; p < d.n_ap; ++p) {
    prog.start[jp.ia(p)] = cur.a[p];
    for (int q = 0; q < d.n_users; ++q) prog.start[jp.iu(p, q)] = cur.ru(p, q);
    for (int v = 0; v < d.n_targets; ++v)
      prog.start[jp.is(p, v)] = cur.rs(p, v);
  }
  prog.start[jp.iz()] = cur.z;
  if (form == CrlbForm::schur) {
    for (int v = 0; v < d.n_targets; ++v) {
      const Eigen::Matrix2d finv = fstart[static_cast<size_t>(v)].inverse();
      const double gamma_v = gammas[static_cast<size_t>(v)];
      const double delta = std::max((gamma_v - finv.trace()) / 4.0, 1e-12);
      const int s0 = n_base + 3 * v;
      prog.start[s0] = finv(0, 0) + delta;
      prog.start[s0 + 1] = finv(0, 1);
      prog.start[s0 + 2] = finv(1, 1) + delta;
    }
  }
  return prog;
}

}  // namespace

Allocation to_allocation(const ResourceAllocation& ra) {
  Allocation alloc;
  alloc.modes = ra.modes;
  alloc.eta_user = ra.eta_user;
  alloc.eta_target = ra.eta_target;
  return alloc;
}

Eigen::Matrix2d fisher_with_modes(const Scenario& sc, const Eigen::VectorXd& a,
                                  const Eigen::MatrixXd& eta_target, int v) {
  const int n_ap = sc.n_ap();
  if (a.size() != n_ap || eta_target.rows() != n_ap)
    throw std::invalid_argument("fisher_with_modes: dimension mismatch");
  Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
  for (int p = 0; p < n_ap; ++p) {
    if (eta_target(p, v) == 0.0 || a[p] == 0.0) continue;
    for (int pp = 0; pp < n_ap; ++pp) {
      const double w = a[p] * (1.0 - a[pp]) * eta_target(p, v);
      if (w == 0.0) continue;
      f += w * approx_position_block(sc, p, pp, v);
    }
  }
  return f;
}

ResourceAllocation power_allocation_fixed_modes(const Scenario& sc,
                                                const std::vector<int>& modes,
                                                const OptimizerConfig& cfg) {
  if (static_cast<int>(modes.size()) != sc.n_ap())
    throw std::invalid_argument("power_allocation: modes length mismatch");
  const NormalizedData d = build_data(sc, cfg);
  return run_fixed_modes(sc, d, modes, cfg);
}

std::pair<std::vector<int>, std::vector<int>> closest_ap_selection(
    const Scenario& sc, const OptimizerConfig& cfg) {
  const int n_ap = sc.n_ap();
  if (n_ap < 2)
    throw std::invalid_argument("closest_ap_selection: need at least 2 APs");
  const NormalizedData d = build_data(sc, cfg);

  const auto dist = [&](int v, int r) {
    return (sc.aps[r].position - sc.targets[v].hotspot_center).norm();
  };

  std::vector<int> modes(static_cast<size_t>(n_ap), 1);
  int n_rx = 0;
  for (int v = 0; v < sc.n_targets(); ++v) {
    int best = 0;
    for (int r = 1; r < n_ap; ++r)
      if (dist(v, r) < dist(v, best)) best = r;
    if (modes[best] == 1 && n_rx + 1 < n_ap) {
      modes[best] = 0;
      ++n_rx;
    }
  }
  if (n_rx == 0) {
    // no target had a usable nearest AP (all collided); take AP 0
    modes[0] = 0;
    n_rx = 1;
  }

  const auto min_se = [&](const std::vector<int>& m) {
    const ResourceAllocation ra = run_fixed_modes(sc, d, m, cfg);
    return ra.diagnostics.feasible ? ra.min_se : -kInf;
  };

  double se_prev = min_se(modes);
  while (true) {
    int r_star = -1;
    double best = kInf;
    for (int r = 0; r < n_ap; ++r) {
      if (!modes[r]) continue;
      for (int v = 0; v < sc.n_targets(); ++v)
        if (dist(v, r) < best) {
          best = dist(v, r);
          r_star = r;
        }
    }
    if (r_star < 0) break;
    int n_tx = 0;
    for (int p = 0; p < n_ap; ++p) n_tx += modes[p];
    if (n_tx <= 1) break;

    std::vector<int> trial = modes;
    trial[r_star] = 0;
    const double se_new = min_se(trial);
    const bool accept = se_new >= se_prev;
    if (accept) modes = trial;
    const double improvement =
        (std::isinf(se_prev) && std::isinf(se_new)) ? 1.0 : se_new - se_prev;
    if (accept) se_prev = se_new;
    if (!accept || improvement <= cfg.cap_tol) break;
  }

  std::vector<int> tx;
  std::vector<int> rx;
  for (int p = 0; p < n_ap; ++p) (modes[p] ? tx : rx).push_back(p);
  return {tx, rx};
}

std::vector<int> random_modes(int n_ap, int n_rx, std::uint64_t seed) {
  if (n_rx < 1 || n_rx >= n_ap)
    throw std::invalid_argument("random_modes: n_rx out of range");
  std::vector<int> order(static_cast<size_t>(n_ap));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x9a7d));
  for (int i = 0; i < n_rx; ++i) {
    const int j =
        i + static_cast<int>(rng.uniform_int(0, static_cast<std::uint64_t>(
                                                    n_ap - 1 - i)));
    std::swap(order[i], order[j]);
  }
  std::vector<int> modes(static_cast<size_t>(n_ap), 1);
  for (int i = 0; i < n_rx; ++i) modes[order[i]] = 0;
  return modes;
}

namespace {

struct ScaRun {
  JointIterate iterate;
  SolverDiagnostics diag;
};

// Penalized successive convex approximation over the relaxed modes, starting
// from a strictly feasible iterate. The penalty weight escalates when the
// objective settles, when the stage exhausts its iteration slice, or when the
// off-binary mass of the mode variables stops moving.
ScaRun run_joint_sca(const NormalizedData& d, const JointProblem& jp,
                     JointIterate cur, double pd, const OptimizerConfig& cfg) {
  ScaRun out;
  SolverDiagnostics& diag = out.diag;
  double lambda = cfg.penalty;
  double obj_prev = -kInf;
  double gap = 0.0;
  for (int p = 0; p < d.n_ap; ++p) gap += cur.a[p] * (1.0 - cur.a[p]);
  gap *= lambda;
  int rounds = 0;
  int iter = 0;
  // every escalation stage gets a slice of the iteration budget, otherwise a
  // slowly improving first stage starves the later ones that binarize a
  const int slice = std::max(
      5, cfg.max_sca_iterations / std::max(1, cfg.penalty_rounds + 1));
  int round_start = 0;
  std::vector<double> offbinary;
  while (iter < cfg.max_sca_iterations) {
    ++iter;
    const double gap_before = gap;
    // pull the auxiliary variable strictly inside the new tangent surrogate
    {
      double zmin = kInf;
      for (int q = 0; q < d.n_users; ++q)
        zmin = std::min(zmin, sinr_fractional(d, cur.a, cur.ru, cur.rs, q));
      cur.z = std::min(cur.z, (1.0 - 1e-9) * zmin);
      cur.z = std::max(cur.z, 1e-12);
    }
    ConvexProgram prog =
        build_joint_subproblem(jp, cur, lambda, pd, cfg.crlb_form);
    SolveResult res;
    bool solved = false;
    std::string failure;
    for (int attempt = 0; attempt < 3 && !solved; ++attempt) {
      try {
        res = solve_convex_subproblem(prog, cfg.solver);
        solved = true;
      } catch (const std::invalid_argument& e) {
        failure = e.what();
        // nudge the start deeper inside the surrogate region and retry
        prog.start[jp.iz()] =
            prog.start[jp.iz()] > 0 ? 0.5 * prog.start[jp.iz()] : -1.0;
      }
    }
    if (!solved) {
      diag.message = "subproblem failed at iteration " +
                     std::to_string(iter) + ": " + failure;
      break;
    }
    JointIterate next;
    next.a = Eigen::VectorXd(d.n_ap);
    next.ru = Eigen::MatrixXd(d.n_ap, d.n_users);
    next.rs = Eigen::MatrixXd(d.n_ap, d.n_targets);
    for (int p = 0; p < d.n_ap; ++p) {
      next.a[p] = std::clamp(res.x[jp.ia(p)], 0.0, 1.0);
      for (int q = 0; q < d.n_users; ++q) {
        next.ru(p, q) = std::max(res.x[jp.iu(p, q)], 0.0);
      }
      for (int v = 0; v < d.n_targets; ++v)
        next.rs(p, v) = std::max(res.x[jp.is(p, v)], 0.0);
    }
    next.z = res.x[jp.iz()];

    // a step that annihilates the sensing information of some target has no
    // usable tangent plane at its endpoint; shorten it until the exact
    // inverse-trace is finite again
    {
      bool usable = false;
      for (int guard = 0; guard < 60 && !usable; ++guard) {
        usable = true;
        for (int v = 0; v < d.n_targets && usable; ++v)
          usable = std::isfinite(crlb_fractional(d, next.a, next.rs, v));
        if (!usable) {
          next.a = 0.5 * (next.a + cur.a);
          next.ru = 0.5 * (next.ru + cur.ru);
          next.rs = 0.5 * (next.rs + cur.rs);
          next.z = 0.5 * (next.z + cur.z);
        }
      }
      if (!usable) {
        diag.message = "sensing information lost along the step at iteration " +
                       std::to_string(iter);
        break;
      }
    }

    gap = 0.0;
    for (int p = 0; p < d.n_ap; ++p)
      gap += next.a[p] - cur.a[p] * (2.0 * next.a[p] - cur.a[p]);
    gap *= lambda;
    const double obj = next.z - gap;

    double true_min = kInf;
    for (int q = 0; q < d.n_users; ++q)
      true_min =
          std::min(true_min, sinr_fractional(d, next.a, next.ru, next.rs, q));
    double worst_crlb = 0.0;
    for (int v = 0; v < d.n_targets; ++v)
      worst_crlb =
          std::max(worst_crlb, crlb_fractional(d, next.a, next.rs, v));
    diag.trace.push_back({iter, obj, gap, res.kkt_residual,
                          worst_crlb * d.crlb_budget, true_min});
    diag.kkt_residual = std::max(diag.kkt_residual, res.kkt_residual);
    diag.iterations = iter;

    cur = next;
    double ubin = 0.0;
    for (int p = 0; p < d.n_ap; ++p) ubin += cur.a[p] * (1.0 - cur.a[p]);
    offbinary.push_back(ubin);

    const bool settled =
        std::abs(obj - obj_prev) <= cfg.sca_tol * std::max(1.0, std::abs(obj));
    obj_prev = obj;
    const int in_round = iter - round_start;
    bool stalled = false;
    if (in_round >= 3 && offbinary.size() >= 4) {
      const double before = offbinary[offbinary.size() - 4];
      stalled = gap >= cfg.gap_tol &&
                std::abs(ubin - before) <= 0.01 * std::max(before, 1e-12);
    }
    if ((settled && in_round >= 3) || in_round >= slice || stalled) {
      if (settled && gap < cfg.gap_tol) break;
      if (rounds >= cfg.penalty_rounds) {
        // with the escalations spent, keep iterating while the gap still
        // shrinks and stop once it stagnates
        if (settled && gap >= 0.9 * gap_before) break;
        continue;
      }
      ++rounds;
      lambda *= 10.0;
      obj_prev = -kInf;
      round_start = iter;
    }
  }
  diag.binary_gap = gap;
  out.iterate = cur;
  return out;
}

}  // namespace

ResourceAllocation solve_joint(const Scenario& sc,
                               const OptimizerConfig& cfg) {
  const NormalizedData d = build_data(sc, cfg);
  const JointProblem jp{&d};
  const double pd = d.budget;

  // sensing feasibility stage at fixed relaxed modes: minimum-power rho kept
  // just inside the accuracy budget, leftover split across the users
  std::string start_failure;
  const auto make_start =
      [&](const Eigen::VectorXd& a0) -> std::optional<JointIterate> {
    std::vector<std::vector<std::vector<Eigen::Matrix2d>>> blocks(
        d.n_targets);
    std::vector<double> budgets(static_cast<size_t>(d.n_ap));
    for (int p = 0; p < d.n_ap; ++p)
      budgets[static_cast<size_t>(p)] = a0[p] * a0[p] * pd;
    for (int v = 0; v < d.n_targets; ++v) {
      blocks[v].resize(d.n_ap);
      for (int p = 0; p < d.n_ap; ++p) {
        Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
        for (int pp = 0; pp < d.n_ap; ++pp)
          h += a0[p] * (1.0 - a0[pp]) * d.fhat[v][p][pp];
        blocks[v][p].push_back(h);
      }
    }
    const FeasibleSensing fs =
        sensing_feasibility(blocks, budgets, cfg.solver);
    if (!fs.message.empty() || fs.normalized_crlb > 0.99) {
      start_failure = fs.message.empty()
                          ? infeasibility_certificate(fs.normalized_crlb, cfg)
                          : fs.message;
      return std::nullopt;
    }
    JointIterate it;
    it.a = a0;
    it.ru = Eigen::MatrixXd::Zero(d.n_ap, d.n_users);
    it.rs = Eigen::MatrixXd::Zero(d.n_ap, d.n_targets);
    const double scale = fs.normalized_crlb / 0.99;
    for (int p = 0; p < d.n_ap; ++p) {
      double used = 0.0;
      for (int v = 0; v < d.n_targets; ++v) {
        it.rs(p, v) = std::max(scale * fs.rho(p, v), 1e-12 * pd);
        used += it.rs(p, v);
      }
      const double leftover =
          std::max(budgets[static_cast<size_t>(p)] - used, 1e-8 * pd);
      for (int q = 0; q < d.n_users; ++q)
        it.ru(p, q) = 0.5 * leftover / d.n_users;
    }
    double zmin = kInf;
    for (int q = 0; q < d.n_users; ++q)
      zmin = std::min(zmin, sinr_fractional(d, it.a, it.ru, it.rs, q));
    it.z = std::max(0.999 * zmin, 1e-9);
    return it;
  };

  // the distance heuristic doubles as a warm start and a quality reference
  const auto split = closest_ap_selection(sc, cfg);
  std::vector<int> cap_modes(static_cast<size_t>(d.n_ap), 0);
  for (int p : split.first) cap_modes[p] = 1;
  const ResourceAllocation cap_ref = run_fixed_modes(sc, d, cap_modes, cfg);
  Eigen::VectorXd warm_a = Eigen::VectorXd::Constant(d.n_ap, 0.1);
  for (int p : split.first) warm_a[p] = 0.9;

  // rounding with transmit/receive guards plus a fixed-mode repair pass that
  // restores exact feasibility of the returned powers
  const auto finish = [&](const ScaRun& run,
                          bool warm_started) -> ResourceAllocation {
    const Eigen::VectorXd& af = run.iterate.a;
    std::vector<int> modes(static_cast<size_t>(d.n_ap), 0);
    for (int p = 0; p < d.n_ap; ++p) modes[p] = af[p] >= 0.5 ? 1 : 0;
    int n_tx = std::accumulate(modes.begin(), modes.end(), 0);
    if (n_tx == 0) {
      int best = 0;
      for (int p = 1; p < d.n_ap; ++p)
        if (af[p] > af[best]) best = p;
      modes[best] = 1;
      n_tx = 1;
    }
    if (n_tx == d.n_ap) {
      int best = 0;
      for (int p = 1; p < d.n_ap; ++p)
        if (af[p] < af[best]) best = p;
      modes[best] = 0;
    }

    ResourceAllocation repaired = run_fixed_modes(sc, d, modes, cfg);
    if (!repaired.diagnostics.feasible) {
      ResourceAllocation retry = run_fixed_modes(sc, d, cap_modes, cfg);
      if (retry.diagnostics.feasible) {
        retry.a = af;
        retry.diagnostics.used_fallback = true;
        retry.diagnostics.iterations = run.diag.iterations;
        retry.diagnostics.binary_gap = run.diag.binary_gap;
        retry.diagnostics.kkt_residual =
            std::max(run.diag.kkt_residual, retry.diagnostics.kkt_residual);
        retry.diagnostics.trace = run.diag.trace;
        retry.diagnostics.message = "rounded modes repaired via distance rule";
        if (!run.diag.message.empty())
          retry.diagnostics.message += "; " + run.diag.message;
        return retry;
      }
      repaired.diagnostics.message =
          "repair infeasible: " + repaired.diagnostics.message;
    }
    repaired.a = af;
    repaired.diagnostics.used_fallback =
        repaired.diagnostics.used_fallback || warm_started;
    repaired.diagnostics.iterations = run.diag.iterations;
    repaired.diagnostics.binary_gap = run.diag.binary_gap;
    repaired.diagnostics.kkt_residual =
        std::max(run.diag.kkt_residual, repaired.diagnostics.kkt_residual);
    repaired.diagnostics.trace = run.diag.trace;
    if (!run.diag.message.empty()) {
      repaired.diagnostics.message =
          repaired.diagnostics.message.empty()
              ? run.diag.message
              : repaired.diagnostics.message + "; " + run.diag.message;
    }
    return repaired;
  };

  std::optional<ResourceAllocation> attempt;
  const std::optional<JointIterate> cold =
      make_start(Eigen::VectorXd::Constant(d.n_ap, 0.5));
  if (cold) attempt = finish(run_joint_sca(d, jp, *cold, pd, cfg), false);

  // a second pass seeded near the distance-heuristic modes guards against a
  // poor basin of the half-on start; the better feasible outcome is kept
  const bool satisfied = attempt && attempt->diagnostics.feasible &&
                         attempt->diagnostics.binary_gap < cfg.gap_tol &&
                         (!cap_ref.diagnostics.feasible ||
                          attempt->min_se >= cap_ref.min_se - 1e-9);
  if (!satisfied) {
    const std::optional<JointIterate> warm = make_start(warm_a);
    if (warm) {
      ResourceAllocation second =
          finish(run_joint_sca(d, jp, *warm, pd, cfg), true);
      // ties on the spectral efficiency go to the better-binarized run
      const bool better =
          second.diagnostics.feasible &&
          (!attempt || !attempt->diagnostics.feasible ||
           second.min_se > attempt->min_se + 1e-9 ||
           (second.min_se >= attempt->min_se - 1e-9 &&
            second.diagnostics.binary_gap < attempt->diagnostics.binary_gap));
      if (better) attempt = std::move(second);
    } else if (!attempt) {
      std::vector<int> modes(static_cast<size_t>(d.n_ap), 1);
      return infeasible_result(sc, d, modes, start_failure);
    }
  }
  return *attempt;
}

ResourceAllocation solve_scheme(const Scenario& sc, const std::string& scheme,
                                const OptimizerConfig& cfg, std::uint64_t seed,
                                int rap_n_rx) {
  if (scheme == "jap") return solve_joint(sc, cfg);
  if (scheme == "cap") {
    const auto split = closest_ap_selection(sc, cfg);
    std::vector<int> modes(static_cast<size_t>(sc.n_ap()), 0);
    for (int p : split.first) modes[p] = 1;
    return power_allocation_fixed_modes(sc, modes, cfg);
  }
  if (scheme == "rap") {
    const int n_rx =
        rap_n_rx > 0 ? rap_n_rx : std::max(1, sc.n_ap() / 4);
    const std::vector<int> modes = random_modes(sc.n_ap(), n_rx, seed);
    return power_allocation_fixed_modes(sc, modes, cfg);
  }
  throw std::invalid_argument("unknown scheme: " + scheme);
}

}  // namespace cfisac
