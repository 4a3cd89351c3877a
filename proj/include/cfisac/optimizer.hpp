#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cfisac/comms.hpp"
#include "cfisac/fisher.hpp"
#include "cfisac/scenario.hpp"
#include "cfisac/solver.hpp"

namespace cfisac {

// Encoding of the sensing-accuracy constraint inside the subproblems:
// either the smooth 2x2 closed form tr(F^{-1}) <= budget or the equivalent
// semidefinite pair [[F, I], [I, S]] >= 0, tr(S) <= budget.
enum class CrlbForm { smooth, schur };

struct OptimizerConfig {
  double peb_budget = 0.1;   // meters; the inverse-trace budget is peb^2
  double penalty = 10.0;     // weight pushing the mode variables binary
  double sca_tol = 1e-3;     // relative objective-change stopping rule
  double gap_tol = 1e-3;     // binary-gap target at termination
  int max_sca_iterations = 60;
  int penalty_rounds = 3;    // extra rounds with penalty x5 when fractional
  double fp_tol = 1e-3;      // relative min-SINR change stopping rule
  int fp_max_iterations = 50;
  double cap_tol = 1e-6;     // minimum SE improvement to keep switching APs
  CrlbForm crlb_form = CrlbForm::smooth;
  SolverOptions solver;
};

struct ConvergenceRow {
  int iteration = 0;
  double objective = 0.0;
  double binary_gap = 0.0;
  double kkt_residual = 0.0;
  double max_crlb = 0.0;  // exact bilinear value at the iterate
  double min_sinr = 0.0;  // exact value at the iterate
};

struct SolverDiagnostics {
  int iterations = 0;
  double binary_gap = 0.0;
  double kkt_residual = 0.0;
  bool feasible = false;
  bool used_fallback = false;
  std::string message;  // empty, or the infeasibility certificate
  std::vector<ConvergenceRow> trace;
};

struct ResourceAllocation {
  std::vector<int> modes;      // per AP: 1 = transmit, 0 = receive
  Eigen::VectorXd a;           // relaxed mode variables (joint solve only)
  Eigen::MatrixXd eta_user;    // n_ap x n_users power coefficients
  Eigen::MatrixXd eta_target;  // n_ap x n_targets power coefficients
  double min_sinr = 0.0;
  double min_se = 0.0;
  SolverDiagnostics diagnostics;
};

// Scenario-level view of the optimized powers, consumable by the comms and
// fisher modules.
Allocation to_allocation(const ResourceAllocation& ra);

// Position information of target v weighted by fractional AP modes:
// F = sum_p sum_p' a_p (1 - a_p') eta_target(p, v) Fhat_{p,p',v}, evaluated
// exactly (no linearization).
Eigen::Matrix2d fisher_with_modes(const Scenario& sc, const Eigen::VectorXd& a,
                                  const Eigen::MatrixXd& eta_target, int v);

// Joint AP mode selection and power allocation: successive convex
// approximation over the relaxed modes with a binary-enforcing penalty,
// followed by threshold rounding and a fixed-mode repair solve.
ResourceAllocation solve_joint(const Scenario& sc, const OptimizerConfig& cfg);

// Distance-driven mode selection: the APs nearest each hotspot start as
// receivers, then transmitters keep switching to receive mode while the
// minimum user spectral efficiency does not decrease.
std::pair<std::vector<int>, std::vector<int>> closest_ap_selection(
    const Scenario& sc, const OptimizerConfig& cfg);

// Max-min user SINR power allocation for fixed AP modes, alternating the
// closed-form auxiliary update with a convex subproblem solve.
ResourceAllocation power_allocation_fixed_modes(const Scenario& sc,
                                                const std::vector<int>& modes,
                                                const OptimizerConfig& cfg);

// Uniformly drawn mode split with n_rx receiving APs.
std::vector<int> random_modes(int n_ap, int n_rx, std::uint64_t seed);

// Dispatch for the three benchmarked schemes: "jap", "cap", "rap".
ResourceAllocation solve_scheme(const Scenario& sc, const std::string& scheme,
                                const OptimizerConfig& cfg,
                                std::uint64_t seed = 0, int rap_n_rx = -1);

}  // namespace cfisac
