#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace cfisac {

// w.x + d <= 0
struct LinearConstraint {
  Eigen::VectorXd w;
  double d = 0.0;
};

// Convex constraint
//   d + w.x + sum_t (q_t.x + r_t)^2
//     - sum_k coef_k sqrt(x_{index_k})
//     - sum_k coef_k sqrt(x_{a_k} x_{b_k})  <= 0,
// with coef_k >= 0. Every variable under a square root is confined to the
// strictly positive orthant by the solver's domain checks; callers should
// still add x >= 0 constraints so the bound is active in the barrier.
struct SqrtTerm {
  int index = 0;
  double coef = 0.0;
};
struct BilinearSqrtTerm {
  int a = 0;
  int b = 0;
  double coef = 0.0;
};
struct AffineSquare {
  Eigen::VectorXd q;
  double r = 0.0;
};
struct QuadSqrtConstraint {
  Eigen::VectorXd w;
  double d = 0.0;
  std::vector<AffineSquare> squares;
  std::vector<SqrtTerm> sqrts;
  std::vector<BilinearSqrtTerm> bisqrts;
};

// Tr(F(x)^{-1}) <= gamma + g.x on the cone F(x) > 0, with the affine family
// F(x) = f0 + sum_k x_{idx_k} coef_k of symmetric 2x2 matrices. An empty g
// means a constant right-hand side.
struct TraceInvConstraint {
  Eigen::Matrix2d f0 = Eigen::Matrix2d::Zero();
  std::vector<int> idx;
  std::vector<Eigen::Matrix2d> coef;
  double gamma = 0.0;
  Eigen::VectorXd g;
};

// G(x) = g0 + sum_k x_{idx_k} coef_k  (symmetric) must stay positive
// semidefinite; the barrier keeps iterates strictly inside the cone.
struct LmiConstraint {
  Eigen::MatrixXd g0;
  std::vector<int> idx;
  std::vector<Eigen::MatrixXd> coef;
};

struct ConvexProgram {
  int n = 0;
  Eigen::VectorXd maximize;  // linear objective coefficients
  std::vector<LinearConstraint> linear;
  std::vector<QuadSqrtConstraint> quadsqrt;
  std::vector<TraceInvConstraint> traceinv;
  std::vector<LmiConstraint> lmi;
  Eigen::VectorXd start;  // strictly feasible starting point
};

struct SolverOptions {
  double gap_rel = 1e-9;      // duality-gap target relative to |objective|
  double newton_tol = 1e-13;  // half squared Newton decrement
  double t0 = 1.0;            // initial barrier weight
  double mu = 10.0;           // barrier weight growth per stage
  int max_newton = 150;       // Newton iterations per centering stage
  int max_stages = 40;
};

struct SolveResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  bool converged = false;
  double duality_gap = 0.0;
  double kkt_residual = 0.0;  // relative stationarity residual
  double feasibility = 0.0;   // max over constraints of g(x); <= 0 inside
  int newton_iterations = 0;
  std::string message;
};

// Maximizes the linear objective over the intersection of the constraint
// sets with a log-barrier interior-point iteration. Throws
// std::invalid_argument when the starting point is not strictly feasible;
// hitting the iteration caps returns converged = false with the best
// iterate found.
SolveResult solve_convex_subproblem(const ConvexProgram& prog,
                                    const SolverOptions& opts = {});

}  // namespace cfisac
