#include "cfisac/comms.hpp"

#include <cmath>
#include <stdexcept>

namespace cfisac {

CommCoefficients comm_coefficients(const Scenario& sc) {
  const int n_ap = sc.n_ap();
  const int n_users = sc.n_users();
  const int n_targets = sc.n_targets();

  CommCoefficients co;
  co.b_user = Eigen::MatrixXd::Zero(n_ap, n_users);
  co.b_sense = Eigen::MatrixXd::Ones(n_ap, n_targets);
  co.c_user.assign(n_ap, Eigen::MatrixXd::Zero(n_users, n_users));
  co.c_sense.assign(n_ap, Eigen::MatrixXd::Zero(n_users, n_targets));

  for (int p = 0; p < n_ap; ++p) {
    for (int q = 0; q < n_users; ++q) {
      for (const CommPath& cp : sc.comm[p][q])
        co.b_user(p, q) += cp.mmse_covariance.trace().real();
      for (int qp = 0; qp < n_users; ++qp) {
        double acc = 0.0;
        for (const CommPath& a : sc.comm[p][q])
          for (const CommPath& b : sc.comm[p][qp])
            acc += (a.mmse_covariance * b.mmse_covariance).trace().real();
        co.c_user[p](q, qp) = acc;
      }
      for (int v = 0; v < n_targets; ++v) {
        const Eigen::VectorXcd& beam = sc.beams[p][v];
        double acc = 0.0;
        for (const CommPath& a : sc.comm[p][q])
          acc += (beam.adjoint() * a.mmse_covariance * beam)(0).real();
        co.c_sense[p](q, v) = acc;
      }
    }
  }
  return co;
}

double sinr_comm(const CommCoefficients& coeffs, const Scenario& sc,
                 const Allocation& alloc, int q) {
  double num = 0.0;
  double den = sc.noise_power;
  for (int p = 0; p < sc.n_ap(); ++p) {
    if (!alloc.modes[p]) continue;
    num += std::sqrt(std::max(alloc.eta_user(p, q), 0.0)) * coeffs.b_user(p, q);
    for (int qp = 0; qp < sc.n_users(); ++qp)
      den += alloc.eta_user(p, qp) * coeffs.c_user[p](q, qp);
    for (int v = 0; v < sc.n_targets(); ++v)
      den += alloc.eta_target(p, v) * coeffs.c_sense[p](q, v);
  }
  return num * num / den;
}

double prelog(const OtfsGrid& grid, Waveform waveform) {
  const double m = grid.m, n = grid.n, cp = grid.n_cp;
  if (waveform == Waveform::otfs) return m * n / (m * n + cp);
  return m / (m + cp);
}

double spectral_efficiency(double sinr, const OtfsGrid& grid,
                           Waveform waveform) {
  if (sinr < 0.0)
    throw std::invalid_argument("spectral_efficiency: negative SINR");
  return prelog(grid, waveform) * std::log2(1.0 + sinr);
}

double ap_power(const CommCoefficients& coeffs, const Allocation& alloc,
                int p) {
  double power = 0.0;
  for (Eigen::Index q = 0; q < alloc.eta_user.cols(); ++q)
    power += alloc.eta_user(p, q) * coeffs.b_user(p, q);
  for (Eigen::Index v = 0; v < alloc.eta_target.cols(); ++v)
    power += alloc.eta_target(p, v) * coeffs.b_sense(p, v);
  return power;
}

Allocation equal_power_allocation(const Scenario& sc,
                                  const CommCoefficients& coeffs,
                                  const std::vector<int>& modes) {
  if (static_cast<int>(modes.size()) != sc.n_ap())
    throw std::invalid_argument("equal_power_allocation: modes size mismatch");
  Allocation alloc;
  alloc.modes = modes;
  alloc.eta_user = Eigen::MatrixXd::Zero(sc.n_ap(), sc.n_users());
  alloc.eta_target = Eigen::MatrixXd::Zero(sc.n_ap(), sc.n_targets());
  for (int p = 0; p < sc.n_ap(); ++p) {
    if (!modes[p]) continue;
    double denom = 0.0;
    for (int q = 0; q < sc.n_users(); ++q) denom += coeffs.b_user(p, q);
    for (int v = 0; v < sc.n_targets(); ++v) denom += coeffs.b_sense(p, v);
    if (denom <= 0.0) continue;
    const double eta = sc.max_power / denom;
    for (int q = 0; q < sc.n_users(); ++q) alloc.eta_user(p, q) = eta;
    for (int v = 0; v < sc.n_targets(); ++v) alloc.eta_target(p, v) = eta;
  }
  return alloc;
}

}  // namespace cfisac
