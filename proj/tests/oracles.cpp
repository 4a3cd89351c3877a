#include "oracles.hpp"

#include <cmath>

namespace oracle {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
const cplx kJ{0.0, 1.0};

int tap_index(double tau, const cfisac::OtfsGrid& g) {
  return static_cast<int>(std::ceil(tau * g.m * g.delta_f - 1e-9));
}

}  // namespace

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

std::complex<double> dirichlet(int n, double x) {
  cplx s = 0.0;
  for (int i = 0; i < n; ++i)
    s += std::exp(kJ * (kTwoPi * x * static_cast<double>(i) / n));
  return s;
}

std::complex<double> weighted_dirichlet(int n, double x) {
  cplx s = 0.0;
  for (int i = 0; i < n; ++i)
    s += static_cast<double>(i) *
         std::exp(kJ * (kTwoPi * x * static_cast<double>(i) / n));
  return s;
}

Eigen::MatrixXcd psi_otfs(double tau, double nu, const cfisac::OtfsGrid& g) {
  const int m = g.m, n = g.n;
  const double t = g.t_symbol();
  const int ltau = tap_index(tau, g);
  Eigen::MatrixXcd out(m * n, m * n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < m; ++l)
      for (int kp = 0; kp < n; ++kp)
        for (int lp = 0; lp < m; ++lp) {
          cplx v = dirichlet(n, (kp - k) + nu * n * t) *
                   dirichlet(m, (lp - l) + tau * m * g.delta_f) *
                   std::exp(kJ * (kTwoPi * nu * lp / (m * g.delta_f))) /
                   static_cast<double>(m * n);
          if (lp >= m - ltau)
            v *= std::exp(-kJ * (kTwoPi * (nu * t + static_cast<double>(kp) / n)));
          out(k * m + l, kp * m + lp) = v;
        }
  return out;
}

Eigen::MatrixXcd dpsi_dtau_otfs(double tau, double nu,
                                const cfisac::OtfsGrid& g) {
  const int m = g.m, n = g.n;
  const double t = g.t_symbol();
  const int ltau = tap_index(tau, g);
  Eigen::MatrixXcd out(m * n, m * n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < m; ++l)
      for (int kp = 0; kp < n; ++kp)
        for (int lp = 0; lp < m; ++lp) {
          cplx v = dirichlet(n, (kp - k) + nu * n * t) *
                   (kJ * kTwoPi * g.delta_f) *
                   weighted_dirichlet(m, (lp - l) + tau * m * g.delta_f) *
                   std::exp(kJ * (kTwoPi * nu * lp / (m * g.delta_f))) /
                   static_cast<double>(m * n);
          if (lp >= m - ltau)
            v *= std::exp(-kJ * (kTwoPi * (nu * t + static_cast<double>(kp) / n)));
          out(k * m + l, kp * m + lp) = v;
        }
  return out;
}

Eigen::MatrixXcd dpsi_dnu_otfs(double tau, double nu,
                               const cfisac::OtfsGrid& g) {
  const int m = g.m, n = g.n;
  const double t = g.t_symbol();
  const int ltau = tap_index(tau, g);
  Eigen::MatrixXcd out(m * n, m * n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < m; ++l)
      for (int kp = 0; kp < n; ++kp)
        for (int lp = 0; lp < m; ++lp) {
          const bool spill = lp >= m - ltau;
          const cplx cn = dirichlet(n, (kp - k) + nu * n * t);
          const cplx en = weighted_dirichlet(n, (kp - k) + nu * n * t);
          const cplx cm = dirichlet(m, (lp - l) + tau * m * g.delta_f);
          const double glp =
              lp / (m * g.delta_f) - (spill ? t : 0.0);
          cplx v = (kJ * kTwoPi) * (t * en * cm + glp * cn * cm) *
                   std::exp(kJ * (kTwoPi * nu * lp / (m * g.delta_f))) /
                   static_cast<double>(m * n);
          if (spill)
            v *= std::exp(-kJ * (kTwoPi * (nu * t + static_cast<double>(kp) / n)));
          out(k * m + l, kp * m + lp) = v;
        }
  return out;
}

Eigen::MatrixXcd psi_ofdm(double tau, double nu, const cfisac::OtfsGrid& g) {
  const int m = g.m, n = g.n;
  const double t = g.t_symbol();
  const double t0 = g.t_data();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(m * n, m * n);
  for (int s = 0; s < n; ++s)
    for (int mr = 0; mr < m; ++mr)
      for (int mc = 0; mc < m; ++mc)
        out(s * m + mr, s * m + mc) =
            dirichlet(m, (mc - mr) + nu * t0) *
            std::exp(kJ * (kTwoPi * nu * s * t)) *
            std::exp(kJ * (kTwoPi * mc * g.delta_f * tau)) /
            static_cast<double>(m);
  return out;
}

Eigen::MatrixXcd dpsi_dtau_ofdm(double tau, double nu,
                                const cfisac::OtfsGrid& g) {
  const int m = g.m;
  Eigen::MatrixXcd out = psi_ofdm(tau, nu, g);
  for (int col = 0; col < out.cols(); ++col) {
    const int mc = col % m;
    out.col(col) *= kJ * kTwoPi * static_cast<double>(mc) * g.delta_f;
  }
  return out;
}

Eigen::MatrixXcd dpsi_dnu_ofdm(double tau, double nu,
                               const cfisac::OtfsGrid& g) {
  const int m = g.m, n = g.n;
  const double t = g.t_symbol();
  const double t0 = g.t_data();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(m * n, m * n);
  for (int s = 0; s < n; ++s)
    for (int mr = 0; mr < m; ++mr)
      for (int mc = 0; mc < m; ++mc) {
        const cplx phases = std::exp(kJ * (kTwoPi * nu * s * t)) *
                            std::exp(kJ * (kTwoPi * mc * g.delta_f * tau)) /
                            static_cast<double>(m);
        const cplx kernel = dirichlet(m, (mc - mr) + nu * t0);
        const cplx dkernel = (kJ * kTwoPi * t0 / static_cast<double>(m)) *
                             weighted_dirichlet(m, (mc - mr) + nu * t0);
        out(s * m + mr, s * m + mc) =
            phases * (kernel * (kJ * (kTwoPi * s * t)) + dkernel);
      }
  return out;
}

Eigen::MatrixXcd psi(double tau, double nu, const cfisac::OtfsGrid& g) {
  return g.waveform == cfisac::Waveform::otfs ? psi_otfs(tau, nu, g)
                                              : psi_ofdm(tau, nu, g);
}

Eigen::MatrixXcd dpsi_dtau(double tau, double nu, const cfisac::OtfsGrid& g) {
  return g.waveform == cfisac::Waveform::otfs ? dpsi_dtau_otfs(tau, nu, g)
                                              : dpsi_dtau_ofdm(tau, nu, g);
}

Eigen::MatrixXcd dpsi_dnu(double tau, double nu, const cfisac::OtfsGrid& g) {
  return g.waveform == cfisac::Waveform::otfs ? dpsi_dnu_otfs(tau, nu, g)
                                              : dpsi_dnu_ofdm(tau, nu, g);
}

cfisac::SignalFactors quadruple_sum_factors(const Eigen::MatrixXcd& p,
                                            const Eigen::MatrixXcd& dt,
                                            const Eigen::MatrixXcd& dn) {
  cfisac::SignalFactors f;
  double r00 = 0.0, r20 = 0.0, r02 = 0.0;
  cplx r10 = 0.0, r01 = 0.0, r11 = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      r00 += std::norm(p(r, c));
      r20 += std::norm(dt(r, c));
      r02 += std::norm(dn(r, c));
      r10 += std::conj(p(r, c)) * dt(r, c);
      r01 += std::conj(p(r, c)) * dn(r, c);
      r11 += std::conj(dt(r, c)) * dn(r, c);
    }
  f.r00 = r00;
  f.r10 = r10;
  f.r01 = r01;
  f.r11 = r11;
  f.r20 = r20;
  f.r02 = r02;
  return f;
}

namespace {

// Mean response to the deterministic spatial input u: the (m_t*mn) x mn
// matrix  beta (a_tx(aod)^T u) (a_rx(aoa) kron Psi(tau, nu)).
Eigen::MatrixXcd response_matrix(const double theta[6],
                                 const Eigen::VectorXcd& u, int m_t,
                                 const cfisac::OtfsGrid& g) {
  Eigen::VectorXcd a_rx(m_t), a_tx(m_t);
  for (int i = 0; i < m_t; ++i) {
    a_rx[i] = std::exp(-kJ * (theta[0] * static_cast<double>(i)));
    a_tx[i] = std::exp(-kJ * (theta[1] * static_cast<double>(i)));
  }
  const cplx beta(theta[4], theta[5]);
  const cplx mix = a_tx.transpose() * u;
  const Eigen::MatrixXcd p = psi(theta[2], theta[3], g);
  Eigen::MatrixXcd a_col(m_t, 1);
  a_col.col(0) = a_rx;
  return beta * mix * kron(a_col, p);
}

}  // namespace

cfisac::Matrix6d fim_fd(const cfisac::PathParams& path,
                        const Eigen::MatrixXcd& v_p, int m_t,
                        double noise_power, const cfisac::OtfsGrid& g) {
  const double theta0[6] = {path.aoa,          path.aod,
                            path.delay,        path.doppler,
                            path.gain.real(),  path.gain.imag()};
  const double gain_scale =
      std::max(1.0, std::abs(path.gain));
  const double steps[6] = {1e-6,
                           1e-6,
                           1e-6 * g.delay_resolution(),
                           1e-6 * g.doppler_resolution(),
                           1e-6 * gain_scale,
                           1e-6 * gain_scale};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(v_p);
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const Eigen::MatrixXcd vecs = eig.eigenvectors();
  const double lmax = lambda.cwiseAbs().maxCoeff();

  cfisac::Matrix6d f = cfisac::Matrix6d::Zero();
  for (int k = 0; k < lambda.size(); ++k) {
    if (lambda[k] <= 1e-14 * lmax) continue;
    // The transmitter applies conjugated precoders, so the radiated streams
    // carry the conjugate of the covariance eigenvectors.
    const Eigen::VectorXcd u = vecs.col(k).conjugate();
    std::vector<Eigen::MatrixXcd> d(6);
    for (int i = 0; i < 6; ++i) {
      double tp[6], tm[6];
      for (int j = 0; j < 6; ++j) tp[j] = tm[j] = theta0[j];
      tp[i] += steps[i];
      tm[i] -= steps[i];
      d[i] = (response_matrix(tp, u, m_t, g) -
              response_matrix(tm, u, m_t, g)) /
             (2.0 * steps[i]);
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        const cplx t = (d[i].adjoint() * d[j]).trace();
        f(i, j) += 2.0 / noise_power * lambda[k] * t.real();
      }
  }
  return f;
}

cfisac::Matrix42d jacobian_fd(const cfisac::AccessPoint& tx,
                              const cfisac::AccessPoint& rx,
                              const Eigen::Vector2d& position,
                              const Eigen::Vector2d& velocity,
                              const cfisac::OtfsGrid& g) {
  cfisac::Matrix42d out;
  const double h = 1e-4;
  for (int axis = 0; axis < 2; ++axis) {
    Eigen::Vector2d dp = Eigen::Vector2d::Zero();
    dp[axis] = h;
    const cfisac::PathParams plus =
        cfisac::path_parameters_at(tx, rx, position + dp, velocity, g);
    const cfisac::PathParams minus =
        cfisac::path_parameters_at(tx, rx, position - dp, velocity, g);
    out(0, axis) = (plus.aoa - minus.aoa) / (2.0 * h);
    out(1, axis) = (plus.aod - minus.aod) / (2.0 * h);
    out(2, axis) = (plus.delay - minus.delay) / (2.0 * h);
    out(3, axis) = (plus.doppler - minus.doppler) / (2.0 * h);
  }
  return out;
}

}  // namespace oracle
