#include "cfisac/fisher.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfisac {

namespace {

using cplx = std::complex<double>;
constexpr cplx kJ{0.0, 1.0};

// Sums of the per-column Doppler phase slopes g(l) and their squares, with
// the delay-dependent split into same-symbol and next-symbol columns.
void g_sums(const OtfsGrid& grid, double tau, double& sum_g, double& sum_g2) {
  const int l_tau = delay_tap(tau, grid);
  const int lstar = grid.m - l_tau;
  const double tsym = grid.t_symbol();
  sum_g = 0.0;
  sum_g2 = 0.0;
  for (int l = 0; l < grid.m; ++l) {
    const double g =
        static_cast<double>(l) / (grid.m * grid.delta_f) -
        (l >= lstar ? tsym : 0.0);
    sum_g += g;
    sum_g2 += g * g;
  }
}

}  // namespace

SignalFactors signal_factors_bruteforce(const EffectiveDdChannel& dd) {
  if (dd.psi.size() == 0 || dd.dpsi_dtau.size() == 0 || dd.dpsi_dnu.size() == 0)
    throw std::invalid_argument(
        "signal_factors_bruteforce: channel built without derivatives");
  SignalFactors f;
  f.waveform = dd.waveform;
  f.r00 = dd.psi.squaredNorm();
  f.r10 = (dd.psi.adjoint() * dd.dpsi_dtau).trace();
  f.r01 = (dd.psi.adjoint() * dd.dpsi_dnu).trace();
  f.r11 = (dd.dpsi_dtau.adjoint() * dd.dpsi_dnu).trace();
  f.r20 = dd.dpsi_dtau.squaredNorm();
  f.r02 = dd.dpsi_dnu.squaredNorm();
  return f;
}

SignalFactors signal_factors_otfs(const OtfsGrid& grid, double tau) {
  const double m = grid.m, n = grid.n;
  const double mn = m * n;
  const double tsym = grid.t_symbol();
  const double df = grid.delta_f;
  double sum_g = 0.0, sum_g2 = 0.0;
  g_sums(grid, tau, sum_g, sum_g2);

  SignalFactors f;
  f.waveform = Waveform::otfs;
  f.r00 = mn;
  f.r10 = kJ * kPi * df * (m - 1.0) * mn;
  f.r01 = kJ * kPi * (tsym * (n - 1.0) * mn + 2.0 * n * sum_g);
  f.r11 = kPi * kPi * (m - 1.0) * n * ((n - 1.0) * m + 2.0 * df * sum_g);
  f.r20 = std::pow(2.0 * kPi * df, 2) * (m - 1.0) * mn * (2.0 * m - 1.0) / 6.0;
  f.r02 = std::pow(2.0 * kPi * tsym, 2) * (n - 1.0) * mn * (2.0 * n - 1.0) / 6.0 +
          std::pow(2.0 * kPi, 2) * n * sum_g2 +
          std::pow(2.0 * kPi, 2) * tsym * (n - 1.0) * n * sum_g;
  return f;
}

SignalFactors signal_factors_ofdm(const OtfsGrid& grid) {
  const double m = grid.m, n = grid.n;
  const double mn = m * n;
  const double tsym = grid.t_symbol();
  const double t0 = grid.t_data();
  const double df = grid.delta_f;

  SignalFactors f;
  f.waveform = Waveform::ofdm;
  f.r00 = mn;
  f.r10 = kJ * kPi * df * (m - 1.0) * mn;
  f.r01 = kJ * kPi * (tsym * (n - 1.0) * mn + t0 * (m - 1.0) * n);
  f.r11 = kPi * kPi * (m - 1.0) * n * ((n - 1.0) * m + t0 * df * (m - 1.0));
  f.r20 = std::pow(2.0 * kPi * df, 2) * (m - 1.0) * mn * (2.0 * m - 1.0) / 6.0;
  f.r02 = std::pow(2.0 * kPi * tsym, 2) * (n - 1.0) * mn * (2.0 * n - 1.0) / 6.0 +
          std::pow(2.0 * kPi * t0, 2) * (m - 1.0) * n * (2.0 * m - 1.0) /
              (6.0 * m) +
          2.0 * kPi * kPi * t0 * tsym * (n - 1.0) * n * (m - 1.0);
  return f;
}

SignalFactors signal_factors(const OtfsGrid& grid, double tau) {
  return grid.waveform == Waveform::otfs ? signal_factors_otfs(grid, tau)
                                         : signal_factors_ofdm(grid);
}

Eigen::MatrixXcd build_v_matrix(const Scenario& sc, const Allocation& alloc,
                                int p) {
  const int m_t = sc.m_t();
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(m_t, m_t);
  for (int t = 0; t < sc.n_targets(); ++t) {
    const double eta = alloc.eta_target(p, t);
    if (eta <= 0.0) continue;
    const Eigen::VectorXcd& b = sc.beams[p][t];
    v += eta * b * b.adjoint();
  }
  for (int q = 0; q < sc.n_users(); ++q) {
    const double eta = alloc.eta_user(p, q);
    if (eta <= 0.0) continue;
    for (const CommPath& cp : sc.comm[p][q])
      v += eta * cp.csi * cp.csi.adjoint();
  }
  return v;
}

Matrix6d fim_full(const PathParams& path, const Eigen::MatrixXcd& v_p,
                  const SignalFactors& factors, int m_t, double noise_power) {
  if (noise_power <= 0.0)
    throw std::invalid_argument("fim_full: noise power must be positive");
  const Eigen::VectorXcd h_rx = array_response(path.aoa, m_t);
  const Eigen::VectorXcd h_tx = array_response(path.aod, m_t);
  Eigen::VectorXcd hd_rx(m_t), hd_tx(m_t);
  for (int i = 0; i < m_t; ++i) {
    hd_rx[i] = static_cast<double>(i) * h_rx[i];
    hd_tx[i] = static_cast<double>(i) * h_tx[i];
  }
  const cplx beta = path.gain;

  // Descriptor of d(signal)/d(theta_i): scalar prefactor, receive vector,
  // transmit vector, and signal-derivative class (0: none, 1: delay,
  // 2: Doppler).
  struct Term {
    cplx kappa;
    const Eigen::VectorXcd* rx;
    const Eigen::VectorXcd* tx;
    int dclass;
  };
  const Term terms[6] = {
      {-kJ * beta, &hd_rx, &h_tx, 0},  // receive spatial frequency
      {-kJ * beta, &h_rx, &hd_tx, 0},  // transmit spatial frequency
      {beta, &h_rx, &h_tx, 1},         // delay
      {beta, &h_rx, &h_tx, 2},         // Doppler
      {cplx(1.0, 0.0), &h_rx, &h_tx, 0},  // Re(gain)
      {kJ, &h_rx, &h_tx, 0},              // Im(gain)
  };

  const auto rfactor = [&factors](int a, int b) -> cplx {
    if (a == 0 && b == 0) return factors.r00;
    if (a == 0 && b == 1) return factors.r10;
    if (a == 1 && b == 0) return std::conj(factors.r10);
    if (a == 0 && b == 2) return factors.r01;
    if (a == 2 && b == 0) return std::conj(factors.r01);
    if (a == 1 && b == 1) return factors.r20;
    if (a == 2 && b == 2) return factors.r02;
    if (a == 1 && b == 2) return factors.r11;
    return std::conj(factors.r11);  // a == 2, b == 1
  };

  Matrix6d f = Matrix6d::Zero();
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) {
      const cplx rx_dot = terms[i].rx->dot(*terms[j].rx);  // conjugates lhs
      const cplx tx_quad =
          std::conj((terms[j].tx->adjoint() * v_p * (*terms[i].tx))(0));
      const cplx val = std::conj(terms[i].kappa) * terms[j].kappa * rx_dot *
                       tx_quad * rfactor(terms[i].dclass, terms[j].dclass);
      f(i, j) = 2.0 / noise_power * val.real();
      f(j, i) = f(i, j);
    }
  }
  return f;
}

Matrix4d fim_equivalent(const Matrix6d& fim) {
  const Matrix4d a = fim.topLeftCorner<4, 4>();
  const Eigen::Matrix<double, 4, 2> b = fim.topRightCorner<4, 2>();
  const Eigen::Matrix2d d = fim.bottomRightCorner<2, 2>();
  const double scale = d.cwiseAbs().maxCoeff();
  if (scale <= 0.0 || std::abs(d.determinant()) < 1e-15 * scale * scale)
    throw std::runtime_error("fim_equivalent: singular gain block");
  return a - b * d.inverse() * b.transpose();
}

Matrix42d jacobian_position(const PathParams& path, const AccessPoint& tx,
                            const AccessPoint& rx,
                            const Eigen::Vector2d& velocity,
                            const OtfsGrid& grid) {
  const Eigen::Matrix2d i2 = Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d proj_tx =
      (i2 - path.dir_tx * path.dir_tx.transpose()) / path.dist_tx;
  const Eigen::Matrix2d proj_rx =
      (i2 - path.dir_rx * path.dir_rx.transpose()) / path.dist_rx;

  Matrix42d j;
  j.row(0) = (kPi * proj_rx * rx.axis()).transpose();
  j.row(1) = (kPi * proj_tx * tx.axis()).transpose();
  j.row(2) = ((path.dir_tx + path.dir_rx) / kSpeedOfLight).transpose();
  j.row(3) =
      (-(proj_tx + proj_rx) * velocity / grid.lambda_c()).transpose();
  return j;
}

DCoeffs d_coefficients(const SignalFactors& factors, int m_t) {
  const double mt = m_t;
  const double mn = factors.r00;
  DCoeffs d;
  d.d11 = mt * (mt - 1.0) * (2.0 * mt - 1.0) * mn / 6.0 -
          mt * (mt - 1.0) * (mt - 1.0) * mn / 4.0;
  d.d33 = factors.r20 + (factors.r10 * factors.r10).real() / mn;
  d.d44 = factors.r02 + (factors.r01 * factors.r01).real() / mn;
  return d;
}

Eigen::Matrix2d approx_position_block(const Scenario& sc, int p, int r,
                                      int v) {
  const PathParams path =
      path_parameters(sc.aps.at(p), sc.aps.at(r), sc.targets.at(v), sc.grid);
  const SignalFactors factors = signal_factors(sc.grid, path.delay);
  const DCoeffs d = d_coefficients(factors, sc.m_t());
  const Matrix42d j = jacobian_position(path, sc.aps[p], sc.aps[r],
                                        sc.targets[v].velocity, sc.grid);
  const double beta2 = sc.targets[v].rcs_variance * path.xi;
  const Eigen::Vector2d j1 = j.row(0).transpose();
  const Eigen::Vector2d j3 = j.row(2).transpose();
  const Eigen::Vector2d j4 = j.row(3).transpose();
  return 2.0 * beta2 / sc.noise_power *
         (d.d11 * j1 * j1.transpose() + d.d33 * j3 * j3.transpose() +
          d.d44 * j4 * j4.transpose());
}

std::vector<PositionFimResult> position_fim(const Scenario& sc,
                                            const Allocation& alloc,
                                            FimMode mode) {
  const std::vector<int> tx = alloc.tx_indices();
  const std::vector<int> rx = alloc.rx_indices();
  std::vector<PositionFimResult> out(sc.n_targets());

  std::vector<Eigen::MatrixXcd> v_mats;
  if (mode == FimMode::exact) {
    v_mats.resize(sc.n_ap());
    for (int p : tx) v_mats[p] = build_v_matrix(sc, alloc, p);
  }

  for (int v = 0; v < sc.n_targets(); ++v) {
    Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
    for (int p : tx) {
      for (int r : rx) {
        if (mode == FimMode::approx) {
          const double eta = alloc.eta_target(p, v);
          if (eta <= 0.0) continue;
          f += eta * approx_position_block(sc, p, r, v);
        } else {
          PathParams path = path_parameters(sc.aps[p], sc.aps[r],
                                            sc.targets[v], sc.grid);
          path.gain = std::sqrt(sc.targets[v].rcs_variance * path.xi);
          const SignalFactors factors = signal_factors(sc.grid, path.delay);
          const Matrix6d f6 =
              fim_full(path, v_mats[p], factors, sc.m_t(), sc.noise_power);
          const Matrix4d f4 = fim_equivalent(f6);
          const Matrix42d j = jacobian_position(
              path, sc.aps[p], sc.aps[r], sc.targets[v].velocity, sc.grid);
          f += j.transpose() * f4 * j;
        }
      }
    }
    PositionFimResult& res = out[v];
    res.fim = f;
    if (std::abs(f.determinant()) < 1e-18) {
      res.singular = true;
      res.crlb = std::numeric_limits<double>::infinity();
      res.peb = std::numeric_limits<double>::infinity();
    } else {
      res.crlb = trace_inverse_2x2(f);
      res.peb = std::sqrt(res.crlb);
    }
  }
  return out;
}

double trace_inverse_2x2(const Eigen::Matrix2d& m) {
  const double det = m.determinant();
  if (m(0, 0) <= 0.0 || det <= 0.0)
    throw std::invalid_argument("trace_inverse_2x2: matrix not positive definite");
  return (m(0, 0) + m(1, 1)) / det;
}

}  // namespace cfisac
