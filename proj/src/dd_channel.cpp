#include "cfisac/dd_channel.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cfisac {

namespace {

using cplx = std::complex<double>;
constexpr cplx kJ{0.0, 1.0};
constexpr double kTwoPi = 2.0 * kPi;

// D_n(x) = sum_{i=0}^{n-1} e^{j 2 pi x i / n} and its index-weighted
// companion E_n(x) = sum_{i=0}^{n-1} i e^{j 2 pi x i / n}, evaluated by
// direct summation for numerical robustness near integer arguments.
void dirichlet_pair(int n, double x, cplx& d, cplx& e) {
  d = 0.0;
  e = 0.0;
  const double step = kTwoPi * x / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    const cplx t = std::polar(1.0, step * static_cast<double>(i));
    d += t;
    e += static_cast<double>(i) * t;
  }
}

struct OtfsTables {
  std::vector<cplx> cn, en;   // D_N, E_N at (d + nu N T)
  std::vector<cplx> cm, em;   // D_M, E_M at (d + tau M delta_f)
  std::vector<cplx> ph;       // e^{j 2 pi nu l' / (M delta_f)}
  std::vector<cplx> isi;      // e^{-j 2 pi (nu T + k'/N)}
  int lstar = 0;              // columns l' >= lstar spill into the next symbol
};

OtfsTables otfs_tables(double tau, double nu, const OtfsGrid& g) {
  OtfsTables t;
  const int m = g.m, n = g.n;
  const double tsym = g.t_symbol();
  t.cn.resize(n);
  t.en.resize(n);
  for (int d = 0; d < n; ++d)
    dirichlet_pair(n, static_cast<double>(d) + nu * n * tsym, t.cn[d], t.en[d]);
  t.cm.resize(m);
  t.em.resize(m);
  for (int d = 0; d < m; ++d)
    dirichlet_pair(m, static_cast<double>(d) + tau * m * g.delta_f, t.cm[d],
                   t.em[d]);
  t.ph.resize(m);
  for (int l = 0; l < m; ++l)
    t.ph[l] = std::polar(1.0, kTwoPi * nu * l / (m * g.delta_f));
  t.isi.resize(n);
  for (int k = 0; k < n; ++k)
    t.isi[k] = std::polar(
        1.0, -kTwoPi * (nu * tsym + static_cast<double>(k) / n));
  t.lstar = m - delay_tap(tau, g);
  return t;
}

void check_delay(double tau, const OtfsGrid& g) {
  if (tau < 0.0) throw std::invalid_argument("channel: negative delay");
  const int l_tau = delay_tap(tau, g);
  if (l_tau >= g.m)
    throw std::invalid_argument("channel: delay exceeds the delay span");
  if (l_tau > g.n_cp)
    throw std::invalid_argument("channel: delay exceeds the cyclic prefix");
}

void check_dense(const OtfsGrid& g) {
  if (g.mn() > 4096)
    throw std::runtime_error(
        "channel: dense matrix limited to m*n <= 4096; use the operator form");
}

int imod(int a, int n) {
  const int r = a % n;
  return r < 0 ? r + n : r;
}

}  // namespace

int delay_tap(double tau, const OtfsGrid& grid) {
  return static_cast<int>(std::ceil(tau * grid.m * grid.delta_f - 1e-9));
}

EffectiveDdChannel build_psi_otfs(double tau, double nu, const OtfsGrid& grid,
                                  bool with_derivatives) {
  check_delay(tau, grid);
  check_dense(grid);
  const int m = grid.m, n = grid.n, mn = grid.mn();
  const OtfsTables t = otfs_tables(tau, nu, grid);
  const double inv = 1.0 / static_cast<double>(mn);
  const double tsym = grid.t_symbol();

  EffectiveDdChannel dd;
  dd.tau = tau;
  dd.nu = nu;
  dd.waveform = Waveform::otfs;
  dd.psi.resize(mn, mn);
  if (with_derivatives) {
    dd.dpsi_dtau.resize(mn, mn);
    dd.dpsi_dnu.resize(mn, mn);
  }

  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < m; ++l) {
      const int row = k * m + l;
      for (int kp = 0; kp < n; ++kp) {
        const cplx cn = t.cn[imod(kp - k, n)];
        const cplx en = t.en[imod(kp - k, n)];
        for (int lp = 0; lp < m; ++lp) {
          const int col = kp * m + lp;
          const bool spill = lp >= t.lstar;
          const cplx cm = t.cm[imod(lp - l, m)];
          const cplx outer = inv * t.ph[lp] * (spill ? t.isi[kp] : cplx(1.0));
          dd.psi(row, col) = outer * cn * cm;
          if (with_derivatives) {
            const cplx em = t.em[imod(lp - l, m)];
            dd.dpsi_dtau(row, col) =
                outer * cn * (kJ * kTwoPi * grid.delta_f * em);
            const double g_lp =
                static_cast<double>(lp) / (m * grid.delta_f) -
                (spill ? tsym : 0.0);
            dd.dpsi_dnu(row, col) =
                outer * (kJ * kTwoPi) * (tsym * en * cm + g_lp * cn * cm);
          }
        }
      }
    }
  }
  return dd;
}

EffectiveDdChannel build_psi_ofdm(double tau, double nu, const OtfsGrid& grid,
                                  bool with_derivatives) {
  check_delay(tau, grid);
  check_dense(grid);
  const int m = grid.m, n = grid.n, mn = grid.mn();
  const double tsym = grid.t_symbol();
  const double t0 = grid.t_data();
  const double inv = 1.0 / static_cast<double>(m);

  std::vector<cplx> dm(m), em(m);
  for (int d = 0; d < m; ++d)
    dirichlet_pair(m, static_cast<double>(d) + nu * t0, dm[d], em[d]);

  EffectiveDdChannel dd;
  dd.tau = tau;
  dd.nu = nu;
  dd.waveform = Waveform::ofdm;
  dd.psi = Eigen::MatrixXcd::Zero(mn, mn);
  if (with_derivatives) {
    dd.dpsi_dtau = Eigen::MatrixXcd::Zero(mn, mn);
    dd.dpsi_dnu = Eigen::MatrixXcd::Zero(mn, mn);
  }

  for (int sym = 0; sym < n; ++sym) {
    const cplx sym_phase = std::polar(1.0, kTwoPi * nu * sym * tsym);
    for (int mr = 0; mr < m; ++mr) {
      const int row = sym * m + mr;
      for (int mc = 0; mc < m; ++mc) {
        const int col = sym * m + mc;
        const cplx delay_phase =
            std::polar(1.0, kTwoPi * mc * grid.delta_f * tau);
        const cplx kernel = dm[imod(mc - mr, m)];
        const cplx base = inv * sym_phase * delay_phase * kernel;
        dd.psi(row, col) = base;
        if (with_derivatives) {
          dd.dpsi_dtau(row, col) =
              base * (kJ * (kTwoPi * mc * grid.delta_f));
          dd.dpsi_dnu(row, col) =
              base * (kJ * (kTwoPi * sym * tsym)) +
              inv * sym_phase * delay_phase *
                  (kJ * kTwoPi * t0 / static_cast<double>(m)) *
                  em[imod(mc - mr, m)];
        }
      }
    }
  }
  return dd;
}

EffectiveDdChannel build_psi(double tau, double nu, const OtfsGrid& grid,
                             bool with_derivatives) {
  return grid.waveform == Waveform::otfs
             ? build_psi_otfs(tau, nu, grid, with_derivatives)
             : build_psi_ofdm(tau, nu, grid, with_derivatives);
}

Eigen::VectorXcd apply_psi(double tau, double nu, const OtfsGrid& grid,
                           const Eigen::VectorXcd& x) {
  check_delay(tau, grid);
  const int m = grid.m, n = grid.n, mn = grid.mn();
  if (x.size() != mn)
    throw std::invalid_argument("apply_psi: vector length mismatch");

  if (grid.waveform == Waveform::ofdm) {
    const double tsym = grid.t_symbol();
    const double t0 = grid.t_data();
    std::vector<cplx> dm(m);
    for (int d = 0; d < m; ++d) {
      cplx e;
      dirichlet_pair(m, static_cast<double>(d) + nu * t0, dm[d], e);
    }
    std::vector<cplx> delay_phase(m);
    for (int mc = 0; mc < m; ++mc)
      delay_phase[mc] = std::polar(1.0, kTwoPi * mc * grid.delta_f * tau);
    Eigen::VectorXcd y(mn);
    const double inv = 1.0 / static_cast<double>(m);
    for (int sym = 0; sym < n; ++sym) {
      const cplx sym_phase = std::polar(1.0, kTwoPi * nu * sym * tsym);
      for (int mr = 0; mr < m; ++mr) {
        cplx acc = 0.0;
        for (int mc = 0; mc < m; ++mc)
          acc += delay_phase[mc] * dm[imod(mc - mr, m)] * x[sym * m + mc];
        y[sym * m + mr] = inv * sym_phase * acc;
      }
    }
    return y;
  }

  const OtfsTables t = otfs_tables(tau, nu, grid);
  // z folds the column-only factors, then the kernel separates into a
  // delay-axis pass followed by a Doppler-axis pass.
  Eigen::MatrixXcd z(n, m);
  for (int kp = 0; kp < n; ++kp)
    for (int lp = 0; lp < m; ++lp)
      z(kp, lp) = t.ph[lp] * (lp >= t.lstar ? t.isi[kp] : cplx(1.0)) *
                  x[kp * m + lp];
  Eigen::MatrixXcd u(n, m);
  for (int kp = 0; kp < n; ++kp)
    for (int l = 0; l < m; ++l) {
      cplx acc = 0.0;
      for (int lp = 0; lp < m; ++lp) acc += t.cm[imod(lp - l, m)] * z(kp, lp);
      u(kp, l) = acc;
    }
  Eigen::VectorXcd y(mn);
  const double inv = 1.0 / static_cast<double>(mn);
  for (int l = 0; l < m; ++l)
    for (int k = 0; k < n; ++k) {
      cplx acc = 0.0;
      for (int kp = 0; kp < n; ++kp) acc += t.cn[imod(kp - k, n)] * u(kp, l);
      y[k * m + l] = inv * acc;
    }
  return y;
}

Eigen::VectorXcd apply_psi_adjoint(double tau, double nu, const OtfsGrid& grid,
                                   const Eigen::VectorXcd& x) {
  check_delay(tau, grid);
  const int m = grid.m, n = grid.n, mn = grid.mn();
  if (x.size() != mn)
    throw std::invalid_argument("apply_psi_adjoint: vector length mismatch");

  if (grid.waveform == Waveform::ofdm) {
    const double tsym = grid.t_symbol();
    const double t0 = grid.t_data();
    std::vector<cplx> dm(m);
    for (int d = 0; d < m; ++d) {
      cplx e;
      dirichlet_pair(m, static_cast<double>(d) + nu * t0, dm[d], e);
    }
    Eigen::VectorXcd y(mn);
    const double inv = 1.0 / static_cast<double>(m);
    for (int sym = 0; sym < n; ++sym) {
      const cplx sym_phase = std::polar(1.0, -kTwoPi * nu * sym * tsym);
      for (int mr = 0; mr < m; ++mr) {
        const cplx delay_phase =
            std::polar(1.0, -kTwoPi * mr * grid.delta_f * tau);
        cplx acc = 0.0;
        for (int mc = 0; mc < m; ++mc)
          acc += std::conj(dm[imod(mr - mc, m)]) * x[sym * m + mc];
        y[sym * m + mr] = inv * sym_phase * delay_phase * acc;
      }
    }
    return y;
  }

  const OtfsTables t = otfs_tables(tau, nu, grid);
  Eigen::MatrixXcd u(n, m);
  for (int kp = 0; kp < n; ++kp)
    for (int l = 0; l < m; ++l) {
      cplx acc = 0.0;
      for (int lp = 0; lp < m; ++lp)
        acc += std::conj(t.cm[imod(l - lp, m)]) * x[kp * m + lp];
      u(kp, l) = acc;
    }
  Eigen::VectorXcd y(mn);
  const double inv = 1.0 / static_cast<double>(mn);
  for (int l = 0; l < m; ++l)
    for (int k = 0; k < n; ++k) {
      cplx acc = 0.0;
      for (int kp = 0; kp < n; ++kp)
        acc += std::conj(t.cn[imod(k - kp, n)]) * u(kp, l);
      y[k * m + l] = inv * std::conj(t.ph[l]) *
                     (l >= t.lstar ? std::conj(t.isi[k]) : cplx(1.0)) * acc;
    }
  return y;
}

void dump_psi(const EffectiveDdChannel& dd, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("dump_psi: cannot open " + path);
  const Eigen::Index n = dd.psi.rows();
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      const float re = static_cast<float>(dd.psi(r, c).real());
      const float im = static_cast<float>(dd.psi(r, c).imag());
      out.write(reinterpret_cast<const char*>(&re), sizeof(float));
      out.write(reinterpret_cast<const char*>(&im), sizeof(float));
    }
  if (!out) throw std::runtime_error("dump_psi: write failed: " + path);
}

Eigen::VectorXcd ReflectedChannel::apply(const Eigen::VectorXcd& x) const {
  const int mn = grid.mn();
  const int m_t = static_cast<int>(h_tx.size());
  if (x.size() != static_cast<Eigen::Index>(m_t) * mn)
    throw std::invalid_argument("reflected channel: frame length mismatch");
  Eigen::VectorXcd mixed = Eigen::VectorXcd::Zero(mn);
  for (int i = 0; i < m_t; ++i) mixed += h_tx[i] * x.segment(i * mn, mn);
  const Eigen::VectorXcd s =
      path.gain * apply_psi(path.delay, path.doppler, grid, mixed);
  Eigen::VectorXcd y(static_cast<Eigen::Index>(m_t) * mn);
  for (int j = 0; j < m_t; ++j) y.segment(j * mn, mn) = h_rx[j] * s;
  return y;
}

Eigen::MatrixXcd ReflectedChannel::materialize() const {
  const int mn = grid.mn();
  const int m_t = static_cast<int>(h_tx.size());
  const EffectiveDdChannel dd =
      build_psi(path.delay, path.doppler, grid, false);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(
      static_cast<Eigen::Index>(m_t) * mn, static_cast<Eigen::Index>(m_t) * mn);
  for (int r = 0; r < m_t; ++r)
    for (int c = 0; c < m_t; ++c)
      h.block(r * mn, c * mn, mn, mn) =
          path.gain * h_rx[r] * h_tx[c] * dd.psi;
  return h;
}

ReflectedChannel assemble_reflected(const Scenario& sc, int p, int r, int v) {
  ReflectedChannel ch;
  ch.path = path_parameters(sc.aps.at(p), sc.aps.at(r), sc.targets.at(v),
                            sc.grid);
  ch.h_tx = array_response(ch.path.aod, sc.aps.at(p).num_antennas);
  ch.h_rx = array_response(ch.path.aoa, sc.aps.at(r).num_antennas);
  ch.grid = sc.grid;
  return ch;
}

PrecodedFrame build_precoded_frame(
    const Scenario& sc, int p, const Allocation& alloc,
    const std::vector<Eigen::VectorXcd>& comm_symbols,
    const std::vector<Eigen::VectorXcd>& sense_symbols) {
  const int mn = sc.grid.mn();
  const int m_t = sc.m_t();
  PrecodedFrame frame;
  frame.comm_symbols = comm_symbols;
  frame.sense_symbols = sense_symbols;
  frame.x = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m_t) * mn);

  for (int q = 0; q < sc.n_users(); ++q) {
    const double eta = alloc.eta_user(p, q);
    if (eta <= 0.0) continue;
    const double amp = std::sqrt(eta);
    for (const CommPath& cp : sc.comm[p][q]) {
      const Eigen::VectorXcd s =
          amp * apply_psi_adjoint(cp.delay, cp.doppler, sc.grid,
                                  comm_symbols.at(q));
      for (int a = 0; a < m_t; ++a)
        frame.x.segment(a * mn, mn) += std::conj(cp.csi[a]) * s;
    }
  }
  for (int v = 0; v < sc.n_targets(); ++v) {
    const double eta = alloc.eta_target(p, v);
    if (eta <= 0.0) continue;
    const double amp = std::sqrt(eta);
    const Eigen::VectorXcd& beam = sc.beams[p][v];
    for (int a = 0; a < m_t; ++a)
      frame.x.segment(a * mn, mn) +=
          amp * std::conj(beam[a]) * sense_symbols.at(v);
  }
  return frame;
}

EchoSet synthesize_echo(const Scenario& sc, const Allocation& alloc,
                        Rng& rng) {
  EchoSet echo;
  echo.tx_indices = alloc.tx_indices();
  echo.rx_indices = alloc.rx_indices();
  if (echo.rx_indices.empty())
    throw std::invalid_argument("synthesize_echo: no receiving access points");
  if (echo.tx_indices.empty())
    throw std::invalid_argument(
        "synthesize_echo: no transmitting access points");

  const int mn = sc.grid.mn();
  const int m_t = sc.m_t();

  std::vector<Eigen::VectorXcd> comm_symbols(sc.n_users());
  for (int q = 0; q < sc.n_users(); ++q) {
    comm_symbols[q].resize(mn);
    for (int e = 0; e < mn; ++e) comm_symbols[q][e] = rng.qpsk();
  }
  std::vector<Eigen::VectorXcd> sense_symbols(sc.n_targets());
  for (int v = 0; v < sc.n_targets(); ++v) {
    sense_symbols[v].resize(mn);
    for (int e = 0; e < mn; ++e) sense_symbols[v][e] = rng.qpsk();
  }

  echo.frames.reserve(echo.tx_indices.size());
  for (int p : echo.tx_indices)
    echo.frames.push_back(
        build_precoded_frame(sc, p, alloc, comm_symbols, sense_symbols));

  echo.alpha.resize(echo.tx_indices.size());
  for (size_t ti = 0; ti < echo.tx_indices.size(); ++ti) {
    echo.alpha[ti].resize(echo.rx_indices.size());
    for (size_t ri = 0; ri < echo.rx_indices.size(); ++ri) {
      echo.alpha[ti][ri].resize(sc.n_targets());
      for (int v = 0; v < sc.n_targets(); ++v)
        echo.alpha[ti][ri][v] =
            draw_rcs(sc.targets[v].rcs_variance, rng);
    }
  }

  echo.y.resize(echo.rx_indices.size());
  for (size_t ri = 0; ri < echo.rx_indices.size(); ++ri) {
    Eigen::VectorXcd y =
        Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m_t) * mn);
    for (size_t ti = 0; ti < echo.tx_indices.size(); ++ti)
      for (int v = 0; v < sc.n_targets(); ++v) {
        const ReflectedChannel ch = assemble_reflected(
            sc, echo.tx_indices[ti], echo.rx_indices[ri], v);
        y += echo.alpha[ti][ri][v] * ch.apply(echo.frames[ti].x);
      }
    for (Eigen::Index e = 0; e < y.size(); ++e)
      y[e] += rng.cnormal(sc.noise_power);
    echo.y[ri] = y;
  }
  return echo;
}

}  // namespace cfisac
