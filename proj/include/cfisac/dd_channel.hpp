#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "cfisac/rng.hpp"
#include "cfisac/scenario.hpp"

namespace cfisac {

// Effective delay-Doppler (OTFS) or time-frequency (OFDM) channel of one
// propagation path with delay tau and Doppler shift nu, together with its
// entrywise derivatives with respect to tau and nu. Vectors are stacked with
// the Doppler/symbol index slow and the delay/subcarrier index fast:
// element (k, l) lives at k*m + l.
struct EffectiveDdChannel {
  Eigen::MatrixXcd psi;
  Eigen::MatrixXcd dpsi_dtau;
  Eigen::MatrixXcd dpsi_dnu;
  double tau = 0.0;
  double nu = 0.0;
  Waveform waveform = Waveform::otfs;
};

// Delay tap index l_tau = ceil(tau * m * delta_f).
int delay_tap(double tau, const OtfsGrid& grid);

EffectiveDdChannel build_psi_otfs(double tau, double nu, const OtfsGrid& grid,
                                  bool with_derivatives = true);
EffectiveDdChannel build_psi_ofdm(double tau, double nu, const OtfsGrid& grid,
                                  bool with_derivatives = true);
EffectiveDdChannel build_psi(double tau, double nu, const OtfsGrid& grid,
                             bool with_derivatives = true);

// Operator form y = Psi x (and adjoint y = Psi^H x) without materializing
// the mn x mn matrix; cost O(mn (m + n)).
Eigen::VectorXcd apply_psi(double tau, double nu, const OtfsGrid& grid,
                           const Eigen::VectorXcd& x);
Eigen::VectorXcd apply_psi_adjoint(double tau, double nu, const OtfsGrid& grid,
                                   const Eigen::VectorXcd& x);

// Raw dump of the channel matrix, row-major, interleaved float32 re/im pairs.
void dump_psi(const EffectiveDdChannel& dd, const std::string& path);

// One transmit AP -> target -> receive AP echo channel in factored form
// beta * (h_rx h_tx^T kron Psi). The scalar reflection coefficient alpha is
// applied by the caller; `apply` and `materialize` include only the
// geometric gain sqrt(xi) carried in path.gain.
struct ReflectedChannel {
  PathParams path;
  Eigen::VectorXcd h_rx;  // receive array response
  Eigen::VectorXcd h_tx;  // transmit array response
  OtfsGrid grid;

  // y = gain * (h_rx kron Psi (h_tx^T kron I) x), x of length m_t*mn.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
  // Dense m_t*mn square matrix; intended for small grids.
  Eigen::MatrixXcd materialize() const;
};

ReflectedChannel assemble_reflected(const Scenario& sc, int p, int r, int v);

// One AP's transmitted frame: per-antenna blocks of mn samples, built from
// the per-user and per-target streams and their precoders.
struct PrecodedFrame {
  Eigen::VectorXcd x;  // length m_t * mn, antenna-major
  std::vector<Eigen::VectorXcd> comm_symbols;   // per user, length mn
  std::vector<Eigen::VectorXcd> sense_symbols;  // per target, length mn
};

// Assembles the frame of AP p for the given allocation; `comm_symbols` and
// `sense_symbols` are the shared downlink streams (identical across APs).
PrecodedFrame build_precoded_frame(
    const Scenario& sc, int p, const Allocation& alloc,
    const std::vector<Eigen::VectorXcd>& comm_symbols,
    const std::vector<Eigen::VectorXcd>& sense_symbols);

// Received echo frames at every receiving AP for one coherent transmission.
struct EchoSet {
  std::vector<int> tx_indices;
  std::vector<int> rx_indices;
  std::vector<Eigen::VectorXcd> y;        // per receiving AP, m_t*mn
  std::vector<PrecodedFrame> frames;      // per transmitting AP
  // alpha[ti][ri][v]: realized reflection coefficient of the path from
  // tx_indices[ti] via target v to rx_indices[ri].
  std::vector<std::vector<std::vector<std::complex<double>>>> alpha;
};

// Draws stream symbols, reflection coefficients and receiver noise, then
// propagates every transmit frame over every target echo path. Throws
// std::invalid_argument when the allocation has no receiving (or no
// transmitting) AP.
EchoSet synthesize_echo(const Scenario& sc, const Allocation& alloc, Rng& rng);

}  // namespace cfisac
