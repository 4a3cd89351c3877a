#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "cfisac/dd_channel.hpp"
#include "cfisac/scenario.hpp"

namespace cfisac {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix4d = Eigen::Matrix<double, 4, 4>;
using Matrix42d = Eigen::Matrix<double, 4, 2>;

// Trace products of the effective channel and its delay/Doppler derivatives:
// r_ab = tr((d^a_tau d^b_nu Psi)^H (d^a'_tau d^b'_nu Psi)) in the pairings
// below. r10, r01 pair the channel with one derivative; r11 pairs the delay
// derivative (conjugated side) with the Doppler derivative.
struct SignalFactors {
  double r00 = 0.0;
  std::complex<double> r10{0.0, 0.0};
  std::complex<double> r01{0.0, 0.0};
  std::complex<double> r11{0.0, 0.0};
  double r20 = 0.0;
  double r02 = 0.0;
  Waveform waveform = Waveform::otfs;
};

// Direct quadruple-sum evaluation from dense channel matrices.
SignalFactors signal_factors_bruteforce(const EffectiveDdChannel& dd);

// Closed forms. The OTFS factors depend on the delay through the splitting
// of columns into same-symbol and next-symbol sets; the OFDM factors do not.
SignalFactors signal_factors_otfs(const OtfsGrid& grid, double tau);
SignalFactors signal_factors_ofdm(const OtfsGrid& grid);
SignalFactors signal_factors(const OtfsGrid& grid, double tau);

// Transmit-side covariance sum_v eta_pv b_pv b_pv^H + sum_{q,i} eta_pq
// hhat_pq,i hhat_pq,i^H of AP p under the given allocation.
Eigen::MatrixXcd build_v_matrix(const Scenario& sc, const Allocation& alloc,
                                int p);

// Fisher information of one echo path in the parameters
// [aoa, aod, delay, doppler, Re(gain), Im(gain)], averaged over the
// transmitted streams (second-order statistics v_p) and evaluated at the
// reflection gain carried in path.gain.
Matrix6d fim_full(const PathParams& path, const Eigen::MatrixXcd& v_p,
                  const SignalFactors& factors, int m_t, double noise_power);

// Equivalent 4x4 information for [aoa, aod, delay, doppler] after
// eliminating the unknown complex gain. Throws std::runtime_error when the
// gain block is singular.
Matrix4d fim_equivalent(const Matrix6d& fim);

// Rows [d aoa; d aod; d delay; d doppler] / d position for one echo path.
Matrix42d jacobian_position(const PathParams& path, const AccessPoint& tx,
                            const AccessPoint& rx,
                            const Eigen::Vector2d& velocity,
                            const OtfsGrid& grid);

// Diagonal weights of the rank-three position information approximation.
struct DCoeffs {
  double d11 = 0.0;  // receive-angle row
  double d33 = 0.0;  // delay row
  double d44 = 0.0;  // Doppler row
};
DCoeffs d_coefficients(const SignalFactors& factors, int m_t);

// Per-unit-power approximate position information block of the echo path
// (p -> v -> r); multiply by the sensing power eta_pv to get its
// contribution.
Eigen::Matrix2d approx_position_block(const Scenario& sc, int p, int r, int v);

enum class FimMode { exact, approx };

struct PositionFimResult {
  Eigen::Matrix2d fim = Eigen::Matrix2d::Zero();
  double crlb = 0.0;  // tr(fim^{-1}), +inf when singular
  double peb = 0.0;   // sqrt(crlb)
  bool singular = false;
};

// Position information per target, summed over all transmit/receive AP
// pairs of the allocation.
std::vector<PositionFimResult> position_fim(const Scenario& sc,
                                            const Allocation& alloc,
                                            FimMode mode);

// tr(m^{-1}) for a symmetric positive definite 2x2 matrix; throws
// std::invalid_argument otherwise.
double trace_inverse_2x2(const Eigen::Matrix2d& m);

}  // namespace cfisac
