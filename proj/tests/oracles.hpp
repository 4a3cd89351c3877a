#pragma once

// Independent reference implementations used to cross-check the library:
// entrywise channel construction, quadruple-sum trace factors, and
// finite-difference information matrices. Everything here is written
// directly from the model definitions, avoiding the library's factored
// evaluation paths.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "cfisac/fisher.hpp"
#include "cfisac/scenario.hpp"

namespace oracle {

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

std::complex<double> dirichlet(int n, double x);
std::complex<double> weighted_dirichlet(int n, double x);

// Effective channel matrices and their delay/Doppler derivatives, one entry
// at a time from the scalar formulas.
Eigen::MatrixXcd psi_otfs(double tau, double nu, const cfisac::OtfsGrid& g);
Eigen::MatrixXcd dpsi_dtau_otfs(double tau, double nu,
                                const cfisac::OtfsGrid& g);
Eigen::MatrixXcd dpsi_dnu_otfs(double tau, double nu,
                               const cfisac::OtfsGrid& g);
Eigen::MatrixXcd psi_ofdm(double tau, double nu, const cfisac::OtfsGrid& g);
Eigen::MatrixXcd dpsi_dtau_ofdm(double tau, double nu,
                                const cfisac::OtfsGrid& g);
Eigen::MatrixXcd dpsi_dnu_ofdm(double tau, double nu,
                               const cfisac::OtfsGrid& g);

Eigen::MatrixXcd psi(double tau, double nu, const cfisac::OtfsGrid& g);
Eigen::MatrixXcd dpsi_dtau(double tau, double nu, const cfisac::OtfsGrid& g);
Eigen::MatrixXcd dpsi_dnu(double tau, double nu, const cfisac::OtfsGrid& g);

// Trace factors evaluated as explicit sums over all entry pairs.
cfisac::SignalFactors quadruple_sum_factors(const Eigen::MatrixXcd& p,
                                            const Eigen::MatrixXcd& dt,
                                            const Eigen::MatrixXcd& dn);

// Fisher information of one echo path in
// [aoa, aod, delay, doppler, Re(gain), Im(gain)] by central differences of
// the full mean response, averaged over the transmit covariance through its
// eigendecomposition.
cfisac::Matrix6d fim_fd(const cfisac::PathParams& path,
                        const Eigen::MatrixXcd& v_p, int m_t,
                        double noise_power, const cfisac::OtfsGrid& g);

// Rows [d aoa; d aod; d delay; d doppler] / d position by central
// differences of the path geometry.
cfisac::Matrix42d jacobian_fd(const cfisac::AccessPoint& tx,
                              const cfisac::AccessPoint& rx,
                              const Eigen::Vector2d& position,
                              const Eigen::Vector2d& velocity,
                              const cfisac::OtfsGrid& g);

}  // namespace oracle
