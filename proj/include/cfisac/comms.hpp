#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cfisac/scenario.hpp"

namespace cfisac {

// Statistical downlink coupling coefficients. For AP p and user q,
// b_user(p,q) is the average beamforming gain of the served stream;
// c_user[p](q,q') couples user q's channel with the precoder of user q';
// c_sense[p](q,v) couples it with the sensing beam toward target v. Sensing
// streams radiate through unit-norm beams, so their power coefficient is 1.
struct CommCoefficients {
  Eigen::MatrixXd b_user;                // n_ap x n_users
  std::vector<Eigen::MatrixXd> c_user;   // per AP: n_users x n_users
  std::vector<Eigen::MatrixXd> c_sense;  // per AP: n_users x n_targets
  Eigen::MatrixXd b_sense;               // n_ap x n_targets (all ones)
};

CommCoefficients comm_coefficients(const Scenario& sc);

// Effective downlink SINR of user q under hardened-channel statistics; only
// transmitting APs contribute, interference keeps the full power sum
// including the serving streams.
double sinr_comm(const CommCoefficients& coeffs, const Scenario& sc,
                 const Allocation& alloc, int q);

// Frame-level rate prefactors accounting for the cyclic prefix overhead.
double prelog(const OtfsGrid& grid, Waveform waveform);

double spectral_efficiency(double sinr, const OtfsGrid& grid,
                           Waveform waveform);

// Average radiated power of AP p under the allocation.
double ap_power(const CommCoefficients& coeffs, const Allocation& alloc,
                int p);

// Splits each transmitting AP's budget equally across its streams so that
// ap_power equals the budget exactly; receiving APs get zero rows.
Allocation equal_power_allocation(const Scenario& sc,
                                  const CommCoefficients& coeffs,
                                  const std::vector<int>& modes);

}  // namespace cfisac
