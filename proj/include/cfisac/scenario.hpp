#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "cfisac/config.hpp"
#include "cfisac/rng.hpp"

namespace cfisac {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

enum class Waveform { otfs, ofdm };

Waveform waveform_from_string(const std::string& name);
std::string waveform_name(Waveform wf);

// Delay-Doppler / time-frequency numerology shared by both waveforms.
// One frame spans N symbols of M subcarriers at spacing delta_f. The symbol
// duration is t_symbol = 1/delta_f for both waveforms; the OFDM variant
// splits each symbol into a cyclic prefix of n_cp samples and a data part of
// m samples, so its data duration is t_data = t_symbol * m / (m + n_cp).
struct OtfsGrid {
  int m = 16;               // subcarriers / delay bins
  int n = 16;               // symbols / Doppler bins
  double delta_f = 0.5e6;   // subcarrier spacing (Hz)
  double f_c = 38e9;        // carrier frequency (Hz)
  int n_cp = 16;            // cyclic prefix length (samples)
  Waveform waveform = Waveform::otfs;

  int mn() const { return m * n; }
  double t_symbol() const { return 1.0 / delta_f; }
  double bandwidth() const { return m * delta_f; }
  double lambda_c() const { return kSpeedOfLight / f_c; }
  double delay_resolution() const { return 1.0 / (m * delta_f); }
  double doppler_resolution() const { return 1.0 / (n * t_symbol()); }
  double t_data() const {
    return t_symbol() * static_cast<double>(m) / static_cast<double>(m + n_cp);
  }
  double t_cp() const { return t_symbol() - t_data(); }
};

// Builds a grid, sizing the cyclic prefix from the maximum scene delay:
// n_cp = ceil(tau_max * m * delta_f).
OtfsGrid make_grid(int m, int n, double delta_f, double f_c, double tau_max,
                   Waveform waveform);

struct AccessPoint {
  Eigen::Vector2d position{0.0, 0.0};
  double orientation = 0.0;  // array axis angle (rad)
  int num_antennas = 4;
  Eigen::Vector2d axis() const {
    return {std::cos(orientation), std::sin(orientation)};
  }
};

struct Target {
  Eigen::Vector2d position{0.0, 0.0};
  Eigen::Vector2d velocity{0.0, 0.0};
  double rcs_variance = 1.0;  // E{|alpha|^2} (m^2)
  Eigen::Vector2d hotspot_center{0.0, 0.0};
  double hotspot_halfwidth = 10.0;  // search region half side (m)
};

struct UserEquipment {
  Eigen::Vector2d position{0.0, 0.0};
  Eigen::Vector2d velocity{0.0, 0.0};
};

// One resolvable downlink propagation path between an AP and a user.
struct CommPath {
  double delay = 0.0;    // s
  double doppler = 0.0;  // Hz
  Eigen::MatrixXcd covariance;       // spatial covariance R (m_t x m_t)
  Eigen::MatrixXcd mmse_covariance;  // covariance B of the channel estimate
  Eigen::VectorXcd csi;              // realized channel estimate, CN(0, B)
};

// Geometry of one transmit AP -> target -> receive AP echo path.
struct PathParams {
  double aoa = 0.0;    // spatial frequency at the receive array (rad)
  double aod = 0.0;    // spatial frequency at the transmit array (rad)
  double delay = 0.0;  // bistatic delay (s)
  double doppler = 0.0;  // bistatic Doppler shift (Hz), positive when closing
  std::complex<double> gain{1.0, 0.0};  // sqrt(xi) unless rescaled by caller
  double xi = 1.0;      // two-hop radar-equation power attenuation
  Eigen::Vector2d dir_tx{1.0, 0.0};  // unit vector, transmit AP -> target
  Eigen::Vector2d dir_rx{1.0, 0.0};  // unit vector, receive AP -> target
  double dist_tx = 0.0;
  double dist_rx = 0.0;
};

struct ScenarioConfig {
  int n_ap = 8;
  int m_t = 4;
  int n_users = 4;
  int n_targets = 1;
  double box_side = 150.0;      // m
  double max_power = 1.0;       // per-AP downlink budget (W)
  double noise_dbm = -89.0;
  double rcs_dbsm = 0.0;
  double v_max_target = 30.0;   // m/s
  double v_max_user = 0.0;      // m/s
  double hotspot_side = 20.0;   // m
  int comm_paths = 4;
  double asd_deg = 15.0;        // angular spread per comm path
  double pilot_snr_db = 20.0;   // CSI quality
  double comm_delay_max = 0.5e-6;  // s
  double min_separation = 5.0;  // m, APs vs targets
  // numerology
  int m = 16;
  int n = 16;
  double delta_f = 0.5e6;
  double f_c = 38e9;
  double tau_max = -1.0;  // <0 means 1/delta_f (cyclic prefix of m samples)
  Waveform waveform = Waveform::otfs;

  static ScenarioConfig from_config(const Config& cfg);
};

struct Scenario {
  OtfsGrid grid;
  std::vector<AccessPoint> aps;
  std::vector<UserEquipment> users;
  std::vector<Target> targets;
  double noise_power = 1.2589254117941662e-12;  // W (-89 dBm)
  double max_power = 1.0;                       // W per AP
  double box_side = 150.0;
  std::uint64_t seed = 0;

  // comm[p][q][i]: i-th path of the (AP p, user q) downlink channel.
  std::vector<std::vector<std::vector<CommPath>>> comm;
  // beams[p][v]: unit-norm transmit precoder of AP p toward target v's
  // hotspot center.
  std::vector<std::vector<Eigen::VectorXcd>> beams;

  int n_ap() const { return static_cast<int>(aps.size()); }
  int n_users() const { return static_cast<int>(users.size()); }
  int n_targets() const { return static_cast<int>(targets.size()); }
  int m_t() const { return aps.empty() ? 0 : aps.front().num_antennas; }
};

// Transmit/receive mode split and per-stream downlink powers.
struct Allocation {
  std::vector<int> modes;    // per AP: 1 = transmit, 0 = receive
  Eigen::MatrixXd eta_user;    // n_ap x n_users (W)
  Eigen::MatrixXd eta_target;  // n_ap x n_targets (W)

  std::vector<int> tx_indices() const {
    std::vector<int> out;
    for (size_t p = 0; p < modes.size(); ++p)
      if (modes[p]) out.push_back(static_cast<int>(p));
    return out;
  }
  std::vector<int> rx_indices() const {
    std::vector<int> out;
    for (size_t p = 0; p < modes.size(); ++p)
      if (!modes[p]) out.push_back(static_cast<int>(p));
    return out;
  }
};

// Draws APs, users, targets and the derived channel state (comm covariances,
// CSI realizations, sensing beams) deterministically from the seed.
Scenario generate_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

// Bistatic echo-path geometry for transmit AP `tx`, receive AP `rx` and
// target position/velocity from `tgt`. Throws std::invalid_argument when the
// target coincides with either endpoint.
PathParams path_parameters(const AccessPoint& tx, const AccessPoint& rx,
                           const Target& tgt, const OtfsGrid& grid);

// Same geometry evaluated at an arbitrary candidate position (zero velocity
// unless supplied); used by grid search.
PathParams path_parameters_at(const AccessPoint& tx, const AccessPoint& rx,
                              const Eigen::Vector2d& position,
                              const Eigen::Vector2d& velocity,
                              const OtfsGrid& grid);

// Uniform linear array response [1, e^{-j w}, ..., e^{-j (m_t-1) w}].
Eigen::VectorXcd array_response(double omega, int m_t);

// Unit-norm conjugate beam a(omega_hat)/sqrt(m_t).
Eigen::VectorXcd sensing_precoder(double omega_hat, int m_t);

// Swerling-I reflection coefficient, CN(0, sigma2).
std::complex<double> draw_rcs(double sigma2, Rng& rng);

// Spatial covariance of a locally scattered path: mean spatial frequency
// omega_bar, per-antenna frequency slope domega_dangle, angular std (rad).
Eigen::MatrixXcd local_scattering_covariance(double gain, double omega_bar,
                                             double domega_dangle,
                                             double angle_std, int m_t);

// Covariance of the linear MMSE channel estimate for prior R and effective
// pilot noise variance: B = R (R + noise I)^{-1} R.
Eigen::MatrixXcd mmse_covariance(const Eigen::MatrixXcd& r, double pilot_noise);

// Distance-based large-scale gain (urban microcell style), linear scale.
double pathloss_linear(double distance_m);

}  // namespace cfisac
