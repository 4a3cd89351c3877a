#include "cfisac/scenario.hpp"

#include <cmath>
#include <stdexcept>

namespace cfisac {

Waveform waveform_from_string(const std::string& name) {
  if (name == "otfs") return Waveform::otfs;
  if (name == "ofdm") return Waveform::ofdm;
  throw std::invalid_argument("unknown waveform: " + name);
}

std::string waveform_name(Waveform wf) {
  return wf == Waveform::otfs ? "otfs" : "ofdm";
}

OtfsGrid make_grid(int m, int n, double delta_f, double f_c, double tau_max,
                   Waveform waveform) {
  if (m < 1 || n < 1) throw std::invalid_argument("grid: m and n must be >= 1");
  if (delta_f <= 0.0 || f_c <= 0.0)
    throw std::invalid_argument("grid: delta_f and f_c must be positive");
  if (tau_max < 0.0) tau_max = 1.0 / delta_f;
  OtfsGrid g;
  g.m = m;
  g.n = n;
  g.delta_f = delta_f;
  g.f_c = f_c;
  g.n_cp = static_cast<int>(std::ceil(tau_max * m * delta_f - 1e-12));
  g.waveform = waveform;
  return g;
}

ScenarioConfig ScenarioConfig::from_config(const Config& cfg) {
  ScenarioConfig c;
  c.n_ap = static_cast<int>(cfg.get_int("scenario.n_ap", c.n_ap));
  c.m_t = static_cast<int>(cfg.get_int("scenario.m_t", c.m_t));
  c.n_users = static_cast<int>(cfg.get_int("scenario.n_users", c.n_users));
  c.n_targets = static_cast<int>(cfg.get_int("scenario.n_targets", c.n_targets));
  c.box_side = cfg.get_double("scenario.box_side", c.box_side);
  c.max_power = cfg.get_double("scenario.max_power", c.max_power);
  c.noise_dbm = cfg.get_double("scenario.noise_dbm", c.noise_dbm);
  c.rcs_dbsm = cfg.get_double("scenario.rcs_dbsm", c.rcs_dbsm);
  c.v_max_target = cfg.get_double("scenario.v_max_target", c.v_max_target);
  c.v_max_user = cfg.get_double("scenario.v_max_user", c.v_max_user);
  c.hotspot_side = cfg.get_double("scenario.hotspot_side", c.hotspot_side);
  c.comm_paths = static_cast<int>(cfg.get_int("scenario.comm_paths", c.comm_paths));
  c.asd_deg = cfg.get_double("scenario.asd_deg", c.asd_deg);
  c.pilot_snr_db = cfg.get_double("scenario.pilot_snr_db", c.pilot_snr_db);
  c.comm_delay_max = cfg.get_double("scenario.comm_delay_max", c.comm_delay_max);
  c.min_separation = cfg.get_double("scenario.min_separation", c.min_separation);
  c.m = static_cast<int>(cfg.get_int("grid.m", c.m));
  c.n = static_cast<int>(cfg.get_int("grid.n", c.n));
  c.delta_f = cfg.get_double("grid.delta_f", c.delta_f);
  c.f_c = cfg.get_double("grid.f_c", c.f_c);
  c.tau_max = cfg.get_double("grid.tau_max", c.tau_max);
  c.waveform = waveform_from_string(
      cfg.get_str("grid.waveform", waveform_name(c.waveform)));
  return c;
}

Eigen::VectorXcd array_response(double omega, int m_t) {
  if (m_t < 1) throw std::invalid_argument("array_response: m_t must be >= 1");
  Eigen::VectorXcd a(m_t);
  for (int i = 0; i < m_t; ++i)
    a[i] = std::polar(1.0, -omega * static_cast<double>(i));
  return a;
}

Eigen::VectorXcd sensing_precoder(double omega_hat, int m_t) {
  return array_response(omega_hat, m_t) / std::sqrt(static_cast<double>(m_t));
}

std::complex<double> draw_rcs(double sigma2, Rng& rng) {
  if (sigma2 < 0.0) throw std::invalid_argument("draw_rcs: negative variance");
  return rng.cnormal(sigma2);
}

double pathloss_linear(double distance_m) {
  const double d = std::max(distance_m, 1.0);
  return db_to_linear(-30.5 - 36.7 * std::log10(d));
}

Eigen::MatrixXcd local_scattering_covariance(double gain, double omega_bar,
                                             double domega_dangle,
                                             double angle_std, int m_t) {
  Eigen::MatrixXcd r(m_t, m_t);
  const double s2 = angle_std * angle_std * domega_dangle * domega_dangle;
  for (int a = 0; a < m_t; ++a) {
    for (int b = 0; b < m_t; ++b) {
      const double d = static_cast<double>(a - b);
      r(a, b) = gain * std::exp(-0.5 * s2 * d * d) * std::polar(1.0, -d * omega_bar);
    }
  }
  return r;
}

Eigen::MatrixXcd mmse_covariance(const Eigen::MatrixXcd& r, double pilot_noise) {
  if (pilot_noise <= 0.0)
    throw std::invalid_argument("mmse_covariance: pilot noise must be positive");
  Eigen::MatrixXcd reg = r;
  reg.diagonal().array() += pilot_noise;
  // B = R (R + noise I)^{-1} R, Hermitian PSD by construction.
  Eigen::MatrixXcd b = r * reg.ldlt().solve(r);
  return 0.5 * (b + b.adjoint().eval());
}

namespace {

// Spatial frequency on the array of `ap` for a propagation direction
// `toward` (half-wavelength element spacing).
double spatial_frequency(const AccessPoint& ap, const Eigen::Vector2d& toward) {
  return kPi * toward.dot(ap.axis());
}

Eigen::VectorXcd draw_csi(const Eigen::MatrixXcd& b, Rng& rng) {
  const int m_t = static_cast<int>(b.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
  Eigen::VectorXcd w(m_t);
  for (int i = 0; i < m_t; ++i) w[i] = rng.cnormal(1.0);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * w;
}

}  // namespace

PathParams path_parameters_at(const AccessPoint& tx, const AccessPoint& rx,
                              const Eigen::Vector2d& position,
                              const Eigen::Vector2d& velocity,
                              const OtfsGrid& grid) {
  PathParams p;
  const Eigen::Vector2d d_tx = position - tx.position;
  const Eigen::Vector2d d_rx = position - rx.position;
  p.dist_tx = d_tx.norm();
  p.dist_rx = d_rx.norm();
  if (p.dist_tx < 1e-6 || p.dist_rx < 1e-6)
    throw std::invalid_argument(
        "path_parameters: target coincides with an access point");
  p.dir_tx = d_tx / p.dist_tx;
  p.dir_rx = d_rx / p.dist_rx;
  p.aod = spatial_frequency(tx, p.dir_tx);
  p.aoa = spatial_frequency(rx, p.dir_rx);
  p.delay = (p.dist_tx + p.dist_rx) / kSpeedOfLight;
  // Range rate of the two-hop path; positive Doppler when the target closes.
  p.doppler = -velocity.dot(p.dir_tx + p.dir_rx) / grid.lambda_c();
  const double l2 = grid.lambda_c() * grid.lambda_c();
  const double fourpi3 = 4.0 * kPi * 4.0 * kPi * 4.0 * kPi;
  p.xi = l2 / (fourpi3 * p.dist_tx * p.dist_tx * p.dist_rx * p.dist_rx);
  p.gain = std::sqrt(p.xi);
  return p;
}

PathParams path_parameters(const AccessPoint& tx, const AccessPoint& rx,
                           const Target& tgt, const OtfsGrid& grid) {
  return path_parameters_at(tx, rx, tgt.position, tgt.velocity, grid);
}

Scenario generate_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.n_users == 0 && cfg.n_targets == 0)
    throw std::invalid_argument("scenario: no users and no targets");
  if (cfg.n_targets > 0 && cfg.n_ap < 2)
    throw std::invalid_argument(
        "scenario: sensing needs at least two access points");
  if (cfg.n_ap < 1) throw std::invalid_argument("scenario: n_ap must be >= 1");
  if (cfg.m_t < 1) throw std::invalid_argument("scenario: m_t must be >= 1");
  if (cfg.comm_paths < 1 && cfg.n_users > 0)
    throw std::invalid_argument("scenario: comm_paths must be >= 1");
  if (cfg.box_side <= 0.0)
    throw std::invalid_argument("scenario: box_side must be positive");

  Scenario sc;
  sc.grid = make_grid(cfg.m, cfg.n, cfg.delta_f, cfg.f_c, cfg.tau_max,
                      cfg.waveform);
  sc.noise_power = dbm_to_watt(cfg.noise_dbm);
  sc.max_power = cfg.max_power;
  sc.box_side = cfg.box_side;
  sc.seed = seed;

  Rng rng(derive_seed(seed, 0xa11ce5));
  const Eigen::Vector2d center(cfg.box_side / 2.0, cfg.box_side / 2.0);

  sc.aps.resize(cfg.n_ap);
  for (int p = 0; p < cfg.n_ap; ++p) {
    AccessPoint& ap = sc.aps[p];
    ap.position = {rng.uniform(0.0, cfg.box_side),
                   rng.uniform(0.0, cfg.box_side)};
    ap.num_antennas = cfg.m_t;
    const Eigen::Vector2d to_center = center - ap.position;
    ap.orientation = (to_center.norm() > 1e-9)
                         ? std::atan2(to_center.y(), to_center.x())
                         : 0.0;
  }

  sc.users.resize(cfg.n_users);
  for (int q = 0; q < cfg.n_users; ++q) {
    UserEquipment& ue = sc.users[q];
    ue.position = {rng.uniform(0.0, cfg.box_side),
                   rng.uniform(0.0, cfg.box_side)};
    const double heading = rng.uniform(0.0, 2.0 * kPi);
    const double speed = rng.uniform(0.0, std::max(cfg.v_max_user, 0.0));
    ue.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
  }

  sc.targets.resize(cfg.n_targets);
  const double half = cfg.hotspot_side / 2.0;
  for (int v = 0; v < cfg.n_targets; ++v) {
    Target& tgt = sc.targets[v];
    tgt.rcs_variance = dbsm_to_sqm(cfg.rcs_dbsm);
    tgt.hotspot_halfwidth = half;
    const double margin = std::min(half, cfg.box_side / 2.0);
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      tgt.hotspot_center = {rng.uniform(margin, cfg.box_side - margin),
                            rng.uniform(margin, cfg.box_side - margin)};
      tgt.position = {rng.uniform(tgt.hotspot_center.x() - half,
                                  tgt.hotspot_center.x() + half),
                      rng.uniform(tgt.hotspot_center.y() - half,
                                  tgt.hotspot_center.y() + half)};
      placed = true;
      for (const AccessPoint& ap : sc.aps)
        if ((tgt.position - ap.position).norm() < cfg.min_separation)
          placed = false;
    }
    if (!placed)
      throw std::runtime_error(
          "scenario: could not place target away from the access points");
    const double heading = rng.uniform(0.0, 2.0 * kPi);
    const double speed = rng.uniform(0.0, std::max(cfg.v_max_target, 0.0));
    tgt.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
  }

  // Downlink comm channels: per (AP, user) a small set of locally scattered
  // paths around the line-of-sight bearing, equal power split, plus the MMSE
  // estimate each AP would hold after pilot training.
  const double asd = cfg.asd_deg * kPi / 180.0;
  const double pilot_noise =
      sc.noise_power / db_to_linear(cfg.pilot_snr_db);
  sc.comm.assign(cfg.n_ap, {});
  for (int p = 0; p < cfg.n_ap; ++p) {
    sc.comm[p].assign(cfg.n_users, {});
    for (int q = 0; q < cfg.n_users; ++q) {
      const AccessPoint& ap = sc.aps[p];
      const UserEquipment& ue = sc.users[q];
      const Eigen::Vector2d diff = ue.position - ap.position;
      const double dist = std::max(diff.norm(), 1.0);
      const double bearing = std::atan2(diff.y(), diff.x());
      const double gain_per_path =
          pathloss_linear(dist) / static_cast<double>(cfg.comm_paths);
      auto& paths = sc.comm[p][q];
      paths.resize(cfg.comm_paths);
      for (int i = 0; i < cfg.comm_paths; ++i) {
        CommPath& cp = paths[i];
        const double angle =
            bearing + rng.uniform(-40.0, 40.0) * kPi / 180.0;
        const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
        const double omega_bar = kPi * dir.dot(ap.axis());
        // d(omega)/d(angle) at the nominal direction.
        const double slope =
            kPi * Eigen::Vector2d(-std::sin(angle), std::cos(angle))
                      .dot(ap.axis());
        cp.covariance = local_scattering_covariance(gain_per_path, omega_bar,
                                                    slope, asd, cfg.m_t);
        cp.mmse_covariance = mmse_covariance(cp.covariance, pilot_noise);
        cp.csi = draw_csi(cp.mmse_covariance, rng);
        cp.delay = rng.uniform(0.0, cfg.comm_delay_max);
        cp.doppler = ue.velocity.dot(-dir) / sc.grid.lambda_c();
      }
    }
  }

  // Sensing beams point at the hotspot centers (prior target information).
  sc.beams.assign(cfg.n_ap, {});
  for (int p = 0; p < cfg.n_ap; ++p) {
    sc.beams[p].resize(cfg.n_targets);
    for (int v = 0; v < cfg.n_targets; ++v) {
      const Eigen::Vector2d diff =
          sc.targets[v].hotspot_center - sc.aps[p].position;
      const double dist = diff.norm();
      const Eigen::Vector2d dir =
          dist > 1e-9 ? Eigen::Vector2d(diff / dist) : Eigen::Vector2d(1.0, 0.0);
      const double omega = kPi * dir.dot(sc.aps[p].axis());
      sc.beams[p][v] = sensing_precoder(omega, cfg.m_t);
    }
  }

  return sc;
}

}  // namespace cfisac
