#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfisac/comms.hpp"
#include "cfisac/config.hpp"
#include "cfisac/dd_channel.hpp"
#include "cfisac/estimator.hpp"
#include "cfisac/fisher.hpp"
#include "cfisac/harness.hpp"
#include "cfisac/optimizer.hpp"
#include "cfisac/rng.hpp"
#include "cfisac/scenario.hpp"
#include "json.hpp"

namespace {

using cfisac::Waveform;

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  double grid_step = 0.1;
  std::string waveform;  // empty: keep the config's choice
};

cfisac::ScenarioConfig load_scenario_config(const GlobalOptions& opt) {
  cfisac::ScenarioConfig cfg;
  if (!opt.config_path.empty())
    cfg = cfisac::ScenarioConfig::from_config(
        cfisac::Config::from_file(opt.config_path));
  if (!opt.waveform.empty())
    cfg.waveform = cfisac::waveform_from_string(opt.waveform);
  return cfg;
}

std::vector<int> alternate_modes(int n_ap) {
  std::vector<int> modes(static_cast<size_t>(n_ap), 0);
  for (int p = 0; p < n_ap; p += 2) modes[static_cast<size_t>(p)] = 1;
  return modes;
}

cfisac::SearchGrid search_grid_for_step(double step) {
  cfisac::SearchGrid grid;
  grid.levels.clear();
  for (double level : {10.0, 1.0})
    if (level > step * (1.0 + 1e-12)) grid.levels.push_back(level);
  grid.levels.push_back(step);
  return grid;
}

void write_json(const nlohmann::ordered_json& j, const std::string& out_dir,
                const std::string& name) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/" + name, std::ios::binary);
  out << j.dump(2) << "\n";
}

int cmd_simulate(const GlobalOptions& opt) {
  cfisac::ScenarioConfig cfg = load_scenario_config(opt);
  const cfisac::Scenario sc = cfisac::generate_scenario(cfg, opt.seed);
  const cfisac::CommCoefficients coeffs = cfisac::comm_coefficients(sc);
  const cfisac::Allocation alloc =
      cfisac::equal_power_allocation(sc, coeffs, alternate_modes(sc.n_ap()));
  cfisac::Rng rng(cfisac::derive_seed(opt.seed, 0x51e0));
  const cfisac::EchoSet echo = cfisac::synthesize_echo(sc, alloc, rng);
  const cfisac::EstimateResult est = cfisac::grid_search(
      echo, sc, search_grid_for_step(opt.grid_step),
      cfisac::EstimatorMode::reduced);

  std::vector<Eigen::Vector2d> truths;
  for (const cfisac::Target& t : sc.targets) truths.push_back(t.position);
  const double err = cfisac::rmse(est.positions, truths);

  nlohmann::ordered_json j;
  j["seed"] = opt.seed;
  j["waveform"] = cfisac::waveform_name(sc.grid.waveform);
  j["grid_step_m"] = opt.grid_step;
  nlohmann::ordered_json jt = nlohmann::ordered_json::array();
  for (const auto& p : truths) jt.push_back({p.x(), p.y()});
  j["truth"] = jt;
  nlohmann::ordered_json je = nlohmann::ordered_json::array();
  for (const auto& p : est.positions) je.push_back({p.x(), p.y()});
  j["estimates"] = je;
  j["rmse_m"] = err;
  j["objective"] = est.objective;
  std::cout << j.dump(2) << "\n";
  write_json(j, opt.out_dir, "simulate.json");
  return 0;
}

int cmd_peb(const GlobalOptions& opt) {
  cfisac::ScenarioConfig cfg = load_scenario_config(opt);
  if (opt.config_path.empty()) cfg.m = cfg.n = 128;
  const double tau_max = cfg.tau_max < 0.0 ? 1.0 / cfg.delta_f : cfg.tau_max;
  const cfisac::OtfsGrid dd = cfisac::make_grid(
      cfg.m, cfg.n, cfg.delta_f, cfg.f_c, tau_max, Waveform::otfs);
  const cfisac::OtfsGrid tf = cfisac::make_grid(
      cfg.m, cfg.n, cfg.delta_f, cfg.f_c, tau_max, Waveform::ofdm);
  const double tau = 0.35 * tau_max;
  const cfisac::SignalFactors f_dd = cfisac::signal_factors(dd, tau);
  const cfisac::SignalFactors f_tf = cfisac::signal_factors(tf, tau);
  const cfisac::DCoeffs d_dd = cfisac::d_coefficients(f_dd, cfg.m_t);
  const cfisac::DCoeffs d_tf = cfisac::d_coefficients(f_tf, cfg.m_t);

  nlohmann::ordered_json j;
  j["frame"] = {{"m", cfg.m}, {"n", cfg.n}, {"delta_f_hz", cfg.delta_f}};
  j["delay_s"] = tau;
  j["otfs"] = {{"r20", f_dd.r20}, {"r02", f_dd.r02},
               {"d33", d_dd.d33}, {"d44", d_dd.d44}};
  j["ofdm"] = {{"r20", f_tf.r20}, {"r02", f_tf.r02},
               {"d33", d_tf.d33}, {"d44", d_tf.d44}};
  j["ofdm_over_otfs"] = {{"r20", f_tf.r20 / f_dd.r20},
                         {"r02", f_tf.r02 / f_dd.r02},
                         {"d33", d_tf.d33 / d_dd.d33},
                         {"d44", d_tf.d44 / d_dd.d44}};
  std::cout << j.dump(2) << "\n";
  write_json(j, opt.out_dir, "peb_factors.json");

  for (const cfisac::ExperimentKind kind :
       {cfisac::ExperimentKind::peb_vs_targets,
        cfisac::ExperimentKind::peb_vs_aoa}) {
    cfisac::ExperimentSpec spec = cfisac::default_spec(kind);
    spec.seed = opt.seed;
    spec.out_dir = opt.out_dir;
    if (!opt.config_path.empty()) spec.base = cfg;
    if (!opt.waveform.empty())
      spec.base.waveform = cfisac::waveform_from_string(opt.waveform);
    const cfisac::ExperimentResult result = cfisac::run_experiment(spec);
    std::cout << cfisac::report({result});
  }
  return 0;
}

int cmd_optimize(const GlobalOptions& opt, const std::string& scheme,
                 double peb_budget) {
  cfisac::ScenarioConfig cfg = load_scenario_config(opt);
  if (opt.config_path.empty()) cfg.m = cfg.n = 128;
  const cfisac::Scenario sc = cfisac::generate_scenario(cfg, opt.seed);
  cfisac::OptimizerConfig ocfg;
  ocfg.peb_budget = peb_budget;
  const cfisac::ResourceAllocation ra =
      cfisac::solve_scheme(sc, scheme, ocfg, opt.seed);

  nlohmann::ordered_json j;
  j["scheme"] = scheme;
  j["seed"] = opt.seed;
  j["peb_budget_m"] = peb_budget;
  j["feasible"] = ra.diagnostics.feasible;
  nlohmann::ordered_json tx = nlohmann::ordered_json::array();
  nlohmann::ordered_json rx = nlohmann::ordered_json::array();
  for (int p = 0; p < static_cast<int>(ra.modes.size()); ++p)
    (ra.modes[static_cast<size_t>(p)] ? tx : rx).push_back(p);
  j["tx_aps"] = tx;
  j["rx_aps"] = rx;
  nlohmann::ordered_json eta_user = nlohmann::ordered_json::array();
  for (int p = 0; p < ra.eta_user.rows(); ++p) {
    nlohmann::ordered_json rowj = nlohmann::ordered_json::array();
    for (int q = 0; q < ra.eta_user.cols(); ++q)
      rowj.push_back(ra.eta_user(p, q));
    eta_user.push_back(std::move(rowj));
  }
  j["eta_user_w"] = std::move(eta_user);
  nlohmann::ordered_json eta_target = nlohmann::ordered_json::array();
  for (int p = 0; p < ra.eta_target.rows(); ++p) {
    nlohmann::ordered_json rowj = nlohmann::ordered_json::array();
    for (int v = 0; v < ra.eta_target.cols(); ++v)
      rowj.push_back(ra.eta_target(p, v));
    eta_target.push_back(std::move(rowj));
  }
  j["eta_target_w"] = std::move(eta_target);
  j["min_sinr"] = ra.min_sinr;
  j["min_se_bit_s_hz"] = ra.min_se;
  j["iterations"] = ra.diagnostics.iterations;
  j["binary_gap"] = ra.diagnostics.binary_gap;
  if (!ra.diagnostics.message.empty()) j["message"] = ra.diagnostics.message;
  std::cout << j.dump(2) << "\n";
  write_json(j, opt.out_dir, "optimize_" + scheme + ".json");
  return ra.diagnostics.feasible ? 0 : 3;
}

int cmd_validate(const GlobalOptions& opt) {
  int failures = 0;
  const auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "\n";
    if (!ok) ++failures;
  };

  const double delta_f = 0.5e6;
  const cfisac::OtfsGrid g8 = cfisac::make_grid(
      8, 8, delta_f, 38e9, 1.0 / delta_f, Waveform::otfs);

  // identity channel at zero delay and Doppler
  {
    const cfisac::EffectiveDdChannel dd =
        cfisac::build_psi_otfs(0.0, 0.0, g8);
    const Eigen::MatrixXcd eye =
        Eigen::MatrixXcd::Identity(g8.mn(), g8.mn());
    check("delay-Doppler channel is the identity at the origin",
          (dd.psi - eye).cwiseAbs().maxCoeff() < 1e-12);
  }

  // zeroth-order trace factor equals the frame size
  {
    bool ok = true;
    for (Waveform wf : {Waveform::otfs, Waveform::ofdm}) {
      const cfisac::OtfsGrid g = cfisac::make_grid(
          8, 8, delta_f, 38e9, 1.0 / delta_f, wf);
      const cfisac::SignalFactors f =
          cfisac::signal_factors(g, 0.3 / (8 * delta_f));
      ok = ok && std::abs(f.r00 - g.mn()) < 1e-9 * g.mn();
    }
    check("zeroth-order factor equals the frame size", ok);
  }

  // closed-form factors match the direct quadruple sums
  {
    bool ok = true;
    for (Waveform wf : {Waveform::otfs, Waveform::ofdm}) {
      const cfisac::OtfsGrid g = cfisac::make_grid(
          4, 4, delta_f, 38e9, 1.0 / delta_f, wf);
      const double tau = 1.37 / (4 * delta_f);
      const double nu = 0.22 * delta_f / 4.0;
      const cfisac::EffectiveDdChannel dd = cfisac::build_psi(tau, nu, g);
      const cfisac::SignalFactors brute =
          cfisac::signal_factors_bruteforce(dd);
      const cfisac::SignalFactors closed = cfisac::signal_factors(g, tau);
      ok = ok && std::abs(brute.r20 - closed.r20) < 1e-8 * std::abs(brute.r20);
      ok = ok && std::abs(brute.r02 - closed.r02) < 1e-8 * std::abs(brute.r02);
      ok = ok && std::abs(brute.r11 - closed.r11) < 1e-8 * std::abs(brute.r11);
    }
    check("closed-form trace factors match direct sums", ok);
  }

  // rate prefactors at the full frame
  {
    const cfisac::OtfsGrid g = cfisac::make_grid(
        128, 128, delta_f, 38e9, 1.0 / delta_f, Waveform::otfs);
    const double w_dd = cfisac::prelog(g, Waveform::otfs);
    const double w_tf = cfisac::prelog(g, Waveform::ofdm);
    check("rate prefactors are 0.992 and 0.500 at the full frame",
          std::abs(w_dd - 0.9922) < 1e-4 && w_tf == 0.5);
  }

  // every channel row keeps unit energy for fractional shifts
  {
    const cfisac::EffectiveDdChannel dd = cfisac::build_psi_otfs(
        0.83 / (8 * delta_f), 0.41 * delta_f / 8.0, g8);
    double worst = 0.0;
    for (int r = 0; r < dd.psi.rows(); ++r)
      worst = std::max(worst,
                       std::abs(dd.psi.row(r).squaredNorm() - 1.0));
    check("channel rows keep unit energy", worst < 1e-9);
  }

  // cross-range information vanishes end-fire
  {
    cfisac::AccessPoint ap;
    ap.position = Eigen::Vector2d::Zero();
    ap.orientation = 0.0;
    ap.num_antennas = 4;
    const cfisac::OtfsGrid g = cfisac::make_grid(
        16, 16, delta_f, 38e9, 1.0 / delta_f, Waveform::otfs);
    const cfisac::PathParams path = cfisac::path_parameters_at(
        ap, ap, Eigen::Vector2d(60.0, 0.0), Eigen::Vector2d::Zero(), g);
    const cfisac::Matrix42d jac = cfisac::jacobian_position(
        path, ap, ap, Eigen::Vector2d::Zero(), g);
    check("receive-angle row of the position Jacobian vanishes end-fire",
          jac.row(0).norm() < 1e-12);
  }

  (void)opt;
  std::cout << (failures == 0 ? "all checks passed"
                              : std::to_string(failures) + " check(s) failed")
            << "\n";
  return failures;
}

int cmd_export_map(const GlobalOptions& opt) {
  cfisac::ScenarioConfig cfg = load_scenario_config(opt);
  const cfisac::Scenario sc = cfisac::generate_scenario(cfg, opt.seed);
  const cfisac::CommCoefficients coeffs = cfisac::comm_coefficients(sc);
  const cfisac::Allocation alloc =
      cfisac::equal_power_allocation(sc, coeffs, alternate_modes(sc.n_ap()));
  cfisac::Rng rng(cfisac::derive_seed(opt.seed, 0x51e0));
  const cfisac::EchoSet echo = cfisac::synthesize_echo(sc, alloc, rng);
  const double step = opt.grid_step > 0.0 ? opt.grid_step : 1.0;
  const cfisac::RadarMap map = cfisac::compute_map(
      echo, sc, 0, {}, step, cfisac::EstimatorMode::reduced);
  std::string dir = opt.out_dir.empty() ? std::string(".") : opt.out_dir;
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/radar_map.csv";
  cfisac::export_map_csv(map, path);
  std::cout << "wrote " << path << " (" << map.nx << " x " << map.ny
            << " cells, step " << step << " m)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cell-free delay-Doppler sensing and communication toolkit"};
  app.require_subcommand(1);

  GlobalOptions opt;
  app.add_option("--config", opt.config_path, "scenario configuration file");
  app.add_option("--seed", opt.seed, "base random seed");
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--grid-step", opt.grid_step,
                 "finest search step in meters");
  app.add_option("--waveform", opt.waveform, "otfs or ofdm")
      ->check(CLI::IsMember({"otfs", "ofdm"}));

  CLI::App* simulate =
      app.add_subcommand("simulate", "synthesize echoes and estimate");
  CLI::App* peb = app.add_subcommand("peb", "error-bound sweeps");
  CLI::App* optimize =
      app.add_subcommand("optimize", "mode selection and power allocation");
  std::string scheme = "jap";
  double peb_budget = 0.1;
  optimize->add_option("--scheme", scheme, "jap, cap, or rap")
      ->check(CLI::IsMember({"jap", "cap", "rap"}));
  optimize->add_option("--peb-budget", peb_budget,
                       "position error budget in meters");
  CLI::App* validate =
      app.add_subcommand("validate", "run the built-in model checks");
  CLI::App* export_map =
      app.add_subcommand("export-map", "write the radar likelihood map");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opt);
    if (peb->parsed()) return cmd_peb(opt);
    if (optimize->parsed()) return cmd_optimize(opt, scheme, peb_budget);
    if (validate->parsed()) return cmd_validate(opt);
    if (export_map->parsed()) return cmd_export_map(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
