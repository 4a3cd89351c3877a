#include "cfisac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cfisac/comms.hpp"
#include "cfisac/dd_channel.hpp"
#include "cfisac/estimator.hpp"
#include "cfisac/fisher.hpp"
#include "cfisac/rng.hpp"
#include "json.hpp"

namespace cfisac {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* kKindNames[] = {
    "peb_vs_targets", "rmse_vs_rcs",    "peb_vs_aoa",  "convergence",
    "se_vs_peb_budget", "mobility_sweep", "waveform_gap",
};

// Even-indexed APs transmit, odd-indexed APs receive.
std::vector<int> alternate_modes(int n_ap) {
  std::vector<int> modes(static_cast<size_t>(n_ap), 0);
  for (int p = 0; p < n_ap; p += 2) modes[static_cast<size_t>(p)] = 1;
  return modes;
}

struct PebSummary {
  double exact = std::numeric_limits<double>::infinity();
  double approx = std::numeric_limits<double>::infinity();
  bool singular = false;
};

// Worst-target bounds under the allocation.
PebSummary worst_peb(const Scenario& sc, const Allocation& alloc) {
  PebSummary out;
  out.exact = 0.0;
  out.approx = 0.0;
  for (const PositionFimResult& r : position_fim(sc, alloc, FimMode::exact)) {
    out.exact = std::max(out.exact, r.peb);
    out.singular = out.singular || r.singular;
  }
  for (const PositionFimResult& r : position_fim(sc, alloc, FimMode::approx)) {
    out.approx = std::max(out.approx, r.peb);
    out.singular = out.singular || r.singular;
  }
  return out;
}

std::vector<std::string> extras_schema(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::peb_vs_targets:
    case ExperimentKind::mobility_sweep:
      return {"singular"};
    case ExperimentKind::rmse_vs_rcs:
      return {"objective", "singular"};
    case ExperimentKind::peb_vs_aoa:
      return {"divergent"};
    case ExperimentKind::convergence:
      return {"binary_gap", "iterations", "feasible", "used_fallback"};
    case ExperimentKind::se_vs_peb_budget:
      return {"min_se_jap", "min_se_cap", "min_se_rap",
              "feasible_jap", "feasible_cap", "feasible_rap"};
    case ExperimentKind::waveform_gap:
      return {"prelog_otfs", "prelog_ofdm", "se_otfs", "se_ofdm",
              "se_ratio", "r20_ratio", "r02_ratio"};
  }
  return {};
}

void set_extra(TrialResult& row, const std::string& key, double value) {
  for (auto& kv : row.extras)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  row.extras.emplace_back(key, value);
}

// Every row carries the full key set of its kind, in schema order.
void normalize_extras(TrialResult& row, const std::vector<std::string>& keys) {
  std::vector<std::pair<std::string, double>> ordered;
  ordered.reserve(keys.size());
  for (const std::string& key : keys) {
    double value = kUnset;
    for (const auto& kv : row.extras)
      if (kv.first == key) value = kv.second;
    ordered.emplace_back(key, value);
  }
  row.extras = std::move(ordered);
}

void run_peb_vs_targets(const ExperimentSpec& spec, double value,
                        std::uint64_t seed, TrialResult& row) {
  ScenarioConfig cfg = spec.base;
  cfg.n_targets = std::max(1, static_cast<int>(std::llround(value)));
  const Scenario sc = generate_scenario(cfg, seed);
  const CommCoefficients coeffs = comm_coefficients(sc);
  const Allocation alloc =
      equal_power_allocation(sc, coeffs, alternate_modes(sc.n_ap()));
  const PebSummary peb = worst_peb(sc, alloc);
  row.exact_peb = peb.exact;
  row.approx_peb = peb.approx;
  set_extra(row, "singular", peb.singular ? 1.0 : 0.0);
  if (peb.singular) row.note = "singular position information";
}

void run_rmse_vs_rcs(const ExperimentSpec& spec, double value,
                     std::uint64_t seed, TrialResult& row) {
  ScenarioConfig cfg = spec.base;
  cfg.rcs_dbsm = value;
  const Scenario sc = generate_scenario(cfg, seed);
  const CommCoefficients coeffs = comm_coefficients(sc);
  const Allocation alloc =
      equal_power_allocation(sc, coeffs, alternate_modes(sc.n_ap()));
  Rng rng(derive_seed(seed, 0x7e57));
  const EchoSet echo = synthesize_echo(sc, alloc, rng);
  const EstimateResult est =
      grid_search(echo, sc, SearchGrid{}, EstimatorMode::reduced);
  std::vector<Eigen::Vector2d> truths;
  truths.reserve(sc.targets.size());
  for (const Target& t : sc.targets) truths.push_back(t.position);
  row.estimates = est.positions;
  row.rmse = rmse(est.positions, truths);
  const PebSummary peb = worst_peb(sc, alloc);
  row.exact_peb = peb.exact;
  row.approx_peb = peb.approx;
  set_extra(row, "objective", est.objective);
  set_extra(row, "singular", peb.singular ? 1.0 : 0.0);
}

void run_peb_vs_aoa(const ExperimentSpec& spec, double value,
                    std::uint64_t seed, TrialResult& row) {
  ScenarioConfig cfg = spec.base;
  cfg.n_ap = 2;
  cfg.n_users = 1;
  cfg.n_targets = 1;
  Scenario sc = generate_scenario(cfg, seed);
  // one co-located transmit/receive pair at the origin, arrays along x,
  // target on a 60 m arc at the swept angle
  const double theta = value * kPi / 180.0;
  for (AccessPoint& ap : sc.aps) {
    ap.position = Eigen::Vector2d::Zero();
    ap.orientation = 0.0;
  }
  Target& tgt = sc.targets[0];
  tgt.position = 60.0 * Eigen::Vector2d(std::cos(theta), std::sin(theta));
  tgt.velocity = Eigen::Vector2d::Zero();
  tgt.rcs_variance = 1.0;
  tgt.hotspot_center = tgt.position;
  for (int p = 0; p < sc.n_ap(); ++p) {
    const PathParams path = path_parameters_at(
        sc.aps[static_cast<size_t>(p)], sc.aps[static_cast<size_t>(p)],
        tgt.position, tgt.velocity, sc.grid);
    sc.beams[static_cast<size_t>(p)][0] = sensing_precoder(path.aod, sc.m_t());
  }
  Allocation alloc;
  alloc.modes = {1, 0};
  alloc.eta_user = Eigen::MatrixXd::Zero(2, 1);
  alloc.eta_target = Eigen::MatrixXd::Zero(2, 1);
  alloc.eta_target(0, 0) = sc.max_power;
  const PebSummary peb = worst_peb(sc, alloc);
  row.exact_peb = peb.exact;
  row.approx_peb = peb.approx;
  set_extra(row, "divergent", peb.singular ? 1.0 : 0.0);
  if (peb.singular) row.note = "cross-range information vanishes";
}

void run_convergence(const ExperimentSpec& spec, double value,
                     std::uint64_t seed, TrialResult& row,
                     std::vector<ConvergenceRow>* trace) {
  ScenarioConfig cfg = spec.base;
  cfg.n_ap = std::max(2, static_cast<int>(std::llround(value)));
  const Scenario sc = generate_scenario(cfg, seed);
  const ResourceAllocation ra = solve_joint(sc, spec.optimizer);
  row.min_se = ra.min_se;
  set_extra(row, "binary_gap", ra.diagnostics.binary_gap);
  set_extra(row, "iterations", static_cast<double>(ra.diagnostics.iterations));
  set_extra(row, "feasible", ra.diagnostics.feasible ? 1.0 : 0.0);
  set_extra(row, "used_fallback", ra.diagnostics.used_fallback ? 1.0 : 0.0);
  if (!ra.diagnostics.message.empty()) row.note = ra.diagnostics.message;
  if (ra.diagnostics.feasible) {
    const PebSummary peb = worst_peb(sc, to_allocation(ra));
    row.exact_peb = peb.exact;
    row.approx_peb = peb.approx;
  }
  if (trace != nullptr) *trace = ra.diagnostics.trace;
}

void run_se_vs_peb_budget(const ExperimentSpec& spec, double value,
                          std::uint64_t seed, TrialResult& row) {
  OptimizerConfig ocfg = spec.optimizer;
  ocfg.peb_budget = value;
  const Scenario sc = generate_scenario(spec.base, seed);
  const ResourceAllocation jap = solve_scheme(sc, "jap", ocfg, seed);
  const ResourceAllocation cap = solve_scheme(sc, "cap", ocfg, seed);
  const ResourceAllocation rap = solve_scheme(sc, "rap", ocfg, seed);
  row.min_se = jap.min_se;
  set_extra(row, "min_se_jap", jap.min_se);
  set_extra(row, "min_se_cap", cap.min_se);
  set_extra(row, "min_se_rap", rap.min_se);
  set_extra(row, "feasible_jap", jap.diagnostics.feasible ? 1.0 : 0.0);
  set_extra(row, "feasible_cap", cap.diagnostics.feasible ? 1.0 : 0.0);
  set_extra(row, "feasible_rap", rap.diagnostics.feasible ? 1.0 : 0.0);
  if (!jap.diagnostics.message.empty()) row.note = jap.diagnostics.message;
}

void run_mobility_sweep(const ExperimentSpec& spec, double value,
                        std::uint64_t seed, TrialResult& row) {
  ScenarioConfig cfg = spec.base;
  cfg.v_max_target = 0.0;
  Scenario sc = generate_scenario(cfg, seed);
  Rng rng(derive_seed(seed, 0xd1f));
  for (Target& tgt : sc.targets) {
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    tgt.velocity = value * Eigen::Vector2d(std::cos(phi), std::sin(phi));
  }
  const CommCoefficients coeffs = comm_coefficients(sc);
  const Allocation alloc =
      equal_power_allocation(sc, coeffs, alternate_modes(sc.n_ap()));
  const PebSummary peb = worst_peb(sc, alloc);
  row.exact_peb = peb.exact;
  row.approx_peb = peb.approx;
  set_extra(row, "singular", peb.singular ? 1.0 : 0.0);
}

void run_waveform_gap(const ExperimentSpec& spec, double value,
                      std::uint64_t seed, TrialResult& row) {
  ScenarioConfig cfg = spec.base;
  cfg.m = std::max(2, static_cast<int>(std::llround(value)));
  cfg.n = cfg.m;
  cfg.waveform = Waveform::otfs;
  const Scenario sc_dd = generate_scenario(cfg, seed);
  cfg.waveform = Waveform::ofdm;
  const Scenario sc_tf = generate_scenario(cfg, seed);

  const CommCoefficients coeffs = comm_coefficients(sc_dd);
  const Allocation alloc =
      equal_power_allocation(sc_dd, coeffs, alternate_modes(sc_dd.n_ap()));
  double min_sinr = std::numeric_limits<double>::infinity();
  for (int q = 0; q < sc_dd.n_users(); ++q)
    min_sinr = std::min(min_sinr, sinr_comm(coeffs, sc_dd, alloc, q));
  const double se_dd =
      spectral_efficiency(min_sinr, sc_dd.grid, Waveform::otfs);
  const double se_tf =
      spectral_efficiency(min_sinr, sc_tf.grid, Waveform::ofdm);

  const std::vector<int> tx = alloc.tx_indices();
  const std::vector<int> rx = alloc.rx_indices();
  const PathParams path =
      path_parameters(sc_dd.aps[static_cast<size_t>(tx.front())],
                      sc_dd.aps[static_cast<size_t>(rx.front())],
                      sc_dd.targets[0], sc_dd.grid);
  const SignalFactors f_dd = signal_factors(sc_dd.grid, path.delay);
  const SignalFactors f_tf = signal_factors(sc_tf.grid, path.delay);

  row.min_se = se_dd;
  set_extra(row, "prelog_otfs", prelog(sc_dd.grid, Waveform::otfs));
  set_extra(row, "prelog_ofdm", prelog(sc_tf.grid, Waveform::ofdm));
  set_extra(row, "se_otfs", se_dd);
  set_extra(row, "se_ofdm", se_tf);
  set_extra(row, "se_ratio", se_tf > 0.0 ? se_dd / se_tf : kUnset);
  set_extra(row, "r20_ratio", std::abs(f_tf.r20) / std::abs(f_dd.r20));
  set_extra(row, "r02_ratio", std::abs(f_tf.r02) / std::abs(f_dd.r02));
}

TrialResult run_trial(const ExperimentSpec& spec, int si, int ti,
                      std::vector<ConvergenceRow>* trace) {
  TrialResult row;
  row.sweep_index = si;
  row.trial_index = ti;
  row.sweep_value = spec.sweep[static_cast<size_t>(si)];
  row.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(si + 1),
                         static_cast<std::uint64_t>(ti + 1));
  try {
    switch (spec.kind) {
      case ExperimentKind::peb_vs_targets:
        run_peb_vs_targets(spec, row.sweep_value, row.seed, row);
        break;
      case ExperimentKind::rmse_vs_rcs:
        run_rmse_vs_rcs(spec, row.sweep_value, row.seed, row);
        break;
      case ExperimentKind::peb_vs_aoa:
        run_peb_vs_aoa(spec, row.sweep_value, row.seed, row);
        break;
      case ExperimentKind::convergence:
        run_convergence(spec, row.sweep_value, row.seed, row, trace);
        break;
      case ExperimentKind::se_vs_peb_budget:
        run_se_vs_peb_budget(spec, row.sweep_value, row.seed, row);
        break;
      case ExperimentKind::mobility_sweep:
        run_mobility_sweep(spec, row.sweep_value, row.seed, row);
        break;
      case ExperimentKind::waveform_gap:
        run_waveform_gap(spec, row.sweep_value, row.seed, row);
        break;
    }
  } catch (const std::exception& e) {
    row.failed = true;
    row.note = e.what();
  }
  normalize_extras(row, extras_schema(spec.kind));
  return row;
}

std::vector<std::string> metric_names(const ExperimentResult& result) {
  std::vector<std::string> names = {"rmse", "exact_peb", "approx_peb",
                                    "min_se"};
  if (!result.rows.empty())
    for (const auto& kv : result.rows.front().extras) names.push_back(kv.first);
  return names;
}

double metric_value(const TrialResult& row, const std::string& name) {
  if (name == "rmse") return row.rmse;
  if (name == "exact_peb") return row.exact_peb;
  if (name == "approx_peb") return row.approx_peb;
  if (name == "min_se") return row.min_se;
  for (const auto& kv : row.extras)
    if (kv.first == name) return kv.second;
  return kUnset;
}

std::vector<SummaryRow> summarize(const ExperimentResult& result) {
  std::vector<SummaryRow> out;
  const std::vector<std::string> names = metric_names(result);
  // keep only metrics that produced at least one finite sample
  std::vector<bool> seen(names.size(), false);
  for (const TrialResult& row : result.rows) {
    if (row.failed) continue;
    for (size_t k = 0; k < names.size(); ++k)
      seen[k] = seen[k] || std::isfinite(metric_value(row, names[k]));
  }
  for (size_t si = 0; si < result.sweep.size(); ++si) {
    for (size_t k = 0; k < names.size(); ++k) {
      if (!seen[k]) continue;
      double sum = 0.0;
      int count = 0;
      for (const TrialResult& row : result.rows) {
        if (row.failed || row.sweep_index != static_cast<int>(si)) continue;
        const double v = metric_value(row, names[k]);
        if (!std::isfinite(v)) continue;
        sum += v;
        ++count;
      }
      SummaryRow s;
      s.sweep_value = result.sweep[si];
      s.metric = names[k];
      s.count = count;
      s.mean = count > 0 ? sum / count : 0.0;
      if (count > 1) {
        double ss = 0.0;
        for (const TrialResult& row : result.rows) {
          if (row.failed || row.sweep_index != static_cast<int>(si)) continue;
          const double v = metric_value(row, names[k]);
          if (!std::isfinite(v)) continue;
          ss += (v - s.mean) * (v - s.mean);
        }
        s.stddev = std::sqrt(ss / (count - 1));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::string format_estimates(const std::vector<Eigen::Vector2d>& estimates) {
  std::string out;
  for (size_t i = 0; i < estimates.size(); ++i) {
    if (i > 0) out += ";";
    out += format_double(estimates[i].x()) + " " +
           format_double(estimates[i].y());
  }
  return out;
}

}  // namespace

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (size_t i = 0; i < std::size(kKindNames); ++i)
    if (name == kKindNames[i]) return static_cast<ExperimentKind>(i);
  throw std::invalid_argument("unknown experiment kind: " + name);
}

std::string experiment_kind_name(ExperimentKind kind) {
  return kKindNames[static_cast<size_t>(kind)];
}

ExperimentSpec default_spec(ExperimentKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  switch (kind) {
    case ExperimentKind::peb_vs_targets:
      spec.sweep_name = "targets";
      spec.sweep = {1.0, 2.0, 3.0};
      spec.trials = 20;
      spec.base.m = spec.base.n = 128;
      break;
    case ExperimentKind::rmse_vs_rcs:
      spec.sweep_name = "rcs_dbsm";
      spec.sweep = {-20.0, -10.0, 0.0, 10.0};
      spec.trials = 30;
      spec.base.m = spec.base.n = 16;
      spec.base.n_ap = 4;
      spec.base.n_targets = 1;
      spec.base.box_side = 100.0;
      break;
    case ExperimentKind::peb_vs_aoa:
      spec.sweep_name = "aoa_deg";
      spec.sweep = {0.0,  15.0,  30.0,  45.0,  60.0,  75.0, 90.0,
                    105.0, 120.0, 135.0, 150.0, 165.0, 180.0};
      spec.trials = 1;
      spec.base.m = spec.base.n = 128;
      break;
    case ExperimentKind::convergence:
      spec.sweep_name = "access_points";
      spec.sweep = {8.0};
      spec.trials = 1;
      spec.base.m = spec.base.n = 128;
      break;
    case ExperimentKind::se_vs_peb_budget:
      spec.sweep_name = "peb_budget_m";
      spec.sweep = {0.05, 0.1, 0.2, 0.5};
      spec.trials = 5;
      spec.base.m = spec.base.n = 128;
      break;
    case ExperimentKind::mobility_sweep:
      spec.sweep_name = "speed_mps";
      spec.sweep = {0.0, 10.0, 20.0, 30.0};
      spec.trials = 20;
      spec.base.m = spec.base.n = 128;
      break;
    case ExperimentKind::waveform_gap:
      spec.sweep_name = "frame_size";
      spec.sweep = {32.0, 64.0, 128.0};
      spec.trials = 5;
      spec.base.m = spec.base.n = 128;
      break;
  }
  return spec;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.trials < 1)
    throw std::invalid_argument("experiment requires at least one trial");
  if (spec.sweep.empty())
    throw std::invalid_argument("experiment requires a nonempty sweep");

  ExperimentResult result;
  result.kind = spec.kind;
  result.sweep_name = spec.sweep_name;
  result.sweep = spec.sweep;
  result.trials = spec.trials;

  const size_t total = spec.sweep.size() * static_cast<size_t>(spec.trials);
  result.rows.resize(total);

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  size_t workers = spec.threads > 0 ? static_cast<size_t>(spec.threads)
                                    : static_cast<size_t>(hw);
  workers = std::max<size_t>(1, std::min(workers, total));

  std::atomic<size_t> next{0};
  const auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= total) break;
      const int si = static_cast<int>(i / static_cast<size_t>(spec.trials));
      const int ti = static_cast<int>(i % static_cast<size_t>(spec.trials));
      std::vector<ConvergenceRow>* trace =
          (i == 0 && spec.kind == ExperimentKind::convergence) ? &result.trace
                                                               : nullptr;
      result.rows[i] = run_trial(spec, si, ti, trace);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  result.summary = summarize(result);

  std::string out_dir = spec.out_dir;
  if (const char* env = std::getenv("CFISAC_OUT_DIR"))
    if (env[0] != '\0') out_dir = env;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::string stem =
        out_dir + "/" + experiment_kind_name(spec.kind);
    result.csv_path = stem + "_rows.csv";
    result.summary_path = stem + "_summary.json";
    write_rows_csv(result, result.csv_path);
    write_summary_json(result, result.summary_path);
    if (spec.kind == ExperimentKind::convergence && !result.trace.empty()) {
      result.trace_path = stem + "_trace.csv";
      write_trace_csv(result.trace, result.trace_path);
    }
  }
  return result;
}

std::string csv_escape(const std::string& field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_rows_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "sweep_value,sweep_index,trial_index,seed,rmse,exact_peb,approx_peb,"
         "min_se,estimates,failed,note";
  if (!result.rows.empty())
    for (const auto& kv : result.rows.front().extras)
      out << "," << csv_escape(kv.first);
  out << "\r\n";
  for (const TrialResult& row : result.rows) {
    out << format_double(row.sweep_value) << "," << row.sweep_index << ","
        << row.trial_index << "," << row.seed << ","
        << format_double(row.rmse) << "," << format_double(row.exact_peb)
        << "," << format_double(row.approx_peb) << ","
        << format_double(row.min_se) << ","
        << csv_escape(format_estimates(row.estimates)) << ","
        << (row.failed ? 1 : 0) << "," << csv_escape(row.note);
    for (const auto& kv : row.extras) out << "," << format_double(kv.second);
    out << "\r\n";
  }
}

void write_summary_json(const ExperimentResult& result,
                        const std::string& path) {
  nlohmann::ordered_json j;
  j["kind"] = experiment_kind_name(result.kind);
  j["sweep_name"] = result.sweep_name;
  j["sweep"] = result.sweep;
  j["trials"] = result.trials;
  // only the basename: summaries from different output directories stay
  // byte-identical
  j["rows_csv"] = std::filesystem::path(result.csv_path).filename().string();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const SummaryRow& s : result.summary) {
    nlohmann::ordered_json r;
    r["sweep_value"] = s.sweep_value;
    r["metric"] = s.metric;
    r["mean"] = s.mean;
    r["stddev"] = s.stddev;
    r["count"] = s.count;
    rows.push_back(std::move(r));
  }
  j["summary"] = std::move(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

void write_trace_csv(const std::vector<ConvergenceRow>& trace,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "iteration,objective,binary_gap,kkt_residual,max_crlb,min_sinr\r\n";
  for (const ConvergenceRow& r : trace) {
    out << r.iteration << "," << format_double(r.objective) << ","
        << format_double(r.binary_gap) << "," << format_double(r.kkt_residual)
        << "," << format_double(r.max_crlb) << ","
        << format_double(r.min_sinr) << "\r\n";
  }
}

std::string report(const std::vector<ExperimentResult>& results) {
  bool any_rows = false;
  for (const ExperimentResult& r : results) any_rows = any_rows || !r.rows.empty();
  if (results.empty() || !any_rows)
    throw std::invalid_argument("report requires at least one experiment with rows");

  std::ostringstream out;
  out << "# Simulation campaign report\n";
  for (const ExperimentResult& r : results) {
    out << "\n## " << experiment_kind_name(r.kind) << "\n\n";
    out << "Sweep `" << r.sweep_name << "` over [";
    for (size_t i = 0; i < r.sweep.size(); ++i) {
      if (i > 0) out << ", ";
      out << format_double(r.sweep[i]);
    }
    out << "], " << r.trials << " trial(s) per point.\n";
    if (!r.csv_path.empty()) out << "Rows: `" << r.csv_path << "`\n";
    if (!r.trace_path.empty())
      out << "Per-iteration trace: `" << r.trace_path << "`\n";
    int failures = 0;
    for (const TrialResult& row : r.rows) failures += row.failed ? 1 : 0;
    if (failures > 0) out << "Flagged trials: " << failures << "\n";

    out << "\n| " << r.sweep_name << " | metric | mean | stddev | samples |\n";
    out << "| --- | --- | --- | --- | --- |\n";
    for (const SummaryRow& s : r.summary) {
      out << "| " << format_double(s.sweep_value) << " | " << s.metric
          << " | " << format_double(s.mean) << " | "
          << format_double(s.stddev) << " | " << s.count << " |\n";
    }

    if (r.kind == ExperimentKind::se_vs_peb_budget) {
      out << "\n### Minimum spectral efficiency by scheme (bit/s/Hz)\n\n";
      out << "| scheme |";
      for (double v : r.sweep) out << " budget " << format_double(v) << " m |";
      out << "\n| --- |";
      for (size_t i = 0; i < r.sweep.size(); ++i) out << " --- |";
      out << "\n";
      for (const char* scheme : {"jap", "cap", "rap"}) {
        out << "| " << scheme << " |";
        const std::string metric = std::string("min_se_") + scheme;
        for (double v : r.sweep) {
          double mean = kUnset;
          for (const SummaryRow& s : r.summary)
            if (s.metric == metric && s.sweep_value == v) mean = s.mean;
          out << " " << format_double(mean) << " |";
        }
        out << "\n";
      }
    }

    if (r.kind == ExperimentKind::waveform_gap) {
      double p_dd = kUnset;
      double p_tf = kUnset;
      for (const SummaryRow& s : r.summary) {
        if (s.sweep_value != r.sweep.back()) continue;
        if (s.metric == "prelog_otfs") p_dd = s.mean;
        if (s.metric == "prelog_ofdm") p_tf = s.mean;
      }
      char line[128];
      std::snprintf(line, sizeof(line),
                    "\nPre-log factors at the largest frame: otfs %.3f, "
                    "ofdm %.3f.\n",
                    p_dd, p_tf);
      out << line;
    }
  }
  return out.str();
}

}  // namespace cfisac
