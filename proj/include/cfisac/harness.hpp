#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cfisac/optimizer.hpp"
#include "cfisac/scenario.hpp"

namespace cfisac {

// Monte Carlo campaigns over the model, one kind per study:
//   peb_vs_targets    position error bound as the target count grows
//   rmse_vs_rcs       estimator error versus target reflectivity
//   peb_vs_aoa        bound versus the angle seen by a single receiver
//   convergence       joint-solve objective and binary gap per iteration
//   se_vs_peb_budget  min spectral efficiency against the accuracy budget
//   mobility_sweep    bound versus target speed
//   waveform_gap      delay-Doppler versus time-frequency numerology
enum class ExperimentKind {
  peb_vs_targets,
  rmse_vs_rcs,
  peb_vs_aoa,
  convergence,
  se_vs_peb_budget,
  mobility_sweep,
  waveform_gap,
};

// Throws std::invalid_argument on an unknown name.
ExperimentKind experiment_kind_from_string(const std::string& name);
std::string experiment_kind_name(ExperimentKind kind);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::peb_vs_targets;
  std::string sweep_name = "value";
  std::vector<double> sweep;  // nonempty
  int trials = 1;             // per sweep point, at least 1
  ScenarioConfig base;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  std::string out_dir = "out";  // empty: compute only, write nothing
  int threads = 0;              // 0: one worker per hardware thread
};

// Sweep, trial count, and numerology preset for each campaign kind. Echo
// synthesis and grid search run on small frames; closed-form studies use the
// full frame size.
ExperimentSpec default_spec(ExperimentKind kind);

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct TrialResult {
  int sweep_index = 0;
  int trial_index = 0;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  std::vector<Eigen::Vector2d> estimates;
  double rmse = kUnset;
  double exact_peb = kUnset;
  double approx_peb = kUnset;
  double min_se = kUnset;
  bool failed = false;
  std::string note;
  // extra named metrics; every row of one experiment carries the same keys
  // in the same order
  std::vector<std::pair<std::string, double>> extras;
};

struct SummaryRow {
  double sweep_value = 0.0;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;  // finite, non-failed samples aggregated
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::peb_vs_targets;
  std::string sweep_name;
  std::vector<double> sweep;
  int trials = 0;
  std::vector<TrialResult> rows;  // sweep-major, trial-minor order
  std::vector<SummaryRow> summary;
  std::vector<ConvergenceRow> trace;  // convergence kind, first trial
  std::string csv_path;
  std::string summary_path;
  std::string trace_path;
};

// Runs every (sweep point, trial) pair on a worker pool, each trial seeded by
// (base seed, sweep index, trial index) so results do not depend on
// scheduling. A trial that throws becomes a flagged row; the campaign keeps
// going. Writes the row CSV and the JSON summary under the output directory
// (environment variable CFISAC_OUT_DIR overrides it when set). Throws
// std::invalid_argument on an invalid spec.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Markdown summary: per-experiment statistics tables, a scheme-by-budget
// spectral efficiency table, and pointers to the emitted CSV files. Throws
// std::invalid_argument when no experiment carries rows.
std::string report(const std::vector<ExperimentResult>& results);

// RFC 4180 field quoting.
std::string csv_escape(const std::string& field);
// Shortest decimal round trip; "nan"/"inf"/"-inf" for non-finite values.
std::string format_double(double v);

void write_rows_csv(const ExperimentResult& result, const std::string& path);
void write_summary_json(const ExperimentResult& result,
                        const std::string& path);
void write_trace_csv(const std::vector<ConvergenceRow>& trace,
                     const std::string& path);

}  // namespace cfisac
