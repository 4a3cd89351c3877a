#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cfisac/dd_channel.hpp"
#include "cfisac/scenario.hpp"

namespace cfisac {

enum class EstimatorMode { reduced, simplified };

// Coarse-to-fine grid refinement steps (meters). Each target is searched
// inside its hotspot, then refined around the running estimate with a window
// of one coarse step per side.
struct SearchGrid {
  std::vector<double> levels{10.0, 1.0, 0.1};
  double margin = 0.0;  // widens the hotspot region

  double finest_step() const { return levels.back(); }
  // RMSE contribution of quantizing a uniformly distributed position to the
  // nearest node of a square grid with the finest step.
  double resolution_floor() const {
    return finest_step() / std::sqrt(6.0);
  }
};

// Per-receiver matched correlations across the transmit-AP x target
// hypothesis set. Stream u = v * n_tx + p_index pairs target v with the
// p_index-th transmitting AP.
struct CorrelationTerms {
  Eigen::VectorXcd b;  // cross-correlations with the received frame
  Eigen::MatrixXcd a;  // Gram matrix of the hypothesized echoes
};

CorrelationTerms correlation_terms(
    const Eigen::VectorXcd& y_r, const Scenario& sc,
    const std::vector<PrecodedFrame>& frames,
    const std::vector<int>& tx_indices, int r,
    const std::vector<Eigen::Vector2d>& candidates);

// Concentrated log-likelihood sum_r b_r^H A_r^{-1} b_r with a relative
// ridge on A_r; throws std::runtime_error when a correlation matrix is too
// ill-conditioned to invert.
double reduced_loglik(const EchoSet& echo, const Scenario& sc,
                      const std::vector<Eigen::Vector2d>& candidates);

// Path-separable surrogate sum |b_u|^2 / ||echo_u||^2; returns -infinity
// when a hypothesized echo has zero norm.
double simplified_loglik(const EchoSet& echo, const Scenario& sc,
                         const std::vector<Eigen::Vector2d>& candidates);

struct EstimateResult {
  std::vector<Eigen::Vector2d> positions;  // per target
  double objective = 0.0;
};

// Maximum-likelihood grid search over target positions: joint enumeration of
// the two-target case at the coarsest level, conditional sweeps otherwise,
// then per-target refinement. Ties resolve to the lowest linear cell index.
// Throws std::runtime_error when no valid cell exists.
EstimateResult grid_search(const EchoSet& echo, const Scenario& sc,
                           const SearchGrid& grid, EstimatorMode mode);

// Paired root-mean-square position error.
double rmse(const std::vector<Eigen::Vector2d>& estimates,
            const std::vector<Eigen::Vector2d>& truths);

struct RadarMap {
  double x0 = 0.0;
  double y0 = 0.0;
  double step = 1.0;
  int nx = 0;
  int ny = 0;
  Eigen::MatrixXd values;  // (ny, nx), -infinity marks invalid cells
};

// Objective map for one target over its hotspot, other targets held at
// `fixed`; `fixed` must supply one position per target.
RadarMap compute_map(const EchoSet& echo, const Scenario& sc, int target,
                     const std::vector<Eigen::Vector2d>& fixed, double step,
                     EstimatorMode mode);

void export_map_csv(const RadarMap& map, const std::string& path);

}  // namespace cfisac
