#include "cfisac/estimator.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace cfisac {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Hypothesized noise-free echo of target candidate `pos` from transmit AP p
// seen at receive AP r, without the unknown reflection gain: h_rx kron
// (Psi mixed_frame). Only the mn-long inner part is needed; the receive
// array factor is applied through closed-form antenna sums.
struct EchoParts {
  Eigen::VectorXcd inner;  // Psi * (h_tx^T kron I) x
  Eigen::VectorXcd h_rx;
};

EchoParts candidate_echo(const Scenario& sc, const PrecodedFrame& frame,
                         int p, int r, const Eigen::Vector2d& pos,
                         const Eigen::Vector2d& velocity) {
  const int mn = sc.grid.mn();
  const int m_t = sc.m_t();
  const PathParams path =
      path_parameters_at(sc.aps[p], sc.aps[r], pos, velocity, sc.grid);
  const Eigen::VectorXcd h_tx = array_response(path.aod, m_t);
  Eigen::VectorXcd mixed = Eigen::VectorXcd::Zero(mn);
  for (int i = 0; i < m_t; ++i)
    mixed += h_tx[i] * frame.x.segment(i * mn, mn);
  EchoParts parts;
  parts.inner = apply_psi(path.delay, path.doppler, sc.grid, mixed);
  parts.h_rx = array_response(path.aoa, m_t);
  return parts;
}

}  // namespace

CorrelationTerms correlation_terms(
    const Eigen::VectorXcd& y_r, const Scenario& sc,
    const std::vector<PrecodedFrame>& frames,
    const std::vector<int>& tx_indices, int r,
    const std::vector<Eigen::Vector2d>& candidates) {
  const int mn = sc.grid.mn();
  const int m_t = sc.m_t();
  const int n_tx = static_cast<int>(tx_indices.size());
  const int n_hyp = static_cast<int>(candidates.size()) * n_tx;
  if (y_r.size() != static_cast<Eigen::Index>(m_t) * mn)
    throw std::invalid_argument("correlation_terms: frame length mismatch");

  std::vector<EchoParts> parts;
  parts.reserve(n_hyp);
  for (size_t v = 0; v < candidates.size(); ++v)
    for (int pi = 0; pi < n_tx; ++pi)
      parts.push_back(candidate_echo(sc, frames[pi], tx_indices[pi], r,
                                     candidates[v],
                                     sc.targets[v].velocity));

  CorrelationTerms out;
  out.b.resize(n_hyp);
  out.a.resize(n_hyp, n_hyp);
  for (int u = 0; u < n_hyp; ++u) {
    // b[u] = (h_rx kron inner)^H y = inner^H (sum_j conj(h_rx_j) y_j)
    Eigen::VectorXcd folded = Eigen::VectorXcd::Zero(mn);
    for (int j = 0; j < m_t; ++j)
      folded += std::conj(parts[u].h_rx[j]) * y_r.segment(j * mn, mn);
    out.b[u] = parts[u].inner.dot(folded);
    for (int up = 0; up < n_hyp; ++up) {
      const std::complex<double> rx_dot = parts[u].h_rx.dot(parts[up].h_rx);
      out.a(u, up) = rx_dot * parts[u].inner.dot(parts[up].inner);
    }
  }
  return out;
}

double reduced_loglik(const EchoSet& echo, const Scenario& sc,
                      const std::vector<Eigen::Vector2d>& candidates) {
  double total = 0.0;
  for (size_t ri = 0; ri < echo.rx_indices.size(); ++ri) {
    const CorrelationTerms terms =
        correlation_terms(echo.y[ri], sc, echo.frames, echo.tx_indices,
                          echo.rx_indices[ri], candidates);
    Eigen::MatrixXcd a = terms.a;
    const double mean_diag = a.diagonal().real().mean();
    if (!(mean_diag > 0.0))
      throw std::runtime_error(
          "reduced_loglik: correlation matrix has no energy");
    a.diagonal().array() += 1e-8 * mean_diag;
    const Eigen::LDLT<Eigen::MatrixXcd> ldlt(a);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error(
          "reduced_loglik: correlation matrix is ill-conditioned");
    const Eigen::VectorXcd sol = ldlt.solve(terms.b);
    const double term = terms.b.dot(sol).real();
    if (!std::isfinite(term))
      throw std::runtime_error(
          "reduced_loglik: correlation matrix is ill-conditioned");
    total += term;
  }
  return total;
}

double simplified_loglik(const EchoSet& echo, const Scenario& sc,
                         const std::vector<Eigen::Vector2d>& candidates) {
  const int mn = sc.grid.mn();
  const int m_t = sc.m_t();
  double total = 0.0;
  for (size_t ri = 0; ri < echo.rx_indices.size(); ++ri) {
    const int r = echo.rx_indices[ri];
    for (size_t v = 0; v < candidates.size(); ++v) {
      for (size_t pi = 0; pi < echo.tx_indices.size(); ++pi) {
        const EchoParts parts =
            candidate_echo(sc, echo.frames[pi], echo.tx_indices[pi], r,
                           candidates[v], sc.targets[v].velocity);
        const double norm2 =
            static_cast<double>(m_t) * parts.inner.squaredNorm();
        if (norm2 <= 0.0) return kNegInf;
        Eigen::VectorXcd folded = Eigen::VectorXcd::Zero(mn);
        for (int j = 0; j < m_t; ++j)
          folded +=
              std::conj(parts.h_rx[j]) * echo.y[ri].segment(j * mn, mn);
        total += std::norm(parts.inner.dot(folded)) / norm2;
      }
    }
  }
  return total;
}

namespace {

double objective(const EchoSet& echo, const Scenario& sc,
                 const std::vector<Eigen::Vector2d>& candidates,
                 EstimatorMode mode) {
  return mode == EstimatorMode::reduced
             ? reduced_loglik(echo, sc, candidates)
             : simplified_loglik(echo, sc, candidates);
}

// Axis nodes centered on c covering [c-half, c+half] with the given step.
std::vector<double> axis_nodes(double c, double half, double step) {
  const int k = static_cast<int>(std::floor(half / step + 1e-9));
  std::vector<double> nodes;
  nodes.reserve(2 * k + 1);
  for (int i = -k; i <= k; ++i) nodes.push_back(c + i * step);
  return nodes;
}

}  // namespace

EstimateResult grid_search(const EchoSet& echo, const Scenario& sc,
                           const SearchGrid& grid, EstimatorMode mode) {
  if (grid.levels.empty())
    throw std::invalid_argument("grid_search: no refinement levels");
  const int n_targets = sc.n_targets();
  if (n_targets == 0)
    throw std::invalid_argument("grid_search: scenario has no targets");

  std::vector<Eigen::Vector2d> est(n_targets);
  for (int v = 0; v < n_targets; ++v)
    est[v] = sc.targets[v].hotspot_center;

  double best = kNegInf;
  bool any_valid = false;

  const auto sweep_target = [&](int v, double cx, double cy, double half,
                                double step) {
    const std::vector<double> xs = axis_nodes(cx, half, step);
    const std::vector<double> ys = axis_nodes(cy, half, step);
    for (double y : ys) {
      for (double x : xs) {
        std::vector<Eigen::Vector2d> cand = est;
        cand[v] = {x, y};
        double val;
        try {
          val = objective(echo, sc, cand, mode);
        } catch (const std::runtime_error&) {
          continue;  // isolated ill-conditioned cell
        }
        if (!std::isfinite(val)) continue;
        any_valid = true;
        if (val > best) {
          best = val;
          est = cand;
        }
      }
    }
  };

  const double coarse = grid.levels.front();
  if (n_targets == 2) {
    // Exact joint enumeration at the coarsest level.
    const double half0 = sc.targets[0].hotspot_halfwidth + grid.margin;
    const double half1 = sc.targets[1].hotspot_halfwidth + grid.margin;
    const auto xs0 = axis_nodes(sc.targets[0].hotspot_center.x(), half0, coarse);
    const auto ys0 = axis_nodes(sc.targets[0].hotspot_center.y(), half0, coarse);
    const auto xs1 = axis_nodes(sc.targets[1].hotspot_center.x(), half1, coarse);
    const auto ys1 = axis_nodes(sc.targets[1].hotspot_center.y(), half1, coarse);
    for (double y0 : ys0)
      for (double x0 : xs0)
        for (double y1 : ys1)
          for (double x1 : xs1) {
            std::vector<Eigen::Vector2d> cand = {{x0, y0}, {x1, y1}};
            double val;
            try {
              val = objective(echo, sc, cand, mode);
            } catch (const std::runtime_error&) {
              continue;
            }
            if (!std::isfinite(val)) continue;
            any_valid = true;
            if (val > best) {
              best = val;
              est = cand;
            }
          }
  } else {
    for (int v = 0; v < n_targets; ++v)
      sweep_target(v, sc.targets[v].hotspot_center.x(),
                   sc.targets[v].hotspot_center.y(),
                   sc.targets[v].hotspot_halfwidth + grid.margin, coarse);
  }

  for (size_t lev = 1; lev < grid.levels.size(); ++lev) {
    const double step = grid.levels[lev];
    const double window = grid.levels[lev - 1];
    for (int v = 0; v < n_targets; ++v)
      sweep_target(v, est[v].x(), est[v].y(), window, step);
  }

  if (!any_valid)
    throw std::runtime_error("grid_search: no valid grid cell");
  return {est, best};
}

double rmse(const std::vector<Eigen::Vector2d>& estimates,
            const std::vector<Eigen::Vector2d>& truths) {
  if (estimates.size() != truths.size() || estimates.empty())
    throw std::invalid_argument("rmse: length mismatch or empty input");
  double acc = 0.0;
  for (size_t i = 0; i < estimates.size(); ++i)
    acc += (estimates[i] - truths[i]).squaredNorm();
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

RadarMap compute_map(const EchoSet& echo, const Scenario& sc, int target,
                     const std::vector<Eigen::Vector2d>& fixed, double step,
                     EstimatorMode mode) {
  if (target < 0 || target >= sc.n_targets())
    throw std::invalid_argument("compute_map: target index out of range");
  if (static_cast<int>(fixed.size()) != sc.n_targets())
    throw std::invalid_argument("compute_map: need one position per target");
  if (step <= 0.0) throw std::invalid_argument("compute_map: bad step");

  const Target& tgt = sc.targets[target];
  const auto xs = axis_nodes(tgt.hotspot_center.x(), tgt.hotspot_halfwidth, step);
  const auto ys = axis_nodes(tgt.hotspot_center.y(), tgt.hotspot_halfwidth, step);

  RadarMap map;
  map.step = step;
  map.nx = static_cast<int>(xs.size());
  map.ny = static_cast<int>(ys.size());
  map.x0 = xs.front();
  map.y0 = ys.front();
  map.values.resize(map.ny, map.nx);
  for (int iy = 0; iy < map.ny; ++iy)
    for (int ix = 0; ix < map.nx; ++ix) {
      std::vector<Eigen::Vector2d> cand = fixed;
      cand[target] = {xs[ix], ys[iy]};
      double val;
      try {
        val = objective(echo, sc, cand, mode);
      } catch (const std::runtime_error&) {
        val = kNegInf;
      }
      map.values(iy, ix) = val;
    }
  return map;
}

void export_map_csv(const RadarMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_map_csv: cannot open " + path);
  out << "x,y,objective\n";
  out.precision(17);
  for (int iy = 0; iy < map.ny; ++iy)
    for (int ix = 0; ix < map.nx; ++ix)
      out << map.x0 + ix * map.step << ',' << map.y0 + iy * map.step << ','
          << map.values(iy, ix) << '\n';
  if (!out) throw std::runtime_error("export_map_csv: write failed: " + path);
}

}  // namespace cfisac
