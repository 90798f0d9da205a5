#pragma once

// Seeded synthesis of a spatio-temporally correlated sensor field: one sensor
// per 100x100 block, Gaussian-kernel aggregation of S moving-average sources,
// each source the sum of a low-passed Gauss-Markov process and a Markov chain.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cscache/dct.hpp"
#include "cscache/errors.hpp"
#include "cscache/rng.hpp"

namespace cscache {

inline constexpr double kBlockSide = 100.0;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Returns the integer square root of `n`, or 0 if `n` is not a perfect square.
inline std::size_t exact_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r * r == n ? r : 0;
}

/// Sensor deployment over a square of grid_side x grid_side blocks. Sensor n
/// sits in block (n / grid_side, n % grid_side), i.e. row-major over the grid.
struct SensorField {
  std::size_t n_sensors = 0;
  std::size_t grid_side = 0;
  std::vector<Point2> positions;

  double region_side() const { return kBlockSide * static_cast<double>(grid_side); }
  std::size_t block_row(std::size_t n) const { return n / grid_side; }
  std::size_t block_col(std::size_t n) const { return n % grid_side; }
};

inline SensorField generate_deployment(std::size_t n_sensors, std::uint64_t seed) {
  const std::size_t side = exact_sqrt(n_sensors);
  detail::require(n_sensors > 0 && side > 0,
                  "generate_deployment: n_sensors must be a positive perfect square, got " +
                      std::to_string(n_sensors));
  SensorField field;
  field.n_sensors = n_sensors;
  field.grid_side = side;
  field.positions.reserve(n_sensors);
  auto rng = make_stream(seed, Stream::kDeployment);
  std::uniform_real_distribution<double> offset(0.0, kBlockSide);
  for (std::size_t n = 0; n < n_sensors; ++n) {
    const double x0 = kBlockSide * static_cast<double>(field.block_col(n));
    const double y0 = kBlockSide * static_cast<double>(field.block_row(n));
    const double dx = offset(rng);
    const double dy = offset(rng);
    field.positions.push_back({x0 + dx, y0 + dy});
  }
  return field;
}

struct SourceParams {
  Point2 position;
  double alpha = 0.9;            // Gauss-Markov correlation coefficient
  double mean = 0.0;             // Gauss-Markov mean, also its first value
  std::vector<double> states;    // Markov chain state values
  double p_self = 0.8;
  double lowpass_fraction = 0.25;
};

struct SourceModel {
  double correlation_length = 800.0;
  std::vector<SourceParams> sources;
};

struct SourceModelOptions {
  std::size_t n_sources = 10;
  double correlation_length = 800.0;
  double alpha = 0.9;
  std::size_t n_states = 10;
  double p_self = 0.8;
  double lowpass_fraction = 0.25;
};

/// Places sources uniformly over the region and draws their means and Markov
/// state values from N(0, 1).
inline SourceModel generate_sources(const SensorField& field, const SourceModelOptions& opts,
                                    std::uint64_t seed) {
  detail::require(opts.correlation_length > 0.0, "correlation length must be positive");
  detail::require(opts.alpha >= 0.0 && opts.alpha <= 1.0, "alpha must lie in [0, 1]");
  detail::require(opts.p_self > 0.0 && opts.p_self <= 1.0, "p_self must lie in (0, 1]");
  detail::require(opts.lowpass_fraction > 0.0 && opts.lowpass_fraction <= 1.0,
                  "lowpass fraction must lie in (0, 1]");
  detail::require(opts.n_states > 0, "Markov state space must be non-empty");

  SourceModel model;
  model.correlation_length = opts.correlation_length;
  auto placement = make_stream(seed, Stream::kSourcePlacement);
  auto means = make_stream(seed, Stream::kSourceMeans);
  std::uniform_real_distribution<double> coord(0.0, field.region_side());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t s = 0; s < opts.n_sources; ++s) {
    SourceParams p;
    p.position.x = coord(placement);
    p.position.y = coord(placement);
    p.alpha = opts.alpha;
    p.mean = gauss(means);
    p.p_self = opts.p_self;
    p.lowpass_fraction = opts.lowpass_fraction;
    auto state_rng = make_stream(seed, Stream::kMarkovStates, s);
    p.states.resize(opts.n_states);
    for (auto& v : p.states) v = gauss(state_rng);
    model.sources.push_back(std::move(p));
  }
  return model;
}

/// lambda(1) = mean; lambda(t) = alpha (lambda(t-1) - mean) + sqrt(1 - alpha^2) nu(t) + mean.
inline std::vector<double> gauss_markov_sequence(double alpha, double mean, std::size_t length,
                                                 std::mt19937_64& rng) {
  detail::require(alpha >= 0.0 && alpha <= 1.0, "gauss_markov_sequence: alpha must lie in [0, 1]");
  detail::require(length >= 1, "gauss_markov_sequence: length must be >= 1");
  std::normal_distribution<double> innovation(0.0, 1.0);
  const double gain = std::sqrt(1.0 - alpha * alpha);
  std::vector<double> out(length);
  out[0] = mean;
  for (std::size_t t = 1; t < length; ++t) {
    out[t] = alpha * (out[t - 1] - mean) + gain * innovation(rng) + mean;
  }
  return out;
}

inline std::vector<double> gauss_markov_sequence(double alpha, double mean, std::size_t length,
                                                 std::uint64_t seed) {
  auto rng = make_stream(seed, Stream::kInnovations);
  return gauss_markov_sequence(alpha, mean, length, rng);
}

/// Keeps the lowest ceil(fraction * T) orthonormal DCT-II coefficients.
inline std::vector<double> lowpass_smooth(std::span<const double> series, double fraction) {
  detail::require(fraction > 0.0 && fraction <= 1.0,
                  "lowpass_smooth: fraction must lie in (0, 1]");
  const std::size_t n = series.size();
  if (n == 0) return {};
  const auto keep = static_cast<Eigen::Index>(
      std::ceil(fraction * static_cast<double>(n) - 1e-9));
  const Eigen::MatrixXd c = dct_matrix(n);
  const Eigen::Map<const Eigen::VectorXd> x(series.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd coeffs = c * x;
  coeffs.tail(static_cast<Eigen::Index>(n) - keep).setZero();
  const Eigen::VectorXd smoothed = c.transpose() * coeffs;
  return {smoothed.data(), smoothed.data() + smoothed.size()};
}

/// Realizes a Markov chain over `states`. The chain stays put with
/// probability p_self and otherwise jumps uniformly to one of the other
/// |V| - 1 states. The initial state is uniform over V.
inline std::vector<double> markov_state_sequence(std::span<const double> states, double p_self,
                                                 std::size_t length, std::mt19937_64& rng) {
  detail::require(!states.empty(), "markov_state_sequence: state list must be non-empty");
  detail::require(p_self >= 0.0 && p_self <= 1.0,
                  "markov_state_sequence: p_self must lie in [0, 1]");
  std::vector<double> out(length);
  if (length == 0) return out;
  const std::size_t n_states = states.size();
  std::uniform_int_distribution<std::size_t> initial(0, n_states - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t current = initial(rng);
  out[0] = states[current];
  for (std::size_t t = 1; t < length; ++t) {
    if (n_states > 1 && unit(rng) >= p_self) {
      std::uniform_int_distribution<std::size_t> other(0, n_states - 2);
      const std::size_t j = other(rng);
      current = j >= current ? j + 1 : j;
    }
    out[t] = states[current];
  }
  return out;
}

inline std::vector<double> markov_state_sequence(std::span<const double> states, double p_self,
                                                 std::size_t length, std::uint64_t seed) {
  auto rng = make_stream(seed, Stream::kMarkovChain);
  return markov_state_sequence(states, p_self, length, rng);
}

/// Per-source trajectories, rows = sources, columns = time.
struct SourceTrajectories {
  Eigen::MatrixXd smooth;     // lambda_s(t)
  Eigen::MatrixXd nonsmooth;  // pi_s(t)
  Eigen::MatrixXd values;     // beta_s(t) = lambda_s(t) + pi_s(t)
};

inline SourceTrajectories simulate_sources(const SourceModel& model, std::size_t horizon,
                                           std::uint64_t seed) {
  detail::require(horizon >= 1, "simulate_sources: horizon must be >= 1");
  const auto n_src = static_cast<Eigen::Index>(model.sources.size());
  const auto n_t = static_cast<Eigen::Index>(horizon);
  SourceTrajectories out{Eigen::MatrixXd(n_src, n_t), Eigen::MatrixXd(n_src, n_t),
                         Eigen::MatrixXd(n_src, n_t)};
  for (Eigen::Index s = 0; s < n_src; ++s) {
    const auto& src = model.sources[static_cast<std::size_t>(s)];
    auto innovations = make_stream(seed, Stream::kInnovations, static_cast<std::uint64_t>(s));
    auto chain = make_stream(seed, Stream::kMarkovChain, static_cast<std::uint64_t>(s));
    const auto raw = gauss_markov_sequence(src.alpha, src.mean, horizon, innovations);
    const auto smooth = lowpass_smooth(raw, src.lowpass_fraction);
    const auto jumps = markov_state_sequence(src.states, src.p_self, horizon, chain);
    for (Eigen::Index t = 0; t < n_t; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      out.smooth(s, t) = smooth[ut];
      out.nonsmooth(s, t) = jumps[ut];
      out.values(s, t) = smooth[ut] + jumps[ut];
    }
  }
  return out;
}

/// N x S matrix of kernel weights exp(-(d_{n,s} / eta)^2).
inline Eigen::MatrixXd kernel_weights(const SensorField& field, const SourceModel& model) {
  detail::require(model.correlation_length > 0.0, "correlation length must be positive");
  Eigen::MatrixXd k(static_cast<Eigen::Index>(field.n_sensors),
                    static_cast<Eigen::Index>(model.sources.size()));
  for (std::size_t n = 0; n < field.n_sensors; ++n) {
    for (std::size_t s = 0; s < model.sources.size(); ++s) {
      const double ratio = distance(field.positions[n], model.sources[s].position) /
                           model.correlation_length;
      k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s)) = std::exp(-ratio * ratio);
    }
  }
  return k;
}

/// One field snapshot: x_n = sum_s exp(-(d_{n,s} / eta)^2) beta_s.
inline Eigen::VectorXd observe(const SensorField& field, const SourceModel& model,
                               const Eigen::Ref<const Eigen::VectorXd>& source_values) {
  detail::require(source_values.size() == static_cast<Eigen::Index>(model.sources.size()),
                  "observe: one value per source required");
  return kernel_weights(field, model) * source_values;
}

/// N x T matrix of all snapshots, column t = field at time t.
inline Eigen::MatrixXd observe_series(const SensorField& field, const SourceModel& model,
                                      const SourceTrajectories& traj) {
  return kernel_weights(field, model) * traj.values;
}

/// X(t) in R^{N x W}; column j holds the snapshot at time end_time - W + 1 + j.
struct DataMatrix {
  Eigen::MatrixXd values;
  std::size_t end_time = 0;

  std::size_t n_sensors() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t window() const { return static_cast<std::size_t>(values.cols()); }
  /// Column-major stacking: entry j * N + n equals X(n, j).
  Eigen::VectorXd vec() const {
    return Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  }
};

inline DataMatrix build_data_matrix(std::span<const Eigen::VectorXd> snapshots,
                                    std::size_t end_time = 0) {
  detail::require(!snapshots.empty(), "build_data_matrix: need at least one snapshot");
  const Eigen::Index n = snapshots.front().size();
  DataMatrix out;
  out.end_time = end_time;
  out.values.resize(n, static_cast<Eigen::Index>(snapshots.size()));
  for (std::size_t j = 0; j < snapshots.size(); ++j) {
    detail::require(snapshots[j].size() == n, "build_data_matrix: snapshot length mismatch");
    out.values.col(static_cast<Eigen::Index>(j)) = snapshots[j];
  }
  return out;
}

/// Window of `series` (N x T) ending at zero-based time index `end_time`.
inline DataMatrix window_of(const Eigen::MatrixXd& series, std::size_t end_time,
                            std::size_t window) {
  detail::require(window >= 1 && end_time + 1 >= window &&
                      end_time < static_cast<std::size_t>(series.cols()),
                  "window_of: window exceeds series bounds");
  DataMatrix out;
  out.end_time = end_time;
  out.values = series.middleCols(static_cast<Eigen::Index>(end_time + 1 - window),
                                 static_cast<Eigen::Index>(window));
  return out;
}

/// A complete synthetic scenario: deployment, sources and the N x T field.
struct Scenario {
  SensorField field;
  SourceModel sources;
  SourceTrajectories trajectories;
  Eigen::MatrixXd series;
};

inline Scenario generate_scenario(std::size_t n_sensors, const SourceModelOptions& opts,
                                  std::size_t horizon, std::uint64_t seed) {
  Scenario sc;
  sc.field = generate_deployment(n_sensors, seed);
  sc.sources = generate_sources(sc.field, opts, seed);
  sc.trajectories = simulate_sources(sc.sources, horizon, seed);
  sc.series = observe_series(sc.field, sc.sources, sc.trajectories);
  return sc;
}

// Tab-separated exports. The first line names the format, the second the columns.

inline void write_deployment(std::ostream& os, const SensorField& field) {
  os << "# cscache-deployment v1 n_sensors=" << field.n_sensors
     << " grid_side=" << field.grid_side << "\n";
  os << "sensor\tblock_row\tblock_col\tx\ty\n";
  os.precision(17);
  for (std::size_t n = 0; n < field.n_sensors; ++n) {
    os << n << '\t' << field.block_row(n) << '\t' << field.block_col(n) << '\t'
       << field.positions[n].x << '\t' << field.positions[n].y << '\n';
  }
}

inline void write_trajectory(std::ostream& os, const Eigen::MatrixXd& series) {
  os << "# cscache-trajectory v1 n_sensors=" << series.rows() << " horizon=" << series.cols()
     << "\n";
  os << "time\tsensor\tvalue\n";
  os.precision(17);
  for (Eigen::Index t = 0; t < series.cols(); ++t) {
    for (Eigen::Index n = 0; n < series.rows(); ++n) {
      os << t << '\t' << n << '\t' << series(n, t) << '\n';
    }
  }
}

}  // namespace cscache
