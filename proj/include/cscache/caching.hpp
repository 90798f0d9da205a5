#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <map>
#include <numeric>
#include <memory>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cscache/errors.hpp"
#include "cscache/field_model.hpp"
#include "cscache/rng.hpp"

namespace cscache {

using IndexList = std::vector<std::size_t>;

/// Which sensors each cache may sample and which caches talk to each other.
struct CacheLayout {
  std::size_t n_sensors = 0;
  std::vector<IndexList> coverage;   // N_c, sorted
  std::vector<IndexList> neighbors;  // D_c, sorted

  std::size_t n_caches() const { return coverage.size(); }
};

inline bool is_connected(const std::vector<IndexList>& neighbors) {
  if (neighbors.empty()) return true;
  std::vector<bool> seen(neighbors.size(), false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!frontier.empty()) {
    const std::size_t c = frontier.front();
    frontier.pop();
    for (std::size_t nb : neighbors[c]) {
      if (!seen[nb]) {
        seen[nb] = true;
        ++count;
        frontier.push(nb);
      }
    }
  }
  return count == neighbors.size();
}

/// Validates symmetry, no self loops and full sensor coverage. Connectivity is
/// checked by the collaborative solver, not here, so that disconnected layouts
/// can still be used for non-collaborative recovery.
inline CacheLayout make_layout(std::size_t n_sensors, std::vector<IndexList> coverage,
                               std::vector<IndexList> neighbors) {
  detail::require(!coverage.empty(), "layout needs at least one cache");
  detail::require(coverage.size() == neighbors.size(), "coverage/neighbor count mismatch");
  std::vector<bool> covered(n_sensors, false);
  for (auto& cov : coverage) {
    std::sort(cov.begin(), cov.end());
    cov.erase(std::unique(cov.begin(), cov.end()), cov.end());
    for (std::size_t n : cov) {
      detail::require(n < n_sensors, "coverage index out of range");
      covered[n] = true;
    }
  }
  detail::require(std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }),
                  "coverage sets must jointly cover every sensor");
  for (std::size_t c = 0; c < neighbors.size(); ++c) {
    auto& nb = neighbors[c];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    for (std::size_t other : nb) {
      detail::require(other < neighbors.size() && other != c, "invalid neighbor index");
    }
  }
  for (std::size_t c = 0; c < neighbors.size(); ++c) {
    for (std::size_t other : neighbors[c]) {
      detail::require(std::binary_search(neighbors[other].begin(), neighbors[other].end(), c),
                      "neighbor relation must be symmetric");
    }
  }
  return {n_sensors, std::move(coverage), std::move(neighbors)};
}

/// Splits the block grid into C equal rectangular subregions (rows x cols tiles,
/// as square as the grid allows) and connects every cache to every other.
inline CacheLayout assign_coverage(const SensorField& field, std::size_t n_caches) {
  const std::size_t side = field.grid_side;
  std::size_t tile_rows = 0;
  for (std::size_t r = 1; r * r <= n_caches; ++r) {
    if (n_caches % r == 0 && side % r == 0 && side % (n_caches / r) == 0) tile_rows = r;
  }
  detail::require(n_caches >= 1 && tile_rows > 0,
                  "assign_coverage: " + std::to_string(n_caches) +
                      " caches cannot tile a " + std::to_string(side) + "x" +
                      std::to_string(side) + " block grid evenly");
  const std::size_t tile_cols = n_caches / tile_rows;
  const std::size_t rows_per_tile = side / tile_rows;
  const std::size_t cols_per_tile = side / tile_cols;

  std::vector<IndexList> coverage(n_caches);
  for (std::size_t n = 0; n < field.n_sensors; ++n) {
    const std::size_t c = (field.block_row(n) / rows_per_tile) * tile_cols +
                          field.block_col(n) / cols_per_tile;
    coverage[c].push_back(n);
  }
  std::vector<IndexList> neighbors(n_caches);
  for (std::size_t c = 0; c < n_caches; ++c)
    for (std::size_t d = 0; d < n_caches; ++d)
      if (c != d) neighbors[c].push_back(d);
  return make_layout(field.n_sensors, std::move(coverage), std::move(neighbors));
}

/// Per-cache sensor picks for every time instant of a horizon.
struct SamplingSchedule {
  std::vector<std::vector<IndexList>> picks;  // [cache][time] -> sensors
};

inline SamplingSchedule sample_schedule(const CacheLayout& layout, std::size_t horizon,
                                        std::size_t m, std::uint64_t seed) {
  for (std::size_t c = 0; c < layout.n_caches(); ++c) {
    detail::require(m <= layout.coverage[c].size(),
                    "sample_measurements: M=" + std::to_string(m) + " exceeds coverage size " +
                        std::to_string(layout.coverage[c].size()) + " of cache " +
                        std::to_string(c));
  }
  SamplingSchedule schedule;
  schedule.picks.resize(layout.n_caches());
  for (std::size_t c = 0; c < layout.n_caches(); ++c) {
    auto rng = make_stream(seed, Stream::kSampling, c);
    schedule.picks[c].resize(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
      IndexList pool = layout.coverage[c];
      // partial Fisher-Yates: the first m entries become a uniform draw without replacement
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      pool.resize(m);
      schedule.picks[c][t] = std::move(pool);
    }
  }
  return schedule;
}

/// What one cache holds for one window: the selected sensors per time slot and
/// the stacked measurements y_c = Phi_c x.
struct CacheMeasurements {
  std::vector<IndexList> selected;  // [slot j in window] -> sensors
  Eigen::VectorXd y;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
  /// Positions in vec(X) picked by the rows of Phi_c, in row order.
  IndexList rows(std::size_t n_sensors) const {
    IndexList out;
    for (std::size_t j = 0; j < selected.size(); ++j)
      for (std::size_t n : selected[j]) out.push_back(j * n_sensors + n);
    return out;
  }
};

struct MeasurementSet {
  std::size_t n_sensors = 0;
  std::size_t window = 0;
  std::vector<CacheMeasurements> caches;
};

inline MeasurementSet measure_window(const SamplingSchedule& schedule, const DataMatrix& data) {
  const std::size_t w = data.window();
  const std::size_t n = data.n_sensors();
  MeasurementSet out;
  out.n_sensors = n;
  out.window = w;
  for (const auto& per_time : schedule.picks) {
    detail::require(per_time.size() > data.end_time, "schedule shorter than data horizon");
    CacheMeasurements cm;
    const std::size_t first = data.end_time + 1 - w;
    for (std::size_t j = 0; j < w; ++j) cm.selected.push_back(per_time[first + j]);
    const IndexList rows = cm.rows(n);
    const Eigen::VectorXd x = data.vec();
    cm.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      cm.y(static_cast<Eigen::Index>(i)) = x(static_cast<Eigen::Index>(rows[i]));
    out.caches.push_back(std::move(cm));
  }
  return out;
}

/// Independent uniform draws without replacement per cache per time instant of
/// the window.
inline MeasurementSet sample_measurements(const CacheLayout& layout, const DataMatrix& data,
                                          std::size_t m, std::uint64_t seed) {
  const std::size_t w = data.window();
  SamplingSchedule schedule = sample_schedule(layout, w, m, seed);
  DataMatrix local = data;
  local.end_time = w - 1;
  return measure_window(schedule, local);
}

/// Explicit Phi_c (M_c W x N W); tests only.
inline Eigen::MatrixXd selection_matrix(const IndexList& rows, std::size_t dimension) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                            static_cast<Eigen::Index>(dimension));
  for (std::size_t i = 0; i < rows.size(); ++i)
    s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(rows[i])) = 1.0;
  return s;
}

enum class AnchorStrategy { kGlobal, kPairwiseGlobal, kPairwiseUnion };

inline std::string_view to_string(AnchorStrategy s) {
  switch (s) {
    case AnchorStrategy::kGlobal: return "global";
    case AnchorStrategy::kPairwiseGlobal: return "pairwise-global";
    case AnchorStrategy::kPairwiseUnion: return "pairwise-union";
  }
  return "unknown";
}

inline AnchorStrategy parse_strategy(std::string_view name) {
  if (name == "global") return AnchorStrategy::kGlobal;
  if (name == "pairwise-global") return AnchorStrategy::kPairwiseGlobal;
  if (name == "pairwise-union") return AnchorStrategy::kPairwiseUnion;
  throw std::invalid_argument("unknown anchor strategy '" + std::string(name) + "'");
}

/// Anchor sets per unordered cache pair. Both orientations of a pair resolve
/// to the same shared set; anchors are fixed over the window.
class AnchorPlan {
 public:
  AnchorPlan() = default;
  AnchorPlan(AnchorStrategy strategy, std::size_t q) : strategy_(strategy), q_(q) {}

  AnchorStrategy strategy() const { return strategy_; }
  std::size_t anchors_per_pair() const { return q_; }

  void set(std::size_t a, std::size_t b, std::shared_ptr<const IndexList> anchors) {
    sets_[key(a, b)] = std::move(anchors);
  }

  const IndexList& anchors(std::size_t a, std::size_t b) const {
    auto it = sets_.find(key(a, b));
    detail::require(it != sets_.end(), "no anchor set for cache pair");
    return *it->second;
  }

  std::shared_ptr<const IndexList> shared(std::size_t a, std::size_t b) const {
    auto it = sets_.find(key(a, b));
    return it == sets_.end() ? nullptr : it->second;
  }

  /// Positions in vec(X) selected by Gamma_{a,b}: every anchor in every slot.
  IndexList rows(std::size_t a, std::size_t b, std::size_t n_sensors, std::size_t window) const {
    const IndexList& q = anchors(a, b);
    IndexList out;
    out.reserve(q.size() * window);
    for (std::size_t j = 0; j < window; ++j)
      for (std::size_t n : q) out.push_back(j * n_sensors + n);
    return out;
  }

  const std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const IndexList>>& pairs()
      const {
    return sets_;
  }

 private:
  static std::pair<std::size_t, std::size_t> key(std::size_t a, std::size_t b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }

  AnchorStrategy strategy_ = AnchorStrategy::kPairwiseUnion;
  std::size_t q_ = 0;
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const IndexList>> sets_;
};

namespace detail {

inline IndexList draw_subset(const IndexList& pool, std::size_t q, std::mt19937_64& rng) {
  IndexList work = pool;
  for (std::size_t i = 0; i < q; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, work.size() - 1);
    std::swap(work[i], work[pick(rng)]);
  }
  work.resize(q);
  std::sort(work.begin(), work.end());
  return work;
}

}  // namespace detail

inline AnchorPlan select_anchors(const CacheLayout& layout, AnchorStrategy strategy,
                                 std::size_t q, std::uint64_t seed) {
  AnchorPlan plan(strategy, q);
  IndexList everyone(layout.n_sensors);
  std::iota(everyone.begin(), everyone.end(), std::size_t{0});

  std::shared_ptr<const IndexList> global;
  if (strategy == AnchorStrategy::kGlobal) {
    detail::require(q <= everyone.size(), "select_anchors: Q exceeds the number of sensors");
    auto rng = make_stream(seed, Stream::kAnchors);
    global = std::make_shared<const IndexList>(detail::draw_subset(everyone, q, rng));
  }

  std::uint64_t pair_index = 0;
  for (std::size_t a = 0; a < layout.n_caches(); ++a) {
    for (std::size_t b : layout.neighbors[a]) {
      if (b < a) continue;
      ++pair_index;
      if (strategy == AnchorStrategy::kGlobal) {
        plan.set(a, b, global);
        continue;
      }
      IndexList pool;
      if (strategy == AnchorStrategy::kPairwiseGlobal) {
        pool = everyone;
      } else {
        std::set_union(layout.coverage[a].begin(), layout.coverage[a].end(),
                       layout.coverage[b].begin(), layout.coverage[b].end(),
                       std::back_inserter(pool));
      }
      detail::require(q <= pool.size(), "select_anchors: Q=" + std::to_string(q) +
                                            " exceeds candidate pool of size " +
                                            std::to_string(pool.size()));
      auto rng = make_stream(seed, Stream::kAnchors, pair_index);
      plan.set(a, b, std::make_shared<const IndexList>(detail::draw_subset(pool, q, rng)));
    }
  }
  return plan;
}

/// Size of N_a union N_b, the candidate pool of the pairwise-union strategy.
inline std::size_t union_size(const CacheLayout& layout, std::size_t a, std::size_t b) {
  IndexList pool;
  std::set_union(layout.coverage[a].begin(), layout.coverage[a].end(),
                 layout.coverage[b].begin(), layout.coverage[b].end(), std::back_inserter(pool));
  return pool.size();
}

inline void write_coverage(std::ostream& os, const CacheLayout& layout) {
  os << "# cscache-coverage v1 n_caches=" << layout.n_caches() << "\n";
  os << "cache\tsensor\n";
  for (std::size_t c = 0; c < layout.n_caches(); ++c)
    for (std::size_t n : layout.coverage[c]) os << c << '\t' << n << '\n';
}

inline void write_anchor_plan(std::ostream& os, const AnchorPlan& plan) {
  os << "# cscache-anchors v1 strategy=" << to_string(plan.strategy())
     << " q=" << plan.anchors_per_pair() << "\n";
  os << "cache_a\tcache_b\tsensors\n";
  for (const auto& [pair, set] : plan.pairs()) {
    os << pair.first << '\t' << pair.second << '\t';
    for (std::size_t i = 0; i < set->size(); ++i) os << (i ? "," : "") << (*set)[i];
    os << '\n';
  }
}

}  // namespace cscache
