#pragma once

// Experiment orchestration: seeded scenario generation, per-window recovery
// with every method, NMSE, seed-averaged sweep summaries and dataset export.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "cscache/basis.hpp"
#include "cscache/caching.hpp"
#include "cscache/field_model.hpp"
#include "cscache/solver.hpp"

namespace cscache {

using json = nlohmann::json;

inline constexpr const char* kMethodCentralized = "centralized";
inline constexpr const char* kMethodNoncollab = "noncollab";
inline constexpr const char* kMethodAverage = "avg";
inline constexpr const char* kMethodPartition = "partition";
inline constexpr const char* kMethodCosrAa = "cosr-aa";
inline constexpr const char* kMethodDeepCosrAa = "deep-cosr-aa";

inline bool is_known_method(const std::string& m) {
  return m == kMethodCentralized || m == kMethodNoncollab || m == kMethodAverage ||
         m == kMethodPartition || m == kMethodCosrAa || m == kMethodDeepCosrAa;
}

struct ExperimentConfig {
  std::size_t n_sensors = 100;
  SourceModelOptions sources;
  std::size_t window = 4;
  std::size_t horizon = 20;

  // sweep axes
  std::vector<std::size_t> n_caches{4};
  std::vector<std::size_t> m_values{2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24};
  std::vector<std::size_t> m_totals;        // if set, M = M_tot / C replaces m_values
  std::vector<std::size_t> q_values{25};
  std::vector<double> anchor_proportions;   // if set, Q = round(p |N_c u N_c'|) replaces q_values
  std::vector<AnchorStrategy> strategies{AnchorStrategy::kPairwiseUnion};
  std::vector<std::string> methods{kMethodCentralized, kMethodNoncollab, kMethodAverage,
                                   kMethodPartition, kMethodCosrAa};

  SolverConfig solver;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string output_dir = "results";
  std::size_t workers = 1;

  void validate() const {
    detail::require(exact_sqrt(n_sensors) > 0, "n_sensors must be a perfect square");
    detail::require(window >= 1 && horizon >= window, "need horizon >= window >= 1");
    detail::require(!seeds.empty(), "seeds must be non-empty");
    detail::require(!n_caches.empty(), "n_caches must be non-empty");
    detail::require(!m_values.empty() || !m_totals.empty(), "no measurement axis");
    detail::require(!q_values.empty() || !anchor_proportions.empty(), "no anchor axis");
    detail::require(!strategies.empty(), "strategies must be non-empty");
    for (const auto& m : methods)
      detail::require(is_known_method(m) && m != kMethodDeepCosrAa,
                      "unsupported method '" + m + "'");
    for (double p : anchor_proportions)
      detail::require(p >= 0.0 && p <= 1.0, "anchor proportion must lie in [0, 1]");
    solver.validate();
  }
};

inline void to_json(json& j, const SourceModelOptions& o) {
  j = json{{"n_sources", o.n_sources}, {"correlation_length", o.correlation_length},
           {"alpha", o.alpha},         {"n_states", o.n_states},
           {"p_self", o.p_self},       {"lowpass_fraction", o.lowpass_fraction}};
}

inline void from_json(const json& j, SourceModelOptions& o) {
  o.n_sources = j.value("n_sources", o.n_sources);
  o.correlation_length = j.value("correlation_length", o.correlation_length);
  o.alpha = j.value("alpha", o.alpha);
  o.n_states = j.value("n_states", o.n_states);
  o.p_self = j.value("p_self", o.p_self);
  o.lowpass_fraction = j.value("lowpass_fraction", o.lowpass_fraction);
}

inline void to_json(json& j, const SolverConfig& s) {
  j = json{{"rho0", s.rho0},       {"tau", s.tau},
           {"eta_ratio", s.eta_ratio}, {"eps_pri", s.eps_pri},
           {"eps_dual", s.eps_dual},   {"max_iterations", s.max_iterations},
           {"adapt_penalty", s.adapt_penalty}, {"adapt_until", s.adapt_until}};
}

inline void from_json(const json& j, SolverConfig& s) {
  s.rho0 = j.value("rho0", s.rho0);
  s.tau = j.value("tau", s.tau);
  s.eta_ratio = j.value("eta_ratio", s.eta_ratio);
  s.eps_pri = j.value("eps_pri", s.eps_pri);
  s.eps_dual = j.value("eps_dual", s.eps_dual);
  s.max_iterations = j.value("max_iterations", s.max_iterations);
  s.adapt_penalty = j.value("adapt_penalty", s.adapt_penalty);
  s.adapt_until = j.value("adapt_until", s.adapt_until);
}

inline void to_json(json& j, const ExperimentConfig& c) {
  std::vector<std::string> strategies;
  for (auto s : c.strategies) strategies.emplace_back(to_string(s));
  j = json{{"n_sensors", c.n_sensors},
           {"sources", c.sources},
           {"window", c.window},
           {"horizon", c.horizon},
           {"n_caches", c.n_caches},
           {"m_values", c.m_values},
           {"m_totals", c.m_totals},
           {"q_values", c.q_values},
           {"anchor_proportions", c.anchor_proportions},
           {"strategies", strategies},
           {"methods", c.methods},
           {"solver", c.solver},
           {"seeds", c.seeds},
           {"output_dir", c.output_dir},
           {"workers", c.workers}};
}

inline void from_json(const json& j, ExperimentConfig& c) {
  static const std::vector<std::string> known{
      "n_sensors", "sources",  "window",     "horizon", "n_caches", "m_values",
      "m_totals",  "q_values", "anchor_proportions",    "strategies", "methods",
      "solver",    "seeds",    "output_dir", "workers"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw std::invalid_argument("unknown config key '" + item.key() + "'");
  }
  c.n_sensors = j.value("n_sensors", c.n_sensors);
  if (j.contains("sources")) c.sources = j.at("sources").get<SourceModelOptions>();
  c.window = j.value("window", c.window);
  c.horizon = j.value("horizon", c.horizon);
  c.n_caches = j.value("n_caches", c.n_caches);
  c.m_values = j.value("m_values", c.m_values);
  c.m_totals = j.value("m_totals", c.m_totals);
  c.q_values = j.value("q_values", c.q_values);
  c.anchor_proportions = j.value("anchor_proportions", c.anchor_proportions);
  if (j.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : j.at("strategies")) c.strategies.push_back(parse_strategy(s.get<std::string>()));
  }
  c.methods = j.value("methods", c.methods);
  if (j.contains("solver")) c.solver = j.at("solver").get<SolverConfig>();
  c.seeds = j.value("seeds", c.seeds);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.workers = j.value("workers", c.workers);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed config " + path.string() + ": " + e.what());
  }
  auto cfg = j.get<ExperimentConfig>();
  cfg.validate();
  return cfg;
}

/// FNV-1a over the canonical JSON of every field that affects results
/// (output location and worker count excluded).
inline std::string config_hash(const ExperimentConfig& cfg) {
  json j = cfg;
  j.erase("output_dir");
  j.erase("workers");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

/// Mean over caches and windows of ||X^_c(t) - X(t)||_F^2 / ||X(t)||_F^2.
/// estimates[c][i] is cache c's estimate of truth[i]. Frames with zero energy
/// are skipped with a warning.
inline double nmse(const std::vector<std::vector<Eigen::MatrixXd>>& estimates,
                   const std::vector<Eigen::MatrixXd>& truth) {
  detail::require(!estimates.empty() && !truth.empty(), "nmse: empty input");
  double total = 0.0;
  std::size_t terms = 0;
  std::size_t skipped = 0;
  for (const auto& per_cache : estimates) {
    detail::require(per_cache.size() == truth.size(), "nmse: window count mismatch");
    for (std::size_t i = 0; i < truth.size(); ++i) {
      detail::require(per_cache[i].rows() == truth[i].rows() &&
                          per_cache[i].cols() == truth[i].cols(),
                      "nmse: shape mismatch");
      const double energy = truth[i].squaredNorm();
      if (energy == 0.0) {
        ++skipped;
        continue;
      }
      total += (per_cache[i] - truth[i]).squaredNorm() / energy;
      ++terms;
    }
  }
  if (skipped > 0) std::clog << "nmse: skipped " << skipped << " zero-energy frame(s)\n";
  return terms == 0 ? 0.0 : total / static_cast<double>(terms);
}

struct SweepPoint {
  std::size_t n_caches = 0;
  std::size_t m = 0;
  std::size_t q = 0;
  AnchorStrategy strategy = AnchorStrategy::kPairwiseUnion;
  double anchor_proportion = -1.0;  // negative when Q was given directly

  auto key() const { return std::tuple(n_caches, m, q, static_cast<int>(strategy), anchor_proportion); }
  bool operator<(const SweepPoint& o) const { return key() < o.key(); }
  bool operator==(const SweepPoint& o) const { return key() == o.key(); }
};

struct ResultRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string method;
  SweepPoint point;
  double nmse = 0.0;
  double iterations = 0.0;         // mean per window
  double converged_fraction = 1.0; // share of windows that met the stopping rule
  std::size_t comm_scalars = 0;    // summed over windows
  double wall_ms = 0.0;
};

/// Expands the sweep axes for a concrete layout.
inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg, std::size_t n_caches,
                                            const CacheLayout& layout) {
  std::vector<std::size_t> ms;
  if (!cfg.m_totals.empty()) {
    for (std::size_t tot : cfg.m_totals) ms.push_back(tot / n_caches);
  } else {
    ms = cfg.m_values;
  }
  std::vector<SweepPoint> out;
  for (std::size_t m : ms) {
    for (AnchorStrategy st : cfg.strategies) {
      if (!cfg.anchor_proportions.empty()) {
        const std::size_t pool = n_caches > 1 ? union_size(layout, 0, 1) : 0;
        for (double p : cfg.anchor_proportions) {
          const auto q = static_cast<std::size_t>(std::llround(p * static_cast<double>(pool)));
          out.push_back({n_caches, m, q, st, p});
        }
      } else {
        for (std::size_t q : cfg.q_values) out.push_back({n_caches, m, q, st, -1.0});
      }
    }
  }
  return out;
}

/// Everything derived from one seed that does not depend on the sweep point.
struct SeedContext {
  std::uint64_t seed = 0;
  Scenario scenario;
  std::vector<Eigen::MatrixXd> truths;  // one per window, end times W-1 .. T-1
};

inline SeedContext make_seed_context(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedContext ctx;
  ctx.seed = seed;
  ctx.scenario = generate_scenario(cfg.n_sensors, cfg.sources, cfg.horizon, seed);
  for (std::size_t t = cfg.window - 1; t < cfg.horizon; ++t)
    ctx.truths.push_back(window_of(ctx.scenario.series, t, cfg.window).values);
  return ctx;
}

namespace detail {

struct MethodAccumulator {
  std::vector<std::vector<Eigen::MatrixXd>> estimates;
  double iterations = 0.0;
  double converged = 0.0;
  std::size_t comm = 0;
  double wall_ms = 0.0;
  std::size_t windows = 0;

  void add_report(const ConvergenceReport& r) {
    iterations += static_cast<double>(r.iterations);
    converged += r.converged ? 1.0 : 0.0;
    comm += r.comm.total_scalars;
  }
};

inline ResultRecord finish(const std::string& hash, std::uint64_t seed, const std::string& method,
                           const SweepPoint& pt, const MethodAccumulator& acc,
                           const std::vector<Eigen::MatrixXd>& truths, double runs_per_window) {
  ResultRecord r;
  r.config_hash = hash;
  r.seed = seed;
  r.method = method;
  r.point = pt;
  r.nmse = nmse(acc.estimates, truths);
  const double runs = static_cast<double>(truths.size()) * runs_per_window;
  r.iterations = runs > 0 ? acc.iterations / runs : 0.0;
  r.converged_fraction = runs > 0 ? acc.converged / runs : 1.0;
  r.comm_scalars = acc.comm;
  r.wall_ms = acc.wall_ms;
  return r;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// Runs every requested method for one seed at one sweep point.
inline std::vector<ResultRecord> run_point(const ExperimentConfig& cfg, const SeedContext& ctx,
                                           const CacheLayout& layout, const SweepPoint& pt,
                                           const std::shared_ptr<const SparsifyingBasis>& basis) {
  const std::string hash = config_hash(cfg);
  auto wants = [&](const char* m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };
  const bool need_local = wants(kMethodNoncollab) || wants(kMethodAverage) || wants(kMethodPartition);
  const std::size_t n_caches = layout.n_caches();

  const SamplingSchedule schedule = sample_schedule(layout, cfg.horizon, pt.m, ctx.seed);
  std::optional<AnchorPlan> plan;
  if (wants(kMethodCosrAa)) plan = select_anchors(layout, pt.strategy, pt.q, ctx.seed);

  detail::MethodAccumulator central, local, average, partition, cosr;
  for (std::size_t i = 0; i < ctx.truths.size(); ++i) {
    const DataMatrix data = window_of(ctx.scenario.series, cfg.window - 1 + i, cfg.window);
    const MeasurementSet meas = measure_window(schedule, data);

    if (wants(kMethodCentralized)) {
      const auto start = std::chrono::steady_clock::now();
      const bool any = std::any_of(meas.caches.begin(), meas.caches.end(),
                                   [](const auto& m) { return m.y.size() > 0; });
      Eigen::MatrixXd est = Eigen::MatrixXd::Zero(data.values.rows(), data.values.cols());
      if (any) {
        auto res = solve_centralized(meas, basis, cfg.solver);
        central.add_report(res.report);
        est = reconstruct(*basis, res.z.front());
      }
      central.estimates.resize(1);
      central.estimates[0].push_back(std::move(est));
      central.wall_ms += detail::elapsed_ms(start);
    }
    if (need_local) {
      const auto start = std::chrono::steady_clock::now();
      auto results = solve_noncollaborative(meas, basis, cfg.solver);
      std::vector<Eigen::MatrixXd> ests;
      local.estimates.resize(n_caches);
      for (std::size_t c = 0; c < n_caches; ++c) {
        local.add_report(results[c].report);
        ests.push_back(reconstruct(*basis, results[c].z.front()));
        local.estimates[c].push_back(ests.back());
      }
      const double ms = detail::elapsed_ms(start);
      local.wall_ms += ms;
      average.estimates.resize(1);
      average.estimates[0].push_back(baseline_average(ests));
      average.wall_ms += ms;
      partition.estimates.resize(1);
      partition.estimates[0].push_back(baseline_partition(ests, layout));
      partition.wall_ms += ms;
    }
    if (plan) {
      const auto start = std::chrono::steady_clock::now();
      auto res = solve_cosr_aa(make_problem(basis, meas, layout, *plan), cfg.solver);
      cosr.add_report(res.report);
      cosr.estimates.resize(n_caches);
      for (std::size_t c = 0; c < n_caches; ++c)
        cosr.estimates[c].push_back(reconstruct(*basis, res.z[c]));
      cosr.wall_ms += detail::elapsed_ms(start);
    }
  }

  std::vector<ResultRecord> out;
  const double nc = static_cast<double>(n_caches);
  if (wants(kMethodCentralized))
    out.push_back(detail::finish(hash, ctx.seed, kMethodCentralized, pt, central, ctx.truths, 1.0));
  if (wants(kMethodNoncollab))
    out.push_back(detail::finish(hash, ctx.seed, kMethodNoncollab, pt, local, ctx.truths, nc));
  if (wants(kMethodAverage))
    out.push_back(detail::finish(hash, ctx.seed, kMethodAverage, pt, average, ctx.truths, 0.0));
  if (wants(kMethodPartition))
    out.push_back(detail::finish(hash, ctx.seed, kMethodPartition, pt, partition, ctx.truths, 0.0));
  if (plan) out.push_back(detail::finish(hash, ctx.seed, kMethodCosrAa, pt, cosr, ctx.truths, 1.0));
  return out;
}

/// One record per (seed, sweep point, method), sorted deterministically
/// regardless of the worker count.
inline std::vector<ResultRecord> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto basis = std::make_shared<const SparsifyingBasis>(cfg.n_sensors, cfg.window);
  std::vector<ResultRecord> records;
  std::mutex guard;

  auto run_seed = [&](std::uint64_t seed) {
    const SeedContext ctx = make_seed_context(cfg, seed);
    std::vector<ResultRecord> local;
    for (std::size_t n_caches : cfg.n_caches) {
      const CacheLayout layout = assign_coverage(ctx.scenario.field, n_caches);
      for (const auto& pt : sweep_points(cfg, n_caches, layout)) {
        auto recs = run_point(cfg, ctx, layout, pt, basis);
        local.insert(local.end(), recs.begin(), recs.end());
      }
    }
    std::lock_guard lock(guard);
    records.insert(records.end(), local.begin(), local.end());
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, cfg.seeds.size()));
  if (workers == 1) {
    for (auto seed : cfg.seeds) run_seed(seed);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < cfg.seeds.size(); i += workers) run_seed(cfg.seeds[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::sort(records.begin(), records.end(), [](const ResultRecord& a, const ResultRecord& b) {
    return std::tuple(a.point.key(), a.method, a.seed) < std::tuple(b.point.key(), b.method, b.seed);
  });
  return records;
}

struct SummaryRow {
  SweepPoint point;
  std::string method;
  double mean_nmse = 0.0;
  double mean_iterations = 0.0;
  std::size_t n_seeds = 0;
};

/// Seed-averaged curves.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records) {
  std::map<std::pair<SweepPoint, std::string>, SummaryRow> acc;
  for (const auto& r : records) {
    auto& row = acc[{r.point, r.method}];
    row.point = r.point;
    row.method = r.method;
    row.mean_nmse += r.nmse;
    row.mean_iterations += r.iterations;
    ++row.n_seeds;
  }
  std::vector<SummaryRow> out;
  for (auto& [key, row] : acc) {
    row.mean_nmse /= static_cast<double>(row.n_seeds);
    row.mean_iterations /= static_cast<double>(row.n_seeds);
    out.push_back(row);
  }
  return out;
}

inline double mean_nmse(const std::vector<SummaryRow>& rows, const std::string& method,
                        const SweepPoint& pt) {
  for (const auto& r : rows)
    if (r.method == method && r.point == pt) return r.mean_nmse;
  throw std::out_of_range("no summary row for method " + method);
}

inline const char* kCsvHeader =
    "config_hash,seed,method,n_caches,m,q,strategy,anchor_proportion,nmse,iterations,"
    "converged_fraction,comm_scalars,wall_ms";

inline void write_csv(std::ostream& os, const std::vector<ResultRecord>& records) {
  os << kCsvHeader << '\n';
  os.precision(17);
  for (const auto& r : records) {
    os << r.config_hash << ',' << r.seed << ',' << r.method << ',' << r.point.n_caches << ','
       << r.point.m << ',' << r.point.q << ',' << to_string(r.point.strategy) << ','
       << r.point.anchor_proportion << ',' << r.nmse << ',' << r.iterations << ','
       << r.converged_fraction << ',' << r.comm_scalars << ',' << r.wall_ms << '\n';
  }
}

inline std::vector<ResultRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw std::runtime_error("read_csv: missing or unexpected header");
  std::vector<ResultRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 13) throw std::runtime_error("read_csv: bad row '" + line + "'");
    ResultRecord r;
    r.config_hash = f[0];
    r.seed = std::stoull(f[1]);
    r.method = f[2];
    r.point.n_caches = std::stoul(f[3]);
    r.point.m = std::stoul(f[4]);
    r.point.q = std::stoul(f[5]);
    r.point.strategy = parse_strategy(f[6]);
    r.point.anchor_proportion = std::stod(f[7]);
    r.nmse = std::stod(f[8]);
    r.iterations = std::stod(f[9]);
    r.converged_fraction = std::stod(f[10]);
    r.comm_scalars = std::stoull(f[11]);
    r.wall_ms = std::stod(f[12]);
    out.push_back(std::move(r));
  }
  return out;
}

inline json summary_json(const std::vector<ResultRecord>& records) {
  json curves = json::array();
  for (const auto& row : summarize(records)) {
    curves.push_back({{"method", row.method},
                      {"n_caches", row.point.n_caches},
                      {"m", row.point.m},
                      {"q", row.point.q},
                      {"strategy", to_string(row.point.strategy)},
                      {"anchor_proportion", row.point.anchor_proportion},
                      {"mean_nmse", row.mean_nmse},
                      {"mean_iterations", row.mean_iterations},
                      {"n_seeds", row.n_seeds}});
  }
  json j{{"curves", curves}};
  if (!records.empty()) j["config_hash"] = records.front().config_hash;
  return j;
}

inline void write_trace(std::ostream& os, const std::vector<TraceRow>& trace,
                        const std::vector<std::vector<double>>& per_cache_nmse = {}) {
  os << "# cscache-trace v1\n";
  os << "iteration\tr_norm\ts_norm\trho";
  const std::size_t n_caches = per_cache_nmse.empty() ? 0 : per_cache_nmse.front().size();
  for (std::size_t c = 0; c < n_caches; ++c) os << "\tnmse_cache" << c;
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    os << trace[i].iteration << '\t' << trace[i].r_norm << '\t' << trace[i].s_norm << '\t'
       << trace[i].rho;
    if (i < per_cache_nmse.size())
      for (double v : per_cache_nmse[i]) os << '\t' << v;
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Dataset interchange for the learned (unfolded) solver.

struct DatasetSplit {
  std::size_t train = 80;
  std::size_t validation = 20;
  std::size_t test = 25;

  std::size_t total() const { return train + validation + test; }
};

struct DatasetCache {
  IndexList rows;  // positions of Phi_c in vec(X)
  std::vector<double> y;
  bool operator==(const DatasetCache&) const = default;
};

struct DatasetAnchor {
  std::size_t cache_a = 0;
  std::size_t cache_b = 0;
  IndexList rows;  // positions of Gamma in vec(X)
  bool operator==(const DatasetAnchor&) const = default;
};

struct DatasetSample {
  std::size_t deployment = 0;
  std::uint64_t seed = 0;
  std::size_t end_time = 0;
  std::vector<double> x;  // vec(X), column-major
  std::vector<DatasetCache> caches;
  std::vector<DatasetAnchor> anchors;
  bool operator==(const DatasetSample&) const = default;
};

struct Dataset {
  std::string split;
  std::size_t n_sensors = 0;
  std::size_t window = 0;
  std::size_t n_caches = 0;
  std::size_t m = 0;
  std::size_t q = 0;
  std::string strategy;
  std::vector<DatasetSample> samples;
  bool operator==(const Dataset&) const = default;
};

inline void to_json(json& j, const DatasetSample& s) {
  json caches = json::array();
  for (const auto& c : s.caches) caches.push_back({{"rows", c.rows}, {"y", c.y}});
  json anchors = json::array();
  for (const auto& a : s.anchors)
    anchors.push_back({{"cache_a", a.cache_a}, {"cache_b", a.cache_b}, {"rows", a.rows}});
  j = json{{"deployment", s.deployment}, {"seed", s.seed},     {"end_time", s.end_time},
           {"x", s.x},                   {"caches", caches},   {"anchors", anchors}};
}

inline void from_json(const json& j, DatasetSample& s) {
  s.deployment = j.at("deployment").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.end_time = j.at("end_time").get<std::size_t>();
  s.x = j.at("x").get<std::vector<double>>();
  for (const auto& c : j.at("caches"))
    s.caches.push_back({c.at("rows").get<IndexList>(), c.at("y").get<std::vector<double>>()});
  for (const auto& a : j.at("anchors"))
    s.anchors.push_back({a.at("cache_a").get<std::size_t>(), a.at("cache_b").get<std::size_t>(),
                         a.at("rows").get<IndexList>()});
}

inline void to_json(json& j, const Dataset& d) {
  j = json{{"format", "cscache-dataset"}, {"version", 1},        {"split", d.split},
           {"n_sensors", d.n_sensors},    {"window", d.window},  {"n_caches", d.n_caches},
           {"m", d.m},                    {"q", d.q},            {"strategy", d.strategy},
           {"samples", d.samples}};
}

inline void from_json(const json& j, Dataset& d) {
  if (j.value("format", std::string{}) != "cscache-dataset")
    throw std::runtime_error("not a cscache dataset");
  d.split = j.at("split").get<std::string>();
  d.n_sensors = j.at("n_sensors").get<std::size_t>();
  d.window = j.at("window").get<std::size_t>();
  d.n_caches = j.at("n_caches").get<std::size_t>();
  d.m = j.at("m").get<std::size_t>();
  d.q = j.at("q").get<std::size_t>();
  d.strategy = j.at("strategy").get<std::string>();
  d.samples = j.at("samples").get<std::vector<DatasetSample>>();
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  json j;
  in >> j;
  return j.get<Dataset>();
}

struct DatasetExport {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::vector<std::filesystem::path> files;
};

/// Writes train/validation/test JSON files plus `basis.json` into `out_dir`.
/// Each deployment is simulated over split.total() + W - 1 instants so it
/// yields exactly split.total() stride-1 windows, assigned to the splits in
/// time order. Uses the first entry of each sweep axis of `cfg`.
inline DatasetExport export_dataset(const ExperimentConfig& cfg, std::size_t n_deployments,
                                    const DatasetSplit& split,
                                    const std::filesystem::path& out_dir) {
  cfg.validate();
  detail::require(split.total() > 0, "export_dataset: empty split");
  const std::size_t n_caches = cfg.n_caches.front();
  const AnchorStrategy strategy = cfg.strategies.front();
  const std::size_t horizon = split.total() + cfg.window - 1;

  DatasetExport out;
  for (Dataset* d : {&out.train, &out.validation, &out.test}) {
    d->n_sensors = cfg.n_sensors;
    d->window = cfg.window;
    d->n_caches = n_caches;
    d->strategy = std::string(to_string(strategy));
  }
  out.train.split = "train";
  out.validation.split = "validation";
  out.test.split = "test";

  for (std::size_t d = 0; d < n_deployments; ++d) {
    const std::uint64_t seed = cfg.seeds.front() + d;
    const Scenario sc = generate_scenario(cfg.n_sensors, cfg.sources, horizon, seed);
    const CacheLayout layout = assign_coverage(sc.field, n_caches);
    const std::size_t m = cfg.m_totals.empty() ? cfg.m_values.front() : cfg.m_totals.front() / n_caches;
    std::size_t q = cfg.q_values.empty() ? 0 : cfg.q_values.front();
    if (!cfg.anchor_proportions.empty() && n_caches > 1)
      q = static_cast<std::size_t>(std::llround(cfg.anchor_proportions.front() *
                                                static_cast<double>(union_size(layout, 0, 1))));
    for (Dataset* ds : {&out.train, &out.validation, &out.test}) {
      ds->m = m;
      ds->q = q;
    }
    const SamplingSchedule schedule = sample_schedule(layout, horizon, m, seed);
    const AnchorPlan plan = select_anchors(layout, strategy, q, seed);

    for (std::size_t i = 0; i < split.total(); ++i) {
      const DataMatrix data = window_of(sc.series, cfg.window - 1 + i, cfg.window);
      const MeasurementSet meas = measure_window(schedule, data);
      DatasetSample s;
      s.deployment = d;
      s.seed = seed;
      s.end_time = data.end_time;
      const Eigen::VectorXd x = data.vec();
      s.x.assign(x.data(), x.data() + x.size());
      for (const auto& cm : meas.caches)
        s.caches.push_back({cm.rows(cfg.n_sensors), {cm.y.data(), cm.y.data() + cm.y.size()}});
      for (const auto& [pair, set] : plan.pairs())
        s.anchors.push_back({pair.first, pair.second,
                             plan.rows(pair.first, pair.second, cfg.n_sensors, cfg.window)});
      Dataset& target = i < split.train                      ? out.train
                        : i < split.train + split.validation ? out.validation
                                                             : out.test;
      target.samples.push_back(std::move(s));
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  auto write = [&](const std::filesystem::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << j.dump();
    if (!os) throw std::runtime_error("write failed for " + p.string());
    out.files.push_back(p);
  };
  write(out_dir / "train.json", out.train);
  write(out_dir / "validation.json", out.validation);
  write(out_dir / "test.json", out.test);

  const SparsifyingBasis basis(cfg.n_sensors, cfg.window);
  auto rows_of = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> r(static_cast<std::size_t>(m.rows()),
                                       std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index k = 0; k < m.cols(); ++k)
        r[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = m(i, k);
    return r;
  };
  write(out_dir / "basis.json", json{{"format", "cscache-basis"},
                                     {"n_sensors", cfg.n_sensors},
                                     {"window", cfg.window},
                                     {"spatial", rows_of(basis.spatial())},
                                     {"temporal", rows_of(basis.temporal())},
                                     {"config", cfg}});
  return out;
}

}  // namespace cscache
