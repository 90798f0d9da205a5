#pragma once

// Sparse recovery over a cache network: centralized basis pursuit, the
// non-collaborative and baseline variants, and collaborative recovery by
// anchor alignment (consensus ADMM where neighboring caches only agree on the
// reconstructed observations of shared anchor sensors).

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cscache/basis.hpp"
#include "cscache/caching.hpp"
#include "cscache/errors.hpp"
#include "cscache/netsim.hpp"

namespace cscache {

struct SolverConfig {
  double rho0 = 10.0;
  double tau = 2.0;        // penalty scale factor
  double eta_ratio = 10.0; // residual ratio that triggers a penalty change
  double eps_pri = 0.004;  // bound on the squared primal residual
  double eps_dual = 1.5;   // bound on the squared dual residual
  std::size_t max_iterations = 3000;
  bool adapt_penalty = true;
  // Penalty adaptation runs for this many iterations, then rho is frozen (0: no limit).
  // Residual balancing at every iteration can cycle indefinitely, and with two
  // penalties alternating the iteration can diverge; a frozen penalty brings
  // back the fixed-penalty convergence guarantee.
  std::size_t adapt_until = 300;

  void validate() const {
    detail::require(rho0 > 0.0, "rho0 must be positive");
    detail::require(tau > 1.0, "tau must exceed 1");
    detail::require(eta_ratio > 1.0, "eta_ratio must exceed 1");
    detail::require(eps_pri > 0.0 && eps_dual > 0.0, "thresholds must be positive");
  }
};

inline double soft_threshold(double a, double kappa) {
  if (a > kappa) return a - kappa;
  if (a < -kappa) return a + kappa;
  return 0.0;
}

struct AnchorLink {
  std::size_t neighbor = 0;
  IndexList rows;  // positions of Gamma_{c,c'} in vec(X)
};

struct CacheProblem {
  IndexList rows;  // positions of Phi_c in vec(X)
  Eigen::VectorXd y;
  std::vector<AnchorLink> links;
};

struct RecoveryProblem {
  std::shared_ptr<const SparsifyingBasis> basis;
  std::vector<CacheProblem> caches;

  std::size_t dimension() const { return basis->dimension(); }

  std::vector<IndexList> neighbor_lists() const {
    std::vector<IndexList> out(caches.size());
    for (std::size_t c = 0; c < caches.size(); ++c)
      for (const auto& link : caches[c].links) out[c].push_back(link.neighbor);
    return out;
  }

  void validate() const {
    detail::require(basis != nullptr, "recovery problem needs a basis");
    const std::size_t dim = dimension();
    for (std::size_t c = 0; c < caches.size(); ++c) {
      const auto& cp = caches[c];
      detail::require(cp.y.size() == static_cast<Eigen::Index>(cp.rows.size()),
                      "measurement vector length must match its selection rows");
      for (std::size_t r : cp.rows) detail::require(r < dim, "selection row out of range");
      for (const auto& link : cp.links) {
        detail::require(link.neighbor < caches.size() && link.neighbor != c,
                        "invalid anchor link");
        for (std::size_t r : link.rows) detail::require(r < dim, "anchor row out of range");
        const auto& back = caches[link.neighbor].links;
        bool mirrored = false;
        for (const auto& b : back) mirrored |= (b.neighbor == c && b.rows == link.rows);
        detail::require(mirrored, "anchor links must be symmetric with identical anchor sets");
      }
    }
  }
};

inline CacheProblem local_problem(const CacheMeasurements& m, std::size_t n_sensors) {
  return {m.rows(n_sensors), m.y, {}};
}

/// Collaborative problem: each cache keeps its own measurements and is linked
/// to its layout neighbors through the pair's anchor rows.
inline RecoveryProblem make_problem(std::shared_ptr<const SparsifyingBasis> basis,
                                    const MeasurementSet& meas, const CacheLayout& layout,
                                    const AnchorPlan& plan) {
  detail::require(meas.caches.size() == layout.n_caches(), "measurement/layout cache mismatch");
  RecoveryProblem p{std::move(basis), {}};
  for (std::size_t c = 0; c < layout.n_caches(); ++c) {
    CacheProblem cp = local_problem(meas.caches[c], meas.n_sensors);
    for (std::size_t nb : layout.neighbors[c])
      cp.links.push_back({nb, plan.rows(c, nb, meas.n_sensors, meas.window)});
    p.caches.push_back(std::move(cp));
  }
  return p;
}

/// Fusion-center problem: all caches' measurements stacked into one agent.
inline RecoveryProblem make_centralized_problem(std::shared_ptr<const SparsifyingBasis> basis,
                                                const MeasurementSet& meas) {
  CacheProblem all;
  Eigen::Index total = 0;
  for (const auto& m : meas.caches) total += m.y.size();
  all.y.resize(total);
  Eigen::Index at = 0;
  for (const auto& m : meas.caches) {
    const IndexList rows = m.rows(meas.n_sensors);
    all.rows.insert(all.rows.end(), rows.begin(), rows.end());
    all.y.segment(at, m.y.size()) = m.y;
    at += m.y.size();
  }
  return {std::move(basis), {std::move(all)}};
}

/// The z-update system matrix (Phi Psi)^T Phi Psi + 2 sum (Gamma Psi)^T Gamma Psi + I.
/// Phi and Gamma pick rows of the identity and Psi is orthonormal, so the matrix
/// equals Psi^T (I + D) Psi with D diagonal (selection counts in signal space).
/// That is an exact eigendecomposition; it does not depend on rho and is built
/// once per cache.
class ZUpdateSystem {
 public:
  ZUpdateSystem(std::shared_ptr<const SparsifyingBasis> basis, const CacheProblem& cp)
      : basis_(std::move(basis)) {
    const auto dim = static_cast<Eigen::Index>(basis_->dimension());
    Eigen::VectorXd diag = Eigen::VectorXd::Ones(dim);
    for (std::size_t r : cp.rows) diag(static_cast<Eigen::Index>(r)) += 1.0;
    for (const auto& link : cp.links)
      for (std::size_t r : link.rows) diag(static_cast<Eigen::Index>(r)) += 2.0;
    if (diag.minCoeff() <= 0.0) throw std::logic_error("z-update system is not positive definite");
    eigenvalues_ = diag;
    inverse_ = diag.cwiseInverse();
  }

  /// Eigenvalues in signal space (1 + selection counts).
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

  /// Applies the inverse to a right-hand side given in signal space (Psi * rhs).
  Eigen::VectorXd solve_signal(const Eigen::Ref<const Eigen::VectorXd>& signal_rhs) const {
    return inverse_.cwiseProduct(signal_rhs);
  }

  /// Solves the system for a right-hand side in the sparse domain.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& rhs) const {
    return basis_->analyze(solve_signal(basis_->synthesize(rhs)));
  }

  /// Explicit matrix; tests and tiny instances only.
  Eigen::MatrixXd dense() const {
    const Eigen::MatrixXd psi = basis_->dense();
    return psi.transpose() * eigenvalues_.asDiagonal() * psi;
  }

 private:
  std::shared_ptr<const SparsifyingBasis> basis_;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd inverse_;
};

/// Per-cache iterates. The multipliers nu_{c',c} and the consensus variables
/// v_{c,c'} are not stored: with equal zero initialization nu_{c',c} = mu_{c,c'}
/// and v_{c,c'} is the mean of the two caches' anchor observations.
struct CacheState {
  Eigen::VectorXd z;
  Eigen::VectorXd z_tilde;
  Eigen::VectorXd lambda;
  std::vector<Eigen::VectorXd> mu;           // one per link
  Eigen::VectorXd xi;
  Eigen::VectorXd signal;                    // Psi z
  std::vector<Eigen::VectorXd> anchors_out;  // Gamma Psi z_c, per link
  std::vector<Eigen::VectorXd> anchors_in;   // Gamma Psi z_{c'}, as last received

  // previous iterate, kept for the dual residual
  Eigen::VectorXd z_tilde_prev;
  std::vector<Eigen::VectorXd> anchors_out_prev;
  std::vector<Eigen::VectorXd> anchors_in_prev;
};

struct AdmmState {
  std::vector<CacheState> caches;
  double rho = 10.0;
  double dual_step = 10.0;  // penalty that produced the current primal iterate
  std::size_t iteration = 0;
  double r_norm = 0.0;
  double s_norm = 0.0;
};

inline AdmmState initial_state(const RecoveryProblem& problem, double rho0) {
  const auto dim = static_cast<Eigen::Index>(problem.dimension());
  AdmmState st;
  st.rho = rho0;
  st.dual_step = rho0;
  for (const auto& cp : problem.caches) {
    CacheState cs;
    cs.z = Eigen::VectorXd::Zero(dim);
    cs.z_tilde = Eigen::VectorXd::Zero(dim);
    cs.xi = Eigen::VectorXd::Zero(dim);
    cs.signal = Eigen::VectorXd::Zero(dim);
    cs.z_tilde_prev = cs.z_tilde;
    cs.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cp.rows.size()));
    for (const auto& link : cp.links) {
      const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(link.rows.size()));
      cs.mu.push_back(zero);
      cs.anchors_out.push_back(zero);
      cs.anchors_in.push_back(zero);
    }
    cs.anchors_out_prev = cs.anchors_out;
    cs.anchors_in_prev = cs.anchors_in;
    st.caches.push_back(std::move(cs));
  }
  return st;
}

inline std::vector<ZUpdateSystem> build_systems(const RecoveryProblem& problem) {
  std::vector<ZUpdateSystem> out;
  out.reserve(problem.caches.size());
  for (const auto& cp : problem.caches) out.emplace_back(problem.basis, cp);
  return out;
}

namespace detail {

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const IndexList& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// target[rows] += scale * values, accumulating duplicates
inline void scatter_add(Eigen::VectorXd& target, const IndexList& rows,
                        const Eigen::VectorXd& values, double scale) {
  for (std::size_t i = 0; i < rows.size(); ++i)
    target(static_cast<Eigen::Index>(rows[i])) += scale * values(static_cast<Eigen::Index>(i));
}

}  // namespace detail

/// One synchronous iteration at every cache, in order: lambda, mu, xi, z, z~.
/// Uses the anchor messages received for the previous iterate; the caller
/// must deliver the new `anchors_out` before the next step.
///
/// The multiplier steps use `state.dual_step`, the penalty the previous primal
/// iterate was computed with, and the primal steps use `rho`. With a varying
/// penalty, stepping the multipliers with the new value instead makes the
/// iteration diverge.
inline void cosr_aa_step(AdmmState& state, const RecoveryProblem& problem,
                         const std::vector<ZUpdateSystem>& systems, double rho) {
  const SparsifyingBasis& basis = *problem.basis;
  const double kappa = 1.0 / rho;
  const double step = state.dual_step;
  for (std::size_t c = 0; c < problem.caches.size(); ++c) {
    const CacheProblem& cp = problem.caches[c];
    CacheState& cs = state.caches[c];

    cs.lambda += step * (detail::gather(cs.signal, cp.rows) - cp.y);
    for (std::size_t l = 0; l < cp.links.size(); ++l)
      cs.mu[l] += 0.5 * step * (cs.anchors_out[l] - cs.anchors_in[l]);
    cs.xi += step * (cs.z - cs.z_tilde);

    // Psi times the right-hand side of the z update, assembled in signal space
    Eigen::VectorXd rhs = basis.synthesize(rho * cs.z_tilde - cs.xi);
    detail::scatter_add(rhs, cp.rows, rho * cp.y - cs.lambda, 1.0);
    for (std::size_t l = 0; l < cp.links.size(); ++l) {
      const auto& rows = cp.links[l].rows;
      detail::scatter_add(rhs, rows, cs.anchors_out[l] + cs.anchors_in[l], rho);
      detail::scatter_add(rhs, rows, cs.mu[l], -2.0);
    }
    cs.signal = systems[c].solve_signal(rhs) / rho;
    cs.z = basis.analyze(cs.signal);

    cs.z_tilde_prev = cs.z_tilde;
    for (Eigen::Index i = 0; i < cs.z.size(); ++i)
      cs.z_tilde(i) = soft_threshold(cs.z(i) + cs.xi(i) / rho, kappa);

    cs.anchors_out_prev = cs.anchors_out;
    for (std::size_t l = 0; l < cp.links.size(); ++l)
      cs.anchors_out[l] = detail::gather(cs.signal, cp.links[l].rows);
  }
  state.dual_step = rho;
  ++state.iteration;
}

/// Sends every cache's fresh anchor observations to its neighbors.
inline void exchange_anchors(AdmmState& state, SyncNetwork& network) {
  std::vector<std::vector<Eigen::VectorXd>> outgoing;
  outgoing.reserve(state.caches.size());
  for (const auto& cs : state.caches) outgoing.push_back(cs.anchors_out);
  auto incoming = network.exchange_round(outgoing);
  for (std::size_t c = 0; c < state.caches.size(); ++c) {
    state.caches[c].anchors_in_prev = std::move(state.caches[c].anchors_in);
    state.caches[c].anchors_in = std::move(incoming[c]);
  }
}

struct ResidualNorms {
  double primal = 0.0;  // ||r||_2
  double dual = 0.0;    // ||s||_2
};

/// Primal and dual residual norms of the iterate just produced with penalty rho.
inline ResidualNorms residuals(const AdmmState& state, const RecoveryProblem& problem,
                               double rho) {
  const SparsifyingBasis& basis = *problem.basis;
  double r2 = 0.0;
  double s2 = 0.0;
  for (std::size_t c = 0; c < problem.caches.size(); ++c) {
    const CacheProblem& cp = problem.caches[c];
    const CacheState& cs = state.caches[c];
    r2 += (detail::gather(cs.signal, cp.rows) - cp.y).squaredNorm();
    r2 += (cs.z - cs.z_tilde).squaredNorm();

    Eigen::VectorXd dual = cs.z_tilde_prev - cs.z_tilde;
    if (!cp.links.empty()) {
      Eigen::VectorXd back = Eigen::VectorXd::Zero(cs.z.size());
      for (std::size_t l = 0; l < cp.links.size(); ++l) {
        r2 += 0.5 * (cs.anchors_out[l] - cs.anchors_in[l]).squaredNorm();
        const Eigen::VectorXd delta = cs.anchors_out_prev[l] - cs.anchors_out[l] +
                                      cs.anchors_in_prev[l] - cs.anchors_in[l];
        detail::scatter_add(back, cp.links[l].rows, delta, 1.0);
      }
      dual += basis.analyze(back);
    }
    s2 += dual.squaredNorm();
  }
  return {std::sqrt(r2), rho * std::sqrt(s2)};
}

inline double adapt_penalty(double rho, double r_norm, double s_norm, double tau,
                            double eta_ratio) {
  if (r_norm > eta_ratio * s_norm) return tau * rho;
  if (s_norm > eta_ratio * r_norm) return rho / tau;
  return rho;
}

struct TraceRow {
  std::size_t iteration = 0;
  double r_norm = 0.0;
  double s_norm = 0.0;
  double rho = 0.0;  // penalty used in this iteration
};

struct ConvergenceReport {
  bool converged = false;
  std::size_t iterations = 0;
  double r_norm = 0.0;
  double s_norm = 0.0;
  double final_rho = 0.0;
  CommReport comm;
  std::vector<TraceRow> trace;
};

struct RecoveryResult {
  std::vector<Eigen::VectorXd> z;  // one sparse estimate per cache
  ConvergenceReport report;
};

using IterationObserver = std::function<void(const AdmmState&)>;

struct SolveOptions {
  SyncNetwork* network = nullptr;  // optional external network (e.g. to keep message records)
  IterationObserver observer;      // called after each iteration's exchange
  bool keep_trace = false;
  double bytes_per_scalar = 8.0;
};

/// Iterates until ||r||^2 <= eps_pri and ||s||^2 <= eps_dual, or the iteration
/// cap. Hitting the cap returns the last iterate with `converged = false`.
inline RecoveryResult solve_cosr_aa(const RecoveryProblem& problem, const SolverConfig& config,
                                    const SolveOptions& options = {}) {
  config.validate();
  problem.validate();
  const auto neighbors = problem.neighbor_lists();
  detail::require(is_connected(neighbors), "solve_cosr_aa: cache graph must be connected");

  std::unique_ptr<SyncNetwork> own_network;
  SyncNetwork* network = options.network;
  if (network == nullptr) {
    own_network = std::make_unique<SyncNetwork>(neighbors, problem.dimension());
    network = own_network.get();
  }

  const auto systems = build_systems(problem);
  AdmmState state = initial_state(problem, config.rho0);
  RecoveryResult result;
  while (state.iteration < config.max_iterations) {
    const double rho = state.rho;
    cosr_aa_step(state, problem, systems, rho);
    exchange_anchors(state, *network);
    const ResidualNorms res = residuals(state, problem, rho);
    state.r_norm = res.primal;
    state.s_norm = res.dual;
    if (options.keep_trace) result.report.trace.push_back({state.iteration, res.primal, res.dual, rho});
    if (options.observer) options.observer(state);
    if (res.primal * res.primal <= config.eps_pri && res.dual * res.dual <= config.eps_dual) {
      result.report.converged = true;
      break;
    }
    if (config.adapt_penalty && (config.adapt_until == 0 || state.iteration < config.adapt_until))
      state.rho = adapt_penalty(rho, res.primal, res.dual, config.tau, config.eta_ratio);
  }
  result.report.iterations = state.iteration;
  result.report.r_norm = state.r_norm;
  result.report.s_norm = state.s_norm;
  result.report.final_rho = state.rho;
  result.report.comm = comm_report(network->log(), network->log().rounds, options.bytes_per_scalar);
  for (auto& cs : state.caches) result.z.push_back(std::move(cs.z));
  return result;
}

/// Basis pursuit on all caches' measurements: the single-agent, anchor-free
/// case of the collaborative iteration.
inline RecoveryResult solve_centralized(const MeasurementSet& meas,
                                        std::shared_ptr<const SparsifyingBasis> basis,
                                        const SolverConfig& config) {
  auto problem = make_centralized_problem(std::move(basis), meas);
  detail::require(!problem.caches.front().rows.empty(),
                  "solve_centralized: need at least one measurement");
  return solve_cosr_aa(problem, config);
}

/// Each cache recovers the whole field from its own measurements only.
inline std::vector<RecoveryResult> solve_noncollaborative(
    const MeasurementSet& meas, std::shared_ptr<const SparsifyingBasis> basis,
    const SolverConfig& config) {
  std::vector<RecoveryResult> out;
  for (const auto& m : meas.caches) {
    RecoveryProblem p{basis, {local_problem(m, meas.n_sensors)}};
    out.push_back(solve_cosr_aa(p, config));
  }
  return out;
}

/// N x W field estimate for a sparse vector.
inline Eigen::MatrixXd reconstruct(const SparsifyingBasis& basis, const Eigen::VectorXd& z) {
  const Eigen::VectorXd x = basis.synthesize(z);
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), static_cast<Eigen::Index>(basis.n_sensors()),
                                           static_cast<Eigen::Index>(basis.window()));
}

inline Eigen::MatrixXd baseline_average(const std::vector<Eigen::MatrixXd>& estimates) {
  detail::require(!estimates.empty(), "baseline_average: no estimates");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(estimates.front().rows(), estimates.front().cols());
  for (const auto& e : estimates) {
    detail::require(e.rows() == sum.rows() && e.cols() == sum.cols(),
                    "baseline_average: shape mismatch");
    sum += e;
  }
  return sum / static_cast<double>(estimates.size());
}

/// Row n of the output comes from the first cache whose coverage contains n.
inline Eigen::MatrixXd baseline_partition(const std::vector<Eigen::MatrixXd>& estimates,
                                          const CacheLayout& layout) {
  detail::require(!estimates.empty() && estimates.size() == layout.n_caches(),
                  "baseline_partition: one estimate per cache required");
  const Eigen::Index n = estimates.front().rows();
  const Eigen::Index w = estimates.front().cols();
  detail::require(n == static_cast<Eigen::Index>(layout.n_sensors),
                  "baseline_partition: estimate rows must equal sensor count");
  Eigen::MatrixXd out(n, w);
  std::vector<bool> filled(static_cast<std::size_t>(n), false);
  for (std::size_t c = 0; c < layout.n_caches(); ++c) {
    detail::require(estimates[c].rows() == n && estimates[c].cols() == w,
                    "baseline_partition: shape mismatch");
    for (std::size_t s : layout.coverage[c]) {
      if (filled[s]) continue;
      out.row(static_cast<Eigen::Index>(s)) = estimates[c].row(static_cast<Eigen::Index>(s));
      filled[s] = true;
    }
  }
  for (std::size_t s = 0; s < filled.size(); ++s)
    detail::require(filled[s], "baseline_partition: sensor " + std::to_string(s) +
                                   " is in no coverage");
  return out;
}

}  // namespace cscache
