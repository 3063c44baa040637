/// @file vbem.hpp Variational Bayes EM for the sticky HDP-SLDS: sweeps, bound assembly and restarts.

#ifndef SLDS_VBEM_HPP
#define SLDS_VBEM_HPP

#include "slds/expectations.hpp"
#include "slds/init.hpp"
#include "slds/types.hpp"

#include <cstdint>
#include <optional>

namespace slds {

/// How transition counts reach the transition sticks.
enum class TransitionUpdate {
  /// Counts split over sticks by posterior responsibility; the chain uses geometric
  /// expectations. Every non-indicator update is then coordinate ascent on one bound.
  kSplit,
  /// Every stick of row i receives sum_k counts(i, k) phi_{ii'}(k); the chain uses the
  /// arithmetic expectation with rows renormalized.
  kPrinted,
  /// kPrinted's stick update plus the indicator update; the chain and the objective charge each
  /// move i -> j with sum_k phi_{ik}(j) E[ln pi'_{ik}]. Every update including the indicators
  /// is coordinate ascent on that objective, but it does not bound the evidence.
  kStickwise,
};

enum class InitMethod { kDynamics, kDirichlet };

struct FitOptions {
  int max_iters = 500;
  double elbo_rel_tol = 1e-6;
  int restarts = 20;
  /// Worker threads for restarts; 0 picks the hardware concurrency. Results do not depend on it.
  int threads = 0;
  std::uint64_t seed = 0;
  double elbo_decrease_tolerance = 1e-4;  // relative
  bool track_trace = true;
  /// Re-estimate the indicator posterior every sweep. When false it stays at its initial value.
  bool update_phi = false;
  TransitionUpdate transition_update = TransitionUpdate::kSplit;
  /// First-sweep responsibilities: clustered local dynamics plus Dirichlet jitter, or jitter only.
  InitMethod init_method = InitMethod::kDynamics;
  /// init.clusters is overridden per seed: seed s cycles through
  /// init_min_clusters..init_max_clusters.
  InitOptions init;
  int init_min_clusters = 2;
  int init_max_clusters = 6;
  /// With more than one restart, the winner is refined by greedy merges: every pair of modes
  /// holding at least merge_min_mass expected time steps is merged and refitted, and the best
  /// candidate replaces the fit if its bound is higher. Up to merge_rounds rounds; 0 disables.
  int merge_rounds = 3;
  double merge_min_mass = 1.0;
  /// Variance of the projected states used to seed the parameter blocks.
  double init_state_variance = 0.1;
};

/// Decrease larger than this (absolute) counts as a warning-level breach.
inline constexpr double kElboNoise = 1e-8;

/// Components of the bound. total() = expected_log_joint + entropies - divergences.
struct ElboTerms {
  double expected_log_joint = 0.0;
  double entropy_x = 0.0;
  double entropy_s = 0.0;
  double kl_init = 0.0;
  double kl_trans = 0.0;
  double kl_sticks = 0.0;
  double kl_indicators = 0.0;
  double kl_theta = 0.0;
  double kl_concentration = 0.0;
  [[nodiscard]] double total() const;
};

/// T x K rows drawn from a symmetric Dirichlet(concentration).
Matrix initial_responsibilities(Eigen::Index t_len, int k, std::uint64_t seed, double concentration = 5.0);

/// Cluster count used by the dynamics initialization for a given seed.
int init_clusters_for_seed(const FitOptions& opts, std::uint64_t seed);

/// Full mutable state of one VBEM run.
struct VbemState {
  Hyperparameters hp;
  VariationalPosterior q;
  Matrix unary;  // T x K mode responsibilities feeding the next state pass
  ModeMarginals marginals;
  std::vector<SmoothedMoments> smoothed;
  SufficientStats stats;
  ElboTerms terms;
  std::vector<double> elbo_trace;
  int iterations = 0;
  int elbo_warnings = 0;
  int elbo_errors = 0;
};

/// Prior posterior, seeded responsibilities (or `init_unary` when given) and one pass of the
/// parameter updates on projected observations, so the first sweep does not start at the
/// all-zero state fixed point.
VbemState init_state(const ObservationSet& obs, const Hyperparameters& hp, const FitOptions& opts, std::uint64_t seed,
                     const Matrix* init_unary = nullptr);

/// One sweep: states, modes, parameter updates, bound, concentrations.
void vbem_iterate(VbemState& state, const ObservationSet& obs, const FitOptions& opts);

/// Bound of the current state. Requires stats with observation terms and marginals consistent
/// with state.q.
ElboTerms compute_elbo(const VariationalPosterior& q, const Hyperparameters& hp, const ModeMarginals& marginals,
                       const std::vector<SmoothedMoments>& smoothed, const SufficientStats& stats,
                       TransitionUpdate transitions = TransitionUpdate::kSplit);

/// Log transition matrix fed to the chain for the given transition scheme.
Matrix chain_log_transitions(const VariationalPosterior& q, TransitionUpdate transitions);

/// Runs one seeded fit to convergence.
FitResult fit_single(const ObservationSet& obs, const Hyperparameters& hp, const FitOptions& opts, std::uint64_t seed,
                     const Matrix* init_unary = nullptr);

/// opts.restarts seeded fits (seeds opts.seed + r); returns the highest final bound, lowest
/// restart index on ties.
FitResult fit(const ObservationSet& obs, const Hyperparameters& hp, const FitOptions& opts);

}  // namespace slds

#endif  // SLDS_VBEM_HPP
