/// @file init.hpp Data-driven first-sweep mode responsibilities.

#ifndef SLDS_INIT_HPP
#define SLDS_INIT_HPP

#include "slds/types.hpp"

#include <vector>

namespace slds {

/// Per time step: least-squares one-step autoregression fitted to the observations in a window
/// centred on t (entries of the AR matrix plus log residual scale per channel), all sequences
/// side by side. Columns standardized. T x N(d_z^2 + d_z).
Matrix window_ar_features(const ObservationSet& obs, int window);

/// Lloyd iterations from a deterministic farthest-first start (first centre is the row closest
/// to the feature mean). Returns labels in [0, k).
std::vector<int> kmeans_labels(const Matrix& features, int k, int max_iters = 50);

/// EM for an autoregressive HMM on the observations (z_t ~ N(A_j z_{t-1}, C_j), fixed transition
/// matrix with self-probability `stay`), started from `resp` (T x k). Returns the final T x k
/// posterior mode marginals.
Matrix ar_hmm_responsibilities(const ObservationSet& obs, Matrix resp, int em_iters, double stay);

struct InitOptions {
  int clusters = 3;
  int window = 30;
  int em_iters = 20;
  double stay = 0.98;
  double weight = 0.8;               // mass on the clustered modes; the rest is Dirichlet jitter
  double jitter_concentration = 5.0;
};

/// T x trunc_k responsibilities: weight * (AR-HMM posterior over the first `clusters` modes) plus
/// (1 - weight) * seeded symmetric Dirichlet rows.
Matrix dynamics_responsibilities(const ObservationSet& obs, int trunc_k, std::uint64_t seed,
                                 const InitOptions& opts);

}  // namespace slds

#endif  // SLDS_INIT_HPP
