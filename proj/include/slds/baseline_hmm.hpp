/// @file baseline_hmm.hpp Gaussian-emission HMM fitted by Baum-Welch, decoded by Viterbi.

#ifndef SLDS_BASELINE_HMM_HPP
#define SLDS_BASELINE_HMM_HPP

#include "slds/types.hpp"

#include <cstdint>
#include <vector>

namespace slds {

struct GaussianHmmModel {
  Vector init_probs;         // n
  Matrix trans;              // n x n, rows stochastic
  Matrix means;              // n x d
  std::vector<Matrix> covs;  // n, each d x d SPD
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;

  [[nodiscard]] int n_states() const { return static_cast<int>(means.rows()); }
};

/// Eigenvalues of every covariance are floored here.
inline constexpr double kCovarianceFloor = 1e-6;

/// T x n Gaussian log densities of each row of z under each state.
Matrix gaussian_log_emissions(const GaussianHmmModel& model, const Matrix& z);

/// Baum-Welch from seeded k-means means. Stops when the relative log-likelihood change drops
/// below tol or after max_iters. A state with no responsibility keeps its mean and takes the
/// data covariance.
GaussianHmmModel em_fit(const Matrix& z, int n_states, std::uint64_t seed, int max_iters = 200, double tol = 1e-6);

/// Most probable state path; ties go to the lowest index.
std::vector<int> viterbi_decode(const GaussianHmmModel& model, const Matrix& z);

}  // namespace slds

#endif  // SLDS_BASELINE_HMM_HPP
