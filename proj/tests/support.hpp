// Independent reference implementations and random instance generators shared by the unit tests
// and the acceptance runner. Nothing here calls into the engine code it is compared against.

#ifndef SLDS_TESTS_SUPPORT_HPP
#define SLDS_TESTS_SUPPORT_HPP

#include "slds/expectations.hpp"
#include "slds/hmm_chain.hpp"
#include "slds/lds_smoother.hpp"
#include "slds/types.hpp"

#include <random>
#include <vector>

namespace oracle {

using slds::Matrix;
using slds::Vector;

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0);
Matrix random_spd(std::mt19937_64& rng, Eigen::Index d, double floor = 0.2);
double uniform(std::mt19937_64& rng, double lo, double hi);

// time-varying LDS with general SPD noise blocks and empty caches
slds::AuxiliaryLDS random_lds(std::mt19937_64& rng, Eigen::Index t_len, Eigen::Index dx, Eigen::Index dz);

struct DenseSmoothing {
  Matrix mean;                // T x dx
  std::vector<Matrix> cov;    // T
  std::vector<Matrix> cross;  // T-1, E[x_{t+1} x_t^T]
  double entropy = 0.0;
  Matrix joint_cov;  // (T dx) x (T dx)
};

// Joint Gaussian of X and Z written out as one big covariance, then conditioned on Z.
DenseSmoothing dense_smoother(const slds::AuxiliaryLDS& aux, const Matrix& z);

slds::AuxiliaryHMM random_hmm(std::mt19937_64& rng, Eigen::Index k, Eigen::Index t_len, bool normalized_rows = true);

struct PathEnumeration {
  Matrix unary;
  std::vector<Matrix> pairwise;
  double log_z = 0.0;
  double entropy = 0.0;  // -sum p ln p over paths
  std::vector<int> best_path;
};

PathEnumeration enumerate_paths(const slds::AuxiliaryHMM& aux);

// Probability-domain forward-backward with per-step normalization.
slds::ModeMarginals linear_forward_backward(const slds::AuxiliaryHMM& aux);

// Random simplex rows and consistent pairwise joints from a random chain.
struct RandomMarginals {
  Matrix unary;                  // T x K
  std::vector<Matrix> pairwise;  // T-1
};
RandomMarginals random_marginals(std::mt19937_64& rng, Eigen::Index k, Eigen::Index t_len);

std::vector<Matrix> random_phi(std::mt19937_64& rng, Eigen::Index k);

// Straight summation over the raw indices of the update table.
struct NaiveSticks {
  Vector u, v;
};
NaiveSticks naive_update_sticks(const std::vector<Matrix>& phi, double gamma);

struct NaiveTransitions {
  Vector init_u, init_v;
  Matrix trans_u, trans_v;
};
NaiveTransitions naive_update_transitions(const std::vector<Matrix>& phi, const std::vector<Matrix>& pairwise,
                                          const Vector& init_marginal, double alpha0, double alpha, double kappa);

// Per-sequence smoothed moments with random but valid second moments.
std::vector<slds::SmoothedMoments> random_moments(std::mt19937_64& rng, int n, Eigen::Index t_len, Eigen::Index dx);

// Mode blocks recomputed with scalar loops over sequences, time and coordinates.
void naive_mode_parameters(slds::VariationalPosterior& q, const std::vector<slds::SmoothedMoments>& sm,
                           const std::vector<Matrix>& z, const Matrix& unary, const slds::Hyperparameters& hp);

// Random posterior with valid Beta/Gamma parameters and SPD covariances.
slds::VariationalPosterior random_posterior(std::mt19937_64& rng, const slds::Hyperparameters& hp);

// Auxiliary LDS transcribed from the backward recursion with scalar loops, moments taken directly
// from the posterior parameters.
slds::AuxiliaryLDS naive_lambda_x(const slds::VariationalPosterior& q, const Matrix& unary);

// Expected log emission for one mode and time written out for d_x = d_z = 1 and N sequences.
double longhand_log_emission(const slds::VariationalPosterior& q, int mode, Eigen::Index t,
                             const std::vector<slds::SmoothedMoments>& sm, const std::vector<Matrix>& z);

// Bound of a single-mode model: expected log joint + state entropy - parameter divergences,
// all evaluated from first principles.
double single_mode_lds_bound(const slds::VariationalPosterior& q, const slds::Hyperparameters& hp,
                             const std::vector<slds::SmoothedMoments>& sm, const std::vector<Matrix>& z,
                             double state_entropy);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace oracle

#endif  // SLDS_TESTS_SUPPORT_HPP
