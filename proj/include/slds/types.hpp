/// @file types.hpp Shared domain types for the sticky HDP-SLDS engine.

#ifndef SLDS_TYPES_HPP
#define SLDS_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace slds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration, malformed input files, shape mismatches. Maps to CLI exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical invariant broke (non-SPD block, non-finite bound). Maps to CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Fixed model constants. Per-mode quantities are stored with one entry (or row) per mode so that
/// every mode may carry its own prior.
struct Hyperparameters {
  double gamma = 1.0;   // top-level DP concentration
  double alpha0 = 1.0;  // initial-state stick concentration
  double alpha = 1.0;   // transition DP concentration
  double kappa = 64.0;  // self-transition bonus

  Matrix zeta;     // K x dim_x, ARD precisions on the rows of F_i
  Matrix eta;      // K x dim_x, ARD precisions on the rows of H_i
  Vector a_sigma;  // K, shape of the initial-state precision prior
  Vector b_sigma;  // K, rate of the initial-state precision prior
  Vector b_mu;     // K, prior precision scale of the initial-state mean
  Vector a_obs;    // K, shape of the observation precision prior
  Vector b_obs;    // K, rate of the observation precision prior

  int trunc_k = 20;
  int dim_x = 3;
  int dim_z = 3;

  // Gamma prior on alpha + kappa and Beta prior on kappa / (alpha + kappa).
  double a_alpha_prior = 65.0;
  double b_alpha_prior = 1.0;
  double u_kappa_prior = 64.0;
  double v_kappa_prior = 1.0;
  bool update_concentrations = false;

  /// Broadcast scalar priors to every mode and dimension.
  static Hyperparameters make(int dim_z, int trunc_k = 20, int dim_x = 0, double zeta = 10.0,
                              double eta = 10.0, double a_sigma = 1.0, double b_sigma = 100.0,
                              double b_mu = 100.0, double a_obs = 1.0, double b_obs = 100.0);

  /// Resets the concentration priors to their initial values (a = alpha + kappa, b = 1,
  /// u = kappa, v = alpha).
  void reset_concentration_priors();
};

/// N synchronized sequences of T samples in R^{dim_z}.
struct ObservationSet {
  std::vector<Matrix> sequences;  // each T x dim_z
  Vector channel_scales;          // dim_z factors the raw data was divided by
  std::optional<double> sample_rate_hz;
  std::vector<double> timestamps;  // T, taken from the first sequence; may be empty

  [[nodiscard]] std::size_t num_sequences() const { return sequences.size(); }
  [[nodiscard]] Eigen::Index length() const { return sequences.empty() ? 0 : sequences.front().rows(); }
  [[nodiscard]] Eigen::Index dim() const { return sequences.empty() ? 0 : sequences.front().cols(); }
};

/// Every time-invariant variational parameter.
///
/// phi[i](i2, k) is the probability that stick i2 of row i maps to mode k; each row of phi[i]
/// sums to one. mu_prec holds the precision scale of Q(mu_i | sigma_i): the initial-state block
/// is Normal-Gamma, so the conditional precision of mu_id is mu_prec(i, d) * sigma_id. h_cov is
/// shared across output rows and scaled by 1 / rho_id in the same way.
struct VariationalPosterior {
  Vector stick_u, stick_v;  // K-1
  Vector init_u, init_v;    // K-1
  Matrix trans_u, trans_v;  // K x (K-1)
  std::vector<Matrix> phi;  // K slices, each K x K

  Matrix mu_mean, mu_prec;   // K x dim_x
  Matrix sigma_a, sigma_b;   // K x dim_x
  std::vector<Matrix> f_mean;  // K slices, dim_x x dim_x
  std::vector<Matrix> f_cov;   // K slices, dim_x x dim_x, shared by every row of F_i
  Matrix rho_a, rho_b;         // K x dim_z
  std::vector<Matrix> h_mean;  // K slices, dim_z x dim_x
  std::vector<Matrix> h_cov;   // K slices, dim_x x dim_x

  double alpha_point = 1.0;
  double kappa_point = 0.0;
  double conc_a = 1.0, conc_b = 1.0;  // Gamma posterior on alpha + kappa
  double conc_u = 1.0, conc_v = 1.0;  // Beta posterior on kappa / (alpha + kappa)

  [[nodiscard]] int num_modes() const { return static_cast<int>(phi.size()); }
};

/// Gaussian posterior moments of the hidden states of one sequence.
struct SmoothedMoments {
  Matrix mean;                // T x dim_x
  std::vector<Matrix> cov;    // T
  std::vector<Matrix> cross;  // T-1, cross[t] = E[x_{t+1} x_t^T]
  std::vector<Matrix> second; // T, E[x_t x_t^T]
  double entropy = 0.0;
};

/// Unary and pairwise posteriors over the mode chain.
struct ModeMarginals {
  Matrix unary;                  // T x K
  std::vector<Matrix> pairwise;  // T-1, pairwise[t](i, j) = q(s_t = i, s_{t+1} = j)
  double log_z = 0.0;
  double entropy = 0.0;
};

struct FitResult {
  VariationalPosterior posterior;
  Matrix mode_marginals;  // T x K
  std::vector<int> map_modes;
  std::vector<SmoothedMoments> smoothed;
  std::vector<double> elbo_trace;
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> restart_elbos;
  int elbo_warnings = 0;  // steps whose decrease exceeded numerical noise
  int elbo_errors = 0;    // steps whose decrease exceeded the configured tolerance
  Matrix transition;      // K x K expected transition matrix of the returned fit
  int merges_accepted = 0;

  [[nodiscard]] double final_elbo() const { return elbo_trace.back(); }
};

}  // namespace slds

#endif  // SLDS_TYPES_HPP
