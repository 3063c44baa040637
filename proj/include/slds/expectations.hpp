/// @file expectations.hpp Posterior moments of the per-mode parameters and aggregated state statistics.

#ifndef SLDS_EXPECTATIONS_HPP
#define SLDS_EXPECTATIONS_HPP

#include "slds/types.hpp"

namespace slds {

/// Expectations of one mode's parameters under Q(Theta).
struct ModeExpectations {
  Vector e_rho;          // dim_z, E[rho_d]
  Vector e_log_rho;      // dim_z, E[ln rho_d]
  Matrix e_rinv_h;       // dim_z x dim_x, E[R^-1 H]
  Matrix e_ht_rinv_h;    // dim_x x dim_x, E[H^T R^-1 H]
  Matrix e_f;            // dim_x x dim_x
  Matrix e_ft_f;         // dim_x x dim_x, E[F^T F]
  Vector e_sigma;        // dim_x, E[sigma_d]
  Vector e_log_sigma;    // dim_x, E[ln sigma_d]
  Vector e_sigma_mu;     // dim_x, E[sigma_d mu_d]
  Vector e_sigma_mu_sq;  // dim_x, E[sigma_d mu_d^2]
};

std::vector<ModeExpectations> mode_expectations(const VariationalPosterior& q);

/// Moments summed over sequences, indexed by time.
struct SufficientStats {
  int num_sequences = 0;
  Matrix sum_mean;                // T x dim_x, sum_n E[x_t]
  std::vector<Matrix> sum_second; // T, sum_n E[x_t x_t^T]
  std::vector<Matrix> sum_cross;  // T-1, sum_n E[x_{t+1} x_t^T]
  std::vector<Matrix> sum_xz;     // T, sum_n E[x_t] z_t^T (empty until observations are added)
  Matrix sum_zz;                  // T x dim_z, sum_n z_td^2
};

}  // namespace slds

#endif  // SLDS_EXPECTATIONS_HPP
