/// @file lds_smoother.hpp Auxiliary linear-Gaussian chain and its Rauch-Tung-Striebel smoother.

#ifndef SLDS_LDS_SMOOTHER_HPP
#define SLDS_LDS_SMOOTHER_HPP

#include "slds/expectations.hpp"
#include "slds/types.hpp"

namespace slds {

/// Time-varying LDS whose likelihood reproduces the expected log joint in X.
///
/// f_hat[t] and u_hat[t] (t = 0..T-2) drive the transition into time t+1. h_hat_t_rinv caches
/// H_t^T R_t^-1 and is filled by compute_lambda_x; rts_smooth recomputes it when empty.
struct AuxiliaryLDS {
  std::vector<Matrix> h_hat;  // T, dim_z x dim_x
  std::vector<Matrix> r_hat;  // T, dim_z x dim_z
  std::vector<Matrix> f_hat;  // T-1, dim_x x dim_x
  std::vector<Matrix> u_hat;  // T-1, dim_x x dim_x
  Vector mu_hat;
  Matrix sigma_hat;

  std::vector<Matrix> h_t_rinv;       // T, dim_x x dim_z
  std::vector<Matrix> h_t_rinv_h;     // T, dim_x x dim_x
};

/// Backward recursion over t = T..1. `unary` holds q(s_t = i) (T x K).
///
/// At t = 1 the initial precision uses sum_i q(s_1 = i) E[Sigma_i^-1] instead of the identity.
AuxiliaryLDS compute_lambda_x(const std::vector<ModeExpectations>& modes, const Matrix& unary);
AuxiliaryLDS compute_lambda_x(const VariationalPosterior& q, const Matrix& unary);

/// Forward information-form filter plus backward RTS pass for one sequence z (T x dim_z).
SmoothedMoments rts_smooth(const AuxiliaryLDS& aux, const Matrix& z);

/// Sums moments over sequences. Throws InputError on length mismatch.
SufficientStats sufficient_stats(const std::vector<SmoothedMoments>& sm);

/// Adds the observation cross terms sum_n E[x_t] z_t^T and sum_n z_td^2.
void add_observation_stats(SufficientStats& stats, const std::vector<SmoothedMoments>& sm, const ObservationSet& obs);

}  // namespace slds

#endif  // SLDS_LDS_SMOOTHER_HPP
