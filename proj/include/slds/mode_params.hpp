/// @file mode_params.hpp Conjugate updates and KL divergences of the per-mode parameter blocks.
///
/// Block layout per mode i:
///   initial state  sigma_id ~ Ga(a, b),  mu_id | sigma_id ~ N(m, (prec * sigma_id)^-1)
///   dynamics       rows of F_i ~ N(f_mean row, f_cov), prior N(0, diag(zeta_i)^-1)
///   emission       rho_id ~ Ga(a, b),  row d of H_i | rho_id ~ N(h_mean row, h_cov / rho_id)

#ifndef SLDS_MODE_PARAMS_HPP
#define SLDS_MODE_PARAMS_HPP

#include "slds/expectations.hpp"
#include "slds/types.hpp"

namespace slds {

/// Modes whose total responsibility is below this value are reset to their prior.
inline constexpr double kEmptyModeMass = 1e-8;

/// Replaces the mean/precision/Gamma blocks of every mode. `stats` must carry observation terms.
void update_mode_parameters(VariationalPosterior& q, const SufficientStats& stats, const Matrix& unary,
                            const Hyperparameters& hp);

/// Resets the parameter blocks of mode i to the prior.
void reset_mode_to_prior(VariationalPosterior& q, int i, const Hyperparameters& hp);

struct ThetaDivergence {
  double initial = 0.0;
  double dynamics = 0.0;
  double emission = 0.0;
  [[nodiscard]] double total() const { return initial + dynamics + emission; }
};

ThetaDivergence kl_theta(const VariationalPosterior& q, const Hyperparameters& hp);

}  // namespace slds

#endif  // SLDS_MODE_PARAMS_HPP
