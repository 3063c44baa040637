/// @file special.hpp Special functions and closed-form divergences used across the engine.

#ifndef SLDS_SPECIAL_HPP
#define SLDS_SPECIAL_HPP

#include "slds/types.hpp"

namespace slds {

/// Smallest argument handed to log/digamma. Keeps -inf out of the recursions.
inline constexpr double kLogFloor = 1e-12;

double digamma(double x);
double safe_log(double x);

/// log(sum(exp(v))) with max subtraction; returns -inf for an all -inf input.
double log_sum_exp(const Eigen::Ref<const Vector>& v);

/// KL(Beta(u, v) || Beta(u0, v0)).
double kl_beta(double u, double v, double u0, double v0);

/// KL(Gamma(a, b) || Gamma(a0, b0)), shape/rate parameterization.
double kl_gamma(double a, double b, double a0, double b0);

/// KL(N(m, S) || N(m0, S0)) where the prior is given by its precision P0.
double kl_gaussian(const Vector& m, const Matrix& cov, const Vector& m0, const Matrix& prior_prec);

/// Symmetrize in place and return a Cholesky factorization. If the block is not numerically
/// positive definite, diagonal jitter is added in growing steps starting from 1e-10; throws
/// NumericalError with `what` in the message after the last attempt.
Eigen::LLT<Matrix> make_spd(Matrix& m, const std::string& what);

/// log|A| from a Cholesky factorization.
double log_det(const Eigen::LLT<Matrix>& llt);

}  // namespace slds

#endif  // SLDS_SPECIAL_HPP
