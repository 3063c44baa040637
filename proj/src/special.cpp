#include "slds/special.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <limits>

namespace slds {

double digamma(double x) { return boost::math::digamma(std::max(x, kLogFloor)); }

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double kl_beta(double u, double v, double u0, double v0) {
  const double log_b = std::lgamma(u) + std::lgamma(v) - std::lgamma(u + v);
  const double log_b0 = std::lgamma(u0) + std::lgamma(v0) - std::lgamma(u0 + v0);
  return log_b0 - log_b + (u - u0) * digamma(u) + (v - v0) * digamma(v) +
         (u0 - u + v0 - v) * digamma(u + v);
}

double kl_gamma(double a, double b, double a0, double b0) {
  return (a - a0) * digamma(a) - std::lgamma(a) + std::lgamma(a0) + a0 * (std::log(b) - std::log(b0)) +
         a * (b0 - b) / b;
}

double kl_gaussian(const Vector& m, const Matrix& cov, const Vector& m0, const Matrix& prior_prec) {
  const auto d = static_cast<double>(m.size());
  const Vector diff = m - m0;
  Matrix c = cov;
  Matrix p = prior_prec;
  const double log_det_cov = log_det(make_spd(c, "kl covariance"));
  const double log_det_prec = log_det(make_spd(p, "kl prior precision"));
  return 0.5 * ((prior_prec * cov).trace() + diff.dot(prior_prec * diff) - d - log_det_cov - log_det_prec);
}

Eigen::LLT<Matrix> make_spd(Matrix& m, const std::string& what) {
  m = 0.5 * (m + m.transpose());
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
  for (double jitter = 1e-10; jitter < 1e-2; jitter *= 10.0) {
    Matrix trial = m;
    trial.diagonal().array() += jitter * scale;
    llt.compute(trial);
    if (llt.info() == Eigen::Success) {
      m = trial;
      return llt;
    }
  }
  throw NumericalError("matrix not positive definite: " + what);
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace slds
