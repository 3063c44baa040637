#include "slds/mode_params.hpp"

#include "slds/special.hpp"

#include <cmath>
#include <string>

namespace slds {

std::vector<ModeExpectations> mode_expectations(const VariationalPosterior& q) {
  const int k = q.num_modes();
  const Eigen::Index dx = q.mu_mean.cols();
  const Eigen::Index dz = q.rho_a.cols();
  std::vector<ModeExpectations> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto is = static_cast<std::size_t>(i);
    ModeExpectations& m = out[is];
    m.e_rho = q.rho_a.row(i).cwiseQuotient(q.rho_b.row(i)).transpose();
    m.e_log_rho.resize(dz);
    for (Eigen::Index d = 0; d < dz; ++d) m.e_log_rho[d] = digamma(q.rho_a(i, d)) - std::log(q.rho_b(i, d));
    const Matrix& h = q.h_mean[is];
    m.e_rinv_h = m.e_rho.asDiagonal() * h;
    m.e_ht_rinv_h = h.transpose() * m.e_rinv_h + static_cast<double>(dz) * q.h_cov[is];
    m.e_f = q.f_mean[is];
    m.e_ft_f = m.e_f.transpose() * m.e_f + static_cast<double>(dx) * q.f_cov[is];

    m.e_sigma = q.sigma_a.row(i).cwiseQuotient(q.sigma_b.row(i)).transpose();
    m.e_log_sigma.resize(dx);
    for (Eigen::Index d = 0; d < dx; ++d) m.e_log_sigma[d] = digamma(q.sigma_a(i, d)) - std::log(q.sigma_b(i, d));
    const Vector mu = q.mu_mean.row(i).transpose();
    m.e_sigma_mu = m.e_sigma.cwiseProduct(mu);
    m.e_sigma_mu_sq = m.e_sigma.cwiseProduct(mu.cwiseAbs2()) + q.mu_prec.row(i).cwiseInverse().transpose();
  }
  return out;
}

void reset_mode_to_prior(VariationalPosterior& q, int i, const Hyperparameters& hp) {
  const auto is = static_cast<std::size_t>(i);
  q.mu_mean.row(i).setZero();
  q.mu_prec.row(i).setConstant(hp.b_mu[i]);
  q.sigma_a.row(i).setConstant(hp.a_sigma[i]);
  q.sigma_b.row(i).setConstant(hp.b_sigma[i]);
  q.f_mean[is].setZero();
  q.f_cov[is] = hp.zeta.row(i).cwiseInverse().asDiagonal();
  q.h_mean[is].setZero();
  q.h_cov[is] = hp.eta.row(i).cwiseInverse().asDiagonal();
  q.rho_a.row(i).setConstant(hp.a_obs[i]);
  q.rho_b.row(i).setConstant(hp.b_obs[i]);
}

void update_mode_parameters(VariationalPosterior& q, const SufficientStats& stats, const Matrix& unary,
                            const Hyperparameters& hp) {
  const Eigen::Index t_len = stats.sum_mean.rows();
  const Eigen::Index dx = stats.sum_mean.cols();
  const Eigen::Index dz = stats.sum_zz.cols();
  const auto n = static_cast<double>(stats.num_sequences);
  if (unary.rows() != t_len || unary.cols() != q.num_modes()) {
    throw InputError("mode marginals do not match the sufficient statistics");
  }
  if (static_cast<Eigen::Index>(stats.sum_xz.size()) != t_len) {
    throw InputError("sufficient statistics lack observation terms");
  }

  for (int i = 0; i < q.num_modes(); ++i) {
    const auto is = static_cast<std::size_t>(i);
    const Vector w = unary.col(i);
    if (w.sum() < kEmptyModeMass) {
      reset_mode_to_prior(q, i, hp);
      continue;
    }

    // initial state
    const double w1 = w[0];
    for (Eigen::Index d = 0; d < dx; ++d) {
      const double prec = hp.b_mu[i] + n * w1;
      const double mean = w1 * stats.sum_mean(0, d) / prec;
      q.mu_prec(i, d) = prec;
      q.mu_mean(i, d) = mean;
      q.sigma_a(i, d) = hp.a_sigma[i] + 0.5 * n * w1;
      const double resid = w1 * stats.sum_second[0](d, d) - prec * mean * mean;
      q.sigma_b(i, d) = hp.b_sigma[i] + 0.5 * std::max(resid, 0.0);
    }

    // dynamics
    Matrix f_prec = hp.zeta.row(i).asDiagonal();
    Matrix f_moment = Matrix::Zero(dx, dx);
    for (Eigen::Index t = 1; t < t_len; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      f_prec += w[t] * stats.sum_second[ts - 1];
      f_moment += w[t] * stats.sum_cross[ts - 1];
    }
    const auto f_llt = make_spd(f_prec, "dynamics precision of mode " + std::to_string(i));
    Matrix f_cov = f_llt.solve(Matrix::Identity(dx, dx));
    q.f_cov[is] = 0.5 * (f_cov + f_cov.transpose());
    q.f_mean[is] = f_llt.solve(f_moment.transpose()).transpose();

    // emission
    Matrix h_prec = hp.eta.row(i).asDiagonal();
    Matrix xz = Matrix::Zero(dx, dz);
    Vector zz = Vector::Zero(dz);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      h_prec += w[t] * stats.sum_second[ts];
      xz += w[t] * stats.sum_xz[ts];
      zz += w[t] * stats.sum_zz.row(t).transpose();
    }
    const auto h_llt = make_spd(h_prec, "emission precision of mode " + std::to_string(i));
    Matrix h_cov = h_llt.solve(Matrix::Identity(dx, dx));
    q.h_cov[is] = 0.5 * (h_cov + h_cov.transpose());
    q.h_mean[is] = h_llt.solve(xz).transpose();
    const double mass = w.sum();
    for (Eigen::Index d = 0; d < dz; ++d) {
      const Vector h = q.h_mean[is].row(d).transpose();
      const double resid = zz[d] - h.dot(h_prec * h);
      q.rho_a(i, d) = hp.a_obs[i] + 0.5 * n * mass;
      q.rho_b(i, d) = hp.b_obs[i] + 0.5 * std::max(resid, 0.0);
    }
  }
}

ThetaDivergence kl_theta(const VariationalPosterior& q, const Hyperparameters& hp) {
  ThetaDivergence kl;
  const Eigen::Index dx = q.mu_mean.cols();
  const Eigen::Index dz = q.rho_a.cols();
  for (int i = 0; i < q.num_modes(); ++i) {
    const auto is = static_cast<std::size_t>(i);
    for (Eigen::Index d = 0; d < dx; ++d) {
      const double e_sigma = q.sigma_a(i, d) / q.sigma_b(i, d);
      const double ratio = hp.b_mu[i] / q.mu_prec(i, d);
      const double mean = q.mu_mean(i, d);
      kl.initial += kl_gamma(q.sigma_a(i, d), q.sigma_b(i, d), hp.a_sigma[i], hp.b_sigma[i]) +
                    0.5 * (ratio - 1.0 - std::log(ratio) + hp.b_mu[i] * e_sigma * mean * mean);
    }

    const Matrix f_prior = hp.zeta.row(i).asDiagonal();
    const Vector zero = Vector::Zero(dx);
    for (Eigen::Index d = 0; d < dx; ++d) {
      kl.dynamics += kl_gaussian(q.f_mean[is].row(d).transpose(), q.f_cov[is], zero, f_prior);
    }

    const Matrix h_prior = hp.eta.row(i).asDiagonal();
    Matrix h_cov = q.h_cov[is];
    const double log_det_cov = log_det(make_spd(h_cov, "emission covariance of mode " + std::to_string(i)));
    const double log_det_prior = hp.eta.row(i).array().log().sum();
    const double shape_term = (h_prior * q.h_cov[is]).trace() - static_cast<double>(dx) - log_det_cov - log_det_prior;
    for (Eigen::Index d = 0; d < dz; ++d) {
      const double e_rho = q.rho_a(i, d) / q.rho_b(i, d);
      const Vector h = q.h_mean[is].row(d).transpose();
      kl.emission += kl_gamma(q.rho_a(i, d), q.rho_b(i, d), hp.a_obs[i], hp.b_obs[i]) +
                     0.5 * (shape_term + e_rho * h.dot(h_prior * h));
    }
  }
  if (!std::isfinite(kl.total())) throw NumericalError("parameter divergence is not finite");
  return kl;
}

}  // namespace slds
