#include "slds/core_model.hpp"

#include "slds/hdp_sticky.hpp"

#include <cmath>
#include <string>

namespace slds {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InputError(std::string("hyperparameter '") + name + "' must be positive and finite");
  }
}

void require_positive(const Matrix& values, const char* name, Eigen::Index rows, Eigen::Index cols) {
  if (values.rows() != rows || values.cols() != cols) {
    throw InputError(std::string("hyperparameter '") + name + "' has shape " + std::to_string(values.rows()) + "x" +
                     std::to_string(values.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  if (!values.allFinite() || (values.array() <= 0.0).any()) {
    throw InputError(std::string("hyperparameter '") + name + "' must be positive and finite");
  }
}

}  // namespace

Hyperparameters Hyperparameters::make(int dim_z, int trunc_k, int dim_x, double zeta, double eta, double a_sigma,
                                      double b_sigma, double b_mu, double a_obs, double b_obs) {
  Hyperparameters hp;
  hp.trunc_k = trunc_k;
  hp.dim_z = dim_z;
  hp.dim_x = dim_x > 0 ? dim_x : dim_z;
  hp.zeta = Matrix::Constant(trunc_k, hp.dim_x, zeta);
  hp.eta = Matrix::Constant(trunc_k, hp.dim_x, eta);
  hp.a_sigma = Vector::Constant(trunc_k, a_sigma);
  hp.b_sigma = Vector::Constant(trunc_k, b_sigma);
  hp.b_mu = Vector::Constant(trunc_k, b_mu);
  hp.a_obs = Vector::Constant(trunc_k, a_obs);
  hp.b_obs = Vector::Constant(trunc_k, b_obs);
  hp.reset_concentration_priors();
  return hp;
}

void Hyperparameters::reset_concentration_priors() {
  a_alpha_prior = alpha + kappa;
  b_alpha_prior = 1.0;
  u_kappa_prior = kappa;
  v_kappa_prior = alpha;
}

void validate_hyperparameters(const Hyperparameters& hp) {
  require_positive(hp.gamma, "gamma");
  require_positive(hp.alpha0, "alpha0");
  require_positive(hp.alpha, "alpha");
  if (!(hp.kappa >= 0.0) || !std::isfinite(hp.kappa)) {
    throw InputError("hyperparameter 'kappa' must be nonnegative and finite");
  }
  if (hp.trunc_k < 2) throw InputError("hyperparameter 'trunc_k' must be at least 2");
  if (hp.dim_x < 1) throw InputError("hyperparameter 'dim_x' must be at least 1");
  if (hp.dim_z < 1) throw InputError("hyperparameter 'dim_z' must be at least 1");
  const Eigen::Index k = hp.trunc_k;
  require_positive(hp.zeta, "zeta", k, hp.dim_x);
  require_positive(hp.eta, "eta", k, hp.dim_x);
  require_positive(hp.a_sigma, "a_sigma", k, 1);
  require_positive(hp.b_sigma, "b_sigma", k, 1);
  require_positive(hp.b_mu, "b_mu", k, 1);
  require_positive(hp.a_obs, "a_obs", k, 1);
  require_positive(hp.b_obs, "b_obs", k, 1);
  if (hp.update_concentrations) {
    require_positive(hp.a_alpha_prior, "a_alpha_prior");
    require_positive(hp.b_alpha_prior, "b_alpha_prior");
    require_positive(hp.u_kappa_prior, "u_kappa_prior");
    require_positive(hp.v_kappa_prior, "v_kappa_prior");
  }
}

void validate_config(const Hyperparameters& hp, const ObservationSet& obs) {
  validate_hyperparameters(hp);
  if (obs.sequences.empty()) throw InputError("observation set is empty");
  const Eigen::Index t = obs.length();
  for (std::size_t n = 0; n < obs.sequences.size(); ++n) {
    const Matrix& z = obs.sequences[n];
    if (z.cols() != hp.dim_z) {
      throw InputError("dimension mismatch: sequence " + std::to_string(n) + " has " + std::to_string(z.cols()) +
                       " channels but dim_z = " + std::to_string(hp.dim_z));
    }
    if (z.rows() != t) throw InputError("dimension mismatch: sequences differ in length");
    if (!z.allFinite()) throw InputError("sequence " + std::to_string(n) + " contains non-finite values");
  }
  if (t < 1) throw InputError("sequences are empty");
}

std::vector<Matrix> prior_phi(const Vector& e_beta, double alpha, double kappa) {
  const Eigen::Index k = e_beta.size();
  std::vector<Matrix> phi;
  phi.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    Vector row = alpha * e_beta;
    row[i] += kappa;
    row /= alpha + kappa;
    phi.emplace_back(row.transpose().replicate(k, 1));
  }
  return phi;
}

VariationalPosterior init_posterior(const Hyperparameters& hp) {
  validate_hyperparameters(hp);
  const Eigen::Index k = hp.trunc_k, dx = hp.dim_x, dz = hp.dim_z;
  VariationalPosterior q;
  q.stick_u = Vector::Ones(k - 1);
  q.stick_v = Vector::Constant(k - 1, hp.gamma);
  q.init_u = Vector::Ones(k - 1);
  q.init_v = Vector::Constant(k - 1, hp.alpha0);
  q.trans_u = Matrix::Ones(k, k - 1);
  q.trans_v = Matrix::Constant(k, k - 1, hp.alpha + hp.kappa);
  q.phi = prior_phi(stick_expectations(q.stick_u, q.stick_v).e_beta, hp.alpha, hp.kappa);

  q.mu_mean = Matrix::Zero(k, dx);
  q.mu_prec = hp.b_mu.replicate(1, dx);
  q.sigma_a = hp.a_sigma.replicate(1, dx);
  q.sigma_b = hp.b_sigma.replicate(1, dx);
  q.rho_a = hp.a_obs.replicate(1, dz);
  q.rho_b = hp.b_obs.replicate(1, dz);
  for (Eigen::Index i = 0; i < k; ++i) {
    q.f_mean.emplace_back(Matrix::Zero(dx, dx));
    q.f_cov.emplace_back(hp.zeta.row(i).cwiseInverse().asDiagonal());
    q.h_mean.emplace_back(Matrix::Zero(dz, dx));
    q.h_cov.emplace_back(hp.eta.row(i).cwiseInverse().asDiagonal());
  }
  q.alpha_point = hp.alpha;
  q.kappa_point = hp.kappa;
  q.conc_a = hp.a_alpha_prior;
  q.conc_b = hp.b_alpha_prior;
  q.conc_u = hp.u_kappa_prior;
  q.conc_v = hp.v_kappa_prior;
  return q;
}

ObservationSet rescale_observations(const ObservationSet& raw, RescaleMode mode, const Vector& scales) {
  if (raw.sequences.empty()) throw InputError("observation set is empty");
  const Eigen::Index d = raw.dim();
  Vector factors = Vector::Ones(d);
  switch (mode) {
    case RescaleMode::kNone:
      break;
    case RescaleMode::kExplicit:
      if (scales.size() != d) throw InputError("explicit channel scales do not match the channel count");
      if ((scales.array() <= 0.0).any() || !scales.allFinite()) {
        throw InputError("explicit channel scales must be positive");
      }
      factors = scales;
      break;
    case RescaleMode::kUnitVariance: {
      if (raw.length() < 2) throw InputError("unit-variance rescaling needs at least two samples");
      Vector sum = Vector::Zero(d), sum_sq = Vector::Zero(d);
      double count = 0.0;
      for (const Matrix& z : raw.sequences) {
        const Vector mean = z.colwise().mean().transpose();
        sum += mean * static_cast<double>(z.rows());
        count += static_cast<double>(z.rows());
      }
      const Vector mean = sum / count;
      for (const Matrix& z : raw.sequences) {
        sum_sq += (z.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
      }
      for (Eigen::Index c = 0; c < d; ++c) {
        const double sd = std::sqrt(sum_sq[c] / (count - 1.0));
        if (!(sd > 0.0)) throw InputError("channel " + std::to_string(c) + " has zero variance");
        factors[c] = sd;
      }
      break;
    }
  }
  ObservationSet out = raw;
  for (Matrix& z : out.sequences) z = z * factors.cwiseInverse().asDiagonal();
  const Vector previous = raw.channel_scales.size() == d ? raw.channel_scales : Vector::Ones(d);
  out.channel_scales = previous.cwiseProduct(factors);
  return out;
}

ObservationSet inverse_rescale(const ObservationSet& obs) {
  ObservationSet out = obs;
  const Eigen::Index d = obs.dim();
  if (obs.channel_scales.size() != d) return out;
  for (Matrix& z : out.sequences) z = z * obs.channel_scales.asDiagonal();
  out.channel_scales = Vector::Ones(d);
  return out;
}

}  // namespace slds
