#include "slds/hdp_sticky.hpp"

#include "slds/special.hpp"

#include <cmath>

namespace slds {

StickExpectations stick_expectations(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  if (u.size() != v.size()) throw InputError("stick parameter vectors differ in length");
  const Eigen::Index k = u.size() + 1;
  StickExpectations s;
  s.e_beta.resize(k);
  s.e_beta_sq.resize(k);
  s.e_log_beta.resize(k);
  s.e_log_bar.resize(k - 1);
  s.e_log_one_minus_bar.resize(k - 1);

  double rest = 1.0, rest_sq = 1.0, log_rest = 0.0;
  for (Eigen::Index i = 0; i < k - 1; ++i) {
    const double a = u[i], b = v[i];
    if (!(a > 0.0) || !(b > 0.0)) throw InputError("stick parameters must be positive");
    const double n = a + b;
    const double dig_n = digamma(n);
    s.e_log_bar[i] = digamma(a) - dig_n;
    s.e_log_one_minus_bar[i] = digamma(b) - dig_n;
    s.e_beta[i] = rest * a / n;
    s.e_beta_sq[i] = rest_sq * a * (a + 1.0) / (n * (n + 1.0));
    s.e_log_beta[i] = log_rest + s.e_log_bar[i];
    rest *= b / n;
    rest_sq *= b * (b + 1.0) / (n * (n + 1.0));
    log_rest += s.e_log_one_minus_bar[i];
  }
  s.e_beta[k - 1] = rest;
  s.e_beta_sq[k - 1] = rest_sq;
  s.e_log_beta[k - 1] = log_rest;
  s.e_beta /= s.e_beta.sum();
  return s;
}

double sticky_log_term(double alpha, double kappa, double e_beta, double e_beta_sq, double e_log_beta) {
  if (kappa >= alpha * e_beta) {
    const double r = alpha / kappa;
    return r * e_beta - 0.5 * r * r * e_beta_sq;
  }
  const double eb = std::max(e_beta, kLogFloor);
  return std::log(alpha) - std::log(kappa) + e_log_beta + (kappa / alpha) * e_beta_sq / (eb * eb * eb);
}

Matrix indicator_log_prior(double alpha, double kappa, const StickExpectations& sticks) {
  const Eigen::Index k = sticks.e_beta.size();
  Matrix out(k, k);
  const double log_alpha = safe_log(alpha);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = log_alpha + sticks.e_log_beta[j];
    if (kappa > 0.0) {
      out(i, i) = std::log(kappa) +
                  sticky_log_term(alpha, kappa, sticks.e_beta[i], sticks.e_beta_sq[i], sticks.e_log_beta[i]);
    }
  }
  return out;
}

Matrix transition_counts(const ModeMarginals& marginals) {
  const Eigen::Index k = marginals.unary.cols();
  Matrix counts = Matrix::Zero(k, k);
  for (const auto& p : marginals.pairwise) counts += p;
  return counts;
}

Matrix expected_log_stick_weights(const Matrix& trans_u, const Matrix& trans_v) {
  const Eigen::Index k = trans_u.rows();
  Matrix out(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.row(i) = stick_expectations(trans_u.row(i).transpose(), trans_v.row(i).transpose()).e_log_beta.transpose();
  }
  return out;
}

std::vector<Matrix> update_phi(double alpha, double kappa, const StickExpectations& sticks, const Matrix& counts,
                               const Matrix& trans_log) {
  const Eigen::Index k = sticks.e_beta.size();
  const Matrix prior = indicator_log_prior(alpha, kappa, sticks);
  std::vector<Matrix> phi(static_cast<std::size_t>(k), Matrix(k, k));
  Vector w(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index s = 0; s < k; ++s) {
      for (Eigen::Index j = 0; j < k; ++j) w[j] = prior(i, j) + trans_log(i, s) * counts(i, j);
      const double lse = log_sum_exp(w);
      phi[static_cast<std::size_t>(i)].row(s) = (w.array() - lse).exp().transpose();
    }
  }
  return phi;
}

StickParams update_sticks(const std::vector<Matrix>& phi, double gamma) {
  const auto k = static_cast<Eigen::Index>(phi.size());
  // mass(m) = sum_{j != m} sum_{j'} phi_{jj'}(m)
  Vector mass = Vector::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Vector col_sums = phi[static_cast<std::size_t>(j)].colwise().sum().transpose();
    for (Eigen::Index m = 0; m < k; ++m) {
      if (m != j) mass[m] += col_sums[m];
    }
  }
  StickParams out{Vector(k - 1), Vector(k - 1)};
  double tail = 0.0;
  for (Eigen::Index i = k - 1; i >= 0; --i) {
    if (i < k - 1) {
      out.u[i] = 1.0 + mass[i];
      out.v[i] = gamma + tail;
    }
    tail += mass[i];
  }
  return out;
}

TransitionParams update_transitions(const std::vector<Matrix>& phi, const Matrix& counts, const Vector& init_marginal,
                                    double alpha0, double alpha, double kappa) {
  const auto k = static_cast<Eigen::Index>(phi.size());
  TransitionParams out{Vector(k - 1), Vector(k - 1), Matrix(k, k - 1), Matrix(k, k - 1)};

  double tail = 0.0;
  for (Eigen::Index i = k - 1; i >= 0; --i) {
    if (i < k - 1) {
      out.init_u[i] = 1.0 + init_marginal[i];
      out.init_v[i] = alpha0 + tail;
    }
    tail += init_marginal[i];
  }

  for (Eigen::Index i = 0; i < k; ++i) {
    // per-stick counts: sum_k counts(i, k) phi_{ii'}(k)
    const Vector c = phi[static_cast<std::size_t>(i)] * counts.row(i).transpose();
    double rest = 0.0;
    for (Eigen::Index s = k - 1; s >= 0; --s) {
      if (s < k - 1) {
        out.trans_u(i, s) = 1.0 + c[s];
        out.trans_v(i, s) = alpha + kappa + rest;
      }
      rest += c[s];
    }
  }
  return out;
}

TransitionMatrix expected_transition_matrix(const Matrix& trans_u, const Matrix& trans_v,
                                            const std::vector<Matrix>& phi) {
  const Eigen::Index k = trans_u.rows();
  TransitionMatrix out{Matrix(k, k), Matrix(k, k)};
  for (Eigen::Index i = 0; i < k; ++i) {
    const Vector w = stick_expectations(trans_u.row(i).transpose(), trans_v.row(i).transpose()).e_beta;
    Vector row = phi[static_cast<std::size_t>(i)].transpose() * w;
    row /= row.sum();
    out.prob.row(i) = row.transpose();
    for (Eigen::Index j = 0; j < k; ++j) out.log_prob(i, j) = safe_log(row[j]);
  }
  return out;
}

Matrix geometric_transition_log(const Matrix& trans_log, const std::vector<Matrix>& phi) {
  const Eigen::Index k = trans_log.rows();
  Matrix out(k, k);
  Vector w(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Matrix& p = phi[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index s = 0; s < k; ++s) w[s] = safe_log(p(s, j)) + trans_log(i, s);
      out(i, j) = log_sum_exp(w);
    }
  }
  return out;
}

Matrix stickwise_transition_log(const Matrix& trans_log, const std::vector<Matrix>& phi) {
  const Eigen::Index k = trans_log.rows();
  Matrix out(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.row(i) = trans_log.row(i) * phi[static_cast<std::size_t>(i)];
  }
  return out;
}

TransitionParams update_transitions_split(const std::vector<Matrix>& phi, const Matrix& counts,
                                          const Vector& init_marginal, const Matrix& trans_log, double alpha0,
                                          double alpha, double kappa) {
  const auto k = static_cast<Eigen::Index>(phi.size());
  TransitionParams out = update_transitions(phi, counts, init_marginal, alpha0, alpha, kappa);
  const Matrix geo = geometric_transition_log(trans_log, phi);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Matrix& p = phi[static_cast<std::size_t>(i)];
    Vector c = Vector::Zero(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (counts(i, j) == 0.0) continue;
      for (Eigen::Index s = 0; s < k; ++s) {
        c[s] += counts(i, j) * std::exp(safe_log(p(s, j)) + trans_log(i, s) - geo(i, j));
      }
    }
    double rest = 0.0;
    for (Eigen::Index s = k - 1; s >= 0; --s) {
      if (s < k - 1) {
        out.trans_u(i, s) = 1.0 + c[s];
        out.trans_v(i, s) = alpha + kappa + rest;
      }
      rest += c[s];
    }
  }
  return out;
}

ConcentrationUpdate update_concentrations(const std::vector<Matrix>& phi, const Matrix& trans_u,
                                          const Matrix& trans_v, double a_prior, double b_prior, double u_prior,
                                          double v_prior) {
  const auto k = static_cast<Eigen::Index>(phi.size());
  ConcentrationUpdate c;
  c.a = a_prior + static_cast<double>(k * k);
  double sum_log_rest = 0.0;
  for (Eigen::Index i = 0; i < trans_u.rows(); ++i) {
    for (Eigen::Index j = 0; j < trans_u.cols(); ++j) {
      sum_log_rest += digamma(trans_v(i, j)) - digamma(trans_u(i, j) + trans_v(i, j));
    }
  }
  c.b = b_prior - sum_log_rest;
  if (!(c.b > 0.0) || !std::isfinite(c.b)) throw NumericalError("concentration rate b_alpha is not positive");

  double self = 0.0, other = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Matrix& p = phi[static_cast<std::size_t>(i)];
    const double col = p.col(i).sum();
    self += col;
    other += p.sum() - col;
  }
  c.u = u_prior + self;
  c.v = v_prior + other;
  c.alpha_prime = c.a / c.b;
  c.kappa_prime = c.u / (c.u + c.v);
  c.alpha = c.alpha_prime * (1.0 - c.kappa_prime);
  c.kappa = c.alpha_prime * c.kappa_prime;
  return c;
}

double kl_indicators(const std::vector<Matrix>& phi, double alpha, double kappa, const StickExpectations& sticks) {
  const Matrix prior = indicator_log_prior(alpha, kappa, sticks);
  const double log_norm = std::log(alpha + kappa);
  double kl = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const Matrix& p = phi[i];
    for (Eigen::Index s = 0; s < p.rows(); ++s) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double q = p(s, j);
        if (q > 0.0) kl += q * (std::log(q) - (prior(static_cast<Eigen::Index>(i), j) - log_norm));
      }
    }
  }
  return kl;
}

}  // namespace slds
