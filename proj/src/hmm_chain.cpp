#include "slds/hmm_chain.hpp"

#include "slds/hdp_sticky.hpp"
#include "slds/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace slds {

Matrix expected_log_emissions(const std::vector<ModeExpectations>& modes, const SufficientStats& stats) {
  const Eigen::Index t_len = stats.sum_mean.rows();
  const auto k = static_cast<Eigen::Index>(modes.size());
  if (static_cast<Eigen::Index>(stats.sum_xz.size()) != t_len) {
    throw InputError("sufficient statistics lack observation terms");
  }
  const auto n = static_cast<double>(stats.num_sequences);
  const Eigen::Index dx = stats.sum_mean.cols();
  const Eigen::Index dz = stats.sum_zz.cols();
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  Matrix out(t_len, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const ModeExpectations& m = modes[static_cast<std::size_t>(i)];
    const double obs_const = n * (static_cast<double>(dz) * log_2pi - m.e_log_rho.sum());
    for (Eigen::Index t = 0; t < t_len; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const Matrix& s = stats.sum_second[ts];
      // sum_n E[(z - Hx)^T R^-1 (z - Hx)]
      double quad = stats.sum_zz.row(t).dot(m.e_rho) - 2.0 * (m.e_rinv_h * stats.sum_xz[ts]).trace() +
                    (m.e_ht_rinv_h.cwiseProduct(s)).sum();
      double constant = obs_const;
      if (t == 0) {
        const Vector x = stats.sum_mean.row(0).transpose();
        quad += s.diagonal().dot(m.e_sigma) - 2.0 * x.dot(m.e_sigma_mu) + n * m.e_sigma_mu_sq.sum();
        constant += n * (static_cast<double>(dx) * log_2pi - m.e_log_sigma.sum());
      } else {
        const Matrix& prev = stats.sum_second[ts - 1];
        const Matrix& cross = stats.sum_cross[ts - 1];
        quad += s.trace() - 2.0 * m.e_f.cwiseProduct(cross).sum() + m.e_ft_f.cwiseProduct(prev).sum();
        constant += n * static_cast<double>(dx) * log_2pi;
      }
      out(t, i) = -0.5 * (quad + constant);
    }
  }
  if (!out.allFinite()) throw NumericalError("expected log emissions are not finite");
  return out;
}

AuxiliaryHMM compute_lambda_s(const VariationalPosterior& q, const std::vector<ModeExpectations>& modes,
                              const SufficientStats& stats) {
  AuxiliaryHMM aux;
  const Vector e_log_pi0 = stick_expectations(q.init_u, q.init_v).e_log_beta;
  aux.log_pi0 = e_log_pi0.array() - log_sum_exp(e_log_pi0);
  aux.log_trans = expected_transition_matrix(q.trans_u, q.trans_v, q.phi).log_prob;
  aux.log_emit = expected_log_emissions(modes, stats);
  return aux;
}

AuxiliaryHMM compute_lambda_s(const VariationalPosterior& q, const SufficientStats& stats) {
  return compute_lambda_s(q, mode_expectations(q), stats);
}

namespace {
constexpr double kTinyMass = 1e-250;
}  // namespace

ModeMarginals forward_backward(const AuxiliaryHMM& aux) {
  const Eigen::Index t_len = aux.log_emit.rows();
  const Eigen::Index k = aux.log_emit.cols();
  if (t_len < 1) throw InputError("empty emission table");
  if (aux.log_pi0.size() != k || aux.log_trans.rows() != k || aux.log_trans.cols() != k) {
    throw InputError("auxiliary HMM shapes disagree");
  }
  Matrix log_alpha(t_len, k), log_beta(t_len, k);
  const Matrix trans = aux.log_trans.array().exp().matrix();
  Vector tmp(k), scaled(k), mixed(k);

  // Each step shifts by the running maximum and mixes through exp(log_trans); entries that
  // underflow fall back to an exact log-sum-exp.
  log_alpha.row(0) = (aux.log_pi0 + aux.log_emit.row(0).transpose()).transpose();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const double shift = log_alpha.row(t - 1).maxCoeff();
    scaled = (log_alpha.row(t - 1).transpose().array() - shift).exp().matrix();
    mixed.noalias() = trans.transpose() * scaled;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (mixed[j] > kTinyMass) {
        log_alpha(t, j) = std::log(mixed[j]) + shift + aux.log_emit(t, j);
      } else {
        tmp = log_alpha.row(t - 1).transpose() + aux.log_trans.col(j);
        log_alpha(t, j) = log_sum_exp(tmp) + aux.log_emit(t, j);
      }
    }
  }
  log_beta.row(t_len - 1).setZero();
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const Vector next = aux.log_emit.row(t + 1).transpose() + log_beta.row(t + 1).transpose();
    const double shift = next.maxCoeff();
    scaled = (next.array() - shift).exp().matrix();
    mixed.noalias() = trans * scaled;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (mixed[i] > kTinyMass) {
        log_beta(t, i) = std::log(mixed[i]) + shift;
      } else {
        tmp = aux.log_trans.row(i).transpose() + next;
        log_beta(t, i) = log_sum_exp(tmp);
      }
    }
  }

  ModeMarginals mm;
  mm.log_z = log_sum_exp(log_alpha.row(t_len - 1).transpose());
  mm.unary.resize(t_len, k);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Vector row = (log_alpha.row(t) + log_beta.row(t)).transpose();
    row = (row.array() - log_sum_exp(row)).exp();
    mm.unary.row(t) = row.transpose();
  }
  mm.pairwise.resize(static_cast<std::size_t>(t_len - 1));
  for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
    const Vector next = aux.log_emit.row(t + 1).transpose() + log_beta.row(t + 1).transpose();
    const Vector from = log_alpha.row(t).transpose();
    const Vector a = (from.array() - from.maxCoeff()).exp().matrix();
    const Vector b = (next.array() - next.maxCoeff()).exp().matrix();
    Matrix xi = a.asDiagonal() * trans * b.asDiagonal();
    const double total = xi.sum();
    if (total > kTinyMass) {
      xi /= total;
    } else {
      xi = aux.log_trans;
      xi.colwise() += from;
      xi.rowwise() += next.transpose();
      const double top = xi.maxCoeff();
      const double lse = top + std::log((xi.array() - top).exp().sum());
      xi = (xi.array() - lse).exp().matrix();
    }
    mm.pairwise[static_cast<std::size_t>(t)] = std::move(xi);
  }

  double cross = mm.unary.row(0).dot(aux.log_pi0.transpose());
  cross += mm.unary.cwiseProduct(aux.log_emit).sum();
  for (const Matrix& xi : mm.pairwise) cross += xi.cwiseProduct(aux.log_trans).sum();
  mm.entropy = std::max(0.0, mm.log_z - cross);
  return mm;
}

std::vector<int> map_sequence(const AuxiliaryHMM& aux) {
  const Eigen::Index t_len = aux.log_emit.rows();
  const Eigen::Index k = aux.log_emit.cols();
  Matrix score(t_len, k);
  Eigen::MatrixXi back(t_len, k);
  score.row(0) = (aux.log_pi0 + aux.log_emit.row(0).transpose()).transpose();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double v = score(t - 1, i) + aux.log_trans(i, j);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      score(t, j) = best + aux.log_emit(t, j);
      back(t, j) = arg;
    }
  }
  std::vector<int> path(static_cast<std::size_t>(t_len));
  int cur = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (score(t_len - 1, j) > best) {
      best = score(t_len - 1, j);
      cur = static_cast<int>(j);
    }
  }
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    path[static_cast<std::size_t>(t)] = cur;
    if (t > 0) cur = back(t, cur);
  }
  return path;
}

}  // namespace slds
