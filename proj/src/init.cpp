#include "slds/init.hpp"

#include "slds/hmm_chain.hpp"
#include "slds/vbem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace slds {

Matrix window_ar_features(const ObservationSet& obs, int window) {
  const Eigen::Index t_len = obs.length();
  const Eigen::Index d = obs.dim();
  if (t_len < 3) throw InputError("sequence too short for window features");
  const Eigen::Index w = std::clamp<Eigen::Index>(window, 2, t_len - 1);
  const Eigen::Index per_seq = d * d + d;
  Matrix feat(t_len, per_seq * static_cast<Eigen::Index>(obs.sequences.size()));
  const Matrix ridge = 1e-3 * Matrix::Identity(d, d);

  for (std::size_t n = 0; n < obs.sequences.size(); ++n) {
    const Matrix& z = obs.sequences[n];
    const Eigen::Index col0 = static_cast<Eigen::Index>(n) * per_seq;
    for (Eigen::Index t = 0; t < t_len; ++t) {
      // pairs (z_{s-1}, z_s) for s in [lo, hi]
      Eigen::Index hi = std::min(t_len - 1, std::max<Eigen::Index>(1, t - w / 2) + w - 1);
      const Eigen::Index lo = std::max<Eigen::Index>(1, hi - w + 1);
      const Eigen::Index m = hi - lo + 1;
      const Matrix prev = z.middleRows(lo - 1, m), next = z.middleRows(lo, m);
      const Matrix gram = prev.transpose() * prev + static_cast<double>(m) * ridge;
      const Matrix a = gram.ldlt().solve(prev.transpose() * next).transpose();
      const Matrix resid = next - prev * a.transpose();
      for (Eigen::Index j = 0; j < d * d; ++j) feat(t, col0 + j) = a.reshaped()(j);
      for (Eigen::Index j = 0; j < d; ++j) {
        feat(t, col0 + d * d + j) = 0.5 * std::log(resid.col(j).squaredNorm() / static_cast<double>(m) + 1e-12);
      }
    }
  }
  for (Eigen::Index j = 0; j < feat.cols(); ++j) {
    const double mean = feat.col(j).mean();
    const double sd = std::sqrt((feat.col(j).array() - mean).square().mean());
    feat.col(j) = (feat.col(j).array() - mean) / (sd > 1e-12 ? sd : 1.0);
  }
  return feat;
}

std::vector<int> kmeans_labels(const Matrix& features, int k, int max_iters) {
  const Eigen::Index n = features.rows();
  if (k < 1 || k > n) throw InputError("cluster count must lie in [1, number of rows]");
  Matrix centres(k, features.cols());
  const Eigen::RowVectorXd mean = features.colwise().mean();
  Eigen::Index first = 0;
  (features.rowwise() - mean).rowwise().squaredNorm().minCoeff(&first);
  centres.row(0) = features.row(first);
  Vector nearest = (features.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index far = 0;
    nearest.maxCoeff(&far);
    centres.row(c) = features.row(far);
    nearest = nearest.cwiseMin((features.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Eigen::Index t = 0; t < n; ++t) {
      Eigen::Index best = 0;
      (centres.rowwise() - features.row(t)).rowwise().squaredNorm().minCoeff(&best);
      auto& l = labels[static_cast<std::size_t>(t)];
      if (l != static_cast<int>(best)) {
        l = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, features.cols());
    Vector counts = Vector::Zero(k);
    for (Eigen::Index t = 0; t < n; ++t) {
      sums.row(labels[static_cast<std::size_t>(t)]) += features.row(t);
      counts[labels[static_cast<std::size_t>(t)]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0.0) centres.row(c) = sums.row(c) / counts[c];
    }
  }
  return labels;
}

Matrix ar_hmm_responsibilities(const ObservationSet& obs, Matrix resp, int em_iters, double stay) {
  const Eigen::Index t_len = obs.length();
  const Eigen::Index d = obs.dim();
  const Eigen::Index k = resp.cols();
  if (resp.rows() != t_len) throw InputError("responsibilities do not match the sequence length");
  if (k < 2 || em_iters < 1) return resp;
  if (!(stay > 0.0 && stay < 1.0)) throw InputError("init self-transition probability must lie in (0, 1)");

  AuxiliaryHMM aux;
  aux.log_pi0 = Vector::Constant(k, -std::log(static_cast<double>(k)));
  aux.log_trans = Matrix::Constant(k, k, std::log((1.0 - stay) / static_cast<double>(k - 1)));
  aux.log_trans.diagonal().setConstant(std::log(stay));
  aux.log_emit.resize(t_len, k);
  const Matrix ridge = 1e-3 * Matrix::Identity(d, d);

  for (int it = 0; it < em_iters; ++it) {
    aux.log_emit.setZero();
    for (Eigen::Index j = 0; j < k; ++j) {
      Matrix gram = ridge, moment = Matrix::Zero(d, d);
      double mass = 1e-3;
      for (const Matrix& z : obs.sequences) {
        for (Eigen::Index t = 1; t < t_len; ++t) {
          const double w = resp(t, j);
          gram += w * z.row(t - 1).transpose() * z.row(t - 1);
          moment += w * z.row(t).transpose() * z.row(t - 1);
          mass += w;
        }
      }
      const Matrix a = gram.ldlt().solve(moment.transpose()).transpose();
      Matrix cov = ridge;
      for (const Matrix& z : obs.sequences) {
        for (Eigen::Index t = 1; t < t_len; ++t) {
          const Vector e = z.row(t).transpose() - a * z.row(t - 1).transpose();
          cov += resp(t, j) * e * e.transpose();
        }
      }
      cov /= mass;
      const Eigen::LLT<Matrix> llt(cov);
      if (llt.info() != Eigen::Success) throw NumericalError("init autoregression covariance is not positive definite");
      const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      for (const Matrix& z : obs.sequences) {
        for (Eigen::Index t = 0; t < t_len; ++t) {
          Vector e = z.row(t).transpose();
          if (t > 0) e -= a * z.row(t - 1).transpose();
          aux.log_emit(t, j) -= 0.5 * (log_det + e.dot(llt.solve(e)));
        }
      }
    }
    resp = forward_backward(aux).unary;
  }
  return resp;
}

Matrix dynamics_responsibilities(const ObservationSet& obs, int trunc_k, std::uint64_t seed,
                                 const InitOptions& opts) {
  if (!(opts.weight >= 0.0 && opts.weight <= 1.0)) throw InputError("init weight must lie in [0, 1]");
  const Eigen::Index t_len = obs.length();
  const int k = std::min<int>({opts.clusters, trunc_k, static_cast<int>(t_len)});
  Matrix out = initial_responsibilities(t_len, trunc_k, seed, opts.jitter_concentration) * (1.0 - opts.weight);
  if (k < 1) return out;
  const std::vector<int> labels = kmeans_labels(window_ar_features(obs, opts.window), k);
  Matrix resp = Matrix::Zero(t_len, k);
  for (Eigen::Index t = 0; t < t_len; ++t) resp(t, labels[static_cast<std::size_t>(t)]) = 1.0;
  resp = ar_hmm_responsibilities(obs, std::move(resp), opts.em_iters, opts.stay);
  out.leftCols(k) += opts.weight * resp;
  return out;
}

}  // namespace slds
