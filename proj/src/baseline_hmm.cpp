#include "slds/baseline_hmm.hpp"

#include "slds/hmm_chain.hpp"
#include "slds/special.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>

namespace slds {

namespace {

constexpr double kEmptyState = 1e-10;

Matrix floor_covariance(const Matrix& cov) {
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  const Vector vals = eig.eigenvalues().cwiseMax(kCovarianceFloor);
  if (vals == eig.eigenvalues()) return sym;
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix data_covariance(const Matrix& z) {
  const Matrix centred = z.rowwise() - z.colwise().mean();
  return centred.transpose() * centred / static_cast<double>(z.rows());
}

/// k-means++ seeding then Lloyd iterations on the rows of z.
Matrix kmeans_means(const Matrix& z, int k, std::uint64_t seed) {
  const Eigen::Index t_len = z.rows();
  std::mt19937_64 rng(seed);
  Matrix centres(k, z.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, t_len - 1);
  centres.row(0) = z.row(pick(rng));
  Vector nearest = (z.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index idx = 0;
    if (nearest.sum() > 0.0) {
      std::discrete_distribution<Eigen::Index> draw(nearest.data(), nearest.data() + t_len);
      idx = draw(rng);
    } else {
      idx = pick(rng);
    }
    centres.row(c) = z.row(idx);
    nearest = nearest.cwiseMin((z.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }
  std::vector<int> labels(static_cast<std::size_t>(t_len), -1);
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    for (Eigen::Index t = 0; t < t_len; ++t) {
      Eigen::Index best = 0;
      (centres.rowwise() - z.row(t)).rowwise().squaredNorm().minCoeff(&best);
      if (labels[static_cast<std::size_t>(t)] != static_cast<int>(best)) {
        labels[static_cast<std::size_t>(t)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, z.cols());
    Vector counts = Vector::Zero(k);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      sums.row(labels[static_cast<std::size_t>(t)]) += z.row(t);
      counts[labels[static_cast<std::size_t>(t)]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0.0) centres.row(c) = sums.row(c) / counts[c];
    }
  }
  return centres;
}

AuxiliaryHMM as_chain(const GaussianHmmModel& model, const Matrix& z) {
  AuxiliaryHMM aux;
  aux.log_pi0 = model.init_probs.unaryExpr([](double p) { return safe_log(p); });
  aux.log_trans = model.trans.unaryExpr([](double p) { return safe_log(p); });
  aux.log_emit = gaussian_log_emissions(model, z);
  return aux;
}

}  // namespace

Matrix gaussian_log_emissions(const GaussianHmmModel& model, const Matrix& z) {
  const int n = model.n_states();
  const Eigen::Index d = z.cols();
  if (model.means.cols() != d) throw InputError("model dimension does not match the observations");
  Matrix out(z.rows(), n);
  const double base = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
  for (int i = 0; i < n; ++i) {
    const Eigen::LLT<Matrix> llt(model.covs[static_cast<std::size_t>(i)]);
    if (llt.info() != Eigen::Success) throw NumericalError("state covariance is not positive definite");
    const double half_log_det = llt.matrixLLT().diagonal().array().log().sum();
    const Matrix centred = (z.rowwise() - model.means.row(i)).transpose();
    const Matrix white = llt.matrixL().solve(centred);
    out.col(i) = (base - half_log_det - 0.5 * white.colwise().squaredNorm().array()).transpose();
  }
  return out;
}

GaussianHmmModel em_fit(const Matrix& z, int n_states, std::uint64_t seed, int max_iters, double tol) {
  const Eigen::Index t_len = z.rows();
  if (n_states < 1) throw InputError("n_states must be positive");
  if (t_len <= n_states) throw InputError("need more samples than states");
  if (max_iters < 1) throw InputError("max_iters must be positive");
  if (!(tol > 0.0)) throw InputError("tol must be positive");
  if (!z.allFinite()) throw InputError("observations contain non-finite values");

  const Matrix data_cov = floor_covariance(data_covariance(z));
  GaussianHmmModel m;
  m.means = kmeans_means(z, n_states, seed);
  m.covs.assign(static_cast<std::size_t>(n_states), data_cov);
  m.init_probs = Vector::Constant(n_states, 1.0 / n_states);
  m.trans = Matrix::Constant(n_states, n_states, 1.0 / n_states);

  for (int it = 0; it < max_iters; ++it) {
    const ModeMarginals post = forward_backward(as_chain(m, z));
    m.loglik_trace.push_back(post.log_z);
    m.iterations = it + 1;
    const auto n = m.loglik_trace.size();
    if (n >= 2) {
      const double prev = m.loglik_trace[n - 2];
      if (std::abs(post.log_z - prev) / std::max(std::abs(post.log_z), 1e-10) < tol) {
        m.converged = true;
        break;
      }
    }

    m.init_probs = post.unary.row(0).transpose();
    Matrix counts = Matrix::Zero(n_states, n_states);
    for (const Matrix& xi : post.pairwise) counts += xi;
    for (int i = 0; i < n_states; ++i) {
      const double row = counts.row(i).sum();
      if (row > kEmptyState) {
        m.trans.row(i) = counts.row(i) / row;
      } else {
        m.trans.row(i).setConstant(1.0 / n_states);
      }
    }
    for (int i = 0; i < n_states; ++i) {
      const Vector w = post.unary.col(i);
      const double mass = w.sum();
      if (mass < kEmptyState) {
        m.covs[static_cast<std::size_t>(i)] = data_cov;
        continue;
      }
      m.means.row(i) = w.transpose() * z / mass;
      const Matrix centred = z.rowwise() - m.means.row(i);
      const Matrix cov = centred.transpose() * w.asDiagonal() * centred / mass;
      m.covs[static_cast<std::size_t>(i)] = floor_covariance(cov);
    }
  }
  return m;
}

std::vector<int> viterbi_decode(const GaussianHmmModel& model, const Matrix& z) {
  return map_sequence(as_chain(model, z));
}

}  // namespace slds
