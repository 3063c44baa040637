#include "support.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace oracle {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double logsumexp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double psi(double x) { return boost::math::digamma(x); }

double gamma_kl(double a, double b, double a0, double b0) {
  return (a - a0) * psi(a) - std::lgamma(a) + std::lgamma(a0) + a0 * (std::log(b) - std::log(b0)) +
         a * (b0 - b) / b;
}

}  // namespace

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
  }
  return m;
}

Matrix random_spd(std::mt19937_64& rng, Eigen::Index d, double floor) {
  const Matrix a = random_matrix(rng, d, d);
  Matrix s = a * a.transpose() / static_cast<double>(d);
  s.diagonal().array() += floor;
  return s;
}

slds::AuxiliaryLDS random_lds(std::mt19937_64& rng, Eigen::Index t_len, Eigen::Index dx, Eigen::Index dz) {
  slds::AuxiliaryLDS aux;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    aux.h_hat.push_back(random_matrix(rng, dz, dx));
    aux.r_hat.push_back(random_spd(rng, dz, 0.3));
    if (t + 1 < t_len) {
      aux.f_hat.push_back(random_matrix(rng, dx, dx, 0.6));
      aux.u_hat.push_back(random_spd(rng, dx, 0.3));
    }
  }
  aux.mu_hat = random_matrix(rng, dx, 1);
  aux.sigma_hat = random_spd(rng, dx, 0.3);
  return aux;
}

DenseSmoothing dense_smoother(const slds::AuxiliaryLDS& aux, const Matrix& z) {
  const Eigen::Index t_len = z.rows();
  const Eigen::Index dz = z.cols();
  const Eigen::Index dx = aux.mu_hat.size();
  const Eigen::Index nx = t_len * dx, nz = t_len * dz;

  // X = c + B w with w standard normal
  Matrix b = Matrix::Zero(nx, nx);
  Vector c = Vector::Zero(nx);
  c.head(dx) = aux.mu_hat;
  b.block(0, 0, dx, dx) = aux.sigma_hat.llt().matrixL();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const Matrix& f = aux.f_hat[static_cast<std::size_t>(t - 1)];
    b.middleRows(t * dx, dx) = f * b.middleRows((t - 1) * dx, dx);
    b.block(t * dx, t * dx, dx, dx) = aux.u_hat[static_cast<std::size_t>(t - 1)].llt().matrixL();
    c.segment(t * dx, dx) = f * c.segment((t - 1) * dx, dx);
  }
  const Matrix cx = b * b.transpose();

  Matrix h = Matrix::Zero(nz, nx), r = Matrix::Zero(nz, nz);
  Vector zv(nz);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    h.block(t * dz, t * dx, dz, dx) = aux.h_hat[static_cast<std::size_t>(t)];
    r.block(t * dz, t * dz, dz, dz) = aux.r_hat[static_cast<std::size_t>(t)];
    zv.segment(t * dz, dz) = z.row(t).transpose();
  }
  const Matrix s = h * cx * h.transpose() + r;
  const Matrix gain = cx * h.transpose() * s.inverse();
  const Vector mean = c + gain * (zv - h * c);
  Matrix post = cx - gain * h * cx;
  post = 0.5 * (post + post.transpose());

  DenseSmoothing out;
  out.joint_cov = post;
  out.mean.resize(t_len, dx);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    out.mean.row(t) = mean.segment(t * dx, dx).transpose();
    out.cov.push_back(post.block(t * dx, t * dx, dx, dx));
    if (t + 1 < t_len) {
      out.cross.push_back(post.block((t + 1) * dx, t * dx, dx, dx) +
                          mean.segment((t + 1) * dx, dx) * mean.segment(t * dx, dx).transpose());
    }
  }
  const double log_det = std::log(post.determinant());
  out.entropy = 0.5 * (static_cast<double>(nx) * (1.0 + std::log(2.0 * std::numbers::pi)) + log_det);
  return out;
}

slds::AuxiliaryHMM random_hmm(std::mt19937_64& rng, Eigen::Index k, Eigen::Index t_len, bool normalized_rows) {
  slds::AuxiliaryHMM aux;
  auto log_simplex = [&](Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(rng, 0.05, 1.0);
    v /= v.sum();
    return Vector(v.array().log());
  };
  aux.log_pi0 = log_simplex(k);
  aux.log_trans.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Vector row = log_simplex(k);
    if (!normalized_rows) row.array() += std::log(uniform(rng, 0.3, 1.0));
    aux.log_trans.row(i) = row.transpose();
  }
  aux.log_emit = random_matrix(rng, t_len, k, 2.0);
  return aux;
}

PathEnumeration enumerate_paths(const slds::AuxiliaryHMM& aux) {
  const Eigen::Index t_len = aux.log_emit.rows();
  const Eigen::Index k = aux.log_emit.cols();
  std::size_t n_paths = 1;
  for (Eigen::Index t = 0; t < t_len; ++t) n_paths *= static_cast<std::size_t>(k);

  std::vector<double> lp(n_paths);
  std::vector<std::vector<int>> paths(n_paths, std::vector<int>(static_cast<std::size_t>(t_len)));
  for (std::size_t p = 0; p < n_paths; ++p) {
    // first time step is the most significant digit, so enumeration order is lexicographic
    std::size_t code = p;
    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
      paths[p][static_cast<std::size_t>(t)] = static_cast<int>(code % static_cast<std::size_t>(k));
      code /= static_cast<std::size_t>(k);
    }
    const auto& s = paths[p];
    double v = aux.log_pi0[s[0]] + aux.log_emit(0, s[0]);
    for (Eigen::Index t = 1; t < t_len; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      v += aux.log_trans(s[ts - 1], s[ts]) + aux.log_emit(t, s[ts]);
    }
    lp[p] = v;
  }

  PathEnumeration out;
  out.log_z = logsumexp(lp);
  out.unary = Matrix::Zero(t_len, k);
  out.pairwise.assign(static_cast<std::size_t>(std::max<Eigen::Index>(t_len - 1, 0)), Matrix::Zero(k, k));
  std::size_t best = 0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const double prob = std::exp(lp[p] - out.log_z);
    if (prob > 0.0) out.entropy -= prob * (lp[p] - out.log_z);
    const auto& s = paths[p];
    for (Eigen::Index t = 0; t < t_len; ++t) {
      out.unary(t, s[static_cast<std::size_t>(t)]) += prob;
      if (t + 1 < t_len) {
        out.pairwise[static_cast<std::size_t>(t)](s[static_cast<std::size_t>(t)], s[static_cast<std::size_t>(t + 1)]) +=
            prob;
      }
    }
    if (lp[p] > lp[best]) best = p;
  }
  out.best_path = paths[best];
  return out;
}

slds::ModeMarginals linear_forward_backward(const slds::AuxiliaryHMM& aux) {
  const Eigen::Index t_len = aux.log_emit.rows();
  const Eigen::Index k = aux.log_emit.cols();
  const Matrix a = aux.log_trans.array().exp().matrix();
  Matrix e(t_len, k);
  Vector shift(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    shift[t] = aux.log_emit.row(t).maxCoeff();
    e.row(t) = (aux.log_emit.row(t).array() - shift[t]).exp();
  }

  Matrix alpha(t_len, k), beta(t_len, k);
  Vector scale(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Vector prior(k);
    if (t == 0) {
      prior = aux.log_pi0.array().exp();
    } else {
      prior = a.transpose() * alpha.row(t - 1).transpose();
    }
    Vector v = prior.cwiseProduct(e.row(t).transpose());
    scale[t] = v.sum();
    alpha.row(t) = (v / scale[t]).transpose();
  }
  beta.row(t_len - 1).setOnes();
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const Vector next = e.row(t + 1).transpose().cwiseProduct(beta.row(t + 1).transpose());
    beta.row(t) = (a * next / scale[t + 1]).transpose();
  }

  slds::ModeMarginals out;
  out.unary = alpha.cwiseProduct(beta);
  out.log_z = 0.0;
  for (Eigen::Index t = 0; t < t_len; ++t) out.log_z += shift[t] + std::log(scale[t]);
  for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
    Matrix xi(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        xi(i, j) = alpha(t, i) * a(i, j) * e(t + 1, j) * beta(t + 1, j) / scale[t + 1];
      }
    }
    out.pairwise.push_back(xi);
  }
  double h = out.log_z;
  for (Eigen::Index i = 0; i < k; ++i) h -= out.unary(0, i) * aux.log_pi0[i];
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index i = 0; i < k; ++i) h -= out.unary(t, i) * aux.log_emit(t, i);
  }
  for (const Matrix& xi : out.pairwise) {
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (xi(i, j) > 0.0) h -= xi(i, j) * aux.log_trans(i, j);
      }
    }
  }
  out.entropy = h;
  return out;
}

RandomMarginals random_marginals(std::mt19937_64& rng, Eigen::Index k, Eigen::Index t_len) {
  const slds::AuxiliaryHMM aux = random_hmm(rng, k, t_len);
  const slds::ModeMarginals m = linear_forward_backward(aux);
  return {m.unary, m.pairwise};
}

std::vector<Matrix> random_phi(std::mt19937_64& rng, Eigen::Index k) {
  std::vector<Matrix> phi;
  for (Eigen::Index i = 0; i < k; ++i) {
    Matrix p(k, k);
    for (Eigen::Index s = 0; s < k; ++s) {
      for (Eigen::Index j = 0; j < k; ++j) p(s, j) = uniform(rng, 0.01, 1.0);
      p.row(s) /= p.row(s).sum();
    }
    phi.push_back(p);
  }
  return phi;
}

NaiveSticks naive_update_sticks(const std::vector<Matrix>& phi, double gamma) {
  const auto k = static_cast<Eigen::Index>(phi.size());
  NaiveSticks out{Vector(k - 1), Vector(k - 1)};
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    double u = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == i) continue;
      for (Eigen::Index jp = 0; jp < k; ++jp) u += phi[static_cast<std::size_t>(j)](jp, i);
    }
    double v = gamma;
    for (Eigen::Index ip = i + 1; ip < k; ++ip) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (j == ip) continue;
        for (Eigen::Index jp = 0; jp < k; ++jp) v += phi[static_cast<std::size_t>(j)](jp, ip);
      }
    }
    out.u[i] = u;
    out.v[i] = v;
  }
  return out;
}

NaiveTransitions naive_update_transitions(const std::vector<Matrix>& phi, const std::vector<Matrix>& pairwise,
                                          const Vector& init_marginal, double alpha0, double alpha, double kappa) {
  const auto k = static_cast<Eigen::Index>(phi.size());
  NaiveTransitions out{Vector(k - 1), Vector(k - 1), Matrix(k, k - 1), Matrix(k, k - 1)};
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    out.init_u[i] = 1.0 + init_marginal[i];
    double v = alpha0;
    for (Eigen::Index ip = i + 1; ip < k; ++ip) v += init_marginal[ip];
    out.init_v[i] = v;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const Matrix& p = phi[static_cast<std::size_t>(i)];
    for (Eigen::Index s = 0; s + 1 < k; ++s) {
      double u = 1.0, v = alpha + kappa;
      for (const Matrix& xi : pairwise) {
        for (Eigen::Index j = 0; j < k; ++j) {
          u += xi(i, j) * p(s, j);
          for (Eigen::Index s2 = s + 1; s2 < k; ++s2) v += xi(i, j) * p(s2, j);
        }
      }
      out.trans_u(i, s) = u;
      out.trans_v(i, s) = v;
    }
  }
  return out;
}

std::vector<slds::SmoothedMoments> random_moments(std::mt19937_64& rng, int n, Eigen::Index t_len, Eigen::Index dx) {
  std::vector<slds::SmoothedMoments> out;
  for (int s = 0; s < n; ++s) {
    slds::SmoothedMoments sm;
    sm.mean = random_matrix(rng, t_len, dx);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      const Vector m = sm.mean.row(t).transpose();
      sm.cov.push_back(random_spd(rng, dx, 0.1));
      sm.second.push_back(sm.cov.back() + m * m.transpose());
      if (t + 1 < t_len) {
        const Vector m2 = sm.mean.row(t + 1).transpose();
        sm.cross.push_back(0.2 * random_matrix(rng, dx, dx) + m2 * m.transpose());
      }
    }
    out.push_back(std::move(sm));
  }
  return out;
}

void naive_mode_parameters(slds::VariationalPosterior& q, const std::vector<slds::SmoothedMoments>& sm,
                           const std::vector<Matrix>& z, const Matrix& unary, const slds::Hyperparameters& hp) {
  const auto n_seq = static_cast<double>(sm.size());
  const Eigen::Index t_len = unary.rows();
  const Eigen::Index dx = sm.front().mean.cols();
  const Eigen::Index dz = z.front().cols();
  for (int i = 0; i < q.num_modes(); ++i) {
    const auto is = static_cast<std::size_t>(i);
    double mass = 0.0;
    for (Eigen::Index t = 0; t < t_len; ++t) mass += unary(t, i);
    if (mass < 1e-8) {
      q.mu_mean.row(i).setZero();
      q.mu_prec.row(i).setConstant(hp.b_mu[i]);
      q.sigma_a.row(i).setConstant(hp.a_sigma[i]);
      q.sigma_b.row(i).setConstant(hp.b_sigma[i]);
      q.f_mean[is].setZero();
      q.f_cov[is] = Matrix::Zero(dx, dx);
      for (Eigen::Index d = 0; d < dx; ++d) q.f_cov[is](d, d) = 1.0 / hp.zeta(i, d);
      q.h_mean[is].setZero();
      q.h_cov[is] = Matrix::Zero(dx, dx);
      for (Eigen::Index d = 0; d < dx; ++d) q.h_cov[is](d, d) = 1.0 / hp.eta(i, d);
      q.rho_a.row(i).setConstant(hp.a_obs[i]);
      q.rho_b.row(i).setConstant(hp.b_obs[i]);
      continue;
    }

    const double w1 = unary(0, i);
    for (Eigen::Index d = 0; d < dx; ++d) {
      double sx = 0.0, sxx = 0.0;
      for (const auto& m : sm) {
        sx += m.mean(0, d);
        sxx += m.second[0](d, d);
      }
      const double prec = hp.b_mu[i] + n_seq * w1;
      const double mean = w1 * sx / prec;
      q.mu_prec(i, d) = prec;
      q.mu_mean(i, d) = mean;
      q.sigma_a(i, d) = hp.a_sigma[i] + n_seq * w1 / 2.0;
      q.sigma_b(i, d) = hp.b_sigma[i] + std::max(w1 * sxx - prec * mean * mean, 0.0) / 2.0;
    }

    Matrix fp = Matrix::Zero(dx, dx), fm = Matrix::Zero(dx, dx);
    for (Eigen::Index a = 0; a < dx; ++a) fp(a, a) = hp.zeta(i, a);
    for (const auto& m : sm) {
      for (Eigen::Index t = 1; t < t_len; ++t) {
        for (Eigen::Index a = 0; a < dx; ++a) {
          for (Eigen::Index b = 0; b < dx; ++b) {
            fp(a, b) += unary(t, i) * m.second[static_cast<std::size_t>(t - 1)](a, b);
            fm(a, b) += unary(t, i) * m.cross[static_cast<std::size_t>(t - 1)](a, b);
          }
        }
      }
    }
    q.f_cov[is] = fp.inverse();
    q.f_mean[is] = fm * q.f_cov[is];

    Matrix hp_mat = Matrix::Zero(dx, dx), xz = Matrix::Zero(dx, dz);
    Vector zz = Vector::Zero(dz);
    for (Eigen::Index a = 0; a < dx; ++a) hp_mat(a, a) = hp.eta(i, a);
    for (std::size_t s = 0; s < sm.size(); ++s) {
      for (Eigen::Index t = 0; t < t_len; ++t) {
        const double w = unary(t, i);
        for (Eigen::Index a = 0; a < dx; ++a) {
          for (Eigen::Index b = 0; b < dx; ++b) hp_mat(a, b) += w * sm[s].second[static_cast<std::size_t>(t)](a, b);
          for (Eigen::Index d = 0; d < dz; ++d) xz(a, d) += w * sm[s].mean(t, a) * z[s](t, d);
        }
        for (Eigen::Index d = 0; d < dz; ++d) zz[d] += w * z[s](t, d) * z[s](t, d);
      }
    }
    q.h_cov[is] = hp_mat.inverse();
    q.h_mean[is] = (q.h_cov[is] * xz).transpose();
    for (Eigen::Index d = 0; d < dz; ++d) {
      double quad = 0.0;
      for (Eigen::Index a = 0; a < dx; ++a) {
        for (Eigen::Index b = 0; b < dx; ++b) quad += q.h_mean[is](d, a) * hp_mat(a, b) * q.h_mean[is](d, b);
      }
      q.rho_a(i, d) = hp.a_obs[i] + n_seq * mass / 2.0;
      q.rho_b(i, d) = hp.b_obs[i] + std::max(zz[d] - quad, 0.0) / 2.0;
    }
  }
}

slds::VariationalPosterior random_posterior(std::mt19937_64& rng, const slds::Hyperparameters& hp) {
  const Eigen::Index k = hp.trunc_k, dx = hp.dim_x, dz = hp.dim_z;
  slds::VariationalPosterior q;
  auto pos = [&](Eigen::Index r, Eigen::Index c, double lo, double hi) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(rng, lo, hi);
    }
    return m;
  };
  q.stick_u = pos(k - 1, 1, 0.5, 3.0);
  q.stick_v = pos(k - 1, 1, 0.5, 3.0);
  q.init_u = pos(k - 1, 1, 0.5, 3.0);
  q.init_v = pos(k - 1, 1, 0.5, 3.0);
  q.trans_u = pos(k, k - 1, 0.5, 5.0);
  q.trans_v = pos(k, k - 1, 0.5, 5.0);
  q.phi = random_phi(rng, k);
  q.mu_mean = random_matrix(rng, k, dx);
  q.mu_prec = pos(k, dx, 1.0, 5.0);
  q.sigma_a = pos(k, dx, 1.0, 5.0);
  q.sigma_b = pos(k, dx, 0.5, 3.0);
  q.rho_a = pos(k, dz, 1.0, 5.0);
  q.rho_b = pos(k, dz, 0.5, 3.0);
  for (Eigen::Index i = 0; i < k; ++i) {
    q.f_mean.push_back(random_matrix(rng, dx, dx, 0.5));
    q.f_cov.push_back(0.1 * random_spd(rng, dx));
    q.h_mean.push_back(random_matrix(rng, dz, dx));
    q.h_cov.push_back(0.1 * random_spd(rng, dx));
  }
  q.alpha_point = hp.alpha;
  q.kappa_point = hp.kappa;
  return q;
}

slds::AuxiliaryLDS naive_lambda_x(const slds::VariationalPosterior& q, const Matrix& unary) {
  const Eigen::Index t_len = unary.rows();
  const int k = q.num_modes();
  const Eigen::Index dx = q.mu_mean.cols(), dz = q.rho_a.cols();

  // per-mode moments straight from the posterior parameters
  std::vector<Vector> e_rho(k), e_sig(k), e_sig_mu(k);
  std::vector<Matrix> e_rinv_h(k), e_hrh(k), e_ftf(k);
  for (int i = 0; i < k; ++i) {
    const auto is = static_cast<std::size_t>(i);
    e_rho[is] = Vector(dz);
    e_rinv_h[is] = Matrix(dz, dx);
    e_hrh[is] = Matrix::Zero(dx, dx);
    for (Eigen::Index d = 0; d < dz; ++d) {
      e_rho[is][d] = q.rho_a(i, d) / q.rho_b(i, d);
      for (Eigen::Index a = 0; a < dx; ++a) e_rinv_h[is](d, a) = e_rho[is][d] * q.h_mean[is](d, a);
      for (Eigen::Index a = 0; a < dx; ++a) {
        for (Eigen::Index b = 0; b < dx; ++b) {
          e_hrh[is](a, b) += e_rho[is][d] * q.h_mean[is](d, a) * q.h_mean[is](d, b) + q.h_cov[is](a, b);
        }
      }
    }
    e_ftf[is] = Matrix::Zero(dx, dx);
    for (Eigen::Index d = 0; d < dx; ++d) {
      for (Eigen::Index a = 0; a < dx; ++a) {
        for (Eigen::Index b = 0; b < dx; ++b) {
          e_ftf[is](a, b) += q.f_mean[is](d, a) * q.f_mean[is](d, b) + q.f_cov[is](a, b);
        }
      }
    }
    e_sig[is] = Vector(dx);
    e_sig_mu[is] = Vector(dx);
    for (Eigen::Index d = 0; d < dx; ++d) {
      e_sig[is][d] = q.sigma_a(i, d) / q.sigma_b(i, d);
      e_sig_mu[is][d] = e_sig[is][d] * q.mu_mean(i, d);
    }
  }

  slds::AuxiliaryLDS aux;
  aux.h_hat.resize(static_cast<std::size_t>(t_len));
  aux.r_hat.resize(static_cast<std::size_t>(t_len));
  aux.f_hat.resize(static_cast<std::size_t>(t_len - 1));
  aux.u_hat.resize(static_cast<std::size_t>(t_len - 1));
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    const auto ts = static_cast<std::size_t>(t);
    Matrix rinv = Matrix::Zero(dz, dz), rh = Matrix::Zero(dz, dx), hrh = Matrix::Zero(dx, dx);
    for (int i = 0; i < k; ++i) {
      const double w = unary(t, i);
      const auto is = static_cast<std::size_t>(i);
      for (Eigen::Index d = 0; d < dz; ++d) rinv(d, d) += w * e_rho[is][d];
      rh += w * e_rinv_h[is];
      hrh += w * e_hrh[is];
    }
    aux.r_hat[ts] = rinv.inverse();
    aux.h_hat[ts] = aux.r_hat[ts] * rh;
    Matrix uinv = hrh - aux.h_hat[ts].transpose() * rinv * aux.h_hat[ts];
    if (t > 0) {
      uinv += Matrix::Identity(dx, dx);
    } else {
      for (int i = 0; i < k; ++i) {
        for (Eigen::Index d = 0; d < dx; ++d) uinv(d, d) += unary(0, i) * e_sig[static_cast<std::size_t>(i)][d];
      }
    }
    if (t + 1 < t_len) {
      for (int i = 0; i < k; ++i) uinv += unary(t + 1, i) * e_ftf[static_cast<std::size_t>(i)];
      const Matrix& f_next = aux.f_hat[ts];
      uinv -= f_next.transpose() * aux.u_hat[ts].inverse() * f_next;
    }
    if (t > 0) {
      aux.u_hat[ts - 1] = uinv.inverse();
      Matrix f_bar = Matrix::Zero(dx, dx);
      for (int i = 0; i < k; ++i) f_bar += unary(t, i) * q.f_mean[static_cast<std::size_t>(i)];
      aux.f_hat[ts - 1] = aux.u_hat[ts - 1] * f_bar;
    } else {
      aux.sigma_hat = uinv.inverse();
      Vector lin = Vector::Zero(dx);
      for (int i = 0; i < k; ++i) lin += unary(0, i) * e_sig_mu[static_cast<std::size_t>(i)];
      aux.mu_hat = aux.sigma_hat * lin;
    }
  }
  return aux;
}

double longhand_log_emission(const slds::VariationalPosterior& q, int mode, Eigen::Index t,
                             const std::vector<slds::SmoothedMoments>& sm, const std::vector<Matrix>& z) {
  const auto is = static_cast<std::size_t>(mode);
  const double a = q.rho_a(mode, 0), b = q.rho_b(mode, 0);
  const double e_rho = a / b, e_log_rho = psi(a) - std::log(b);
  const double h = q.h_mean[is](0, 0), hc = q.h_cov[is](0, 0);
  double total = 0.0;
  for (std::size_t n = 0; n < sm.size(); ++n) {
    const double x = sm[n].mean(t, 0), xx = sm[n].second[static_cast<std::size_t>(t)](0, 0), zt = z[n](t, 0);
    // E[rho (z - h x)^2] = E[rho] z^2 - 2 z E[rho h] E[x] + E[rho h^2] E[x^2]
    double quad = e_rho * zt * zt - 2.0 * zt * e_rho * h * x + (e_rho * h * h + hc) * xx;
    double log_norm = kLog2Pi - e_log_rho;
    if (t == 0) {
      const double sa = q.sigma_a(mode, 0), sb = q.sigma_b(mode, 0);
      const double e_sig = sa / sb, m = q.mu_mean(mode, 0), prec = q.mu_prec(mode, 0);
      quad += e_sig * xx - 2.0 * x * e_sig * m + e_sig * m * m + 1.0 / prec;
      log_norm += kLog2Pi - (psi(sa) - std::log(sb));
    } else {
      const double f = q.f_mean[is](0, 0), fc = q.f_cov[is](0, 0);
      const double xp = sm[n].second[static_cast<std::size_t>(t - 1)](0, 0);
      const double cross = sm[n].cross[static_cast<std::size_t>(t - 1)](0, 0);
      quad += xx - 2.0 * f * cross + (f * f + fc) * xp;
      log_norm += kLog2Pi;
    }
    total += -0.5 * (quad + log_norm);
  }
  return total;
}

double single_mode_lds_bound(const slds::VariationalPosterior& q, const slds::Hyperparameters& hp,
                             const std::vector<slds::SmoothedMoments>& sm, const std::vector<Matrix>& z,
                             double state_entropy) {
  const Eigen::Index dx = q.mu_mean.cols(), dz = q.rho_a.cols();
  const Matrix& hm = q.h_mean[0];
  const Matrix& hc = q.h_cov[0];
  const Matrix& fm = q.f_mean[0];
  const Matrix eftf = fm.transpose() * fm + static_cast<double>(dx) * q.f_cov[0];

  double loglik = 0.0;
  for (std::size_t n = 0; n < sm.size(); ++n) {
    const Eigen::Index t_len = z[n].rows();
    for (Eigen::Index t = 0; t < t_len; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const Vector ex = sm[n].mean.row(t).transpose();
      const Matrix& exx = sm[n].second[ts];
      for (Eigen::Index d = 0; d < dz; ++d) {
        const double a = q.rho_a(0, d), b = q.rho_b(0, d);
        const double e_rho = a / b;
        const Vector h = hm.row(d).transpose();
        const double zd = z[n](t, d);
        const double quad = e_rho * (zd * zd - 2.0 * zd * h.dot(ex) + h.dot(exx * h)) + (hc * exx).trace();
        loglik += -0.5 * (quad + kLog2Pi - (psi(a) - std::log(b)));
      }
      if (t == 0) {
        for (Eigen::Index d = 0; d < dx; ++d) {
          const double sa = q.sigma_a(0, d), sb = q.sigma_b(0, d);
          const double e_sig = sa / sb, m = q.mu_mean(0, d);
          const double quad = e_sig * (exx(d, d) - 2.0 * m * ex[d] + m * m) + 1.0 / q.mu_prec(0, d);
          loglik += -0.5 * (quad + kLog2Pi - (psi(sa) - std::log(sb)));
        }
      } else {
        const Matrix& prev = sm[n].second[ts - 1];
        const Matrix& cross = sm[n].cross[ts - 1];
        const double quad = exx.trace() - 2.0 * (fm * cross.transpose()).trace() + (eftf * prev).trace();
        loglik += -0.5 * (quad + static_cast<double>(dx) * kLog2Pi);
      }
    }
  }

  double kl = 0.0;
  for (Eigen::Index d = 0; d < dx; ++d) {
    const double sa = q.sigma_a(0, d), sb = q.sigma_b(0, d);
    const double ratio = hp.b_mu[0] / q.mu_prec(0, d);
    kl += gamma_kl(sa, sb, hp.a_sigma[0], hp.b_sigma[0]) +
          0.5 * (ratio - 1.0 - std::log(ratio) + hp.b_mu[0] * (sa / sb) * q.mu_mean(0, d) * q.mu_mean(0, d));
  }
  const double f_logdet = std::log(q.f_cov[0].determinant());
  const double h_logdet = std::log(hc.determinant());
  double log_zeta = 0.0, log_eta = 0.0, tr_f = 0.0, tr_h = 0.0;
  for (Eigen::Index a = 0; a < dx; ++a) {
    log_zeta += std::log(hp.zeta(0, a));
    log_eta += std::log(hp.eta(0, a));
    tr_f += hp.zeta(0, a) * q.f_cov[0](a, a);
    tr_h += hp.eta(0, a) * hc(a, a);
  }
  for (Eigen::Index d = 0; d < dx; ++d) {
    double quad = 0.0;
    for (Eigen::Index a = 0; a < dx; ++a) quad += hp.zeta(0, a) * fm(d, a) * fm(d, a);
    kl += 0.5 * (tr_f + quad - static_cast<double>(dx) - f_logdet - log_zeta);
  }
  for (Eigen::Index d = 0; d < dz; ++d) {
    const double a = q.rho_a(0, d), b = q.rho_b(0, d);
    double quad = 0.0;
    for (Eigen::Index c = 0; c < dx; ++c) quad += hp.eta(0, c) * hm(d, c) * hm(d, c);
    kl += gamma_kl(a, b, hp.a_obs[0], hp.b_obs[0]) +
          0.5 * (tr_h - static_cast<double>(dx) - h_logdet - log_eta + (a / b) * quad);
  }
  return loglik + state_entropy - kl;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace oracle
