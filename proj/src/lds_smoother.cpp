#include "slds/lds_smoother.hpp"

#include "slds/special.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace slds {

namespace {

Matrix spd_inverse(Matrix m, const std::string& what) {
  const auto llt = make_spd(m, what);
  Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

double gaussian_entropy(Matrix cov, const std::string& what) {
  const auto d = static_cast<double>(cov.rows());
  const auto llt = make_spd(cov, what);
  return 0.5 * (d * (1.0 + std::log(2.0 * std::numbers::pi)) + log_det(llt));
}

}  // namespace

AuxiliaryLDS compute_lambda_x(const std::vector<ModeExpectations>& modes, const Matrix& unary) {
  const Eigen::Index t_len = unary.rows();
  const auto k = static_cast<Eigen::Index>(modes.size());
  if (unary.cols() != k) throw InputError("mode marginals do not match the number of modes");
  if (t_len < 1) throw InputError("mode marginals are empty");
  const Eigen::Index dz = modes.front().e_rho.size();
  const Eigen::Index dx = modes.front().e_f.rows();

  AuxiliaryLDS aux;
  aux.h_hat.resize(static_cast<std::size_t>(t_len));
  aux.r_hat.resize(static_cast<std::size_t>(t_len));
  aux.h_t_rinv.resize(static_cast<std::size_t>(t_len));
  aux.h_t_rinv_h.resize(static_cast<std::size_t>(t_len));
  aux.f_hat.resize(static_cast<std::size_t>(t_len - 1));
  aux.u_hat.resize(static_cast<std::size_t>(t_len - 1));

  // F_bar_{t+1}^T U_{t+1} F_bar_{t+1} from the step after t
  Matrix next_ftf = Matrix::Zero(dx, dx);
  Matrix next_fuf = Matrix::Zero(dx, dx);
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    const auto ts = static_cast<std::size_t>(t);
    Vector rinv = Vector::Zero(dz);
    Matrix rinv_h = Matrix::Zero(dz, dx);
    Matrix ht_rinv_h = Matrix::Zero(dx, dx);
    Matrix f_bar = Matrix::Zero(dx, dx);
    Vector sigma = Vector::Zero(dx), sigma_mu = Vector::Zero(dx);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double w = unary(t, i);
      if (w == 0.0) continue;
      const ModeExpectations& m = modes[static_cast<std::size_t>(i)];
      rinv += w * m.e_rho;
      rinv_h += w * m.e_rinv_h;
      ht_rinv_h += w * m.e_ht_rinv_h;
      if (t > 0) {
        f_bar += w * m.e_f;
      } else {
        sigma += w * m.e_sigma;
        sigma_mu += w * m.e_sigma_mu;
      }
    }
    const Vector r_diag = rinv.cwiseInverse();
    aux.r_hat[ts] = r_diag.asDiagonal();
    aux.h_hat[ts] = r_diag.asDiagonal() * rinv_h;
    aux.h_t_rinv[ts] = rinv_h.transpose();
    Matrix hrh = rinv_h.transpose() * r_diag.asDiagonal() * rinv_h;
    aux.h_t_rinv_h[ts] = 0.5 * (hrh + hrh.transpose());

    Matrix prec = ht_rinv_h - aux.h_t_rinv_h[ts];
    if (t > 0) {
      prec.diagonal().array() += 1.0;
    } else {
      prec.diagonal() += sigma;
    }
    if (t < t_len - 1) prec += next_ftf - next_fuf;

    if (t > 0) {
      const Matrix u = spd_inverse(prec, "auxiliary transition precision at t=" + std::to_string(t + 1));
      aux.u_hat[ts - 1] = u;
      aux.f_hat[ts - 1] = u * f_bar;
      next_fuf = f_bar.transpose() * u * f_bar;
      next_ftf.setZero();
      for (Eigen::Index i = 0; i < k; ++i) {
        const double w = unary(t, i);
        if (w != 0.0) next_ftf += w * modes[static_cast<std::size_t>(i)].e_ft_f;
      }
    } else {
      aux.sigma_hat = spd_inverse(prec, "auxiliary initial precision");
      aux.mu_hat = aux.sigma_hat * sigma_mu;
    }
  }
  return aux;
}

AuxiliaryLDS compute_lambda_x(const VariationalPosterior& q, const Matrix& unary) {
  return compute_lambda_x(mode_expectations(q), unary);
}

SmoothedMoments rts_smooth(const AuxiliaryLDS& aux, const Matrix& z) {
  const Eigen::Index t_len = z.rows();
  const Eigen::Index dx = aux.mu_hat.size();
  if (static_cast<Eigen::Index>(aux.h_hat.size()) != t_len || static_cast<Eigen::Index>(aux.f_hat.size()) != t_len - 1) {
    throw InputError("auxiliary LDS length does not match the sequence");
  }
  const bool cached = aux.h_t_rinv.size() == aux.h_hat.size();

  std::vector<Vector> m_pred(static_cast<std::size_t>(t_len)), m_filt(static_cast<std::size_t>(t_len));
  std::vector<Matrix> p_pred(static_cast<std::size_t>(t_len)), p_filt(static_cast<std::size_t>(t_len));
  std::vector<Eigen::LLT<Matrix>> pred_llt(static_cast<std::size_t>(t_len));

  for (Eigen::Index t = 0; t < t_len; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    if (t == 0) {
      m_pred[ts] = aux.mu_hat;
      p_pred[ts] = aux.sigma_hat;
    } else {
      const Matrix& f = aux.f_hat[ts - 1];
      m_pred[ts] = f * m_filt[ts - 1];
      p_pred[ts] = f * p_filt[ts - 1] * f.transpose() + aux.u_hat[ts - 1];
    }
    pred_llt[ts] = make_spd(p_pred[ts], "predicted covariance at t=" + std::to_string(t + 1));

    Matrix h_t_rinv, h_t_rinv_h;
    if (cached) {
      h_t_rinv = aux.h_t_rinv[ts];
      h_t_rinv_h = aux.h_t_rinv_h[ts];
    } else {
      Matrix r = aux.r_hat[ts];
      const auto r_llt = make_spd(r, "innovation covariance at t=" + std::to_string(t + 1));
      h_t_rinv = r_llt.solve(aux.h_hat[ts]).transpose();
      h_t_rinv_h = h_t_rinv * aux.h_hat[ts];
    }
    Matrix info = pred_llt[ts].solve(Matrix::Identity(dx, dx)) + h_t_rinv_h;
    const auto info_llt = make_spd(info, "filtered precision at t=" + std::to_string(t + 1));
    const Vector rhs = pred_llt[ts].solve(m_pred[ts]) + h_t_rinv * z.row(t).transpose();
    m_filt[ts] = info_llt.solve(rhs);
    Matrix p = info_llt.solve(Matrix::Identity(dx, dx));
    p_filt[ts] = 0.5 * (p + p.transpose());
  }

  SmoothedMoments sm;
  sm.mean.resize(t_len, dx);
  sm.cov.resize(static_cast<std::size_t>(t_len));
  sm.second.resize(static_cast<std::size_t>(t_len));
  sm.cross.resize(static_cast<std::size_t>(t_len - 1));

  const auto last = static_cast<std::size_t>(t_len - 1);
  Vector ms = m_filt[last];
  Matrix ps = p_filt[last];
  sm.mean.row(t_len - 1) = ms.transpose();
  sm.cov[last] = ps;
  sm.entropy = gaussian_entropy(ps, "smoothed covariance at t=" + std::to_string(t_len));

  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const auto ts = static_cast<std::size_t>(t);
    const Matrix& f = aux.f_hat[ts];
    const Matrix gain = pred_llt[ts + 1].solve(f * p_filt[ts]).transpose();
    const Vector ms_prev = m_filt[ts] + gain * (ms - m_pred[ts + 1]);
    Matrix ps_prev = p_filt[ts] + gain * (ps - p_pred[ts + 1]) * gain.transpose();
    ps_prev = 0.5 * (ps_prev + ps_prev.transpose());

    sm.cross[ts] = ps * gain.transpose() + ms * ms_prev.transpose();

    // Cov(x_t | x_{t+1}) = (P_t^-1 + F^T U^-1 F)^-1
    Matrix u = aux.u_hat[ts];
    const auto u_llt = make_spd(u, "auxiliary transition covariance at t=" + std::to_string(t + 2));
    Matrix pf = p_filt[ts];
    const auto pf_llt = make_spd(pf, "filtered covariance at t=" + std::to_string(t + 1));
    Matrix cond_prec = pf_llt.solve(Matrix::Identity(dx, dx)) + f.transpose() * u_llt.solve(f);
    const auto cond_llt = make_spd(cond_prec, "conditional precision at t=" + std::to_string(t + 1));
    sm.entropy += 0.5 * (static_cast<double>(dx) * (1.0 + std::log(2.0 * std::numbers::pi)) - log_det(cond_llt));

    ms = ms_prev;
    ps = ps_prev;
    sm.mean.row(t) = ms.transpose();
    sm.cov[ts] = ps;
  }
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    const Vector m = sm.mean.row(t).transpose();
    sm.second[ts] = sm.cov[ts] + m * m.transpose();
  }
  if (!std::isfinite(sm.entropy)) throw NumericalError("state entropy is not finite");
  return sm;
}

SufficientStats sufficient_stats(const std::vector<SmoothedMoments>& sm) {
  if (sm.empty()) throw InputError("no smoothed sequences");
  const Eigen::Index t_len = sm.front().mean.rows();
  const Eigen::Index dx = sm.front().mean.cols();
  SufficientStats s;
  s.num_sequences = static_cast<int>(sm.size());
  s.sum_mean = Matrix::Zero(t_len, dx);
  s.sum_second.assign(static_cast<std::size_t>(t_len), Matrix::Zero(dx, dx));
  s.sum_cross.assign(static_cast<std::size_t>(t_len > 0 ? t_len - 1 : 0), Matrix::Zero(dx, dx));
  for (const SmoothedMoments& m : sm) {
    if (m.mean.rows() != t_len || m.mean.cols() != dx) throw InputError("smoothed sequences differ in length");
    s.sum_mean += m.mean;
    for (std::size_t t = 0; t < s.sum_second.size(); ++t) s.sum_second[t] += m.second[t];
    for (std::size_t t = 0; t < s.sum_cross.size(); ++t) s.sum_cross[t] += m.cross[t];
  }
  return s;
}

void add_observation_stats(SufficientStats& stats, const std::vector<SmoothedMoments>& sm, const ObservationSet& obs) {
  if (sm.size() != obs.sequences.size()) throw InputError("smoothed moments do not match the observation set");
  const Eigen::Index t_len = obs.length();
  const Eigen::Index dz = obs.dim();
  const Eigen::Index dx = stats.sum_mean.cols();
  if (stats.sum_mean.rows() != t_len) throw InputError("statistics do not match the sequence length");
  stats.sum_xz.assign(static_cast<std::size_t>(t_len), Matrix::Zero(dx, dz));
  stats.sum_zz = Matrix::Zero(t_len, dz);
  for (std::size_t n = 0; n < sm.size(); ++n) {
    const Matrix& z = obs.sequences[n];
    for (Eigen::Index t = 0; t < t_len; ++t) {
      stats.sum_xz[static_cast<std::size_t>(t)] += sm[n].mean.row(t).transpose() * z.row(t);
    }
    stats.sum_zz += z.array().square().matrix();
  }
}

}  // namespace slds
