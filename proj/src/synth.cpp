#include "slds/synth.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace slds {

namespace {

Eigen::LLT<Matrix> spd_factor(const Matrix& m, const std::string& what) {
  if (!m.isApprox(m.transpose(), 1e-12)) throw InputError(what + " is not symmetric");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw InputError(what + " is not positive definite");
  return llt;
}

}  // namespace

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.modes.empty()) throw InputError("synthetic spec has no modes");
  if (!(spec.dwell_mean >= 1.0)) throw InputError("dwell_mean must be at least 1");
  if (spec.length < 1) throw InputError("length must be positive");
  if (spec.num_sequences < 1) throw InputError("num_sequences must be positive");
  if (spec.dim_x < 1 || spec.dim_z < 1) throw InputError("dimensions must be positive");
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    const SynthMode& m = spec.modes[i];
    const std::string tag = "mode " + std::to_string(i) + ": ";
    if (m.f.rows() != spec.dim_x || m.f.cols() != spec.dim_x) throw InputError(tag + "F has the wrong shape");
    if (m.h.rows() != spec.dim_z || m.h.cols() != spec.dim_x) throw InputError(tag + "H has the wrong shape");
    if (m.r.rows() != spec.dim_z || m.r.cols() != spec.dim_z) throw InputError(tag + "R has the wrong shape");
    if (m.mu.size() != spec.dim_x) throw InputError(tag + "mu has the wrong shape");
    if (m.sigma.rows() != spec.dim_x || m.sigma.cols() != spec.dim_x) {
      throw InputError(tag + "Sigma has the wrong shape");
    }
    spd_factor(m.r, tag + "R");
    spd_factor(m.sigma, tag + "Sigma");
    const double radius = m.f.eigenvalues().cwiseAbs().maxCoeff();
    if (radius > 1.05) throw InputError(tag + "spectral radius of F exceeds 1.05");
  }
}

Matrix synth_transition_matrix(int n_modes, double dwell_mean) {
  if (n_modes == 1) return Matrix::Ones(1, 1);
  const double stay = 1.0 - 1.0 / dwell_mean;
  Matrix p = Matrix::Constant(n_modes, n_modes, (1.0 - stay) / (n_modes - 1));
  p.diagonal().setConstant(stay);
  return p;
}

SynthData sample_slds(const SynthSpec& spec) {
  validate_synth_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const int k = spec.n_modes();
  const Matrix trans = synth_transition_matrix(k, spec.dwell_mean);

  auto draw_mode = [&](const Eigen::Ref<const Vector>& probs) {
    const double u = uniform(rng);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
      acc += probs[j];
      if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(probs.size() - 1);
  };
  auto draw_normal = [&](Eigen::Index d) {
    Vector v(d);
    for (Eigen::Index j = 0; j < d; ++j) v[j] = normal(rng);
    return v;
  };

  SynthData out;
  out.true_modes.resize(static_cast<std::size_t>(spec.length));
  out.true_modes[0] = draw_mode(Vector::Constant(k, 1.0 / k));
  for (int t = 1; t < spec.length; ++t) {
    out.true_modes[static_cast<std::size_t>(t)] =
        draw_mode(trans.row(out.true_modes[static_cast<std::size_t>(t - 1)]).transpose());
  }

  std::vector<Matrix> r_chol, sigma_chol;
  for (const SynthMode& m : spec.modes) {
    r_chol.emplace_back(Eigen::LLT<Matrix>(m.r).matrixL());
    sigma_chol.emplace_back(Eigen::LLT<Matrix>(m.sigma).matrixL());
  }

  for (int n = 0; n < spec.num_sequences; ++n) {
    Matrix x(spec.length, spec.dim_x), z(spec.length, spec.dim_z);
    for (int t = 0; t < spec.length; ++t) {
      const auto s = static_cast<std::size_t>(out.true_modes[static_cast<std::size_t>(t)]);
      const SynthMode& m = spec.modes[s];
      Vector state;
      if (t == 0) {
        state = m.mu + sigma_chol[s] * draw_normal(spec.dim_x);
      } else {
        state = m.f * x.row(t - 1).transpose() + draw_normal(spec.dim_x);
      }
      x.row(t) = state.transpose();
      z.row(t) = (m.h * state + r_chol[s] * draw_normal(spec.dim_z)).transpose();
    }
    out.true_states.push_back(std::move(x));
    out.obs.sequences.push_back(std::move(z));
  }
  out.obs.channel_scales = Vector::Ones(spec.dim_z);
  out.obs.sample_rate_hz = spec.sample_rate_hz;
  out.obs.timestamps.resize(static_cast<std::size_t>(spec.length));
  for (int t = 0; t < spec.length; ++t) out.obs.timestamps[static_cast<std::size_t>(t)] = t / spec.sample_rate_hz;
  return out;
}

SynthSpec benchmark_spec(std::uint64_t seed, int length, double dwell_mean) {
  SynthSpec spec;
  spec.seed = seed;
  spec.length = length;
  spec.dwell_mean = dwell_mean;
  const Matrix eye = Matrix::Identity(3, 3);
  Matrix turn = 0.97 * eye;  // quarter turn in the first two coordinates
  turn(0, 0) = 0.0;
  turn(0, 1) = -0.97;
  turn(1, 0) = 0.97;
  turn(1, 1) = 0.0;
  const Matrix gain = 2.0 * eye;
  const Matrix noise = 4.0 * eye;
  spec.modes.push_back({0.99 * eye, gain, noise, Vector::Zero(3), eye});
  spec.modes.push_back({turn, gain, noise, Vector::Zero(3), eye});
  spec.modes.push_back({-0.9 * eye, gain, noise, Vector::Zero(3), eye});
  return spec;
}

}  // namespace slds
