#include "slds/vbem.hpp"

#include "slds/core_model.hpp"
#include "slds/hdp_sticky.hpp"
#include "slds/hmm_chain.hpp"
#include "slds/lds_smoother.hpp"
#include "slds/mode_params.hpp"
#include "slds/special.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>

namespace slds {

double ElboTerms::total() const {
  return expected_log_joint + entropy_x + entropy_s - kl_init - kl_trans - kl_sticks - kl_indicators - kl_theta -
         kl_concentration;
}

Matrix initial_responsibilities(Eigen::Index t_len, int k, std::uint64_t seed, double concentration) {
  if (!(concentration > 0.0)) throw InputError("initial Dirichlet concentration must be positive");
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> draw(concentration, 1.0);
  Matrix out(t_len, k);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (int i = 0; i < k; ++i) out(t, i) = std::max(draw(rng), 1e-300);
    out.row(t) /= out.row(t).sum();
  }
  return out;
}

int init_clusters_for_seed(const FitOptions& opts, std::uint64_t seed) {
  if (opts.init_min_clusters < 1 || opts.init_max_clusters < opts.init_min_clusters) {
    throw InputError("need 1 <= init_min_clusters <= init_max_clusters");
  }
  const auto span = static_cast<std::uint64_t>(opts.init_max_clusters - opts.init_min_clusters + 1);
  return opts.init_min_clusters + static_cast<int>(seed % span);
}

namespace {

/// States approximated by a fixed linear projection of the observations.
std::vector<SmoothedMoments> projected_states(const ObservationSet& obs, int dim_x, double variance) {
  const Eigen::Index dz = obs.dim();
  Matrix proj = Matrix::Zero(dz, dim_x);  // z -> x is proj^T z
  if (dim_x == dz) {
    proj.setIdentity();
  } else {
    Matrix scatter = Matrix::Zero(dz, dz);
    for (const Matrix& z : obs.sequences) scatter += z.transpose() * z;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(scatter);
    const Eigen::Index keep = std::min<Eigen::Index>(dim_x, dz);
    for (Eigen::Index c = 0; c < keep; ++c) proj.col(c) = eig.eigenvectors().col(dz - 1 - c);
  }
  std::vector<SmoothedMoments> out;
  for (const Matrix& z : obs.sequences) {
    SmoothedMoments sm;
    const Eigen::Index t_len = z.rows();
    sm.mean = z * proj;
    const Matrix iso = variance * Matrix::Identity(dim_x, dim_x);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      const Vector m = sm.mean.row(t).transpose();
      sm.cov.push_back(iso);
      sm.second.push_back(iso + m * m.transpose());
      if (t + 1 < t_len) sm.cross.push_back(sm.mean.row(t + 1).transpose() * m.transpose());
    }
    out.push_back(std::move(sm));
  }
  return out;
}

double kl_sticks_total(const Vector& u, const Vector& v, double prior_v) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) kl += kl_beta(u[i], v[i], 1.0, prior_v);
  return kl;
}

void check_term(double value, const char* name) {
  if (!std::isfinite(value)) throw NumericalError(std::string("bound term '") + name + "' is not finite");
}

}  // namespace

VbemState init_state(const ObservationSet& obs, const Hyperparameters& hp, const FitOptions& opts, std::uint64_t seed,
                     const Matrix* init_unary) {
  validate_config(hp, obs);
  VbemState s;
  s.hp = hp;
  s.q = init_posterior(hp);
  if (init_unary != nullptr) {
    if (init_unary->rows() != obs.length() || init_unary->cols() != hp.trunc_k) {
      throw InputError("initial responsibilities have the wrong shape");
    }
    s.unary = *init_unary;
  } else {
    if (opts.init_method == InitMethod::kDirichlet) {
      s.unary = initial_responsibilities(obs.length(), hp.trunc_k, seed, opts.init.jitter_concentration);
    } else {
      InitOptions io = opts.init;
      io.clusters = init_clusters_for_seed(opts, seed);
      s.unary = dynamics_responsibilities(obs, hp.trunc_k, seed, io);
    }
  }
  const auto states = projected_states(obs, hp.dim_x, opts.init_state_variance);
  SufficientStats stats = sufficient_stats(states);
  add_observation_stats(stats, states, obs);
  update_mode_parameters(s.q, stats, s.unary, hp);
  return s;
}

Matrix chain_log_transitions(const VariationalPosterior& q, TransitionUpdate transitions) {
  if (transitions == TransitionUpdate::kPrinted) {
    return expected_transition_matrix(q.trans_u, q.trans_v, q.phi).log_prob;
  }
  if (transitions == TransitionUpdate::kStickwise) {
    return stickwise_transition_log(expected_log_stick_weights(q.trans_u, q.trans_v), q.phi);
  }
  return geometric_transition_log(expected_log_stick_weights(q.trans_u, q.trans_v), q.phi);
}

ElboTerms compute_elbo(const VariationalPosterior& q, const Hyperparameters& hp, const ModeMarginals& marginals,
                       const std::vector<SmoothedMoments>& smoothed, const SufficientStats& stats,
                       TransitionUpdate transitions) {
  ElboTerms e;
  const auto modes = mode_expectations(q);
  const Matrix log_emit = expected_log_emissions(modes, stats);
  const Vector e_log_pi0 = stick_expectations(q.init_u, q.init_v).e_log_beta;
  const Matrix log_trans = chain_log_transitions(q, transitions);

  e.expected_log_joint = marginals.unary.row(0).dot(e_log_pi0.transpose()) + marginals.unary.cwiseProduct(log_emit).sum();
  for (const Matrix& xi : marginals.pairwise) e.expected_log_joint += xi.cwiseProduct(log_trans).sum();
  for (const SmoothedMoments& sm : smoothed) e.entropy_x += sm.entropy;
  e.entropy_s = marginals.entropy;

  const double alpha = q.alpha_point, kappa = q.kappa_point;
  e.kl_init = kl_sticks_total(q.init_u, q.init_v, hp.alpha0);
  for (Eigen::Index i = 0; i < q.trans_u.rows(); ++i) {
    e.kl_trans += kl_sticks_total(q.trans_u.row(i).transpose(), q.trans_v.row(i).transpose(), alpha + kappa);
  }
  e.kl_sticks = kl_sticks_total(q.stick_u, q.stick_v, hp.gamma);
  e.kl_indicators = kl_indicators(q.phi, alpha, kappa, stick_expectations(q.stick_u, q.stick_v));
  e.kl_theta = kl_theta(q, hp).total();
  if (hp.update_concentrations) {
    e.kl_concentration = kl_gamma(q.conc_a, q.conc_b, hp.a_alpha_prior, hp.b_alpha_prior) +
                         kl_beta(q.conc_u, q.conc_v, hp.u_kappa_prior, hp.v_kappa_prior);
  }

  check_term(e.expected_log_joint, "expected log joint");
  check_term(e.entropy_x, "state entropy");
  check_term(e.entropy_s, "mode entropy");
  check_term(e.kl_init, "initial-state sticks");
  check_term(e.kl_trans, "transition sticks");
  check_term(e.kl_sticks, "top-level sticks");
  check_term(e.kl_indicators, "indicators");
  check_term(e.kl_theta, "mode parameters");
  check_term(e.kl_concentration, "concentrations");
  return e;
}

void vbem_iterate(VbemState& s, const ObservationSet& obs, const FitOptions& opts) {
  const Hyperparameters& hp = s.hp;
  try {
    // states
    auto modes = mode_expectations(s.q);
    const AuxiliaryLDS aux_x = compute_lambda_x(modes, s.unary);
    s.smoothed.clear();
    for (const Matrix& z : obs.sequences) s.smoothed.push_back(rts_smooth(aux_x, z));
    s.stats = sufficient_stats(s.smoothed);
    add_observation_stats(s.stats, s.smoothed, obs);

    // modes
    AuxiliaryHMM aux_s = compute_lambda_s(s.q, modes, s.stats);
    aux_s.log_trans = chain_log_transitions(s.q, opts.transition_update);
    s.marginals = forward_backward(aux_s);
    s.unary = s.marginals.unary;

    // parameters
    const double alpha = s.q.alpha_point, kappa = s.q.kappa_point;
    const Matrix counts = transition_counts(s.marginals);
    if (opts.update_phi) {
      const Matrix trans_log = expected_log_stick_weights(s.q.trans_u, s.q.trans_v);
      s.q.phi = update_phi(alpha, kappa, stick_expectations(s.q.stick_u, s.q.stick_v), counts, trans_log);
    }
    const StickParams sticks = update_sticks(s.q.phi, hp.gamma);
    s.q.stick_u = sticks.u;
    s.q.stick_v = sticks.v;
    const Vector init_marginal = s.unary.row(0).transpose();
    const TransitionParams tp =
        opts.transition_update != TransitionUpdate::kSplit
            ? update_transitions(s.q.phi, counts, init_marginal, hp.alpha0, alpha, kappa)
            : update_transitions_split(s.q.phi, counts, init_marginal,
                                       expected_log_stick_weights(s.q.trans_u, s.q.trans_v), hp.alpha0, alpha, kappa);
    s.q.init_u = tp.init_u;
    s.q.init_v = tp.init_v;
    s.q.trans_u = tp.trans_u;
    s.q.trans_v = tp.trans_v;
    update_mode_parameters(s.q, s.stats, s.unary, hp);

    // bound
    s.terms = compute_elbo(s.q, hp, s.marginals, s.smoothed, s.stats, opts.transition_update);
    const double elbo = s.terms.total();
    if (!s.elbo_trace.empty()) {
      const double prev = s.elbo_trace.back();
      const double delta = elbo - prev;
      if (delta < -kElboNoise) ++s.elbo_warnings;
      if (delta < -opts.elbo_decrease_tolerance * std::abs(prev)) ++s.elbo_errors;
    }
    s.elbo_trace.push_back(elbo);

    // concentrations
    if (hp.update_concentrations) {
      const ConcentrationUpdate c =
          update_concentrations(s.q.phi, s.q.trans_u, s.q.trans_v, hp.a_alpha_prior, hp.b_alpha_prior,
                                hp.u_kappa_prior, hp.v_kappa_prior);
      s.q.conc_a = c.a;
      s.q.conc_b = c.b;
      s.q.conc_u = c.u;
      s.q.conc_v = c.v;
      s.q.alpha_point = c.alpha;
      s.q.kappa_point = c.kappa;
    }
    ++s.iterations;
  } catch (const NumericalError& e) {
    throw NumericalError("iteration " + std::to_string(s.iterations + 1) + ": " + e.what());
  }
}

FitResult fit_single(const ObservationSet& obs, const Hyperparameters& hp, const FitOptions& opts, std::uint64_t seed,
                     const Matrix* init_unary) {
  if (opts.max_iters < 1) throw InputError("max_iters must be at least 1");
  if (!(opts.elbo_rel_tol > 0.0)) throw InputError("elbo_rel_tol must be positive");
  VbemState s = init_state(obs, hp, opts, seed, init_unary);
  FitResult r;
  r.seed = seed;
  for (int it = 0; it < opts.max_iters; ++it) {
    vbem_iterate(s, obs, opts);
    const auto n = s.elbo_trace.size();
    if (n >= 2) {
      const double cur = s.elbo_trace[n - 1], prev = s.elbo_trace[n - 2];
      if (std::abs(cur - prev) / std::max(std::abs(cur), 1e-10) < opts.elbo_rel_tol) {
        r.converged = true;
        break;
      }
    }
  }
  const auto modes = mode_expectations(s.q);
  AuxiliaryHMM aux = compute_lambda_s(s.q, modes, s.stats);
  aux.log_trans = chain_log_transitions(s.q, opts.transition_update);
  r.map_modes = map_sequence(aux);
  r.transition = chain_log_transitions(s.q, opts.transition_update).array().exp().matrix();
  r.posterior = std::move(s.q);
  r.mode_marginals = s.marginals.unary;
  r.smoothed = std::move(s.smoothed);
  r.iterations = s.iterations;
  r.elbo_warnings = s.elbo_warnings;
  r.elbo_errors = s.elbo_errors;
  r.elbo_trace = opts.track_trace ? s.elbo_trace : std::vector<double>{s.elbo_trace.back()};
  return r;
}

namespace {

/// Runs task(0..n-1) on up to `threads` workers (0 = hardware concurrency). NumericalError is
/// recorded per index; anything else is rethrown after the pool drains.
void run_indexed(std::size_t n, int threads, const std::function<void(std::size_t)>& task,
                 std::vector<std::string>& errors) {
  errors.assign(n, "");
  std::exception_ptr fatal;
  std::mutex fatal_lock;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < n; r = next++) {
      try {
        task(r);
      } catch (const NumericalError& e) {
        errors[r] = e.what();
      } catch (...) {
        const std::lock_guard<std::mutex> lock(fatal_lock);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(n, threads == 0 ? hw : static_cast<unsigned>(threads));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (fatal) std::rethrow_exception(fatal);
}

FitResult refine_by_merges(const ObservationSet& obs, const Hyperparameters& hp, const FitOptions& opts,
                           FitResult current) {
  for (int round = 0; round < opts.merge_rounds; ++round) {
    const Vector mass = current.mode_marginals.colwise().sum().transpose();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index a = 0; a < mass.size(); ++a) {
      for (Eigen::Index b = a + 1; b < mass.size(); ++b) {
        if (mass[a] >= opts.merge_min_mass && mass[b] >= opts.merge_min_mass) pairs.emplace_back(a, b);
      }
    }
    if (pairs.empty()) break;
    std::vector<std::optional<FitResult>> candidates(pairs.size());
    std::vector<std::string> errors;
    run_indexed(
        pairs.size(), opts.threads,
        [&](std::size_t p) {
          Matrix merged = current.mode_marginals;
          merged.col(pairs[p].first) += merged.col(pairs[p].second);
          merged.col(pairs[p].second).setZero();
          candidates[p] = fit_single(obs, hp, opts, current.seed, &merged);
        },
        errors);
    std::size_t best = pairs.size();
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (!candidates[p]) continue;
      if (best == pairs.size() || candidates[p]->final_elbo() > candidates[best]->final_elbo()) best = p;
    }
    if (best == pairs.size() || !(candidates[best]->final_elbo() > current.final_elbo())) break;
    const int accepted = current.merges_accepted + 1;
    current = *std::move(candidates[best]);
    current.merges_accepted = accepted;
  }
  return current;
}

}  // namespace

FitResult fit(const ObservationSet& obs, const Hyperparameters& hp, const FitOptions& opts) {
  if (opts.restarts < 1) throw InputError("restarts must be at least 1");
  if (opts.threads < 0) throw InputError("threads must be non-negative");
  if (opts.merge_rounds < 0) throw InputError("merge_rounds must be non-negative");
  validate_config(hp, obs);
  const auto n = static_cast<std::size_t>(opts.restarts);
  std::vector<std::optional<FitResult>> results(n);
  std::vector<std::string> errors;
  run_indexed(
      n, opts.threads, [&](std::size_t r) { results[r] = fit_single(obs, hp, opts, opts.seed + r); }, errors);

  std::vector<double> finals(n, std::nan(""));
  std::size_t best = n;
  std::string last_error;
  for (std::size_t r = 0; r < n; ++r) {
    if (!results[r]) {
      last_error = errors[r];
      continue;
    }
    finals[r] = results[r]->final_elbo();
    if (best == n || finals[r] > finals[best]) best = r;
  }
  if (best == n) throw NumericalError("all " + std::to_string(opts.restarts) + " restarts failed; last: " + last_error);
  FitResult out = *std::move(results[best]);
  if (n > 1) out = refine_by_merges(obs, hp, opts, std::move(out));
  out.restart_elbos = std::move(finals);
  return out;
}

}  // namespace slds
