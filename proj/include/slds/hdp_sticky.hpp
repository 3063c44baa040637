/// @file hdp_sticky.hpp Stick-breaking expectations and the sticky HDP updates.
///
/// Truncation convention: K modes, K-1 random stick fractions; the K-th fraction is fixed at one
/// so the last weight takes the remainder of the stick.

#ifndef SLDS_HDP_STICKY_HPP
#define SLDS_HDP_STICKY_HPP

#include "slds/types.hpp"

namespace slds {

struct StickExpectations {
  Vector e_beta;               // K
  Vector e_beta_sq;            // K
  Vector e_log_beta;           // K
  Vector e_log_bar;            // K-1
  Vector e_log_one_minus_bar;  // K-1
};

StickExpectations stick_expectations(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

/// E[ln(1 + alpha beta_k / kappa)] under the two-branch approximation. The Taylor branch is used
/// when kappa >= alpha E[beta_k].
double sticky_log_term(double alpha, double kappa, double e_beta, double e_beta_sq, double e_log_beta);

/// Unnormalized log prior weight of c_{ii'} = k (shared by every i'), excluding -ln(alpha + kappa).
Matrix indicator_log_prior(double alpha, double kappa, const StickExpectations& sticks);

/// Summed pairwise marginals: counts(i, k) = sum_t q(s_{t-1} = i, s_t = k).
Matrix transition_counts(const ModeMarginals& marginals);

/// E[ln pi'_{ii'}] for every row, K x K.
Matrix expected_log_stick_weights(const Matrix& trans_u, const Matrix& trans_v);

/// Sticky indicator update. counts is K x K (see transition_counts), trans_log is E[ln pi'] as
/// returned by expected_log_stick_weights.
std::vector<Matrix> update_phi(double alpha, double kappa, const StickExpectations& sticks, const Matrix& counts,
                               const Matrix& trans_log);

struct StickParams {
  Vector u, v;
};

/// Top-level stick posterior; self-transition indicator mass (j = i) is excluded.
StickParams update_sticks(const std::vector<Matrix>& phi, double gamma);

struct TransitionParams {
  Vector init_u, init_v;    // K-1
  Matrix trans_u, trans_v;  // K x (K-1)
};

TransitionParams update_transitions(const std::vector<Matrix>& phi, const Matrix& counts, const Vector& init_marginal,
                                    double alpha0, double alpha, double kappa);

struct TransitionMatrix {
  Matrix prob;  // rows renormalized to one
  Matrix log_prob;
};

/// pi_hat_{ij} = sum_k E[pi'_{ik}] phi_{ik}(j), rows renormalized.
TransitionMatrix expected_transition_matrix(const Matrix& trans_u, const Matrix& trans_v,
                                            const std::vector<Matrix>& phi);

/// ln pi_tilde_{ij} = ln sum_k phi_{ik}(j) exp(E[ln pi'_{ik}]). No row renormalization: the rows
/// sum to at most one and the deficit is part of the bound.
Matrix geometric_transition_log(const Matrix& trans_log, const std::vector<Matrix>& phi);

/// sum_k phi_{ik}(j) E[ln pi'_{ik}]: the expected log weight when every stick mapped to j is
/// charged for a move to j. Not a normalized row.
Matrix stickwise_transition_log(const Matrix& trans_log, const std::vector<Matrix>& phi);

/// Transition sticks with each count split over the sticks of its row in proportion to
/// phi_{ii'}(k) exp(E[ln pi'_{ii'}]) (the posterior probability that stick i' produced the move
/// i -> k). trans_log is E[ln pi'] under the current posterior. Initial-state sticks as in
/// update_transitions.
TransitionParams update_transitions_split(const std::vector<Matrix>& phi, const Matrix& counts,
                                          const Vector& init_marginal, const Matrix& trans_log, double alpha0,
                                          double alpha, double kappa);

struct ConcentrationUpdate {
  double a = 0.0, b = 0.0, u = 0.0, v = 0.0;
  double alpha_prime = 0.0, kappa_prime = 0.0;
  double alpha = 0.0, kappa = 0.0;
};

/// Gamma posterior on alpha' = alpha + kappa and Beta posterior on kappa' = kappa / alpha', with
/// the point estimates mapped back to (alpha, kappa). Throws NumericalError if the rate is not
/// positive.
ConcentrationUpdate update_concentrations(const std::vector<Matrix>& phi, const Matrix& trans_u,
                                          const Matrix& trans_v, double a_prior, double b_prior, double u_prior,
                                          double v_prior);

/// KL(C | beta) = sum_{i,i'} sum_k phi(k) [ln phi(k) - E ln P(c = k)], using the same
/// approximation branches as update_phi.
double kl_indicators(const std::vector<Matrix>& phi, double alpha, double kappa, const StickExpectations& sticks);

}  // namespace slds

#endif  // SLDS_HDP_STICKY_HPP
