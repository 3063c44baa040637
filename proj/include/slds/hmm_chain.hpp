/// @file hmm_chain.hpp Auxiliary HMM over the mode chain, forward-backward and Viterbi decoding.

#ifndef SLDS_HMM_CHAIN_HPP
#define SLDS_HMM_CHAIN_HPP

#include "slds/expectations.hpp"
#include "slds/types.hpp"

namespace slds {

struct AuxiliaryHMM {
  Vector log_pi0;    // K, normalized
  Matrix log_trans;  // K x K, rows sum to at most one
  Matrix log_emit;   // T x K, unnormalized
};

/// ln e_t(i) summed over sequences, T x K. Includes the Gaussian normalizing constants so that
/// sum_t sum_i q(s_t = i) ln e_t(i) is the expected log density of X and Z.
Matrix expected_log_emissions(const std::vector<ModeExpectations>& modes, const SufficientStats& stats);

/// Requires stats with observation terms (see add_observation_stats).
AuxiliaryHMM compute_lambda_s(const VariationalPosterior& q, const std::vector<ModeExpectations>& modes,
                              const SufficientStats& stats);
AuxiliaryHMM compute_lambda_s(const VariationalPosterior& q, const SufficientStats& stats);

/// Log-domain forward-backward.
ModeMarginals forward_backward(const AuxiliaryHMM& aux);

/// Viterbi path; ties go to the lowest mode index.
std::vector<int> map_sequence(const AuxiliaryHMM& aux);

}  // namespace slds

#endif  // SLDS_HMM_CHAIN_HPP
