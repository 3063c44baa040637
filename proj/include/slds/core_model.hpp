/// @file core_model.hpp Configuration validation, prior initialization and observation rescaling.

#ifndef SLDS_CORE_MODEL_HPP
#define SLDS_CORE_MODEL_HPP

#include "slds/types.hpp"

namespace slds {

/// Throws InputError unless every hyperparameter invariant holds and the observations match
/// hp.dim_z. The message names the offending field.
void validate_config(const Hyperparameters& hp, const ObservationSet& obs);

/// Hyperparameter checks only (no data).
void validate_hyperparameters(const Hyperparameters& hp);

/// Variational posterior at its prior ("Initial" column of the update table): unit/prior Beta
/// sticks, phi at its sticky prior value, zero means and prior precisions everywhere.
VariationalPosterior init_posterior(const Hyperparameters& hp);

/// phi_{ii'}(k) = (alpha E[beta_k] + kappa 1{i = k}) / (alpha + kappa), identical for every i'.
std::vector<Matrix> prior_phi(const Vector& e_beta, double alpha, double kappa);

enum class RescaleMode { kUnitVariance, kExplicit, kNone };

/// Divides every channel by a scale. In unit-variance mode the scale of a channel is its sample
/// standard deviation pooled over all sequences; in explicit mode `scales` is used verbatim.
ObservationSet rescale_observations(const ObservationSet& raw, RescaleMode mode, const Vector& scales = {});

/// Multiplies the channels back by obs.channel_scales.
ObservationSet inverse_rescale(const ObservationSet& obs);

}  // namespace slds

#endif  // SLDS_CORE_MODEL_HPP
