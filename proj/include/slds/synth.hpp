/// @file synth.hpp Ground-truth sampling from a finite switching linear dynamical system.

#ifndef SLDS_SYNTH_HPP
#define SLDS_SYNTH_HPP

#include "slds/types.hpp"

#include <cstdint>

namespace slds {

struct SynthMode {
  Matrix f;      // dim_x x dim_x
  Matrix h;      // dim_z x dim_x
  Matrix r;      // dim_z x dim_z, SPD
  Vector mu;     // dim_x
  Matrix sigma;  // dim_x x dim_x, SPD
};

struct SynthSpec {
  std::vector<SynthMode> modes;
  double dwell_mean = 50.0;
  int length = 600;
  int num_sequences = 1;
  int dim_x = 3;
  int dim_z = 3;
  std::uint64_t seed = 0;
  double sample_rate_hz = 14.0;

  [[nodiscard]] int n_modes() const { return static_cast<int>(modes.size()); }
};

struct SynthData {
  ObservationSet obs;
  std::vector<int> true_modes;                   // T
  std::vector<Matrix> true_states;               // N, each T x dim_x
};

/// Throws InputError for inconsistent shapes, non-SPD noise, spectral radius above 1.05 or
/// dwell_mean < 1.
void validate_synth_spec(const SynthSpec& spec);

/// Self-transition probability 1 - 1/dwell_mean, the rest spread evenly; uniform first mode.
Matrix synth_transition_matrix(int n_modes, double dwell_mean);

/// x_t = F_{s_t} x_{t-1} + v_t with v_t ~ N(0, I), z_t = H_{s_t} x_t + w_t with w_t ~ N(0, R_{s_t}),
/// x_1 ~ N(mu_{s_1}, Sigma_{s_1}). Deterministic given spec.seed.
SynthData sample_slds(const SynthSpec& spec);

/// Three modes in three dimensions with clearly different dynamics: near-persistent decay, a damped
/// quarter-turn rotation and a sign-flipping fast decay. Gain 2 and observation noise 4 on every
/// channel, a scale that suits the default noise priors.
SynthSpec benchmark_spec(std::uint64_t seed, int length = 600, double dwell_mean = 50.0);

}  // namespace slds

#endif  // SLDS_SYNTH_HPP
