/// @file config.hpp Flat `key = value` run configuration.

#ifndef SLDS_CONFIG_HPP
#define SLDS_CONFIG_HPP

#include "slds/core_model.hpp"
#include "slds/types.hpp"
#include "slds/vbem.hpp"

#include <string>
#include <utility>
#include <vector>

namespace slds {

/// Raw entries in file order, keys validated against the known set.
struct ConfigFile {
  std::vector<std::pair<std::string, std::string>> entries;

  [[nodiscard]] const std::string* find(const std::string& key) const;
};

/// Parses text; '#' starts a comment, blank lines are skipped. Throws InputError naming the line
/// for unknown keys, duplicates and lines without '='.
ConfigFile parse_config(const std::string& text);
ConfigFile load_config(const std::string& path);

/// Everything a command needs, resolved against the data dimension.
struct RunConfig {
  Hyperparameters hp;
  FitOptions fit;
  RescaleMode rescale = RescaleMode::kUnitVariance;
  Vector channel_scales;
  int baseline_states = 3;
  int baseline_max_iters = 200;
  double baseline_tol = 1e-6;
};

/// Builds a RunConfig. dim_z comes from the data unless the file sets it (then they must agree);
/// dim_x defaults to dim_z. Per-mode fields take a scalar or K comma-separated values; zeta and
/// eta also accept dim_x values (shared by all modes) or K*dim_x values (mode-major).
RunConfig resolve_config(const ConfigFile& file, int data_dim_z);

/// Names of all accepted keys.
const std::vector<std::string>& config_keys();

}  // namespace slds

#endif  // SLDS_CONFIG_HPP
