/// @file commands.hpp The fit, synth, eval and baseline commands behind the CLI.

#ifndef SLDS_COMMANDS_HPP
#define SLDS_COMMANDS_HPP

#include "slds/synth.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace slds {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct CommandArgs {
  std::string config;             // fit/baseline: key = value file (optional); synth: JSON spec
  std::vector<std::string> data;  // one CSV per sequence
  std::string labels;
  std::string pred;  // eval: modes file or directory of runs
  std::string out;   // output directory, created if missing
  std::optional<std::uint64_t> seed;
  std::optional<int> restarts;
  std::optional<int> max_iters;
};

/// Writes result.json, elbo_trace.csv and modes.csv into args.out.
int run_fit(const CommandArgs& args, std::ostream& out, std::ostream& err);

/// Writes data.csv (or data_<n>.csv for several sequences), labels.csv and states.csv
/// (states_<n>.csv) into args.out.
int run_synth(const CommandArgs& args, std::ostream& out, std::ostream& err);

/// Prints NMI and switch counts as JSON. With a directory for args.pred every run in it
/// (`<name>.csv` or `<name>/modes.csv`) is scored; args.labels may then be a directory holding
/// `<name>.csv` or `<name>/labels.csv` per run.
int run_eval(const CommandArgs& args, std::ostream& out, std::ostream& err);

/// Gaussian HMM on the first data file; writes result.json and modes.csv.
int run_baseline(const CommandArgs& args, std::ostream& out, std::ostream& err);

/// Parses a synthetic-data spec. Either {"benchmark": true, "seed", "length", "dwell_mean"} or
/// explicit {"modes": [{"F", "H", "R", "mu", "Sigma"}, ...], "dwell_mean", "length",
/// "num_sequences", "dim_x", "dim_z", "seed", "sample_rate_hz"}. Throws InputError.
SynthSpec parse_synth_spec(const std::string& json_text);

}  // namespace slds

#endif  // SLDS_COMMANDS_HPP
