#include "slds/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised segmentation of multichannel time series with a sticky HDP-SLDS"};
  app.require_subcommand(1);
  slds::CommandArgs args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", args.out, "Output directory")->required();
    sub->add_option("--seed", args.seed, "Base seed");
  };

  auto* fit = app.add_subcommand("fit", "Fit the sticky HDP-SLDS to one or more sensor CSV files");
  fit->add_option("--config", args.config, "key = value configuration file");
  fit->add_option("--data", args.data, "Sensor CSV (repeat for several sequences)")->required();
  fit->add_option("--restarts", args.restarts, "Number of seeded restarts");
  fit->add_option("--max-iters", args.max_iters, "Iteration cap per restart");
  add_common(fit);

  auto* synth = app.add_subcommand("synth", "Sample synthetic data from a JSON spec");
  synth->add_option("--config,--spec", args.config, "Synthetic spec (JSON)")->required();
  add_common(synth);

  auto* eval = app.add_subcommand("eval", "Score predicted modes against reference labels");
  eval->add_option("--pred,--data", args.pred, "modes.csv, or a directory of runs")->required();
  eval->add_option("--labels", args.labels, "labels.csv, or a directory of per-run labels")->required();

  auto* baseline = app.add_subcommand("baseline", "Gaussian HMM baseline");
  baseline->add_option("--config", args.config, "key = value configuration file");
  baseline->add_option("--data", args.data, "Sensor CSV")->required();
  baseline->add_option("--max-iters", args.max_iters, "EM iteration cap");
  add_common(baseline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : slds::kExitInput;
  }

  if (fit->parsed()) return slds::run_fit(args, std::cout, std::cerr);
  if (synth->parsed()) return slds::run_synth(args, std::cout, std::cerr);
  if (eval->parsed()) return slds::run_eval(args, std::cout, std::cerr);
  return slds::run_baseline(args, std::cout, std::cerr);
}
