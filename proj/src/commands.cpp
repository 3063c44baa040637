#include "slds/commands.hpp"

#include "slds/baseline_hmm.hpp"
#include "slds/config.hpp"
#include "slds/core_model.hpp"
#include "slds/csv_io.hpp"
#include "slds/metrics.hpp"
#include "slds/vbem.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace slds {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) throw InputError(what + " must be a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw InputError(what + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number()) throw InputError(what + " has a non-numeric entry");
      m(r, c) = cell.get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(what + " has a non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

fs::path prepare_out(const std::string& dir) {
  if (dir.empty()) throw InputError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

/// Runs body and maps the exception category to an exit code.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    body();
    return kExitOk;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const json::exception& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  }
}

const char* transition_name(TransitionUpdate t) {
  switch (t) {
    case TransitionUpdate::kSplit:
      return "split";
    case TransitionUpdate::kPrinted:
      return "printed";
    case TransitionUpdate::kStickwise:
      return "stickwise";
  }
  return "split";
}

const char* rescale_name(RescaleMode m) {
  switch (m) {
    case RescaleMode::kUnitVariance:
      return "unit_variance";
    case RescaleMode::kExplicit:
      return "explicit";
    case RescaleMode::kNone:
      return "none";
  }
  return "";
}

json config_echo(const RunConfig& rc, const ConfigFile& file) {
  const Hyperparameters& hp = rc.hp;
  const FitOptions& fo = rc.fit;
  json entries = json::object();
  for (const auto& [k, v] : file.entries) entries[k] = v;
  return json{
      {"file_entries", entries},
      {"hyperparameters",
       {{"gamma", hp.gamma},
        {"alpha0", hp.alpha0},
        {"alpha", hp.alpha},
        {"kappa", hp.kappa},
        {"zeta", to_json(hp.zeta)},
        {"eta", to_json(hp.eta)},
        {"a_sigma", to_json(hp.a_sigma)},
        {"b_sigma", to_json(hp.b_sigma)},
        {"b_mu", to_json(hp.b_mu)},
        {"a_obs", to_json(hp.a_obs)},
        {"b_obs", to_json(hp.b_obs)},
        {"trunc_k", hp.trunc_k},
        {"dim_x", hp.dim_x},
        {"dim_z", hp.dim_z},
        {"a_alpha_prior", hp.a_alpha_prior},
        {"b_alpha_prior", hp.b_alpha_prior},
        {"u_kappa_prior", hp.u_kappa_prior},
        {"v_kappa_prior", hp.v_kappa_prior},
        {"update_concentrations", hp.update_concentrations}}},
      {"fit",
       {{"seed", fo.seed},
        {"restarts", fo.restarts},
        {"max_iters", fo.max_iters},
        {"elbo_rel_tol", fo.elbo_rel_tol},
        {"elbo_decrease_tolerance", fo.elbo_decrease_tolerance},
        {"update_phi", fo.update_phi},
        {"transition_update", transition_name(fo.transition_update)},
        {"init", fo.init_method == InitMethod::kDynamics ? "dynamics" : "dirichlet"},
        {"init_min_clusters", fo.init_min_clusters},
        {"init_max_clusters", fo.init_max_clusters},
        {"merge_rounds", fo.merge_rounds},
        {"merge_min_mass", fo.merge_min_mass},
        {"init_window", fo.init.window},
        {"init_em_iters", fo.init.em_iters},
        {"init_stay", fo.init.stay},
        {"init_weight", fo.init.weight},
        {"init_jitter_concentration", fo.init.jitter_concentration},
        {"init_state_variance", fo.init_state_variance}}},
      {"rescale", rescale_name(rc.rescale)},
  };
}

/// Config file (optional) plus command-line overrides, resolved against the data.
struct Prepared {
  ConfigFile file;
  RunConfig rc;
  ObservationSet raw;
  ObservationSet obs;
};

Prepared prepare(const CommandArgs& args) {
  Prepared p;
  if (args.data.empty()) throw InputError("at least one --data file is required");
  if (!args.config.empty()) p.file = load_config(args.config);
  p.raw = load_observations(args.data);
  p.rc = resolve_config(p.file, static_cast<int>(p.raw.dim()));
  if (args.seed) p.rc.fit.seed = *args.seed;
  if (args.restarts) {
    if (*args.restarts < 1) throw InputError("--restarts must be at least 1");
    p.rc.fit.restarts = *args.restarts;
  }
  if (args.max_iters) {
    if (*args.max_iters < 1) throw InputError("--max-iters must be at least 1");
    p.rc.fit.max_iters = *args.max_iters;
    p.rc.baseline_max_iters = *args.max_iters;
  }
  p.obs = rescale_observations(p.raw, p.rc.rescale, p.rc.channel_scales);
  return p;
}

void write_modes(const fs::path& path, const std::vector<int>& modes, const ObservationSet& obs) {
  write_labels(path.string(), modes, obs.timestamps, "map_mode");
}

/// A run inside an eval directory: a CSV file or a subdirectory with modes.csv.
struct EvalRun {
  std::string name;
  fs::path modes;
};

std::vector<EvalRun> collect_runs(const fs::path& dir) {
  std::vector<EvalRun> runs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "modes.csv")) {
      runs.push_back({entry.path().filename().string(), entry.path() / "modes.csv"});
    } else if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      runs.push_back({entry.path().stem().string(), entry.path()});
    }
  }
  std::sort(runs.begin(), runs.end(), [](const EvalRun& a, const EvalRun& b) { return a.name < b.name; });
  if (runs.empty()) throw InputError("no runs found in '" + dir.string() + "'");
  return runs;
}

fs::path labels_for(const fs::path& labels, const std::string& run) {
  if (!fs::is_directory(labels)) return labels;
  if (fs::exists(labels / (run + ".csv"))) return labels / (run + ".csv");
  if (fs::exists(labels / run / "labels.csv")) return labels / run / "labels.csv";
  throw InputError("no labels for run '" + run + "' in '" + labels.string() + "'");
}

json score(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) {
    throw InputError("length mismatch: " + std::to_string(pred.size()) + " predicted labels against " +
                     std::to_string(truth.size()) + " reference labels");
  }
  return json{{"nmi", nmi(pred, truth)},
              {"switches_pred", switch_count(pred)},
              {"switches_true", switch_count(truth)},
              {"length", pred.size()}};
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("synthetic spec must be a JSON object");
  auto num = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw InputError(std::string("synthetic spec: '") + key + "' must be a number");
    return j[key].get<double>();
  };
  auto integer = [&](const char* key, long long fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw InputError(std::string("synthetic spec: '") + key + "' must be an integer");
    return j[key].get<long long>();
  };
  const long long seed = integer("seed", 0);
  if (seed < 0) throw InputError("synthetic spec: seed must be non-negative");

  SynthSpec spec;
  if (j.value("benchmark", false)) {
    spec = benchmark_spec(static_cast<std::uint64_t>(seed), static_cast<int>(integer("length", 600)),
                          num("dwell_mean", 50.0));
    spec.num_sequences = static_cast<int>(integer("num_sequences", 1));
    spec.sample_rate_hz = num("sample_rate_hz", spec.sample_rate_hz);
  } else {
    if (!j.contains("modes") || !j["modes"].is_array()) throw InputError("synthetic spec: 'modes' array is required");
    spec.seed = static_cast<std::uint64_t>(seed);
    spec.length = static_cast<int>(integer("length", spec.length));
    spec.num_sequences = static_cast<int>(integer("num_sequences", spec.num_sequences));
    spec.dim_x = static_cast<int>(integer("dim_x", spec.dim_x));
    spec.dim_z = static_cast<int>(integer("dim_z", spec.dim_z));
    spec.dwell_mean = num("dwell_mean", spec.dwell_mean);
    spec.sample_rate_hz = num("sample_rate_hz", spec.sample_rate_hz);
    for (std::size_t i = 0; i < j["modes"].size(); ++i) {
      const json& m = j["modes"][i];
      const std::string tag = "mode " + std::to_string(i) + " ";
      for (const char* key : {"F", "H", "R", "mu", "Sigma"}) {
        if (!m.contains(key)) throw InputError("synthetic spec: " + tag + "lacks '" + key + "'");
      }
      spec.modes.push_back({matrix_from_json(m["F"], tag + "F"), matrix_from_json(m["H"], tag + "H"),
                            matrix_from_json(m["R"], tag + "R"), vector_from_json(m["mu"], tag + "mu"),
                            matrix_from_json(m["Sigma"], tag + "Sigma")});
    }
  }
  if (!(spec.sample_rate_hz > 0.0)) throw InputError("synthetic spec: sample_rate_hz must be positive");
  validate_synth_spec(spec);
  return spec;
}

int run_fit(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(args);
    const fs::path dir = prepare_out(args.out);
    const FitResult r = fit(p.obs, p.rc.hp, p.rc.fit);

    std::vector<int> counts(static_cast<std::size_t>(p.rc.hp.trunc_k), 0);
    for (const int m : r.map_modes) ++counts[static_cast<std::size_t>(m)];
    const auto active = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; });
    json restarts = json::array();
    for (const double e : r.restart_elbos) restarts.push_back(std::isfinite(e) ? json(e) : json(nullptr));

    const json result{
        {"created_at", utc_now()},
        {"seed", p.rc.fit.seed},
        {"selected_seed", r.seed},
        {"final_elbo", r.final_elbo()},
        {"iterations", r.iterations},
        {"converged", r.converged},
        {"elbo_warnings", r.elbo_warnings},
        {"elbo_errors", r.elbo_errors},
        {"restart_elbos", restarts},
        {"merges_accepted", r.merges_accepted},
        {"length", p.obs.length()},
        {"num_sequences", p.obs.sequences.size()},
        {"channel_scales", to_json(p.obs.channel_scales)},
        {"active_modes", active},
        {"map_modes", r.map_modes},
        {"unary_marginals", to_json(r.mode_marginals)},
        {"transition", to_json(r.transition)},
        {"config", config_echo(p.rc, p.file)},
    };
    write_json(dir / "result.json", result);

    std::string trace = "iteration,elbo\n";
    for (std::size_t i = 0; i < r.elbo_trace.size(); ++i) {
      trace += std::to_string(i + 1) + "," + format_real(r.elbo_trace[i]) + "\n";
    }
    std::ofstream(dir / "elbo_trace.csv", std::ios::binary) << trace;
    write_modes(dir / "modes.csv", r.map_modes, p.obs);
    out << json{{"final_elbo", r.final_elbo()}, {"active_modes", active}, {"iterations", r.iterations}}.dump() << '\n';
  });
}

int run_synth(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (args.config.empty()) throw InputError("--config <spec.json> is required");
    SynthSpec spec = parse_synth_spec(read_text(args.config));
    if (args.seed) spec.seed = *args.seed;
    const SynthData data = sample_slds(spec);
    const fs::path dir = prepare_out(args.out);
    const bool many = data.obs.sequences.size() > 1;
    for (std::size_t n = 0; n < data.obs.sequences.size(); ++n) {
      const std::string suffix = many ? "_" + std::to_string(n + 1) : "";
      write_csv((dir / ("data" + suffix + ".csv")).string(), data.obs.sequences[n], data.obs.timestamps);
      write_csv((dir / ("states" + suffix + ".csv")).string(), data.true_states[n], data.obs.timestamps);
    }
    write_labels((dir / "labels.csv").string(), data.true_modes, data.obs.timestamps);
    out << json{{"length", spec.length}, {"num_sequences", spec.num_sequences}, {"n_modes", spec.n_modes()},
                {"switches", switch_count(data.true_modes)}}
               .dump()
        << '\n';
  });
}

int run_eval(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string pred = args.pred.empty() && args.data.size() == 1 ? args.data.front() : args.pred;
    if (pred.empty()) throw InputError("--pred is required");
    if (args.labels.empty()) throw InputError("--labels is required");
    if (!fs::is_directory(pred)) {
      if (fs::is_directory(args.labels)) throw InputError("--labels must be a file when --pred is a file");
      out << score(load_labels(pred), load_labels(args.labels)).dump() << '\n';
      return;
    }
    json runs = json::array();
    std::vector<double> values;
    for (const EvalRun& run : collect_runs(pred)) {
      json s = score(load_labels(run.modes.string()), load_labels(labels_for(args.labels, run.name).string()));
      values.push_back(s["nmi"].get<double>());
      s["run"] = run.name;
      runs.push_back(s);
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    double mean = 0.0;
    for (const double v : values) mean += v / static_cast<double>(n);
    out << json{{"runs", runs}, {"nmi", values}, {"mean_nmi", mean}, {"median_nmi", median},
                {"min_nmi", sorted.front()}, {"max_nmi", sorted.back()}}
               .dump()
        << '\n';
  });
}

int run_baseline(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(args);
    if (p.obs.sequences.size() != 1) throw InputError("the baseline takes exactly one --data file");
    const fs::path dir = prepare_out(args.out);
    const Matrix& z = p.obs.sequences.front();
    const GaussianHmmModel model =
        em_fit(z, p.rc.baseline_states, p.rc.fit.seed, p.rc.baseline_max_iters, p.rc.baseline_tol);
    const std::vector<int> path = viterbi_decode(model, z);
    json covs = json::array();
    for (const Matrix& c : model.covs) covs.push_back(to_json(c));
    const json result{
        {"created_at", utc_now()},
        {"seed", p.rc.fit.seed},
        {"n_states", model.n_states()},
        {"iterations", model.iterations},
        {"converged", model.converged},
        {"log_likelihood", model.loglik_trace.empty() ? 0.0 : model.loglik_trace.back()},
        {"init_probs", to_json(model.init_probs)},
        {"trans", to_json(model.trans)},
        {"means", to_json(model.means)},
        {"covs", covs},
        {"channel_scales", to_json(p.obs.channel_scales)},
        {"map_modes", path},
    };
    write_json(dir / "result.json", result);
    write_modes(dir / "modes.csv", path, p.obs);
    out << json{{"n_states", model.n_states()}, {"iterations", model.iterations}}.dump() << '\n';
  });
}

}  // namespace slds
