#include "slds/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace slds {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw InputError("config key '" + key + "': '" + t + "' is not a finite number");
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw InputError("config key '" + key + "': '" + t + "' is not an integer");
  }
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < -1000000000LL || v > 1000000000LL) throw InputError("config key '" + key + "' is out of range");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw InputError("config key '" + key + "': expected true or false, got '" + t + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, item));
  if (out.empty()) throw InputError("config key '" + key + "' is empty");
  return out;
}

Vector per_mode(const std::string& key, const std::string& text, int k) {
  const auto v = parse_list(key, text);
  if (v.size() == 1) return Vector::Constant(k, v[0]);
  if (static_cast<int>(v.size()) == k) return Eigen::Map<const Vector>(v.data(), k);
  throw InputError("config key '" + key + "' needs 1 or " + std::to_string(k) + " values, got " +
                   std::to_string(v.size()));
}

Matrix per_mode_dim(const std::string& key, const std::string& text, int k, int d) {
  const auto v = parse_list(key, text);
  Matrix out(k, d);
  if (v.size() == 1) {
    out.setConstant(v[0]);
  } else if (static_cast<int>(v.size()) == d) {
    for (int i = 0; i < k; ++i) out.row(i) = Eigen::Map<const Vector>(v.data(), d).transpose();
  } else if (static_cast<int>(v.size()) == k * d) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < d; ++j) out(i, j) = v[static_cast<std::size_t>(i * d + j)];
    }
  } else {
    throw InputError("config key '" + key + "' needs 1, " + std::to_string(d) + " or " + std::to_string(k * d) +
                     " values, got " + std::to_string(v.size()));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      // model
      "gamma", "alpha0", "alpha", "kappa", "zeta", "eta", "a_sigma", "b_sigma", "b_mu", "a_obs", "b_obs", "trunc_k",
      "dim_x", "dim_z", "a_alpha_prior", "b_alpha_prior", "u_kappa_prior", "v_kappa_prior", "update_concentrations",
      // fitting
      "seed", "restarts", "max_iters", "elbo_rel_tol", "elbo_decrease_tolerance", "update_phi", "transition_update",
      "threads", "init", "init_min_clusters", "init_max_clusters", "init_window", "init_em_iters", "init_stay",
      "init_weight", "init_jitter_concentration", "init_state_variance", "merge_rounds", "merge_min_mass",
      // data
      "rescale", "channel_scales",
      // baseline
      "baseline_states", "baseline_max_iters", "baseline_tol"};
  return keys;
}

const std::string* ConfigFile::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

ConfigFile parse_config(const std::string& text) {
  ConfigFile cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  const auto& keys = config_keys();
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw InputError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw InputError(where + "unknown key '" + key + "'");
    if (cfg.find(key) != nullptr) throw InputError(where + "duplicate key '" + key + "'");
    if (value.empty()) throw InputError(where + "key '" + key + "' has no value");
    cfg.entries.emplace_back(key, value);
  }
  return cfg;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

RunConfig resolve_config(const ConfigFile& file, int data_dim_z) {
  auto get = [&](const char* key) { return file.find(key); };
  RunConfig rc;

  int dim_z = data_dim_z;
  if (const auto* v = get("dim_z")) {
    dim_z = parse_int("dim_z", *v);
    if (data_dim_z > 0 && dim_z != data_dim_z) {
      throw InputError("dimension mismatch: config dim_z = " + std::to_string(dim_z) + " but data has " +
                       std::to_string(data_dim_z) + " channels");
    }
  }
  if (dim_z < 1) throw InputError("dim_z must be positive");
  const int trunc_k = get("trunc_k") ? parse_int("trunc_k", *get("trunc_k")) : 20;
  const int dim_x = get("dim_x") ? parse_int("dim_x", *get("dim_x")) : dim_z;
  if (trunc_k < 2) throw InputError("trunc_k must be at least 2");
  if (dim_x < 1) throw InputError("dim_x must be positive");

  Hyperparameters& hp = rc.hp;
  hp = Hyperparameters::make(dim_z, trunc_k, dim_x);
  if (const auto* v = get("gamma")) hp.gamma = parse_real("gamma", *v);
  if (const auto* v = get("alpha0")) hp.alpha0 = parse_real("alpha0", *v);
  if (const auto* v = get("alpha")) hp.alpha = parse_real("alpha", *v);
  if (const auto* v = get("kappa")) hp.kappa = parse_real("kappa", *v);
  hp.reset_concentration_priors();
  if (const auto* v = get("zeta")) hp.zeta = per_mode_dim("zeta", *v, trunc_k, dim_x);
  if (const auto* v = get("eta")) hp.eta = per_mode_dim("eta", *v, trunc_k, dim_x);
  if (const auto* v = get("a_sigma")) hp.a_sigma = per_mode("a_sigma", *v, trunc_k);
  if (const auto* v = get("b_sigma")) hp.b_sigma = per_mode("b_sigma", *v, trunc_k);
  if (const auto* v = get("b_mu")) hp.b_mu = per_mode("b_mu", *v, trunc_k);
  if (const auto* v = get("a_obs")) hp.a_obs = per_mode("a_obs", *v, trunc_k);
  if (const auto* v = get("b_obs")) hp.b_obs = per_mode("b_obs", *v, trunc_k);
  if (const auto* v = get("a_alpha_prior")) hp.a_alpha_prior = parse_real("a_alpha_prior", *v);
  if (const auto* v = get("b_alpha_prior")) hp.b_alpha_prior = parse_real("b_alpha_prior", *v);
  if (const auto* v = get("u_kappa_prior")) hp.u_kappa_prior = parse_real("u_kappa_prior", *v);
  if (const auto* v = get("v_kappa_prior")) hp.v_kappa_prior = parse_real("v_kappa_prior", *v);
  if (const auto* v = get("update_concentrations")) hp.update_concentrations = parse_bool("update_concentrations", *v);
  validate_hyperparameters(hp);

  FitOptions& fo = rc.fit;
  if (const auto* v = get("seed")) {
    const long long s = parse_integer("seed", *v);
    if (s < 0) throw InputError("seed must be non-negative");
    fo.seed = static_cast<std::uint64_t>(s);
  }
  if (const auto* v = get("restarts")) fo.restarts = parse_int("restarts", *v);
  if (const auto* v = get("max_iters")) fo.max_iters = parse_int("max_iters", *v);
  if (const auto* v = get("elbo_rel_tol")) fo.elbo_rel_tol = parse_real("elbo_rel_tol", *v);
  if (const auto* v = get("elbo_decrease_tolerance")) {
    fo.elbo_decrease_tolerance = parse_real("elbo_decrease_tolerance", *v);
  }
  if (const auto* v = get("update_phi")) fo.update_phi = parse_bool("update_phi", *v);
  if (const auto* v = get("transition_update")) {
    if (*v == "split") {
      fo.transition_update = TransitionUpdate::kSplit;
    } else if (*v == "printed") {
      fo.transition_update = TransitionUpdate::kPrinted;
    } else if (*v == "stickwise") {
      fo.transition_update = TransitionUpdate::kStickwise;
    } else {
      throw InputError("config key 'transition_update': expected split, printed or stickwise, got '" + *v + "'");
    }
  }
  if (const auto* v = get("threads")) fo.threads = parse_int("threads", *v);
  if (const auto* v = get("init")) {
    if (*v == "dynamics") {
      fo.init_method = InitMethod::kDynamics;
    } else if (*v == "dirichlet") {
      fo.init_method = InitMethod::kDirichlet;
    } else {
      throw InputError("config key 'init': expected dynamics or dirichlet, got '" + *v + "'");
    }
  }
  if (const auto* v = get("init_min_clusters")) fo.init_min_clusters = parse_int("init_min_clusters", *v);
  if (const auto* v = get("init_max_clusters")) fo.init_max_clusters = parse_int("init_max_clusters", *v);
  if (const auto* v = get("merge_rounds")) fo.merge_rounds = parse_int("merge_rounds", *v);
  if (const auto* v = get("merge_min_mass")) fo.merge_min_mass = parse_real("merge_min_mass", *v);
  if (const auto* v = get("init_window")) fo.init.window = parse_int("init_window", *v);
  if (const auto* v = get("init_em_iters")) fo.init.em_iters = parse_int("init_em_iters", *v);
  if (const auto* v = get("init_stay")) fo.init.stay = parse_real("init_stay", *v);
  if (const auto* v = get("init_weight")) fo.init.weight = parse_real("init_weight", *v);
  if (const auto* v = get("init_jitter_concentration")) {
    fo.init.jitter_concentration = parse_real("init_jitter_concentration", *v);
  }
  if (const auto* v = get("init_state_variance")) fo.init_state_variance = parse_real("init_state_variance", *v);
  if (fo.restarts < 1) throw InputError("restarts must be at least 1");
  if (fo.max_iters < 1) throw InputError("max_iters must be at least 1");
  if (!(fo.elbo_rel_tol > 0.0)) throw InputError("elbo_rel_tol must be positive");
  if (fo.threads < 0) throw InputError("threads must be non-negative");
  if (fo.init_min_clusters < 1 || fo.init_max_clusters < fo.init_min_clusters) {
    throw InputError("need 1 <= init_min_clusters <= init_max_clusters");
  }
  if (fo.merge_rounds < 0) throw InputError("merge_rounds must be non-negative");
  if (!(fo.merge_min_mass >= 0.0)) throw InputError("merge_min_mass must be non-negative");
  if (!(fo.init_state_variance > 0.0)) throw InputError("init_state_variance must be positive");

  if (const auto* v = get("rescale")) {
    if (*v == "unit_variance") {
      rc.rescale = RescaleMode::kUnitVariance;
    } else if (*v == "explicit") {
      rc.rescale = RescaleMode::kExplicit;
    } else if (*v == "none") {
      rc.rescale = RescaleMode::kNone;
    } else {
      throw InputError("config key 'rescale': expected unit_variance, explicit or none, got '" + *v + "'");
    }
  }
  if (const auto* v = get("channel_scales")) {
    const auto s = parse_list("channel_scales", *v);
    rc.channel_scales = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  }
  if (rc.rescale == RescaleMode::kExplicit) {
    if (rc.channel_scales.size() != dim_z) {
      throw InputError("rescale = explicit needs channel_scales with " + std::to_string(dim_z) + " values");
    }
  } else if (rc.channel_scales.size() != 0) {
    throw InputError("channel_scales is only used with rescale = explicit");
  }

  if (const auto* v = get("baseline_states")) rc.baseline_states = parse_int("baseline_states", *v);
  if (const auto* v = get("baseline_max_iters")) rc.baseline_max_iters = parse_int("baseline_max_iters", *v);
  if (const auto* v = get("baseline_tol")) rc.baseline_tol = parse_real("baseline_tol", *v);
  if (rc.baseline_states < 1) throw InputError("baseline_states must be positive");
  if (rc.baseline_max_iters < 1) throw InputError("baseline_max_iters must be positive");
  if (!(rc.baseline_tol > 0.0)) throw InputError("baseline_tol must be positive");
  return rc;
}

}  // namespace slds
