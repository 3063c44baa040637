#include "slds/commands.hpp"
#include "slds/csv_io.hpp"
#include "slds/synth.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

using namespace slds;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("slds_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& path) {
  try {
    load_csv(path);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

nlohmann::json eval_json(const std::string& pred, const std::string& labels) {
  CommandArgs a;
  a.pred = pred;
  a.labels = labels;
  std::ostringstream out, err;
  REQUIRE(run_eval(a, out, err) == kExitOk);
  return nlohmann::json::parse(out.str());
}

}  // namespace

TEST_CASE("sensor CSV parsing") {
  const fs::path dir = scratch("parse");
  write_text(dir / "ok.csv", "t,a,b\n0,1,2\n0.5,3,4\n1.0,5,6\n");
  const ObservationSet obs = load_csv((dir / "ok.csv").string());
  REQUIRE(obs.sequences.size() == 1);
  CHECK(obs.sequences[0].rows() == 3);
  CHECK(obs.sequences[0].cols() == 2);
  CHECK(obs.sequences[0](2, 1) == 6.0);
  CHECK(obs.timestamps == std::vector<double>{0.0, 0.5, 1.0});

  write_text(dir / "bom.csv", "\xEF\xBB\xBFt,a\r\n0,1\r\n1,2\r\n");
  const ObservationSet bom = load_csv((dir / "bom.csv").string());
  CHECK(bom.sequences[0](1, 0) == 2.0);

  write_text(dir / "bad.csv", "t,a\n0,1\n1,2\n2,3\n3,4\n4,5\n5,x\n");
  CHECK(error_of((dir / "bad.csv").string()).find(":7:") != std::string::npos);

  write_text(dir / "order.csv", "t,a\n0,1\n2,2\n1,3\n");
  CHECK(error_of((dir / "order.csv").string()).find("strictly increasing") != std::string::npos);

  write_text(dir / "empty.csv", "");
  CHECK(error_of((dir / "empty.csv").string()).find("empty") != std::string::npos);

  write_text(dir / "ragged.csv", "t,a,b\n0,1,2\n1,2\n");
  CHECK(error_of((dir / "ragged.csv").string()).find(":3:") != std::string::npos);

  CHECK(!error_of((dir / "missing.csv").string()).empty());

  write_text(dir / "short.csv", "t,a,b\n0,1,2\n");
  CHECK_THROWS_AS(load_observations({(dir / "ok.csv").string(), (dir / "short.csv").string()}), InputError);
}

TEST_CASE("CSV and label round trips are exact") {
  const fs::path dir = scratch("roundtrip");
  std::mt19937_64 rng(71);
  std::normal_distribution<double> normal(0.0, 1e3);
  Matrix v(25, 3);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = normal(rng) * std::pow(10.0, static_cast<int>(i % 9) - 4);
  std::vector<double> ts;
  for (int t = 0; t < 25; ++t) ts.push_back(t / 14.0);
  write_csv((dir / "v.csv").string(), v, ts);
  const ObservationSet back = load_csv((dir / "v.csv").string());
  CHECK(back.sequences[0] == v);
  CHECK(back.timestamps == ts);

  const std::vector<int> labels{0, 0, 3, 3, 1};
  write_labels((dir / "l.csv").string(), labels, {0.0, 0.1, 0.2, 0.3, 0.4});
  CHECK(load_labels((dir / "l.csv").string()) == labels);
  CHECK(format_real(0.1) == "0.1");
}

TEST_CASE("synth then fit then eval") {
  const fs::path dir = scratch("pipeline");
  write_text(dir / "spec.json", R"({"benchmark": true, "seed": 5, "length": 120, "dwell_mean": 30})");
  write_text(dir / "fit.cfg", "trunc_k = 4\nrestarts = 2\nmax_iters = 15\nthreads = 1\nrescale = none\n");

  CommandArgs s;
  s.config = (dir / "spec.json").string();
  s.out = (dir / "data").string();
  std::ostringstream out, err;
  REQUIRE(run_synth(s, out, err) == kExitOk);
  CHECK(load_labels((dir / "data" / "labels.csv").string()).size() == 120);

  CommandArgs f;
  f.config = (dir / "fit.cfg").string();
  f.data = {(dir / "data" / "data.csv").string()};
  f.seed = 3;
  f.out = (dir / "run1").string();
  REQUIRE(run_fit(f, out, err) == kExitOk);
  f.out = (dir / "run2").string();
  REQUIRE(run_fit(f, out, err) == kExitOk);
  CHECK(load_labels((dir / "run1" / "modes.csv").string()).size() == 120);
  CHECK(fs::exists(dir / "run1" / "elbo_trace.csv"));

  nlohmann::json r1 = nlohmann::json::parse(read_text(dir / "run1" / "result.json"));
  nlohmann::json r2 = nlohmann::json::parse(read_text(dir / "run2" / "result.json"));
  CHECK(r1.contains("created_at"));
  r1.erase("created_at");
  r2.erase("created_at");
  CHECK(r1.dump() == r2.dump());
  CHECK(r1["restart_elbos"].size() == 2);

  const auto same = eval_json((dir / "data" / "labels.csv").string(), (dir / "data" / "labels.csv").string());
  CHECK(same["nmi"].get<double>() == 1.0);

  fs::create_directories(dir / "runs");
  fs::copy(dir / "run1", dir / "runs" / "a", fs::copy_options::recursive);
  fs::copy_file(dir / "run2" / "modes.csv", dir / "runs" / "b.csv");
  const auto agg = eval_json((dir / "runs").string(), (dir / "data" / "labels.csv").string());
  CHECK(agg["runs"].size() == 2);
  CHECK(agg["nmi"][0].get<double>() == agg["nmi"][1].get<double>());

  write_text(dir / "short.csv", "t,label\n0,1\n1,0\n");
  CommandArgs e;
  e.pred = (dir / "short.csv").string();
  e.labels = (dir / "data" / "labels.csv").string();
  std::ostringstream eout, eerr;
  CHECK(run_eval(e, eout, eerr) == kExitInput);
  CHECK(eerr.str().find("length mismatch") != std::string::npos);
}

TEST_CASE("input errors exit with the input status") {
  const fs::path dir = scratch("errors");
  write_text(dir / "d.csv", "t,a\n0,1\n1,2\n2,4\n");
  std::ostringstream out, err;
  CommandArgs f;
  f.config = (dir / "nope.cfg").string();
  f.data = {(dir / "d.csv").string()};
  f.out = (dir / "o").string();
  CHECK(run_fit(f, out, err) == kExitInput);
  CHECK(err.str().find("cannot open config file") != std::string::npos);

  write_text(dir / "bad.cfg", "kappa = -1\n");
  f.config = (dir / "bad.cfg").string();
  CHECK(run_fit(f, out, err) == kExitInput);

  write_text(dir / "spec.json", R"({"modes": [{"F": [[1.5]], "H": [[1]], "R": [[1]], "mu": [0], "Sigma": [[1]]}],
                                   "dim_x": 1, "dim_z": 1, "length": 10})");
  CommandArgs s;
  s.config = (dir / "spec.json").string();
  s.out = (dir / "s").string();
  CHECK(run_synth(s, out, err) == kExitInput);
  CHECK_THROWS_AS(parse_synth_spec("{not json"), InputError);
}

TEST_CASE("single-mode synthetic spec yields zero labels") {
  const fs::path dir = scratch("one_mode");
  write_text(dir / "spec.json", R"({"modes": [{"F": [[0.5]], "H": [[1]], "R": [[1]], "mu": [0], "Sigma": [[1]]}],
                                   "dim_x": 1, "dim_z": 1, "length": 40, "seed": 2})");
  CommandArgs s;
  s.config = (dir / "spec.json").string();
  s.out = dir.string();
  std::ostringstream out, err;
  REQUIRE(run_synth(s, out, err) == kExitOk);
  CHECK(load_labels((dir / "labels.csv").string()) == std::vector<int>(40, 0));
}

TEST_CASE("baseline separates two distant clusters") {
  const fs::path dir = scratch("baseline");
  std::mt19937_64 rng(72);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(200, 2);
  std::vector<int> truth(200);
  std::vector<double> ts;
  for (int t = 0; t < 200; ++t) {
    truth[t] = (t / 50) % 2;
    for (int d = 0; d < 2; ++d) z(t, d) = normal(rng) + (truth[t] == 0 ? -20.0 : 20.0);
    ts.push_back(t);
  }
  write_csv((dir / "d.csv").string(), z, ts);
  write_labels((dir / "truth.csv").string(), truth, ts);
  write_text(dir / "b.cfg", "baseline_states = 2\n");
  CommandArgs b;
  b.config = (dir / "b.cfg").string();
  b.data = {(dir / "d.csv").string()};
  b.out = (dir / "out").string();
  std::ostringstream out, err;
  REQUIRE(run_baseline(b, out, err) == kExitOk);
  const auto scored = eval_json((dir / "out" / "modes.csv").string(), (dir / "truth.csv").string());
  CHECK(scored["nmi"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("command-line binary reports usage errors") {
  const char* bin = std::getenv("HDPSLDS_BIN");
  if (bin == nullptr) return;
  const fs::path dir = scratch("binary");
  const std::string quiet = " > " + (dir / "log").string() + " 2>&1";
  CHECK(WEXITSTATUS(std::system((std::string(bin) + " --help" + quiet).c_str())) == 0);
  CHECK(WEXITSTATUS(std::system((std::string(bin) + " fit --out x" + quiet).c_str())) == kExitInput);
  CHECK(WEXITSTATUS(std::system((std::string(bin) + " eval --pred a.csv --labels b.csv" + quiet).c_str())) ==
        kExitInput);
}
