#include "invlim/experiment.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace invlim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("invlim_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(INVLIM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kFast = " --set strands=12 --set mc_samples=40000";

}  // namespace

TEST_CASE("config parser: keys, comments, overrides and diagnostics") {
  const ExperimentConfig c = parse_config("# comment\nsystem = quadratic:c=0\n\nepsilon = 0.001  # inline\ndelta=auto\n");
  CHECK(c.system == "quadratic:c=0");
  CHECK(c.epsilon == doctest::Approx(0.001));
  CHECK(c.delta < 0);
  try {
    parse_config("system = doubling\nstrands = many\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("strands") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("colour = blue\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("delta = -0.5\n"), ConfigError);
  ExperimentConfig o;
  apply_overrides(o, {"eta=0.2", "seed=99"});
  CHECK(o.eta == doctest::Approx(0.2));
  CHECK(o.seed == 99u);
  ExperimentConfig bad;
  bad.margin = 10;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
  ExperimentConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.epsilon = 0.01;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("sweep axis parser") {
  const SweepAxis a = parse_sweep_axis("delta=0.1,0.01,0.001");
  CHECK(a.key == "delta");
  CHECK(a.values.size() == 3);
  CHECK_THROWS_AS(parse_sweep_axis("delta="), ConfigError);
}

TEST_CASE("zoo-list prints the catalog") {
  const fs::path d = scratch("zoo");
  CHECK(run("zoo-list", d / "log") == 0);
  CHECK(slurp(d / "log").find("product_squares") != std::string::npos);
}

TEST_CASE("hyperbolic on doubling passes with expansion 1/2") {
  const fs::path d = scratch("hyp");
  CHECK(run("hyperbolic --set system=doubling --set output_dir=" + d.string() + kFast, d / "log") == 0);
  const auto rep = nlohmann::json::parse(slurp(d / "hyperbolic_report.json"));
  CHECK(rep["pass"].get<bool>());
  CHECK(rep["axiom_A"]["expansion"].get<double>() == doctest::Approx(0.5));
  CHECK(rep["schema_version"] == kSchemaVersion);
  CHECK(rep["config_hash"].get<std::string>().size() == 16);
  CHECK(fs::exists(d / "splitting.csv"));
  CHECK(fs::exists(d / "hyperbolic_report.json.meta.json"));
}

TEST_CASE("hyperbolic on quadratic c = 0 reports pieces {0} and {1}") {
  const fs::path d = scratch("hypq");
  CHECK(run("hyperbolic --set system=quadratic:c=0 --set output_dir=" + d.string() + kFast, d / "log") == 0);
  const auto rep = nlohmann::json::parse(slurp(d / "hyperbolic_report.json"));
  CHECK(rep["pieces"]["q"] == 2);
  CHECK(rep["pieces"]["pieces"][0]["orbit"][0][0].get<double>() == doctest::Approx(0.0));
  CHECK(rep["pieces"]["pieces"][1]["orbit"][0][0].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("malformed config exits 1 with a line diagnostic") {
  const fs::path d = scratch("bad");
  std::ofstream(d / "bad.cfg") << "system = doubling\nstrands = -\n";
  CHECK(run("hyperbolic --config " + (d / "bad.cfg").string(), d / "log") == 1);
  CHECK(slurp(d / "log").find("line 2") != std::string::npos);
  CHECK(run("bundles --set system=doubling --set delta=0 --set output_dir=" + d.string(), d / "log2") == 1);
  CHECK(slurp(d / "log2").find("inverse undefined at delta=0") != std::string::npos);
  CHECK(run("sweep --mode bundles --set output_dir=" + d.string(), d / "log3") == 1);
  CHECK(run("hyperbolic --set system=henon --set output_dir=" + d.string(), d / "log4") == 1);
}

TEST_CASE("bundles on product_squares passes with q = 4") {
  const fs::path d = scratch("bun");
  CHECK(run("bundles --set system=product_squares --set delta=0.01 --set output_dir=" + d.string() + kFast,
            d / "log") == 0);
  const auto rep = nlohmann::json::parse(slurp(d / "bundles_report.json"));
  CHECK(rep["q"] == 4);
  CHECK(rep["principal"].size() == 7);
  CHECK(rep["K_by_delta"].size() == 3);
  CHECK(fs::exists(d / "bundles_fields.csv"));
}

TEST_CASE("conjugacy on doubling is deterministic and w = -0.01") {
  const fs::path d1 = scratch("con1"), d2 = scratch("con2");
  const std::string args = " --set system=doubling --set epsilon=0.01" + std::string(kFast);
  CHECK(run("conjugacy --set output_dir=" + d1.string() + args, d1 / "log") == 0);
  CHECK(run("conjugacy --set output_dir=" + d2.string() + args, d2 / "log") == 0);
  auto a = nlohmann::json::parse(slurp(d1 / "conjugacy_report.json"));
  auto b = nlohmann::json::parse(slurp(d2 / "conjugacy_report.json"));
  a["config"].erase("output_dir");
  b["config"].erase("output_dir");
  a.erase("config_hash");
  b.erase("config_hash");
  CHECK(a == b);
  CHECK(a["pass"].get<bool>());
  CHECK(a["solve"]["conditions"]["C1"]["value"].get<double>() <= 1e-9);
  CHECK(fs::exists(d1 / "section_w.csv"));
  CHECK(fs::exists(d1 / "residuals.csv"));
  // Keys come out sorted.
  const std::string text = slurp(d1 / "conjugacy_report.json");
  CHECK(text.find("\"command\"") < text.find("\"config\""));
}

TEST_CASE("conjugacy with g = f exits 0 with a zero section") {
  const fs::path d = scratch("con0");
  CHECK(run("conjugacy --set system=doubling --set epsilon=0 --set output_dir=" + d.string() + kFast, d / "log") == 0);
  const auto rep = nlohmann::json::parse(slurp(d / "conjugacy_report.json"));
  // Zero up to the rounding of the inverse-branch strands.
  CHECK(rep["solve"]["conditions"]["C2"]["value"].get<double>() < 1e-14);
}

TEST_CASE("conjugacy with an oversized translation exits 3 or 4") {
  const fs::path d = scratch("conbig");
  const int code = run("conjugacy --set system=doubling --set epsilon=0.4 --set output_dir=" + d.string() + kFast, d / "log");
  CHECK((code == 3 || code == 4));
}

TEST_CASE("sweep over delta writes one row per run") {
  const fs::path d = scratch("sweep");
  CHECK(run("sweep --mode bundles --param delta=0.1,0.01,0.001 --jobs 2 --set system=doubling --set output_dir=" +
                d.string() + kFast,
            d / "log") == 0);
  const std::string csv = slurp(d / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(fs::exists(d / "run_000" / "bundles_report.json"));
  CHECK(fs::exists(d / "run_002" / "bundles_report.json"));
}
