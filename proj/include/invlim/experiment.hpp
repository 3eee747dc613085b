#pragma once

#include "invlim/conjugacy_solver.hpp"
#include "invlim/systems_zoo.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace invlim {

inline constexpr const char* kSchemaVersion = "1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitCheck = 2, kExitDiverged = 3, kExitCondition = 4 };

/// Invalid configuration; `where` names the line or field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct ExperimentConfig {
  std::string system = "doubling";
  std::string perturbation = "translation";   // none | translation | fourier:k
  double epsilon = 0.0;
  std::vector<double> perturbation_direction; // translation direction; empty means all ones
  double delta = -1.0;                        // negative: automatic
  double eta = 0.05;
  double bundle_eta = -1.0;                   // negative: half the minimal angle on the pieces
  int window_past = 24;
  int window_future = 24;
  int strands = 64;
  int strand_past = 80;
  int strand_future = 80;
  int margin = 48;
  double truncation_tol = 1e-10;
  int max_iters = 200;
  double c1_tol = 1e-8;
  int mc_samples = 200000;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// Every key with its current value; keys sorted.
  nlohmann::json to_json() const;
  /// Sets one key from text; throws ConfigError naming `where`.
  void set(const std::string& key, const std::string& value, const std::string& where);
  /// Range and consistency checks; throws ConfigError naming the field.
  void validate() const;
  SampleConfig sample_config() const;
};

/// Parses `key = value` lines ('#' starts a comment) on top of `base`.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
/// Applies "key=value" overrides in order.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides);

/// FNV-1a 64-bit hash of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

Endomorphism build_system(const ExperimentConfig& cfg);
Endomorphism build_perturbed(const ExperimentConfig& cfg, const Endomorphism& f);

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  nlohmann::json report;  // also written to output_dir
};

RunResult cmd_hyperbolic(const ExperimentConfig& cfg);
RunResult cmd_bundles(const ExperimentConfig& cfg);
RunResult cmd_conjugacy(const ExperimentConfig& cfg);

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};
/// Parses "key=v1,v2,...".
SweepAxis parse_sweep_axis(const std::string& text);

/// Runs `mode` (bundles or conjugacy) over the cartesian product of the axes, up to `jobs` at a
/// time, each in output_dir/run_XXX; writes output_dir/sweep.csv.
RunResult cmd_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& grid, const std::string& mode,
                    int jobs);

std::string zoo_list_text();

}  // namespace invlim
