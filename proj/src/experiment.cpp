#include "invlim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace invlim {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where, "expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const long long n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(where, "expected an integer, got '" + v + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Report with schema version and config hash; timestamps go to a separate metadata file.
void write_report(const ExperimentConfig& cfg, const std::string& name, nlohmann::json& report,
                  const std::string& command, double seconds) {
  report["schema_version"] = kSchemaVersion;
  report["config_hash"] = config_hash(cfg);
  report["config"] = cfg.to_json();
  report["command"] = command;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_file(dir / name, report.dump(2) + "\n");
  nlohmann::json meta;
  meta["report"] = name;
  meta["created_utc"] = utc_timestamp();
  meta["wall_seconds"] = seconds;
  meta["config_hash"] = report["config_hash"];
  write_file(dir / (name + ".meta.json"), meta.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string csv_basis(const Mat& B) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index k = 0; k < B.size(); ++k) os << (k ? " " : "") << B.data()[k];
  return os.str();
}

struct Pipeline {
  Endomorphism f;
  OrbitSample sample;
  BasicPieceSet pieces;
};

Pipeline build_pipeline(const ExperimentConfig& cfg) {
  Endomorphism f = build_system(cfg);
  if (!f.has_template())
    throw ConfigError("system", "'" + cfg.system + "' has no product template; bundles and conjugacy need one");
  OrbitSample sample(f, cfg.sample_config());
  BasicPieceSet pieces = spectral_decomposition(f, {}, &sample);
  return Pipeline{std::move(f), std::move(sample), std::move(pieces)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["system"] = system;
  j["perturbation"] = perturbation;
  j["epsilon"] = epsilon;
  j["perturbation_direction"] = perturbation_direction;
  if (delta < 0) j["delta"] = "auto";
  else j["delta"] = delta;
  j["eta"] = eta;
  if (bundle_eta < 0) j["bundle_eta"] = "auto";
  else j["bundle_eta"] = bundle_eta;
  j["window_past"] = window_past;
  j["window_future"] = window_future;
  j["strands"] = strands;
  j["strand_past"] = strand_past;
  j["strand_future"] = strand_future;
  j["margin"] = margin;
  j["truncation_tol"] = truncation_tol;
  j["max_iters"] = max_iters;
  j["c1_tol"] = c1_tol;
  j["mc_samples"] = mc_samples;
  j["seed"] = std::to_string(seed);
  j["output_dir"] = output_dir;
  return j;
}

void ExperimentConfig::set(const std::string& key, const std::string& value, const std::string& where) {
  const std::string at = where + " (" + key + ")";
  auto as_int = [&] {
    const long long n = to_int(value, at);
    if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) throw ConfigError(at, "out of range");
    return static_cast<int>(n);
  };
  if (key == "system") system = value;
  else if (key == "perturbation") perturbation = value;
  else if (key == "epsilon") epsilon = to_double(value, at);
  else if (key == "perturbation_direction") {
    perturbation_direction.clear();
    for (const auto& p : split(value, ',')) perturbation_direction.push_back(to_double(p, at));
  } else if (key == "delta" || key == "bundle_eta") {
    const double d = value == "auto" ? -1.0 : to_double(value, at);
    if (value != "auto" && d < 0.0) throw ConfigError(at, "must be >= 0 or 'auto'");
    (key == "delta" ? delta : bundle_eta) = d;
  } else if (key == "eta") eta = to_double(value, at);
  else if (key == "window_past") window_past = as_int();
  else if (key == "window_future") window_future = as_int();
  else if (key == "strands") strands = as_int();
  else if (key == "strand_past") strand_past = as_int();
  else if (key == "strand_future") strand_future = as_int();
  else if (key == "margin") margin = as_int();
  else if (key == "truncation_tol") truncation_tol = to_double(value, at);
  else if (key == "max_iters") max_iters = as_int();
  else if (key == "c1_tol") c1_tol = to_double(value, at);
  else if (key == "mc_samples") mc_samples = as_int();
  else if (key == "seed") {
    try {
      size_t pos = 0;
      seed = std::stoull(value, &pos);
      if (pos != value.size() || value.front() == '-') throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError(at, "expected an unsigned 64-bit integer, got '" + value + "'");
    }
  } else if (key == "output_dir") output_dir = value;
  else throw ConfigError(where, "unknown key '" + key + "'");
}

void ExperimentConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(name, "must be positive");
  };
  if (system.empty()) throw ConfigError("system", "must not be empty");
  if (perturbation != "none" && perturbation != "translation" && perturbation.rfind("fourier", 0) != 0)
    throw ConfigError("perturbation", "expected none, translation or fourier:k");
  positive(eta, "eta");
  if (bundle_eta >= 0.0) positive(bundle_eta, "bundle_eta");
  for (auto [v, n] : {std::pair{window_past, "window_past"}, {window_future, "window_future"}, {strands, "strands"},
                      {strand_past, "strand_past"}, {strand_future, "strand_future"}, {margin, "margin"},
                      {max_iters, "max_iters"}, {mc_samples, "mc_samples"}})
    if (v < 1) throw ConfigError(n, "must be a positive integer");
  positive(truncation_tol, "truncation_tol");
  positive(c1_tol, "c1_tol");
  if (std::max(window_past, window_future) > margin) throw ConfigError("margin", "must be at least the window length");
  if (margin > std::min(strand_past, strand_future))
    throw ConfigError("margin", "must not exceed strand_past or strand_future");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

SampleConfig ExperimentConfig::sample_config() const {
  SampleConfig sc;
  sc.strands = strands;
  sc.past = strand_past;
  sc.future = strand_future;
  sc.window = std::max(window_past, window_future);
  sc.margin = margin;
  sc.seed = seed;
  return sc;
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(n);
    if (eq == std::string::npos) throw ConfigError(where, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where, "expected 'key = value'");
    base.set(key, value, where);
  }
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ":" + e.where(), std::string(e.what()).substr(e.where().size() + 2));
  }
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set " + o, "expected key=value");
    cfg.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)), "--set");
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.to_json().dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Endomorphism build_system(const ExperimentConfig& cfg) {
  try {
    return zoo_from_name(cfg.system);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("system", e.what());
  }
}

Endomorphism build_perturbed(const ExperimentConfig& cfg, const Endomorphism& f) {
  if (cfg.perturbation == "none" || cfg.epsilon == 0.0) return f;
  try {
    PerturbationFamily fam;
    if (cfg.perturbation == "translation") {
      Vec dir = Vec::Ones(f.dim());
      if (!cfg.perturbation_direction.empty()) {
        if (static_cast<int>(cfg.perturbation_direction.size()) != f.dim())
          throw ConfigError("perturbation_direction", "needs one entry per coordinate");
        dir = Eigen::Map<const Vec>(cfg.perturbation_direction.data(), f.dim());
      }
      fam = perturb_translation(f, dir);
    } else {
      int k = 1;
      const auto colon = cfg.perturbation.find(':');
      if (colon != std::string::npos) k = static_cast<int>(to_int(cfg.perturbation.substr(colon + 1), "perturbation"));
      fam = perturb_fourier(f, k);
    }
    fam.validate(cfg.epsilon);
    return fam.at(cfg.epsilon);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("epsilon", e.what());
  }
}

// ---------------------------------------------------------------------------
// Commands

RunResult cmd_hyperbolic(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const Endomorphism f = build_system(cfg);
  RunResult r;
  nlohmann::json rep;
  const AxiomAReport ax = verify_axiom_A(f);
  rep["axiom_A"] = ax.to_json();
  bool pieces_ok = true;
  try {
    OrbitSample sample(f, cfg.sample_config());
    const BasicPieceSet ps = spectral_decomposition(f, {}, &sample);
    rep["pieces"] = ps.to_json();
    pieces_ok = !ps.has_template || ps.filtration_check.pass;
  } catch (const std::runtime_error& e) {
    rep["pieces"] = {{"error", e.what()}};
    pieces_ok = false;
  }
  rep["pass"] = ax.pass && pieces_ok;
  std::ostringstream csv;
  csv.precision(17);
  csv << "point,period";
  for (int c = 0; c < f.dim(); ++c) csv << ",x" << c + 1;
  csv << ",dim_s,dim_u,contraction,expansion,min_angle,invariance,Es_basis,Eu_basis\n";
  for (size_t k = 0; k < ax.splitting.points.size(); ++k) {
    const auto& p = ax.splitting.points[k];
    csv << k << "," << p.period;
    for (int c = 0; c < f.dim(); ++c) csv << "," << p.point(c);
    csv << "," << p.Es.dim() << "," << p.Eu.dim() << "," << p.contraction << "," << p.expansion << "," << p.min_angle
        << "," << p.invariance << "," << csv_basis(p.Es.basis()) << "," << csv_basis(p.Eu.basis()) << "\n";
  }
  write_report(cfg, "hyperbolic_report.json", rep, "hyperbolic", seconds_since(t0));
  write_file(fs::path(cfg.output_dir) / "splitting.csv", csv.str());
  r.report = rep;
  r.exit_code = rep["pass"].get<bool>() ? kExitOk : kExitCheck;
  r.message = r.exit_code == kExitOk ? "hyperbolic: pass" : "hyperbolic: check failed";
  return r;
}

RunResult cmd_bundles(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (cfg.delta == 0.0) throw ConfigError("delta", "inverse undefined at delta=0");
  const double delta = cfg.delta > 0.0 ? cfg.delta : 0.01;
  Pipeline p = build_pipeline(cfg);
  RunResult r;
  nlohmann::json rep;
  rep["q"] = p.pieces.q();
  rep["pieces"] = p.pieces.to_json();
  rep["delta"] = delta;
  BundleConfig bc;
  bc.delta = delta;
  bc.eta = cfg.bundle_eta;
  try {
    const BundleFamily fam = solve_bundle_family(p.pieces, p.sample, bc);
    const SmoothedDerivatived F = smoothed_derivative(p.f, delta);
    const PrincipalReport pr = verify_principal(fam, p.pieces, F, p.sample);
    rep["K"] = fam.K;
    rep["lambda"] = fam.lambda;
    rep["eta"] = fam.eta;
    rep["principal"] = pr.to_json();
    rep["pass"] = pr.pass;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& pb : fam.pieces)
      per.push_back({{"K", pb.K},
                     {"min_angle", pb.min_angle},
                     {"min_expansion", json_number(pb.min_expansion)},
                     {"contraction", pb.contraction},
                     {"inv_expansion", pb.inv_expansion},
                     {"stable_iterations", pb.stable_iterations},
                     {"unstable_iterations", pb.unstable_iterations},
                     {"stable_change", pb.stable_change},
                     {"unstable_change", pb.unstable_change},
                     {"lipschitz_stable", pb.stable.lipschitz_est},
                     {"lipschitz_unstable", pb.unstable.lipschitz_est}});
    rep["per_piece"] = per;
    nlohmann::json ks = nlohmann::json::array();
    for (double d : {1e-1, 1e-2, 1e-3}) {
      BundleConfig b2 = bc;
      b2.delta = d;
      const BundleFamily fd = solve_bundle_family(p.pieces, p.sample, b2);
      ks.push_back({{"delta", d}, {"K", fd.K}, {"lambda", fd.lambda}});
    }
    rep["K_by_delta"] = ks;
    fs::create_directories(cfg.output_dir);
    write_file(fs::path(cfg.output_dir) / "bundles_fields.csv", bundles_to_csv(fam, p.sample));
    r.exit_code = pr.pass ? kExitOk : kExitCheck;
    r.message = pr.pass ? "bundles: all items pass" : "bundles: principal check failed";
  } catch (const std::runtime_error& e) {
    rep["pass"] = false;
    rep["error"] = e.what();
    r.exit_code = kExitCheck;
    r.message = std::string("bundles: ") + e.what();
  }
  write_report(cfg, "bundles_report.json", rep, "bundles", seconds_since(t0));
  r.report = rep;
  return r;
}

RunResult cmd_conjugacy(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (cfg.delta == 0.0) throw ConfigError("delta", "inverse undefined at delta=0");
  Pipeline p = build_pipeline(cfg);
  const Endomorphism g = build_perturbed(cfg, p.f);
  RunResult r;
  nlohmann::json rep;
  rep["q"] = p.pieces.q();
  rep["pieces"] = p.pieces.to_json();
  fs::create_directories(cfg.output_dir);
  try {
    PartitionConfig pc;
    pc.mc_samples = cfg.mc_samples;
    pc.seed = cfg.seed;
    const PartitionOfUnity pou = partition_of_unity(p.pieces, p.sample, pc);
    ConjugacyConfig cc;
    cc.delta = cfg.delta;
    cc.eta = cfg.eta;
    cc.max_iters = cfg.max_iters;
    cc.truncation_tol = cfg.truncation_tol;
    cc.c1_tol = cfg.c1_tol;
    cc.bundles.eta = cfg.bundle_eta;
    cc.partition = pc;
    const SolveReport sr = solve_conjugacy(g, ConjugacyContext{&p.sample, &p.pieces, &pou}, cc);
    rep["solve"] = sr.to_json();
    rep["partition"] = {{"r", pou.r}, {"sum_defect", pou.sum_defect}, {"support_violation", pou.support_violation}};
    rep["surjectivity"] = surjectivity_coverage(sr.w, p.sample, g).to_json();
    const bool ok = sr.converged() && sr.c1_pass && sr.c2_pass && sr.c3_pass;
    rep["pass"] = ok;
    write_file(fs::path(cfg.output_dir) / "section_w.csv", section_to_csv(sr.w, p.sample));
    std::ostringstream res;
    res.precision(17);
    res << "iteration,change\n";
    for (size_t k = 0; k < sr.changes.size(); ++k) res << k + 1 << "," << sr.changes[k] << "\n";
    write_file(fs::path(cfg.output_dir) / "residuals.csv", res.str());
    write_file(fs::path(cfg.output_dir) / "pointwise_residuals.csv", residuals_to_csv(sr.w, p.sample, g));
    if (ok) {
      r.exit_code = kExitOk;
      r.message = "conjugacy: converged, conditions pass";
    } else if (sr.status == SolveStatus::Diverged || sr.status == SolveStatus::EtaExceeded) {
      r.exit_code = kExitDiverged;
      r.message = "conjugacy: " + to_string(sr.status);
    } else {
      r.exit_code = kExitCondition;
      r.message = "conjugacy: " + to_string(sr.status) + ", condition check failed";
    }
  } catch (const std::runtime_error& e) {
    rep["pass"] = false;
    rep["error"] = e.what();
    r.exit_code = kExitCondition;
    r.message = std::string("conjugacy: ") + e.what();
  }
  write_report(cfg, "conjugacy_report.json", rep, "conjugacy", seconds_since(t0));
  r.report = rep;
  return r;
}

// ---------------------------------------------------------------------------
// Sweep

SweepAxis parse_sweep_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--param " + text, "expected key=v1,v2,...");
  SweepAxis a;
  a.key = trim(text.substr(0, eq));
  for (const auto& v : split(text.substr(eq + 1), ','))
    if (!v.empty()) a.values.push_back(v);
  if (a.key.empty() || a.values.empty()) throw ConfigError("--param " + text, "expected key=v1,v2,...");
  return a;
}

RunResult cmd_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& grid, const std::string& mode,
                    int jobs) {
  if (mode != "bundles" && mode != "conjugacy") throw ConfigError("--mode", "expected bundles or conjugacy");
  if (grid.empty()) throw ConfigError("--param", "empty parameter grid");
  size_t total = 1;
  for (const auto& a : grid) {
    if (a.values.empty()) throw ConfigError("--param " + a.key, "empty parameter grid");
    total *= a.values.size();
  }
  // Materialize and validate every run before computing anything.
  std::vector<ExperimentConfig> runs;
  std::vector<std::vector<std::string>> values;
  for (size_t k = 0; k < total; ++k) {
    ExperimentConfig c = base;
    std::vector<std::string> vals;
    size_t rem = k;
    for (size_t a = grid.size(); a-- > 0;) {
      const auto& v = grid[a].values[rem % grid[a].values.size()];
      rem /= grid[a].values.size();
      vals.insert(vals.begin(), v);
    }
    for (size_t a = 0; a < grid.size(); ++a) c.set(grid[a].key, vals[a], "--param " + grid[a].key);
    std::ostringstream name;
    name << "run_" << std::setw(3) << std::setfill('0') << k;
    c.output_dir = (fs::path(base.output_dir) / name.str()).string();
    c.validate();
    runs.push_back(c);
    values.push_back(vals);
  }
  std::vector<RunResult> results(total);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next++; k < total; k = next++) {
      try {
        results[k] = mode == "bundles" ? cmd_bundles(runs[k]) : cmd_conjugacy(runs[k]);
      } catch (const std::exception& e) {
        results[k].exit_code = dynamic_cast<const ConfigError*>(&e) ? kExitConfig : kExitCondition;
        results[k].message = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  const std::vector<std::string> cols =
      mode == "bundles"
          ? std::vector<std::string>{"q", "delta", "K", "lambda", "eta", "pass"}
          : std::vector<std::string>{"q", "delta", "lambda", "K", "D", "contraction_factor", "iterations", "c1",
                                     "c2", "c3", "status", "pass"};
  std::ostringstream csv;
  csv.precision(17);
  csv << "run";
  for (const auto& a : grid) csv << "," << a.key;
  csv << ",exit_code";
  for (const auto& c : cols) csv << "," << c;
  csv << ",message\n";
  int ok = 0;
  for (size_t k = 0; k < total; ++k) {
    const RunResult& rr = results[k];
    if (rr.exit_code == kExitOk) ++ok;
    csv << k;
    for (const auto& v : values[k]) csv << "," << v;
    csv << "," << rr.exit_code;
    const nlohmann::json& rep = rr.report;
    const nlohmann::json* src = &rep;
    if (mode == "conjugacy" && rep.contains("solve")) src = &rep["solve"];
    for (const auto& c : cols) {
      const nlohmann::json* v = nullptr;
      if (src->contains(c)) v = &(*src)[c];
      else if (rep.contains(c)) v = &rep[c];
      else if (c == "c1" || c == "c2" || c == "c3") {
        const std::string key = c == "c1" ? "C1" : c == "c2" ? "C2" : "C3";
        if (src->contains("conditions")) v = &(*src)["conditions"][key]["value"];
      }
      csv << ",";
      if (!v) continue;
      if (v->is_string()) csv << v->get<std::string>();
      else if (v->is_boolean()) csv << (v->get<bool>() ? "true" : "false");
      else csv << v->dump();
    }
    std::string msg = rr.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    csv << "," << msg << "\n";
  }
  fs::create_directories(base.output_dir);
  write_file(fs::path(base.output_dir) / "sweep.csv", csv.str());
  RunResult r;
  r.exit_code = ok > 0 ? kExitOk : kExitCheck;
  r.message = "sweep: " + std::to_string(ok) + " of " + std::to_string(total) + " runs succeeded";
  r.report = {{"runs", total}, {"succeeded", ok}};
  return r;
}

std::string zoo_list_text() {
  std::ostringstream os;
  for (const auto& [name, desc] : zoo_catalog()) os << std::left << std::setw(28) << name << desc << "\n";
  return os.str();
}

}  // namespace invlim
