#pragma once

// End-to-end experiment: approximants -> frames -> perturbation specs ->
// pendulum checks -> gap certificate -> norm report. Every artifact lands in
// one run directory next to manifest.json. Needs nlohmann/json and OpenSSL.

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lagtorus/destruction_lab.hpp"
#include "lagtorus/diophantine.hpp"
#include "lagtorus/lattice_frame.hpp"
#include "lagtorus/pendulum.hpp"
#include "lagtorus/perturbation.hpp"

namespace lagtorus {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

// Shortest round-trip decimal form, independent of the C locale.
inline std::string fmt_num(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::precondition, "sha256: digest failed");
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw PreconditionError("cannot write " + p.string());
  out << text;
}

// Minimal CSV writer: header row, '.' decimals, LF endings.
class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { row_strings(header); }
  Csv& cell(double x) { return raw(fmt_num(x)); }
  Csv& cell(long long x) { return raw(std::to_string(x)); }
  Csv& cell(int x) { return raw(std::to_string(x)); }
  Csv& cell(const std::string& s) { return raw(s); }
  Csv& cell(const char* s) { return raw(s); }
  void end() {
    text_ += '\n';
    fresh_ = true;
  }
  const std::string& str() const { return text_; }

 private:
  Csv& raw(const std::string& s) {
    if (!fresh_) text_ += ',';
    text_ += s;
    fresh_ = false;
    return *this;
  }
  void row_strings(const std::vector<std::string>& cells) {
    for (const auto& c : cells) raw(c);
    end();
  }
  std::string text_;
  bool fresh_ = true;
};

struct SolverConfig {
  double tol = 1e-8;
  int max_iter = 100000;
};

struct GridConfig {
  int per_axis = 128;
  int patch_per_axis = 48;
  double fit_min_norm = 5.0;
  bool convergence_check = true;
};

struct LabConfig {
  double h_max = 0.05;
  double fine_fraction = 0.05;
  double growth = 1.15;
  double max_n = 70;  // largest |k| sent to the certificate stage
  int scan_points = 5;  // gap scan grid per axis
  double scan_halfwidth = 1.0;  // in units of R
};

struct PendulumConfig {
  Vec sigmas{0.01, 0.0167, 0.0278, 0.0464, 0.0774, 0.129, 0.215, 0.359, 0.599, 1.0};
  double window = 10.0;
  int table_points = 64;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  RotationVector omega{Vec{1.0, kGolden}};
  int max_norm = 100;
  double C = 1.0;
  double a = 1.0;
  double epsilon = 0.1;
  double s = 1.0;        // peak exponent of the lab system
  double norm_s = 12.0;  // peak exponent used for the C^r norm report
  double s_prime = 4.5;
  std::vector<int> r_list{0, 1, 2};
  SolverConfig solver;
  GridConfig grid;
  LabConfig lab;
  PendulumConfig pendulum;
  std::uint64_t seed = 0;
  std::string output_dir = "run";

  std::size_t d() const { return omega.dim(); }

  void validate() const {
    auto bad = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (schema_version != kSchemaVersion)
      bad("schema_version " + std::to_string(schema_version) + " is not supported (expected " +
          std::to_string(kSchemaVersion) + ")");
    if (omega.dim() < 2) bad("omega needs at least 2 entries");
    for (double x : omega.coords)
      if (!std::isfinite(x)) bad("omega entries must be finite");
    if (max_norm < 1) bad("max_norm must be >= 1");
    if (!(C > 0)) bad("C must be positive");
    if (!(a > 0)) bad("a must be positive");
    if (!(epsilon > 0)) bad("epsilon must be positive");
    const double limit = 2.0 * static_cast<double>(d()) - 2.0 - 2.0 * epsilon;
    if (!(a < limit))
      bad("a = " + fmt_num(a) + " violates a < 2d - 2 - 2*epsilon = " + fmt_num(limit));
    if (!(s_prime > 4)) bad("s_prime must exceed 4");
    if (!std::isfinite(s) || !std::isfinite(norm_s)) bad("s and norm_s must be finite");
    if (r_list.empty()) bad("r_list must not be empty");
    for (int r : r_list)
      if (r < 0 || r > 4) bad("r_list entries must lie in [0, 4]");
    if (!(solver.tol > 0)) bad("solver.tol must be positive");
    if (solver.max_iter < 1) bad("solver.max_iter must be >= 1");
    if (grid.per_axis < 8 || grid.patch_per_axis < 4) bad("grid sizes too small");
    if (!(grid.fit_min_norm >= 0)) bad("grid.fit_min_norm must be >= 0");
    if (!(lab.h_max > 0 && lab.fine_fraction > 0 && lab.growth > 1 && lab.max_n >= 1))
      bad("lab: h_max, fine_fraction must be positive, growth > 1, max_n >= 1");
    if (lab.scan_points < 1 || !(lab.scan_halfwidth >= 0)) bad("lab scan grid invalid");
    if (pendulum.sigmas.empty()) bad("pendulum.sigmas must not be empty");
    for (double sg : pendulum.sigmas)
      if (!(sg > 0)) bad("pendulum.sigmas must be positive");
    if (!(pendulum.window > 0) || pendulum.table_points < 2) bad("pendulum window/table invalid");
    if (output_dir.empty()) bad("output_dir must not be empty");
  }

  LabOptions lab_options(unsigned threads) const {
    LabOptions o;
    o.epsilon = epsilon;
    o.h_max = lab.h_max;
    o.fine_fraction = lab.fine_fraction;
    o.growth = lab.growth;
    o.solver.tol = solver.tol;
    o.solver.max_iter = solver.max_iter;
    o.threads = threads;
    return o;
  }

  NormGridConfig norm_grid() const {
    return {grid.per_axis, grid.patch_per_axis, grid.fit_min_norm, grid.convergence_check};
  }
};

namespace detail {

// Copies the listed keys of `j` into the setters, rejecting anything else.
inline void read_object(const Json& j, const std::string& where,
                        const std::vector<std::pair<std::string, std::function<void(const Json&)>>>& keys) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  std::set<std::string> known;
  for (const auto& [k, f] : keys) known.insert(k);
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("config: unknown key '" + where + k + "'");
  for (const auto& [k, f] : keys) {
    auto it = j.find(k);
    if (it == j.end()) continue;
    try {
      f(*it);
    } catch (const Json::exception& e) {
      throw ConfigError("config: bad value for '" + where + k + "': " + e.what());
    }
  }
}

template <typename T>
std::function<void(const Json&)> set(T& x) {
  return [&x](const Json& v) { x = v.get<T>(); };
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  Vec omega;
  bool has_version = false;
  detail::read_object(
      j, "",
      {{"schema_version", [&](const Json& v) { c.schema_version = v.get<int>(); has_version = true; }},
       {"omega", detail::set(omega)},
       {"max_norm", detail::set(c.max_norm)},
       {"C", detail::set(c.C)},
       {"a", detail::set(c.a)},
       {"epsilon", detail::set(c.epsilon)},
       {"s", detail::set(c.s)},
       {"norm_s", detail::set(c.norm_s)},
       {"s_prime", detail::set(c.s_prime)},
       {"r_list", detail::set(c.r_list)},
       {"seed", detail::set(c.seed)},
       {"output_dir", detail::set(c.output_dir)},
       {"solver", [&](const Json& v) {
          detail::read_object(v, "solver.", {{"tol", detail::set(c.solver.tol)},
                                             {"max_iter", detail::set(c.solver.max_iter)}});
        }},
       {"grid", [&](const Json& v) {
          detail::read_object(v, "grid.", {{"per_axis", detail::set(c.grid.per_axis)},
                                           {"patch_per_axis", detail::set(c.grid.patch_per_axis)},
                                           {"fit_min_norm", detail::set(c.grid.fit_min_norm)},
                                           {"convergence_check", detail::set(c.grid.convergence_check)}});
        }},
       {"lab", [&](const Json& v) {
          detail::read_object(v, "lab.", {{"h_max", detail::set(c.lab.h_max)},
                                          {"fine_fraction", detail::set(c.lab.fine_fraction)},
                                          {"growth", detail::set(c.lab.growth)},
                                          {"max_n", detail::set(c.lab.max_n)},
                                          {"scan_points", detail::set(c.lab.scan_points)},
                                          {"scan_halfwidth", detail::set(c.lab.scan_halfwidth)}});
        }},
       {"pendulum", [&](const Json& v) {
          detail::read_object(v, "pendulum.", {{"sigmas", detail::set(c.pendulum.sigmas)},
                                               {"window", detail::set(c.pendulum.window)},
                                               {"table_points", detail::set(c.pendulum.table_points)}});
        }}});
  if (!has_version) throw ConfigError("config: missing schema_version");
  if (!omega.empty()) {
    c.omega.coords = omega;
  }
  c.validate();
  return c;
}

inline Json to_json(const ExperimentConfig& c) {
  return Json{{"schema_version", c.schema_version},
              {"omega", c.omega.coords},
              {"max_norm", c.max_norm},
              {"C", c.C},
              {"a", c.a},
              {"epsilon", c.epsilon},
              {"s", c.s},
              {"norm_s", c.norm_s},
              {"s_prime", c.s_prime},
              {"r_list", c.r_list},
              {"seed", c.seed},
              {"output_dir", c.output_dir},
              {"solver", {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}}},
              {"grid",
               {{"per_axis", c.grid.per_axis},
                {"patch_per_axis", c.grid.patch_per_axis},
                {"fit_min_norm", c.grid.fit_min_norm},
                {"convergence_check", c.grid.convergence_check}}},
              {"lab",
               {{"h_max", c.lab.h_max},
                {"fine_fraction", c.lab.fine_fraction},
                {"growth", c.lab.growth},
                {"max_n", c.lab.max_n},
                {"scan_points", c.lab.scan_points},
                {"scan_halfwidth", c.lab.scan_halfwidth}}},
              {"pendulum",
               {{"sigmas", c.pendulum.sigmas},
                {"window", c.pendulum.window},
                {"table_points", c.pendulum.table_points}}}};
}

inline ExperimentConfig load_config(const fs::path& p) {
  std::string text;
  try {
    text = read_file(p);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError("config: " + p.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// ---- stage artifacts --------------------------------------------------------

inline std::string approximants_csv(const std::vector<Approximant>& seq, std::size_t d) {
  std::vector<std::string> head;
  for (std::size_t i = 0; i < d; ++i) head.push_back("k" + std::to_string(i + 1));
  for (const char* h : {"norm", "residual", "bound"}) head.emplace_back(h);
  Csv csv(head);
  for (const auto& ap : seq) {
    for (auto x : ap.k) csv.cell(static_cast<long long>(x));
    csv.cell(ap.norm).cell(ap.residual).cell(ap.bound());
    csv.end();
  }
  return csv.str();
}

inline Json frame_json(const LatticeFrame& f, const RotationVector& w) {
  const auto block = build_symplectic(f);
  Json inv = Json::array();
  for (const auto& row : block.K_inv_T) {
    Json r = Json::array();
    for (const auto& q : row) r.push_back(to_string(q));
    inv.push_back(r);
  }
  return Json{{"K", f.rows},
              {"det", determinant(f.rows).str()},
              {"K_inv_T", inv},
              {"rows_orthogonal", rows_orthogonal(f)},
              {"symplectic", is_symplectic(block)},
              {"pushed_omega", push_rotation(f, w).coords}};
}

inline Json spec_json(const PerturbationSpec& sp) {
  return Json{{"n", sp.n},
              {"a", sp.a},
              {"s", sp.s},
              {"s_prime", sp.s_prime},
              {"d", sp.d},
              {"omega1_abs", sp.omega1_abs},
              {"peak_scale", sp.peak_scale},
              {"sigma", sp.sigma()},
              {"R", sp.R()},
              {"peak", sp.peak()},
              {"center", Vec{kPi, 0.0}}};
}

inline std::string pendulum_table_csv(double sigma, double window, int points) {
  const PendulumParams p(sigma);
  Csv csv({"dt", "e", "half_turn_action", "ln_e"});
  // Half-turn times from the fast end to deep in the separatrix regime.
  for (int i = 0; i < points; ++i) {
    const double dt = window * (0.02 + 0.98 * i / (points - 1));
    const double e = energy_from_time(dt, p);
    csv.cell(dt).cell(e).cell(half_turn_action(e, p)).cell(std::log(e));
    csv.end();
  }
  return csv.str();
}

inline Json pendulum_check_json(const Vec& sigmas, double window) {
  Vec fr;
  for (int i = 0; i < 10; ++i) fr.push_back(0.05 + 0.9 * i / 9.0);
  const auto suite = pendulum_identity_suite(sigmas, fr, window);
  Json fits = Json::array();
  bool law_ok = true;
  double prev_slope = 0;
  for (double sg : {sigmas.back(), sigmas.back() / 4.0}) {
    Vec dt;
    for (int i = 0; i < 20; ++i) dt.push_back((6.0 + 10.0 * i / 19.0) / std::sqrt(sg));
    const auto f = separatrix_law_fit(PendulumParams(sg), dt);
    law_ok = law_ok && f.r_squared >= 0.9999;
    fits.push_back({{"sigma", sg}, {"slope", f.slope}, {"r_squared", f.r_squared}, {"fitted_c", f.fitted_c}});
    if (prev_slope != 0) {
      const double ratio = prev_slope / f.slope;
      law_ok = law_ok && std::abs(ratio - 2.0) <= 0.1;
      fits.back()["slope_ratio"] = ratio;
    }
    prev_slope = f.slope;
  }
  return Json{{"slope_identity", {{"pass", suite.slope_ok}, {"worst_rel_err", suite.worst_slope_err}}},
              {"roundtrip", {{"pass", suite.roundtrip_ok}, {"worst_rel_err", suite.worst_roundtrip_err}}},
              {"unimodal", {{"pass", suite.unimodal_ok}, {"argmin_offsets_cells", suite.argmin_offsets}}},
              {"separatrix_law", {{"pass", law_ok}, {"fits", fits}}},
              {"pass", suite.passed() && law_ok}};
}

inline Json certificate_json(const GapCertificate& c) {
  return Json{{"verdict", to_string(c.verdict)},
              {"spec", spec_json(c.spec)},
              {"omega_work", c.omega_work.coords},
              {"T", c.T},
              {"window_ratio", c.window_ratio},
              {"A_through", c.A_through},
              {"A_detour", c.A_detour},
              {"A_detour_plus", c.A_detour_plus},
              {"A_detour_minus", c.A_detour_minus},
              {"A_direct", c.A_direct},
              {"A_unconstrained", c.A_unconstrained},
              {"gap", c.gap},
              {"bump_cost", c.bump.cost},
              {"bump_lower_bound", c.bump.lower_bound},
              {"dwell_time", c.bump.dwell_time},
              {"shift_bound", c.shift_bound},
              {"shift_action", c.shift_action},
              {"t_through", c.t_through},
              {"t_detour", c.t_detour},
              {"detour_margin", c.avoidance.margin},
              {"detour_avoids_support", c.avoidance.avoids},
              {"lambda", c.lambda},
              {"el_residual", c.el_residual},
              {"converged", c.converged},
              {"endpoints_match", c.endpoints_match},
              {"velocity_deviation", velocity_deviation(c.through.path, {1})},
              {"diagnostic", c.diagnostic}};
}

inline std::string gap_scan_csv(const std::vector<GapScanRow>& rows) {
  Csv csv({"phase1", "phase2", "excess_action", "converged"});
  for (const auto& r : rows) {
    csv.cell(r.phase1).cell(r.phase2).cell(r.excess).cell(r.converged ? 1 : 0);
    csv.end();
  }
  return csv.str();
}

inline std::vector<std::pair<double, double>> scan_offsets(int points, double halfwidth) {
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < points; ++i)
    for (int j = 0; j < points; ++j) {
      const double a = points == 1 ? 0.0 : -halfwidth + 2.0 * halfwidth * i / (points - 1);
      const double b = points == 1 ? 0.0 : -halfwidth + 2.0 * halfwidth * j / (points - 1);
      out.emplace_back(a, b);
    }
  return out;
}

inline std::string norms_csv(const NormDecayReport& rep) {
  Csv csv({"n", "k_norm", "r", "norm", "fitted_slope", "expected_slope"});
  for (const auto& row : rep.rows) {
    std::size_t ri = 0;
    while (rep.r_list[ri] != row.r) ++ri;
    csv.cell(static_cast<long long>(std::llround(row.k_norm * row.k_norm)))
        .cell(row.k_norm)
        .cell(row.r)
        .cell(row.norm)
        .cell(rep.slopes[ri])
        .cell(rep.expected_slopes[ri]);
    csv.end();
  }
  return csv.str();
}

inline std::string decay_csv(const DecayLaws& dl) {
  Csv csv({"k_norm", "omega1", "sigma", "bump_cost", "shift_bound", "verdict"});
  for (const auto& r : dl.rows) {
    csv.cell(r.k_norm).cell(r.omega1).cell(r.sigma).cell(r.bump_cost).cell(r.shift_bound).cell(to_string(r.verdict));
    csv.end();
  }
  return csv.str();
}

// ---- pipeline ---------------------------------------------------------------

enum class StageStatus { ok, failed, skipped };

inline const char* to_string(StageStatus s) {
  switch (s) {
    case StageStatus::ok: return "ok";
    case StageStatus::failed: return "failed";
    default: return "skipped";
  }
}

struct StageRecord {
  std::string name;
  StageStatus status = StageStatus::skipped;
  int code = 0;
  std::string message;
  double wall_seconds = 0;
  Json summary = Json::object();
};

struct FileRecord {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  Json config;
  std::vector<StageRecord> stages;
  std::vector<FileRecord> files;
  fs::path root;

  bool all_ok() const {
    if (stages.empty()) return false;
    for (const auto& s : stages)
      if (s.status != StageStatus::ok) return false;
    return true;
  }
  const StageRecord* stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }
};

inline Json to_json(const RunManifest& m) {
  Json stages = Json::array();
  for (const auto& s : m.stages)
    stages.push_back({{"name", s.name},
                      {"status", to_string(s.status)},
                      {"code", s.code},
                      {"message", s.message},
                      {"wall_seconds", s.wall_seconds},
                      {"summary", s.summary}});
  Json files = Json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return Json{{"schema_version", kSchemaVersion}, {"config", m.config}, {"stages", stages}, {"files", files}};
}

inline RunManifest manifest_from_json(const Json& j, const fs::path& root) {
  RunManifest m;
  m.root = root;
  try {
    m.config = j.value("config", Json::object());
    for (const auto& s : j.value("stages", Json::array())) {
      StageRecord r;
      r.name = s.at("name").get<std::string>();
      const auto st = s.at("status").get<std::string>();
      r.status = st == "ok" ? StageStatus::ok : st == "failed" ? StageStatus::failed : StageStatus::skipped;
      r.code = s.value("code", 0);
      r.message = s.value("message", "");
      r.wall_seconds = s.value("wall_seconds", 0.0);
      r.summary = s.value("summary", Json::object());
      m.stages.push_back(std::move(r));
    }
    for (const auto& f : j.value("files", Json::array()))
      m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                         f.at("bytes").get<std::uintmax_t>()});
  } catch (const Json::exception& e) {
    throw PreconditionError(std::string("manifest: malformed: ") + e.what());
  }
  return m;
}

inline RunManifest load_manifest(const fs::path& p) {
  const auto text = read_file(p);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw PreconditionError("manifest: " + p.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, p.parent_path());
}

namespace detail {

// Holds <dir>/.lock for the lifetime of a run.
class DirLock {
 public:
  explicit DirLock(fs::path dir) : path_(std::move(dir) / ".lock") {
    fs::create_directories(path_.parent_path());
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw PreconditionError("run: output directory is locked by another run: " + path_.string());
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

}  // namespace detail

struct PipelineOptions {
  unsigned threads = 1;
};

inline RunManifest run_pipeline(const ExperimentConfig& cfg, const PipelineOptions& popt = {}) {
  cfg.validate();
  RunManifest m;
  m.root = cfg.output_dir;
  m.config = to_json(cfg);
  detail::DirLock lock(m.root);

  auto emit = [&](const std::string& rel, const std::string& text) {
    write_file(m.root / rel, text);
    m.files.push_back({rel, sha256_hex(text), text.size()});
  };

  std::vector<Approximant> seq;
  std::vector<LatticeFrame> frames;
  std::vector<PerturbationSpec> specs;
  const auto w = cfg.omega;
  const auto lab = cfg.lab_options(popt.threads);

  using Body = std::function<Json()>;
  const std::vector<std::pair<std::string, Body>> plan = {
      {"approximants",
       [&]() -> Json {
         seq = find_approximants(w, cfg.max_norm, cfg.C);
         emit("approximants/approximants.csv", approximants_csv(seq, w.dim()));
         return {{"count", seq.size()}, {"largest_norm", seq.back().norm}};
       }},
      {"frames",
       [&]() -> Json {
         Json all = Json::array();
         bool ok = true;
         for (const auto& ap : seq) {
           frames.push_back(build_frame(ap.k, w));
           all.push_back(frame_json(frames.back(), w));
           ok = ok && all.back()["symplectic"].get<bool>() && all.back()["rows_orthogonal"].get<bool>();
         }
         emit("frames/frames.json", all.dump(2) + "\n");
         if (!ok) throw PreconditionError("frames: a frame failed the exact symplectic check");
         return {{"count", frames.size()}, {"all_symplectic", ok}};
       }},
      {"perturbation",
       [&]() -> Json {
         Json all = Json::array();
         for (const auto& f : frames) {
           specs.push_back(spec_for_frame(f, cfg.a, cfg.s, cfg.s_prime));
           all.push_back(spec_json(specs.back()));
         }
         emit("perturbation/specs.json", all.dump(2) + "\n");
         return {{"count", specs.size()}};
       }},
      {"pendulum",
       [&]() -> Json {
         emit("pendulum/table.csv",
              pendulum_table_csv(cfg.pendulum.sigmas.back(), cfg.pendulum.window, cfg.pendulum.table_points));
         const auto check = pendulum_check_json(cfg.pendulum.sigmas, cfg.pendulum.window);
         emit("pendulum/check.json", check.dump(2) + "\n");
         if (!check["pass"].get<bool>())
           throw NonConvergenceError("pendulum: identity suite failed, see pendulum/check.json");
         return {{"pass", true}};
       }},
      {"certificate",
       [&]() -> Json {
         std::vector<Approximant> feasible;
         std::vector<std::size_t> idx;
         for (std::size_t i = 0; i < seq.size(); ++i) {
           if (specs[i].n > cfg.lab.max_n || specs[i].n < cfg.grid.fit_min_norm) continue;
           try {
             check_regime(specs[i], working_rotation_from_frame(frames[i], w), cfg.epsilon);
           } catch (const PreconditionError&) {
             continue;
           }
           feasible.push_back(seq[i]);
           idx.push_back(i);
         }
         if (feasible.empty())
           throw PreconditionError("certificate: no approximant with |k| <= " + fmt_num(cfg.lab.max_n) +
                                   " satisfies the lab regime");
         const auto top = idx.back();
         const auto ww = working_rotation_from_frame(frames[top], w);
         const auto cert = certify_gap(specs[top], ww, lab);
         auto cj = certificate_json(cert);
         cj["k"] = seq[top].k;
         emit("certificate/certificate.json", cj.dump(2) + "\n");
         const auto rows = torus_gap_scan(specs[top], ww, scan_offsets(cfg.lab.scan_points, cfg.lab.scan_halfwidth),
                                          cert.A_unconstrained, lab);
         emit("certificate/gap_scan.csv", gap_scan_csv(rows));
         Json summary{{"verdict", to_string(cert.verdict)}, {"n", specs[top].n}, {"gap", cert.gap},
                      {"bump_cost", cert.bump.cost}, {"shift_bound", cert.shift_bound}};
         if (feasible.size() >= 3) {
           const auto dl = decay_laws(w, feasible, cfg.a, cfg.s, lab);
           emit("certificate/decay.csv", decay_csv(dl));
           summary["shift_fit"] = {{"slope", dl.shift_fit.slope}, {"r_squared", dl.shift_fit.r_squared}};
           summary["bump_fit"] = {{"slope", dl.bump_fit.slope}, {"r_squared", dl.bump_fit.r_squared}};
         }
         if (cert.verdict != Verdict::gap)
           throw NonConvergenceError(std::string("certificate: verdict ") + to_string(cert.verdict) + ": " +
                                     cert.diagnostic);
         return summary;
       }},
      {"norms",
       [&]() -> Json {
         const auto rep = norm_decay_report(w, seq, cfg.a, cfg.r_list, cfg.norm_s, cfg.s_prime, cfg.norm_grid());
         emit("norms/norms.csv", norms_csv(rep));
         Json fits = Json::array();
         for (std::size_t i = 0; i < rep.r_list.size(); ++i)
           fits.push_back({{"r", rep.r_list[i]},
                           {"slope", rep.slopes[i]},
                           {"expected", rep.expected_slopes[i]},
                           {"r_squared", rep.r_squared[i]}});
         emit("norms/fit.json", fits.dump(2) + "\n");
         return {{"fits", fits}};
       }},
  };

  bool failed = false;
  for (const auto& [name, body] : plan) {
    StageRecord rec;
    rec.name = name;
    if (failed) {
      rec.message = "skipped after an earlier failure";
      m.stages.push_back(rec);
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.summary = body();
      rec.status = StageStatus::ok;
    } catch (const ResonantError& e) {
      rec.status = StageStatus::failed;
      rec.code = static_cast<int>(e.code());
      rec.message = e.what();
      rec.summary = {{"resonance_witness", e.witness()}};
    } catch (const Error& e) {
      rec.status = StageStatus::failed;
      rec.code = static_cast<int>(e.code());
      rec.message = e.what();
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed = rec.status == StageStatus::failed;
    m.stages.push_back(std::move(rec));
  }
  write_file(m.root / "manifest.json", to_json(m).dump(2) + "\n");
  return m;
}

// Summary text plus plot bundles under <run>/report/.
inline std::string report(const RunManifest& m) {
  if (m.stages.empty()) throw PreconditionError("report: nothing to report (manifest has no stages)");
  for (const auto& f : m.files)
    if (!fs::exists(m.root / f.path)) throw PreconditionError("report: missing artifact " + f.path);

  std::ostringstream out;
  out << "run: " << m.root.string() << "\n";
  if (m.config.contains("omega")) out << "omega: " << m.config["omega"].dump() << "\n";
  out << "stages:\n";
  for (const auto& s : m.stages) {
    out << "  " << s.name << ": " << to_string(s.status);
    if (s.status == StageStatus::failed) out << " (code " << s.code << ") " << s.message;
    if (s.status == StageStatus::skipped) out << " [SKIPPED]";
    out << "\n";
  }
  if (const auto* c = m.stage("certificate"); c && c->status != StageStatus::skipped && !c->summary.empty()) {
    const auto& j = c->summary;
    if (j.contains("verdict"))
      out << "verdict: " << j["verdict"].get<std::string>() << " at n = " << j["n"].dump()
          << ", gap = " << j["gap"].dump() << ", bump cost = " << j["bump_cost"].dump()
          << ", shift bound = " << j["shift_bound"].dump() << "\n";
    if (j.contains("shift_fit"))
      out << "decay fits: ln shift vs sqrt(sigma)/|omega1| slope " << j["shift_fit"]["slope"].dump() << " (R^2 "
          << j["shift_fit"]["r_squared"].dump() << "); ln bump vs ln|omega1| slope " << j["bump_fit"]["slope"].dump()
          << " (R^2 " << j["bump_fit"]["r_squared"].dump() << ")\n";
  }
  if (const auto* n = m.stage("norms"); n && n->status == StageStatus::ok)
    for (const auto& f : n->summary["fits"])
      out << "norm slope r = " << f["r"].dump() << ": " << f["slope"].dump() << " (expected "
          << f["expected"].dump() << ")\n";
  if (m.config.contains("solver"))
    out << "tolerances: solver " << m.config["solver"].dump() << ", grid " << m.config["grid"].dump() << "\n";

  const std::vector<std::pair<std::string, std::string>> bundles = {
      {"pendulum/table.csv", "pendulum_table.csv"},
      {"norms/norms.csv", "norm_decay.csv"},
      {"certificate/gap_scan.csv", "gap_scan.csv"},
      {"certificate/decay.csv", "decay_laws.csv"}};
  for (const auto& [src, dst] : bundles)
    if (fs::exists(m.root / src)) {
      write_file(m.root / "report" / dst, read_file(m.root / src));
      out << "bundle: report/" << dst << "\n";
    }
  const auto text = out.str();
  write_file(m.root / "report" / "summary.txt", text);
  return text;
}

}  // namespace lagtorus
