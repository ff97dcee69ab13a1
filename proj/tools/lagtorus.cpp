// lagtorus command line: single-stage subcommands plus the full `run`.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <random>

#include "lagtorus/pipeline.hpp"

using namespace lagtorus;

namespace {

struct Globals {
  std::string config;
  std::string out;
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

// Writes to <out>/<name> when --out is set, stdout otherwise.
void deliver(const Globals& g, const std::string& name, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  write_file(fs::path(g.out) / name, text);
  std::cerr << "wrote " << (fs::path(g.out) / name).string() << "\n";
}

ExperimentConfig experiment_config(const Globals& g) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

Json load_json(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

// Lab-side parameters shared by certify and gap-scan.
struct LabArgs {
  double n = 16;
  double a = 1;
  double s = 1;
  double epsilon = 0.1;
  double peak_scale = 1;
  std::vector<double> omega;  // working rotation vector; golden family when empty

  void add(CLI::App* app) {
    app->add_option("--n", n, "scale parameter n")->capture_default_str();
    app->add_option("--a", a, "pendulum exponent, sigma = n^-a")->capture_default_str();
    app->add_option("--s", s, "peak exponent")->capture_default_str();
    app->add_option("--epsilon", epsilon, "regime margin")->capture_default_str();
    app->add_option("--peak-scale", peak_scale, "bump amplitude factor (0 removes the bump)")
        ->capture_default_str();
    app->add_option("--omega", omega, "working rotation vector (omega1,omega2)")->delimiter(',');
  }

  std::pair<PerturbationSpec, RotationVector> build() const {
    const RotationVector w = omega.empty() ? golden_working_rotation(n) : RotationVector(omega);
    PerturbationSpec sp;
    sp.n = n;
    sp.a = a;
    sp.s = s;
    sp.d = static_cast<int>(w.dim());
    sp.omega1_abs = std::abs(w[0]);
    sp.peak_scale = peak_scale;
    sp.validate();
    return {sp, w};
  }
};

LabOptions lab_options(const Globals& g, double epsilon) {
  LabOptions o = g.config.empty() ? LabOptions{} : load_config(g.config).lab_options(g.threads);
  o.epsilon = epsilon;
  o.threads = g.threads;
  return o;
}

Json minimize_command(const Json& j, std::uint64_t seed, double jitter, std::vector<Vec>* csv_nodes,
                      Vec* csv_times) {
  PerturbationSpec sp;
  Vec qa, qb;
  double T = 0, tol = 1e-8;
  long N = 0, max_iter = 100000;
  int version = 0;
  detail::read_object(
      j, "",
      {{"schema_version", detail::set(version)},
       {"spec", [&](const Json& v) {
          detail::read_object(v, "spec.", {{"n", detail::set(sp.n)},
                                           {"a", detail::set(sp.a)},
                                           {"s", detail::set(sp.s)},
                                           {"d", detail::set(sp.d)},
                                           {"omega1_abs", detail::set(sp.omega1_abs)},
                                           {"peak_scale", detail::set(sp.peak_scale)}});
        }},
       {"qa", detail::set(qa)},
       {"qb", detail::set(qb)},
       {"T", detail::set(T)},
       {"N", detail::set(N)},
       {"tol", detail::set(tol)},
       {"max_iter", detail::set(max_iter)}});
  if (version != kSchemaVersion) throw ConfigError("config: schema_version must be " + std::to_string(kSchemaVersion));
  if (!(T > 0) || N < 8 || !(tol > 0)) throw ConfigError("config: need T > 0, N >= 8, tol > 0");
  if (qa.size() != static_cast<std::size_t>(sp.d) || qb.size() != qa.size())
    throw ConfigError("config: qa and qb must have d entries");
  sp.validate();
  const auto L = full_lagrangian(sp);
  Vec times(N + 1);
  for (long i = 0; i <= N; ++i) times[i] = T * static_cast<double>(i) / N;
  auto init = DiscretePath::straight(qa, qb, times);
  if (jitter > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, jitter);
    for (std::size_t i = 1; i + 1 < init.size(); ++i)
      for (auto& x : init.nodes[i]) x += g(rng);
  }
  MinimizerOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  const auto r = minimize_path(L, init, opt);
  if (csv_nodes) {
    *csv_nodes = r.path.nodes;
    *csv_times = r.path.times;
  }
  const auto& rep = r.report;
  return Json{{"times", r.path.times},
              {"nodes", r.path.nodes},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"diagnostic", r.diagnostic},
              {"report",
               {{"total_action", rep.total_action},
                {"pendulum_part", rep.pendulum_part},
                {"kinetic_Q_part", rep.kinetic_Q_part},
                {"bump_part", rep.bump_part},
                {"chord_action", rep.chord_action},
                {"excess", rep.excess},
                {"el_residual", rep.el_residual},
                {"max_speed", rep.max_speed}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for destroying Lagrangian tori near resonance"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1u, 256u));
  app.add_option("--seed", g.seed, "seed for randomized initialization");

  std::function<void()> action;

  // approximants
  std::vector<double> ap_omega;
  std::optional<int> ap_max;
  std::optional<double> ap_C;
  auto* ap = app.add_subcommand("approximants", "small divisors k with |<omega,k>| < C/|k|^(d-1), CSV");
  ap->add_option("--omega", ap_omega, "rotation vector")->delimiter(',');
  ap->add_option("--max-norm", ap_max, "largest |k|");
  ap->add_option("--C", ap_C, "constant C");
  ap->callback([&] {
    action = [&] {
      auto c = experiment_config(g);
      if (!ap_omega.empty()) c.omega = RotationVector(ap_omega);
      if (ap_max) c.max_norm = *ap_max;
      if (ap_C) c.C = *ap_C;
      c.validate();
      deliver(g, "approximants.csv", approximants_csv(find_approximants(c.omega, c.max_norm, c.C), c.omega.dim()));
    };
  });

  // frame
  std::vector<std::int64_t> fr_k;
  std::vector<double> fr_omega{1.0, kGolden};
  auto* fr = app.add_subcommand("frame", "orthogonal integer frame for k, exact inverse and pushed rotation, JSON");
  fr->add_option("--k", fr_k, "integer vector k")->delimiter(',')->required();
  fr->add_option("--omega", fr_omega, "rotation vector")->delimiter(',')->capture_default_str();
  fr->callback([&] {
    action = [&] {
      const RotationVector w(fr_omega);
      auto j = frame_json(build_frame(fr_k, w), w);
      deliver(g, "frame.json", j.dump(2) + "\n");
    };
  });

  // pendulum-table
  double pt_sigma = 1.0, pt_window = 10.0;
  int pt_points = 64;
  auto* pt = app.add_subcommand("pendulum-table", "dt, e, half-turn action, ln e, CSV");
  pt->add_option("--sigma", pt_sigma)->capture_default_str();
  pt->add_option("--window", pt_window, "largest half-turn time")->capture_default_str();
  pt->add_option("--points", pt_points)->capture_default_str();
  pt->callback([&] {
    action = [&] {
      if (!(pt_sigma > 0)) throw PreconditionError("pendulum-table: sigma must be > 0");
      deliver(g, "pendulum_table.csv", pendulum_table_csv(pt_sigma, pt_window, pt_points));
    };
  });

  // pendulum-check
  std::vector<double> pc_sigmas = PendulumConfig{}.sigmas;
  double pc_window = 10.0;
  auto* pc = app.add_subcommand("pendulum-check", "identity, round-trip and unimodality suites, JSON");
  pc->add_option("--sigmas", pc_sigmas)->delimiter(',');
  pc->add_option("--window", pc_window)->capture_default_str();
  bool pc_failed = false;
  pc->callback([&] {
    action = [&] {
      const auto j = pendulum_check_json(pc_sigmas, pc_window);
      pc_failed = !j["pass"].get<bool>();
      deliver(g, "pendulum_check.json", j.dump(2) + "\n");
    };
  });

  // build-perturbation
  LabArgs bp_args;
  double bp_s_prime = 4.5;
  auto* bp = app.add_subcommand("build-perturbation", "perturbation descriptor and derived constants, JSON");
  bp_args.add(bp);
  bp->add_option("--s-prime", bp_s_prime)->capture_default_str();
  bp->callback([&] {
    action = [&] {
      auto [sp, w] = bp_args.build();
      sp.s_prime = bp_s_prime;
      sp.validate();
      auto j = spec_json(sp);
      j["omega_work"] = w.coords;
      deliver(g, "perturbation.json", j.dump(2) + "\n");
    };
  });

  // minimize
  bool mi_csv = false;
  double mi_jitter = 0;
  auto* mi = app.add_subcommand("minimize", "fixed-end-point action minimizer; --config holds the problem");
  mi->add_flag("--csv", mi_csv, "emit t,q1..qd rows instead of JSON");
  mi->add_option("--jitter", mi_jitter, "Gaussian jitter of the initial path, seeded by --seed");
  mi->callback([&] {
    action = [&] {
      if (g.config.empty()) throw ConfigError("minimize: --config is required");
      std::vector<Vec> nodes;
      Vec times;
      const auto j = minimize_command(load_json(g.config), g.seed, mi_jitter, &nodes, &times);
      if (!mi_csv) {
        deliver(g, "minimize.json", j.dump(2) + "\n");
      } else {
        std::vector<std::string> head{"t"};
        for (std::size_t i = 0; i < nodes.front().size(); ++i) head.push_back("q" + std::to_string(i + 1));
        Csv csv(head);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          csv.cell(times[i]);
          for (double x : nodes[i]) csv.cell(x);
          csv.end();
        }
        deliver(g, "minimize.csv", csv.str());
      }
      if (!j["converged"].get<bool>())
        throw NonConvergenceError("minimize: " + j["diagnostic"].get<std::string>());
    };
  });

  // certify
  LabArgs ce_args;
  auto* ce = app.add_subcommand("certify", "gap certificate for the working system, JSON");
  ce_args.add(ce);
  ce->callback([&] {
    action = [&] {
      const auto [sp, w] = ce_args.build();
      const auto c = certify_gap(sp, w, lab_options(g, ce_args.epsilon));
      deliver(g, "certificate.json", certificate_json(c).dump(2) + "\n");
    };
  });

  // gap-scan
  LabArgs gs_args;
  int gs_points = 5;
  double gs_half = 1.0;
  auto* gs = app.add_subcommand("gap-scan", "excess action over phases around q*, CSV");
  gs_args.add(gs);
  gs->add_option("--points", gs_points, "grid points per axis")->capture_default_str();
  gs->add_option("--halfwidth", gs_half, "grid half-width in units of R")->capture_default_str();
  gs->callback([&] {
    action = [&] {
      const auto [sp, w] = gs_args.build();
      const auto opt = lab_options(g, gs_args.epsilon);
      const auto c = certify_gap(sp, w, opt);
      const auto rows = torus_gap_scan(sp, w, scan_offsets(gs_points, gs_half), c.A_unconstrained, opt);
      deliver(g, "gap_scan.csv", gap_scan_csv(rows));
    };
  });

  // norms
  auto* no = app.add_subcommand("norms", "C^r norms of the transformed perturbation along approximants, CSV");
  no->callback([&] {
    action = [&] {
      const auto c = experiment_config(g);
      const auto seq = find_approximants(c.omega, c.max_norm, c.C);
      const auto rep = norm_decay_report(c.omega, seq, c.a, c.r_list, c.norm_s, c.s_prime, c.norm_grid());
      deliver(g, "norms.csv", norms_csv(rep));
    };
  });

  // run
  int run_code = 0;
  auto* ru = app.add_subcommand("run", "full pipeline into one run directory");
  ru->callback([&] {
    action = [&] {
      auto c = experiment_config(g);
      if (app.count("--seed")) c.seed = g.seed;
      const auto m = run_pipeline(c, {g.threads});
      for (const auto& s : m.stages) std::cerr << s.name << ": " << to_string(s.status) << "\n";
      std::cout << (fs::path(c.output_dir) / "manifest.json").string() << "\n";
      for (const auto& s : m.stages)
        if (s.status == StageStatus::failed && run_code == 0) run_code = s.code;
    };
  });

  // report
  std::string re_manifest;
  auto* re = app.add_subcommand("report", "summary and plot bundles for a finished run");
  re->add_option("manifest", re_manifest, "manifest.json or run directory");
  re->callback([&] {
    action = [&] {
      fs::path p = re_manifest.empty() ? fs::path(g.out) : fs::path(re_manifest);
      if (p.empty()) throw PreconditionError("report: give a manifest path or --out <run dir>");
      if (fs::is_directory(p)) p /= "manifest.json";
      std::cout << report(load_manifest(p));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCode::config);
  }

  try {
    action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  }
  if (pc_failed) return static_cast<int>(ErrorCode::nonconvergence);
  return run_code;
}
