/*
 * freqsynth: command-line front end for the EV frequency-regulation
 * toolkit.  Subcommands cover the full experiment pipeline: build the
 * symbolic abstraction, synthesize controllers, simulate closed loops
 * (symbolic, reference baseline, or uncontrolled), sweep the baseline
 * deadband, run seeded robustness batches, and re-check recorded traces.
 *
 * Exit codes: 0 success (and specification pass where one is checked),
 * 1 specification failure, 2 usage or configuration error, 3 internal
 * error (I/O, missing artifacts, solver failures).
 */

#include <freqsynth/config.hh>
#include <freqsynth/ev_baseline.hh>
#include <freqsynth/io.hh>
#include <freqsynth/multiphase.hh>
#include <freqsynth/serialize.hh>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <thread>

using namespace freqsynth;
using nlohmann::json;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSpecFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

double seconds_since(clk::time_point t0) {
  return std::chrono::duration<double>(clk::now() - t0).count();
}

std::size_t worker_count() {
  if (const char* env = std::getenv("FREQSYNTH_THREADS")) {
    char* end = nullptr;
    unsigned long n = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && n >= 1)
      return static_cast<std::size_t>(n);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

struct Paths {
  fs::path out;

  fs::path model() const { return out / "model.fqsm"; }
  fs::path controller(const std::string& kind) const {
    return out / ("controller-" + kind + ".fqsc");
  }
  fs::path trace_csv(const std::string& kind) const { return out / ("trace-" + kind + ".csv"); }
  fs::path trace_svg(const std::string& kind) const { return out / ("trace-" + kind + ".svg"); }
  fs::path verdict(const std::string& kind) const { return out / ("verdict-" + kind + ".json"); }
  fs::path sweep() const { return out / "sweep.csv"; }
  fs::path robustness_csv() const { return out / "robustness.csv"; }
  fs::path robustness_json() const { return out / "robustness.json"; }
};

SymbolicModel build_model(const ScenarioConfig& cfg) {
  return build_symbolic_model(cfg.region, InputGrid::uniform(cfg.input_levels), cfg.grid, cfg.tau,
                              cfg.abstraction_w_lo(), cfg.abstraction_w_hi());
}

void refuse_existing(const fs::path& p, bool force) {
  if (!force && fs::exists(p))
    throw CLI::RuntimeError(p.string() + " already exists; pass --force to overwrite",
                            kExitInternal);
}

json clause_json(const ClauseReport& c) {
  json j;
  j["name"] = c.name;
  j["satisfied"] = c.satisfied;
  if (!c.satisfied) {
    j["violation_pos"] = c.violation_pos;
    j["violation_t_s"] = c.violation_t;
    j["violation_f_hz"] = c.violation_f_hz;
  }
  return j;
}

/* common verdict body shared by simulate and check */
json verdict_json(const Trace& tr, const ScenarioConfig& cfg, const std::string& controller) {
  TwoStageReport two = check_two_stage(tr, cfg.spec);
  auto reqs = check_requirements(tr, cfg.loss_mw, cfg.spec);

  json j;
  j["controller"] = controller;
  j["mode"] = cfg.mode;
  j["config_hash"] = config_hash(cfg);
  j["loss_mw"] = cfg.loss_mw;
  j["w_hz_scaled"] = cfg.w();
  j["min_f_hz"] = tr.min_f_abs();
  j["samples"] = tr.size();

  json psi;
  psi["satisfied"] = two.satisfied;
  psi["clauses"] = json::array();
  for (const auto& c : two.clauses)
    psi["clauses"].push_back(clause_json(c));
  j["psi"] = psi;

  j["requirements"] = json::array();
  for (const auto& r : reqs) {
    json e = clause_json(r.clause);
    e["applicable"] = r.applicable;
    j["requirements"].push_back(e);
  }
  j["requirements_satisfied"] = all_satisfied(reqs);

  /* first refined-band entry time, informational */
  double entry = -1.0;
  for (std::size_t k = 0; k < tr.size(); k++)
    if (tr.f_abs(k) >= cfg.spec.i2_lo_hz && tr.f_abs(k) <= cfg.spec.i2_hi_hz &&
        tr.samples[k].phase == Phase::fixed) {
      entry = tr.samples[k].t;
      break;
    }
  j["i2_entry_s"] = entry;
  return j;
}

StagedControllers load_staged(const Paths& paths, std::uint64_t hash) {
  StagedControllers sc;
  sc.c1 = load_controller(paths.controller("primary-band").string(), hash);
  sc.c2 = load_controller(paths.controller("refined-band").string(), hash);
  sc.hold = load_controller(paths.controller("refined-hold").string(), hash);
  return sc;
}

Trace simulate_symbolic(const ScenarioConfig& cfg, const StagedControllers& sc, double jitter,
                        std::uint64_t seed) {
  ClosedLoopOptions opt;
  opt.horizon_s = cfg.horizon_s;
  opt.tau = cfg.tau;
  opt.participation_jitter = jitter;
  opt.seed = seed;
  double w = cfg.w();
  return run_closed_loop(cfg.x0, cfg.grid, sc, cfg.spec, [w](double) { return w; }, opt);
}

/* baseline and uncontrolled loops share the sampling scheme with the
 * supervised one so traces are directly comparable */
Trace simulate_reference(const ScenarioConfig& cfg, bool with_baseline) {
  SystemMatrices m = build_matrices(cfg.grid);
  Discretization disc(m, cfg.tau);
  std::size_t n = static_cast<std::size_t>(std::floor(cfg.horizon_s / cfg.tau));
  double w = cfg.w();

  Trace tr;
  tr.tau = cfg.tau;
  tr.f_nom = cfg.grid.f_nom;
  tr.samples.reserve(n + 1);
  StateVec x = cfg.x0;
  BaselineState bs;
  for (std::size_t k = 0; k <= n; k++) {
    double u = 0.0;
    if (with_baseline) {
      auto [nbs, nu] = baseline_step(bs, x.f, cfg.grid, cfg.tau);
      bs = nbs;
      u = nu;
    }
    tr.samples.push_back({static_cast<double>(k) * cfg.tau, x.f, x.g, x.l, x.p, u, w,
                          Phase::none});
    if (k < n)
      x = disc.step(x, m, u, w);
  }
  return tr;
}

int emit_simulation(const ScenarioConfig& cfg, const Paths& paths, const std::string& kind,
                    const Trace& tr, bool gate_on_psi, bool force) {
  refuse_existing(paths.trace_csv(kind), force);
  write_trace_csv(paths.trace_csv(kind).string(), tr);
  write_trace_svg(paths.trace_svg(kind).string(), tr, cfg.spec,
                  kind + " (" + cfg.mode + ", " + std::to_string(cfg.loss_mw) + " MW)");
  json v = verdict_json(tr, cfg, kind);
  write_file_atomic(paths.verdict(kind).string(), v.dump(2) + "\n");
  std::printf("%s: psi %s, requirements %s, min f %.4f Hz\n", kind.c_str(),
              v["psi"]["satisfied"].get<bool>() ? "pass" : "fail",
              v["requirements_satisfied"].get<bool>() ? "pass" : "fail",
              v["min_f_hz"].get<double>());
  std::printf("wrote %s, %s, %s\n", paths.trace_csv(kind).c_str(),
              paths.trace_svg(kind).c_str(), paths.verdict(kind).c_str());
  if (gate_on_psi && !v["psi"]["satisfied"].get<bool>())
    return kExitSpecFail;
  return kExitOk;
}

int cmd_abstract(const ScenarioConfig& cfg, const Paths& paths, bool force) {
  refuse_existing(paths.model(), force);
  auto t0 = clk::now();
  SymbolicModel model = build_model(cfg);
  double built = seconds_since(t0);
  save_model(paths.model().string(), model, config_hash(cfg));
  std::size_t blocked = 0;
  for (std::size_t c = 0; c < model.grid.n_cells(); c++)
    for (std::size_t j = 0; j < model.inputs.size(); j++)
      if (model.blocked(c, j))
        blocked++;
  std::printf("abstraction: %zu cells x %zu inputs (%zu blocked pairs), %.2f s\n",
              model.grid.n_cells(), model.inputs.size(), blocked, built);
  std::printf("wrote %s (%zu bytes)\n", paths.model().c_str(),
              static_cast<std::size_t>(fs::file_size(paths.model())));
  return kExitOk;
}

int cmd_synth(const ScenarioConfig& cfg, const Paths& paths, const std::string& target,
              bool force) {
  std::uint64_t hash = config_hash(cfg);
  if (!fs::exists(paths.model()))
    throw CLI::RuntimeError("no symbolic model at " + paths.model().string() +
                                "; run `freqsynth abstract` first",
                            kExitInternal);
  SymbolicModel model = load_model(paths.model().string(), hash);

  auto report = [&](const Controller& c, double secs) {
    std::printf("%s: winning %zu / %zu cells (%.1f%%), %.2f s\n", c.kind.c_str(),
                c.winning.count(), c.grid.n_cells(),
                100.0 * static_cast<double>(c.winning.count()) /
                    static_cast<double>(c.grid.n_cells()),
                secs);
  };
  auto save = [&](const Controller& c) {
    refuse_existing(paths.controller(c.kind), force);
    save_controller(paths.controller(c.kind).string(), c, hash);
    write_controller_csv(paths.controller(c.kind).replace_extension(".csv").string(), c);
    std::printf("wrote %s\n", paths.controller(c.kind).c_str());
  };

  if (target == "all") {
    auto t0 = clk::now();
    StagedControllers sc = synthesize_two_stage(model, cfg.spec, cfg.grid.f_nom);
    double secs = seconds_since(t0);
    report(sc.hold, secs);
    report(sc.c2, secs);
    report(sc.c1, secs);
    save(sc.hold);
    save(sc.c2);
    save(sc.c1);
    return kExitOk;
  }

  /* single straight reach-avoid into one band, for inspection and studies */
  double f_nom = cfg.grid.f_nom;
  double lo = target == "i1" ? cfg.spec.i1_lo_hz : cfg.spec.i2_lo_hz;
  double hi = target == "i1" ? cfg.spec.i1_hi_hz : cfg.spec.i2_hi_hz;
  CellSet t = cells_f_contained(model.grid, lo - f_nom, hi - f_nom);
  CellSet avoid = cells_f_below(model.grid, cfg.spec.containment_floor_hz - f_nom);
  GridTS ts(model);
  auto t0 = clk::now();
  Controller c = make_controller(model, solve_reach_avoid(ts, t, avoid), "band-" + target);
  double secs = seconds_since(t0);
  report(c, secs);
  save(c);
  return kExitOk;
}

int cmd_simulate(const ScenarioConfig& cfg, const Paths& paths, const std::string& controller,
                 double jitter, std::uint64_t seed, bool force) {
  if (controller == "symbolic") {
    StagedControllers sc = load_staged(paths, config_hash(cfg));
    Trace tr = simulate_symbolic(cfg, sc, jitter, seed);
    return emit_simulation(cfg, paths, "symbolic", tr, /*gate_on_psi=*/true, force);
  }
  if (controller == "baseline")
    return emit_simulation(cfg, paths, "baseline", simulate_reference(cfg, true),
                           /*gate_on_psi=*/false, force);
  return emit_simulation(cfg, paths, "none", simulate_reference(cfg, false),
                         /*gate_on_psi=*/false, force);
}

int cmd_sweep(const ScenarioConfig& cfg, const Paths& paths, bool force) {
  refuse_existing(paths.sweep(), force);
  std::vector<SweepRow> rows;
  for (const std::string mode : {"uni", "bi"}) {
    GridParams prm = cfg.grid;
    prm.k_ev = mode == cfg.mode ? cfg.grid.k_ev : SpecConfig::default_k_ev(mode);
    auto part = sweep_deadband(default_sweep_half_widths(), mode, prm, cfg.w());
    rows.insert(rows.end(), part.begin(), part.end());
  }
  write_sweep_csv(paths.sweep().string(), rows);
  for (const auto& r : rows)
    std::printf("deadband %.2f Hz, %s: steady %.4f Hz%s\n", r.half_width_hz, r.mode.c_str(),
                r.steady_f_hz, r.settled ? "" : " (not settled)");
  std::printf("wrote %s\n", paths.sweep().c_str());
  return kExitOk;
}

int cmd_robustness(const ScenarioConfig& cfg, const Paths& paths, bool force) {
  refuse_existing(paths.robustness_csv(), force);
  StagedControllers sc = load_staged(paths, config_hash(cfg));

  struct Row {
    std::uint64_t seed = 0;
    bool satisfied = false;
    double i2_entry_s = -1.0;
    double min_f_hz = 0.0;
  };
  std::vector<Row> rows(cfg.n_seeds);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cfg.n_seeds || failed.load())
        return;
      try {
        std::uint64_t seed = cfg.base_seed + i;
        Trace tr = simulate_symbolic(cfg, sc, cfg.delta_max, seed);
        TwoStageReport rep = check_two_stage(tr, cfg.spec);
        Row r;
        r.seed = seed;
        r.satisfied = rep.satisfied && tr.min_f_abs() >= cfg.spec.containment_floor_hz;
        for (std::size_t k = 0; k < tr.size(); k++)
          if (tr.samples[k].phase == Phase::fixed) {
            r.i2_entry_s = tr.samples[k].t;
            break;
          }
        r.min_f_hz = tr.min_f_abs();
        rows[i] = r;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!failed.exchange(true))
          first_error = e.what();
      }
    }
  };
  std::size_t workers = std::min(worker_count(), cfg.n_seeds);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; t++)
    pool.emplace_back(work);
  work();
  for (auto& th : pool)
    th.join();
  if (failed.load())
    throw CLI::RuntimeError("robustness run failed: " + first_error, kExitInternal);

  std::size_t passes = 0;
  double worst_entry = -1.0;
  std::ostringstream csv;
  csv << "seed,satisfied,i2_entry_s,min_f_hz\n";
  for (const auto& r : rows) {
    passes += r.satisfied ? 1 : 0;
    worst_entry = std::max(worst_entry, r.i2_entry_s);
    csv << r.seed << ',' << (r.satisfied ? 1 : 0) << ',' << r.i2_entry_s << ',' << r.min_f_hz
        << '\n';
  }
  write_file_atomic(paths.robustness_csv().string(), csv.str());

  json j;
  j["config_hash"] = config_hash(cfg);
  j["mode"] = cfg.mode;
  j["delta_max"] = cfg.delta_max;
  j["n_seeds"] = cfg.n_seeds;
  j["base_seed"] = cfg.base_seed;
  j["passes"] = passes;
  j["pass_rate"] = static_cast<double>(passes) / static_cast<double>(cfg.n_seeds);
  j["worst_i2_entry_s"] = worst_entry;
  write_file_atomic(paths.robustness_json().string(), j.dump(2) + "\n");

  std::printf("robustness: %zu / %zu seeds pass (delta %.2f), worst refined-band entry %.2f s\n",
              passes, cfg.n_seeds, cfg.delta_max, worst_entry);
  std::printf("wrote %s, %s\n", paths.robustness_csv().c_str(), paths.robustness_json().c_str());
  return passes == cfg.n_seeds ? kExitOk : kExitSpecFail;
}

int cmd_check(const ScenarioConfig& cfg, const Paths& paths, const std::string& trace_path,
              bool force) {
  Trace tr = read_trace_csv(trace_path, cfg.grid.f_nom);
  json v = verdict_json(tr, cfg, "check");
  refuse_existing(paths.verdict("check"), force);
  write_file_atomic(paths.verdict("check").string(), v.dump(2) + "\n");
  bool ok = v["psi"]["satisfied"].get<bool>();
  std::printf("check: psi %s, requirements %s, min f %.4f Hz\n", ok ? "pass" : "fail",
              v["requirements_satisfied"].get<bool>() ? "pass" : "fail",
              v["min_f_hz"].get<double>());
  std::printf("wrote %s\n", paths.verdict("check").c_str());
  return ok ? kExitOk : kExitSpecFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symbolic controller synthesis for EV primary frequency regulation"};
  app.require_subcommand(1);
  app.fallthrough(); /* global flags may appear after the subcommand */

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool have_seed = false, force = false;
  app.add_option("--config", config_path, "scenario configuration file (INI)");
  app.add_option("--out", out_dir, "artifact directory (overrides the configuration)");
  app.add_option("--seed", seed, "seed override for randomized runs")
      ->each([&](const std::string&) { have_seed = true; });
  app.add_flag("--force", force, "overwrite existing artifacts");

  auto* abstract_cmd =
      app.add_subcommand("abstract", "build and persist the symbolic abstraction");
  std::string synth_target = "all";
  auto* synth_cmd = app.add_subcommand("synth", "synthesize controllers from the abstraction");
  synth_cmd->add_option("--target", synth_target, "all (staged supervisor set), i1, or i2")
      ->check(CLI::IsMember({"all", "i1", "i2"}));
  std::string sim_controller = "symbolic";
  double sim_jitter = 0.0;
  auto* sim_cmd = app.add_subcommand("simulate", "run one closed loop and emit artifacts");
  sim_cmd->add_option("--controller", sim_controller, "symbolic, baseline, or none")
      ->check(CLI::IsMember({"symbolic", "baseline", "none"}));
  sim_cmd->add_option("--jitter", sim_jitter, "actuation error half-width in [0, 1]")
      ->check(CLI::Range(0.0, 1.0));
  auto* baseline_cmd =
      app.add_subcommand("baseline", "run the reference droop controller closed loop");
  auto* sweep_cmd = app.add_subcommand("sweep", "steady-state deadband sweep, both modes");
  auto* robust_cmd =
      app.add_subcommand("robustness", "seeded batch under actuation uncertainty");
  std::string check_trace;
  auto* check_cmd = app.add_subcommand("check", "re-evaluate a recorded trace CSV");
  check_cmd->add_option("--trace", check_trace, "trace CSV to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e); /* --help and friends: print and succeed */
  } catch (const CLI::ParseError& e) {
    app.exit(e); /* prints the diagnostic; usage errors exit with 2 */
    return kExitUsage;
  }

  try {
    ScenarioConfig cfg;
    try {
      cfg = config_path.empty() ? default_config("bi") : load_config(config_path);
      if (!out_dir.empty())
        cfg.out_dir = out_dir;
      if (have_seed)
        cfg.base_seed = seed;
      cfg.validate();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "configuration error: %s\n", e.what());
      return kExitUsage;
    }

    Paths paths{fs::path(cfg.out_dir)};
    fs::create_directories(paths.out);

    if (abstract_cmd->parsed())
      return cmd_abstract(cfg, paths, force);
    if (synth_cmd->parsed())
      return cmd_synth(cfg, paths, synth_target, force);
    if (sim_cmd->parsed())
      return cmd_simulate(cfg, paths, sim_controller, sim_jitter, cfg.base_seed, force);
    if (baseline_cmd->parsed())
      return cmd_simulate(cfg, paths, "baseline", 0.0, cfg.base_seed, force);
    if (sweep_cmd->parsed())
      return cmd_sweep(cfg, paths, force);
    if (robust_cmd->parsed())
      return cmd_robustness(cfg, paths, force);
    if (check_cmd->parsed())
      return cmd_check(cfg, paths, check_trace, force);
    return kExitUsage;
  } catch (const CLI::RuntimeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.get_exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
}
