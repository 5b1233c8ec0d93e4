// Batch front-end for the detector simulator: run trajectory ensembles from
// a config file, post-process stored currents into click metrics, and emit
// the bundled reference figure data as CSV.

#include "photodet/config.hpp"
#include "photodet/detection.hpp"
#include "photodet/integrator.hpp"
#include "photodet/io.hpp"
#include "photodet/metrics.hpp"
#include "photodet/model.hpp"
#include "photodet/optimizer.hpp"
#include "photodet/presets.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace photodet;

namespace {

/// Exit code 2: the run completed but a numerical diagnostic failed.
struct DiagnosticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kTruncationTol = 1e-6;

struct CommonFlags {
  std::string config_path;
  std::string out_dir = ".";
  std::string run_dir;
  int n_traj_override = -1;
  long long seed_override = -1;
  int threads = 1;
};

void apply_overrides(ExperimentConfig& cfg, const CommonFlags& flags) {
  if (flags.n_traj_override > 0) cfg.run.n_traj = flags.n_traj_override;
  if (flags.seed_override >= 0)
    cfg.run.base_seed = static_cast<std::uint64_t>(flags.seed_override);
  if (flags.threads > 0) cfg.run.n_workers = flags.threads;
}

struct TopPopStats {
  double worst_final = 0.0;
  double worst_max = 0.0;
};

TopPopStats top_pop_stats(const std::vector<TrajectoryRecord>& records) {
  TopPopStats s;
  for (const auto& r : records) {
    if (r.aborted)
      throw DiagnosticError("trajectory with seed " + std::to_string(r.seed) +
                            " aborted: " + r.abort_reason);
    s.worst_final = std::max(s.worst_final, r.final_top_level_pop);
    s.worst_max = std::max(s.worst_max, r.max_top_level_pop);
  }
  return s;
}

/// Deterministic ME run used for the matched filter, on a grid aligned with
/// the record grid (same record_dt, its own integration dt).
ExpectationTraces filter_traces(const ExperimentConfig& cfg) {
  DetectorConfig det = cfg.detector;
  det.with_photon = true;
  const SystemModel model = build_model(det);
  TimeGrid me_grid;
  me_grid.record_stride = 4;
  me_grid.dt = cfg.grid.record_dt() / me_grid.record_stride;
  // Honor the stability guard if record_dt/4 is still too coarse.
  const double dt_max = 0.02 / det.max_rate();
  while (me_grid.dt > dt_max) {
    me_grid.record_stride *= 2;
    me_grid.dt = cfg.grid.record_dt() / me_grid.record_stride;
  }
  me_grid.t_end = cfg.grid.t_end;
  return solve_master(model, initial_state(det, model.space), me_grid,
                      {"Y_A", "N_B", "n_A", "n_C"});
}

std::vector<TrajectoryRecord> run_one_ensemble(const ExperimentConfig& cfg,
                                               bool with_photon,
                                               std::uint64_t ensemble_seed) {
  DetectorConfig det = cfg.detector;
  det.with_photon = with_photon;
  const SystemModel model = build_model(det);
  EnsembleOptions opts;
  opts.n_traj = cfg.run.n_traj;
  opts.base_seed = ensemble_seed;
  opts.solver = cfg.run.solver;
  opts.n_workers = cfg.run.n_workers;
  return run_ensemble(model, cfg.grid, opts);
}

int cmd_simulate(const CommonFlags& flags) {
  ExperimentConfig cfg = load_experiment_config(flags.config_path);
  apply_overrides(cfg, flags);

  fs::create_directories(flags.out_dir);
  const auto path = [&](const std::string& name) {
    return (fs::path(flags.out_dir) / name).string();
  };

  RunManifest manifest;
  manifest.config_hash = cfg.hash_hex();
  manifest.base_seed = cfg.run.base_seed;
  manifest.started_at = iso8601_now();
  write_manifest(path("manifest.json"), manifest);

  // Canonical copy of the config next to the artifacts.
  { std::ofstream(path("config.ini")) << cfg.canonical_text(); }
  manifest.outputs.push_back("config.ini");

  const auto traces = filter_traces(cfg);
  write_traces_csv(path("me_traces.csv"), traces);
  manifest.outputs.push_back("me_traces.csv");

  double worst_final = traces.final_top_level_pop;
  double worst_max = traces.max_top_level_pop;
  const bool want_signal = cfg.run.mode != RunBlock::Mode::Vacuum;
  const bool want_vacuum = cfg.run.mode != RunBlock::Mode::Signal;

  if (want_signal) {
    const auto records =
        run_one_ensemble(cfg, true, derive_seed(cfg.run.base_seed, 1));
    const TopPopStats tp = top_pop_stats(records);
    worst_final = std::max(worst_final, tp.worst_final);
    worst_max = std::max(worst_max, tp.worst_max);
    write_currents(path("currents_signal.bin"), records);
    manifest.outputs.push_back("currents_signal.bin");
    if (cfg.output.write_csv_currents) {
      write_currents_csv(path("currents_signal.csv"), records);
      manifest.outputs.push_back("currents_signal.csv");
    }
  }
  if (want_vacuum) {
    const auto records =
        run_one_ensemble(cfg, false, derive_seed(cfg.run.base_seed, 2));
    const TopPopStats tp = top_pop_stats(records);
    worst_final = std::max(worst_final, tp.worst_final);
    worst_max = std::max(worst_max, tp.worst_max);
    write_currents(path("currents_vacuum.bin"), records);
    manifest.outputs.push_back("currents_vacuum.bin");
    if (cfg.output.write_csv_currents) {
      write_currents_csv(path("currents_vacuum.csv"), records);
      manifest.outputs.push_back("currents_vacuum.csv");
    }
  }

  manifest.finished_at = iso8601_now();
  manifest.note = "worst final top-level population " +
                  std::to_string(worst_final) + "; worst max over run " +
                  std::to_string(worst_max);
  if (worst_final >= kTruncationTol) {
    manifest.status = "failed";
    write_manifest(path("manifest.json"), manifest);
    throw DiagnosticError(
        "truncation breach: final top-level population of mode A is " +
        std::to_string(worst_final) + " (tolerance 1e-6); raise detector.dim_a");
  }
  manifest.status = "complete";
  write_manifest(path("manifest.json"), manifest);
  std::cout << "simulate: wrote " << manifest.outputs.size()
            << " artifacts to " << flags.out_dir << "\n";
  return 0;
}

struct LoadedRun {
  ExpectationTraces traces;
  CurrentsFile signal;
  CurrentsFile vacuum;
  MatchedFilter filter;
  std::vector<VectorRe> jbar_signal;
  std::vector<VectorRe> jbar_vacuum;
  double record_t = 0.0;
  RunManifest manifest;
};

LoadedRun load_run(const std::string& run_dir, bool need_signal = true) {
  const auto path = [&](const std::string& name) {
    return (fs::path(run_dir) / name).string();
  };
  if (!fs::exists(path("manifest.json")))
    throw std::invalid_argument("run directory '" + run_dir +
                                "' has no manifest.json; run simulate first");
  LoadedRun run;
  run.manifest = read_manifest(path("manifest.json"));
  if (!fs::exists(path("me_traces.csv")))
    throw std::invalid_argument("missing artifact me_traces.csv in '" +
                                run_dir + "'");
  run.traces = read_traces_csv(path("me_traces.csv"));
  run.filter = build_filter(run.traces);

  const std::string sig = path("currents_signal.bin");
  const std::string vac = path("currents_vacuum.bin");
  if (need_signal && !fs::exists(sig))
    throw std::invalid_argument("missing artifact currents_signal.bin in '" +
                                run_dir + "'");
  if (!fs::exists(vac))
    throw std::invalid_argument("missing artifact currents_vacuum.bin in '" +
                                run_dir + "'");
  if (fs::exists(sig)) {
    run.signal = read_currents(sig);
    for (const auto& j : run.signal.j)
      run.jbar_signal.push_back(filter_signal(j, run.signal.dt, run.filter));
  }
  run.vacuum = read_currents(vac);
  for (const auto& j : run.vacuum.j)
    run.jbar_vacuum.push_back(filter_signal(j, run.vacuum.dt, run.filter));
  run.record_t = run.vacuum.dt * run.vacuum.j.front().size();
  return run;
}

std::vector<double> threshold_grid(const std::string& thresholds_arg,
                                   double single) {
  if (single > 0) return {single};
  if (!thresholds_arg.empty()) {
    // Reuse the config-file syntax through a tiny inline config.
    ExperimentConfig tmp = parse_experiment_config(
        "[detector]\nvariant = ideal\nn_absorbers = 1\n"
        "kappa_a_in_kB_units = 0.2\nkappa_c_in_kB_units = 0.1\n"
        "g_z_in_kB_units = 1\n[grid]\nt_end_kB_units = 1\n"
        "dt_kB_units = 0.005\n[detection]\nthresholds = " +
        thresholds_arg + "\n");
    return tmp.detection.thresholds;
  }
  std::vector<double> grid;
  for (double thr = 1.4; thr <= 5.2 + 1e-9; thr += 0.2) grid.push_back(thr);
  return grid;
}

int cmd_metrics(const CommonFlags& flags, const std::string& thresholds_arg,
                double single_thr, bool write_filtered) {
  const LoadedRun run = load_run(flags.run_dir);
  fs::create_directories(flags.out_dir);
  const auto path = [&](const std::string& name) {
    return (fs::path(flags.out_dir) / name).string();
  };
  const auto grid = threshold_grid(thresholds_arg, single_thr);
  const double t_stat = 0.5 * run.record_t;

  MetricsSummary best;
  best.fidelity = -1.0;
  for (double thr : grid) {
    MetricsSummary s = compute_summary(run.jbar_signal, run.jbar_vacuum,
                                       run.vacuum.dt, run.record_t, thr,
                                       t_stat);
    if (s.fidelity > best.fidelity) best = s;
  }
  best.config_hash = run.manifest.config_hash;
  best.base_seed = run.manifest.base_seed;
  write_metrics_json(path("metrics.json"), best);

  const auto roc = roc_curve(run.jbar_signal, run.jbar_vacuum, run.vacuum.dt,
                             run.record_t, grid, t_stat);
  write_roc_csv(path("roc.csv"), roc);

  std::vector<DetectionResult> results;
  for (const auto& j : run.jbar_signal)
    results.push_back(detect(j, run.vacuum.dt, best.y_thr));
  int clicks = 0;
  for (const auto& r : results) clicks += r.clicked;
  if (clicks > 0) {
    write_histogram_csv(path("histogram.csv"),
                        crossing_histogram(results, run.record_t / 100.0));
  }
  if (write_filtered && !run.jbar_signal.empty())
    write_filtered_csv(path("filtered_signal_0.csv"), run.jbar_signal.front(),
                       run.vacuum.dt);

  RunManifest m;
  m.config_hash = run.manifest.config_hash;
  m.base_seed = run.manifest.base_seed;
  m.started_at = m.finished_at = iso8601_now();
  m.status = "complete";
  m.outputs = {"metrics.json", "roc.csv"};
  if (clicks > 0) m.outputs.push_back("histogram.csv");
  write_manifest(path("metrics_manifest.json"), m);

  std::cout << "metrics: eta = " << best.eta << " +- " << best.eta_err
            << ", gamma_dark = " << best.gamma_dark << " ("
            << to_string(best.method_dark) << "), tau_m = " << best.tau_m
            << ", F = " << best.fidelity << " at y_thr = " << best.y_thr
            << "\n";
  return 0;
}

int cmd_roc(const CommonFlags& flags, const std::string& thresholds_arg) {
  const LoadedRun run = load_run(flags.run_dir);
  fs::create_directories(flags.out_dir);
  const auto grid = threshold_grid(thresholds_arg, -1.0);
  const auto roc = roc_curve(run.jbar_signal, run.jbar_vacuum, run.vacuum.dt,
                             run.record_t, grid, 0.5 * run.record_t);
  const std::string out =
      (fs::path(flags.out_dir) / "roc.csv").string();
  write_roc_csv(out, roc);
  std::cout << "roc: wrote " << roc.size() << " points to " << out << "\n";
  return 0;
}

int cmd_histogram(const CommonFlags& flags, double threshold,
                  double bin_width) {
  if (threshold <= 0)
    throw std::invalid_argument("histogram requires --threshold > 0");
  const LoadedRun run = load_run(flags.run_dir);
  fs::create_directories(flags.out_dir);
  std::vector<DetectionResult> results;
  for (const auto& j : run.jbar_signal)
    results.push_back(detect(j, run.vacuum.dt, threshold));
  if (bin_width <= 0) bin_width = run.record_t / 100.0;
  const Histogram h = crossing_histogram(results, bin_width);
  const std::string out =
      (fs::path(flags.out_dir) / "histogram.csv").string();
  write_histogram_csv(out, h);
  std::cout << "histogram: " << h.n_events << " events in "
            << h.centers.size() << " bins -> " << out << "\n";
  return 0;
}

int cmd_optimize(const CommonFlags& flags) {
  ExperimentConfig cfg = load_experiment_config(flags.config_path);
  apply_overrides(cfg, flags);
  if (!cfg.optimize)
    throw std::invalid_argument(
        "config has no [optimize] section; nothing to do");

  OptimizationProblem prob;
  prob.base = cfg.detector;
  prob.free_deltas = cfg.optimize->free_deltas;
  prob.free_gz = cfg.optimize->free_gz;
  prob.objective = cfg.optimize->objective;
  prob.budget = cfg.optimize->budget;
  prob.restarts = cfg.optimize->restarts;
  prob.search_seed = cfg.optimize->search_seed;
  prob.delta_bound = cfg.optimize->delta_bound;
  prob.fidelity_eval.n_traj = cfg.optimize->n_traj;
  prob.fidelity_eval.base_seed = cfg.run.base_seed;
  prob.fidelity_eval.t_end = cfg.grid.t_end;
  prob.fidelity_eval.record_dt = cfg.grid.record_dt();
  prob.fidelity_eval.thresholds = cfg.detection.thresholds;
  prob.fidelity_eval.n_workers = cfg.run.n_workers;

  const OptimizeResult result = optimize(prob);

  fs::create_directories(flags.out_dir);
  const auto path = [&](const std::string& name) {
    return (fs::path(flags.out_dir) / name).string();
  };
  write_eval_log_csv(path("eval_log.csv"), result);
  {
    std::ofstream out(path("best_params.json"));
    out << "{\n  \"best_score\": " << result.best_score
        << ",\n  \"incomplete\": " << (result.incomplete ? "true" : "false")
        << ",\n  \"evaluations\": " << result.log.size()
        << ",\n  \"best_params\": [";
    for (size_t i = 0; i < result.best_params.size(); ++i)
      out << (i ? ", " : "") << result.best_params[i];
    out << "]\n}\n";
  }
  std::cout << "optimize: best score " << result.best_score << " after "
            << result.log.size() << " evaluations"
            << (result.incomplete ? " (INCOMPLETE: budget exhausted)" : "")
            << "\n";
  return 0;
}

// --- reproduce: bundled reference figure data ---

struct ReproduceBudget {
  int n_traj = 500;
  std::uint64_t seed = 1;
  int threads = 1;
  int dim_a_override = -1;
  double t_end_override = -1.0;
};

struct FigureRun {
  ExperimentConfig cfg;
  ExpectationTraces traces;
  MatchedFilter filter;
  std::vector<VectorRe> jbar_signal;
  std::vector<VectorRe> jbar_vacuum;
  double record_t = 0.0;
};

FigureRun run_preset(int n, const ReproduceBudget& budget) {
  FigureRun run;
  run.cfg = ideal_experiment(n);
  run.cfg.run.n_traj = budget.n_traj;
  run.cfg.run.base_seed = budget.seed;
  run.cfg.run.n_workers = budget.threads;
  if (budget.dim_a_override > 1)
    run.cfg.detector.trunc.dim_a = budget.dim_a_override;
  if (budget.t_end_override > 0) run.cfg.grid.t_end = budget.t_end_override;

  run.traces = filter_traces(run.cfg);
  run.filter = build_filter(run.traces);
  const auto signal =
      run_one_ensemble(run.cfg, true, derive_seed(run.cfg.run.base_seed, 1));
  const auto vacuum =
      run_one_ensemble(run.cfg, false, derive_seed(run.cfg.run.base_seed, 2));
  for (const auto& rec : signal)
    run.jbar_signal.push_back(filter_signal(rec.j, rec.dt, run.filter));
  for (const auto& rec : vacuum)
    run.jbar_vacuum.push_back(filter_signal(rec.j, rec.dt, run.filter));
  run.record_t = run.cfg.grid.record_dt() * signal.front().j.size();
  return run;
}

MetricsSummary best_summary(const FigureRun& run) {
  MetricsSummary best;
  best.fidelity = -1.0;
  for (double thr : run.cfg.detection.thresholds) {
    MetricsSummary s = compute_summary(
        run.jbar_signal, run.jbar_vacuum, run.cfg.grid.record_dt(),
        run.record_t, thr, 0.5 * run.record_t);
    if (s.fidelity > best.fidelity) best = s;
  }
  best.config_hash = run.cfg.hash_hex();
  best.base_seed = run.cfg.run.base_seed;
  return best;
}

int cmd_reproduce(const std::string& figure, const CommonFlags& flags,
                  const ReproduceBudget& budget_in) {
  ReproduceBudget budget = budget_in;
  if (flags.n_traj_override > 0) budget.n_traj = flags.n_traj_override;
  if (flags.seed_override >= 0)
    budget.seed = static_cast<std::uint64_t>(flags.seed_override);
  budget.threads = flags.threads;

  fs::create_directories(flags.out_dir);
  const auto path = [&](const std::string& name) {
    return (fs::path(flags.out_dir) / name).string();
  };

  if (figure == "fig3a") {
    std::ofstream out(path("fig3a.csv"));
    out << "n_absorbers,eta,eta_err,gamma_dark,dark_method,tau_m,fidelity,"
           "fidelity_err,y_thr\n";
    for (int n = 1; n <= 4; ++n) {
      const FigureRun run = run_preset(n, budget);
      const MetricsSummary s = best_summary(run);
      out << n << ',' << s.eta << ',' << s.eta_err << ',' << s.gamma_dark
          << ',' << to_string(s.method_dark) << ',' << s.tau_m << ','
          << s.fidelity << ',' << s.fidelity_err << ',' << s.y_thr << '\n';
      std::cout << "fig3a: N=" << n << " F=" << s.fidelity << "\n";
    }
  } else if (figure == "fig3b") {
    for (int n = 1; n <= 4; ++n) {
      const FigureRun run = run_preset(n, budget);
      const auto roc = roc_curve(run.jbar_signal, run.jbar_vacuum,
                                 run.cfg.grid.record_dt(), run.record_t,
                                 run.cfg.detection.thresholds,
                                 0.5 * run.record_t);
      write_roc_csv(path("fig3b_N" + std::to_string(n) + ".csv"), roc);
      std::cout << "fig3b: N=" << n << " done\n";
    }
  } else if (figure == "fig4a" || figure == "fig4b") {
    const bool vary_n = figure == "fig4a";
    const std::vector<int> ns = vary_n ? std::vector<int>{1, 2, 3, 4}
                                       : std::vector<int>{4};
    for (int n : ns) {
      const FigureRun run = run_preset(n, budget);
      std::vector<double> thresholds;
      if (vary_n) {
        thresholds = {best_summary(run).y_thr};
      } else {
        thresholds = {3.0, kIdealN4Threshold, 4.6};
      }
      for (double thr : thresholds) {
        std::vector<DetectionResult> results;
        for (const auto& j : run.jbar_signal)
          results.push_back(detect(j, run.cfg.grid.record_dt(), thr));
        int clicks = 0;
        for (const auto& r : results) clicks += r.clicked;
        std::string name = vary_n
                               ? "fig4a_N" + std::to_string(n) + ".csv"
                               : "fig4b_thr" + std::to_string(thr).substr(0, 3) +
                                     ".csv";
        if (clicks == 0) {
          std::cout << figure << ": no clicks at thr=" << thr << ", skipped\n";
          continue;
        }
        write_histogram_csv(path(name),
                            crossing_histogram(results, 2.0));
        std::cout << figure << ": N=" << n << " thr=" << thr << " -> " << name
                  << "\n";
      }
      if (n == ns.back()) {
        // Input photon shape kappa_C exp(-kappa_C t) for comparison.
        std::ofstream shape(path("photon_shape.csv"));
        shape << "t,density\n";
        const double kc = run.cfg.detector.kappa_c;
        for (double t = 0; t <= run.record_t; t += run.record_t / 400.0)
          shape << t << ',' << kc * std::exp(-kc * t) << '\n';
      }
    }
  } else {
    throw std::invalid_argument(
        "unknown figure id '" + figure +
        "'; expected one of fig3a, fig3b, fig4a, fig4b");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous homodyne-readout photon-detector simulator"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string thresholds_arg;
  double threshold = -1.0;
  double bin_width = -1.0;
  bool write_filtered = false;
  std::string figure;
  ReproduceBudget budget;

  auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config)
      cmd->add_option("--config", flags.config_path, "experiment config file")
          ->required();
    cmd->add_option("--out-dir", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed_override, "override run.base_seed");
    cmd->add_option("--n-traj", flags.n_traj_override, "override run.n_traj");
    cmd->add_option("--threads", flags.threads, "worker threads");
  };

  auto* simulate = app.add_subcommand(
      "simulate", "run signal/vacuum ensembles and store artifacts");
  add_common(simulate, true);

  auto* metrics = app.add_subcommand(
      "metrics", "full detection + metrics pipeline on stored currents");
  metrics->add_option("--run-dir", flags.run_dir, "simulate output directory")
      ->required();
  metrics->add_option("--thresholds", thresholds_arg,
                      "threshold grid (lo:hi:step or comma list)");
  metrics->add_option("--threshold", threshold, "single threshold");
  metrics->add_flag("--write-filtered", write_filtered,
                    "also dump one filtered record as CSV");
  metrics->add_option("--out-dir", flags.out_dir, "output directory");

  auto* roc = app.add_subcommand("roc", "ROC curve over a threshold grid");
  roc->add_option("--run-dir", flags.run_dir)->required();
  roc->add_option("--thresholds", thresholds_arg);
  roc->add_option("--out-dir", flags.out_dir);

  auto* histogram =
      app.add_subcommand("histogram", "crossing-time histogram at a threshold");
  histogram->add_option("--run-dir", flags.run_dir)->required();
  histogram->add_option("--threshold", threshold)->required();
  histogram->add_option("--bin-width", bin_width);
  histogram->add_option("--out-dir", flags.out_dir);

  auto* optimize =
      app.add_subcommand("optimize", "search detunings (and g_z) for fidelity");
  add_common(optimize, true);

  auto* reproduce = app.add_subcommand(
      "reproduce", "emit the bundled reference figure data as CSV");
  reproduce->add_option("--figure", figure, "fig3a | fig3b | fig4a | fig4b")
      ->required();
  reproduce->add_option("--out-dir", flags.out_dir);
  reproduce->add_option("--seed", flags.seed_override);
  reproduce->add_option("--n-traj", flags.n_traj_override,
                        "trajectories per ensemble (default 500)");
  reproduce->add_option("--threads", flags.threads);
  reproduce->add_option("--dim-a", budget.dim_a_override,
                        "smoke-mode override of the measurement-mode dim");
  reproduce->add_option("--t-end", budget.t_end_override,
                        "smoke-mode override of the record length");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(flags);
    if (metrics->parsed())
      return cmd_metrics(flags, thresholds_arg, threshold, write_filtered);
    if (roc->parsed()) return cmd_roc(flags, thresholds_arg);
    if (histogram->parsed()) return cmd_histogram(flags, threshold, bin_width);
    if (optimize->parsed()) return cmd_optimize(flags);
    if (reproduce->parsed()) return cmd_reproduce(figure, flags, budget);
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
