#include "photodet/optimizer.hpp"

#include "photodet/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace photodet {

namespace {

DetectorConfig surrogate_config(const std::vector<double>& deltas,
                                const DetectorConfig& base) {
  DetectorConfig cfg = base;
  cfg.variant = ModelVariant::Ideal;
  cfg.g_z = 0.0;           // measurement back-action off
  cfg.trunc.dim_a = 2;     // mode A decouples at g_z = 0
  cfg.deltas = deltas;
  cfg.with_photon = true;
  cfg.validate();
  return cfg;
}

}  // namespace

double surrogate_objective(const std::vector<double>& deltas,
                           const DetectorConfig& cfg, double t_end) {
  const DetectorConfig scfg = surrogate_config(deltas, cfg);
  if (t_end <= 0) t_end = 150.0 / scfg.kappa_b;

  const SystemModel model = build_ensemble(scfg);
  TimeGrid grid;
  grid.dt = 0.02 / scfg.max_rate();
  grid.record_stride = 1;
  grid.t_end = t_end;

  const auto traces = solve_master(model, initial_state(scfg, model.space),
                                   grid, {"N_B"});
  if (traces.max_top_level_pop >= 1e-6)
    throw std::runtime_error("surrogate_objective: truncation breach");

  // Trapezoid rule; the trace starts at 0 (photon initially in the source).
  const VectorRe& nb = traces.series.at("N_B");
  double acc = 0.0;
  for (int k = 0; k + 1 < nb.size(); ++k) acc += 0.5 * (nb(k) + nb(k + 1));
  return (acc + 0.5 * nb(0)) * traces.dt;
}

TrapTime trap_time(const std::vector<double>& deltas,
                   const DetectorConfig& cfg, double t_end) {
  const double score = surrogate_objective(deltas, cfg, t_end);
  const double reference = surrogate_objective(
      std::vector<double>(deltas.size(), 0.0), cfg, t_end);
  TrapTime tt;
  tt.tau_trap = score - reference;
  if (tt.tau_trap < 0) {
    tt.tau_trap = 0.0;
    tt.clamped = true;
  }
  return tt;
}

MetricsSummary evaluate_full_fidelity(const DetectorConfig& cfg,
                                      const FidelityEvalSettings& settings) {
  FidelityEvalSettings s = settings;
  if (s.t_end <= 0) s.t_end = 150.0 / cfg.kappa_b;
  if (s.record_dt <= 0) s.record_dt = 10.0 * 0.02 / cfg.max_rate() / 4.0;
  if (s.thresholds.empty())
    for (double thr = 1.4; thr <= 5.0 + 1e-9; thr += 0.2)
      s.thresholds.push_back(thr);

  const SystemModel model = build_model(cfg);
  TimeGrid grid;
  grid.record_stride = 10;
  grid.dt = s.record_dt / grid.record_stride;
  grid.t_end = s.t_end;

  // Matched filter from the deterministic mean on the same record grid.
  TimeGrid me_grid = grid;
  me_grid.record_stride = 4;
  me_grid.dt = s.record_dt / me_grid.record_stride;
  DetectorConfig signal_cfg = cfg;
  signal_cfg.with_photon = true;
  const SystemModel signal_model = build_model(signal_cfg);
  const auto me_traces = solve_master(
      signal_model, initial_state(signal_cfg, signal_model.space), me_grid,
      {"Y_A"});
  const MatchedFilter filt =
      build_filter(me_traces.series.at("Y_A"), me_traces.dt);

  auto run_filtered = [&](bool with_photon,
                          std::uint64_t base) -> std::vector<VectorRe> {
    DetectorConfig rcfg = cfg;
    rcfg.with_photon = with_photon;
    const SystemModel m = build_model(rcfg);
    EnsembleOptions opts;
    opts.n_traj = s.n_traj;
    opts.base_seed = base;
    opts.n_workers = s.n_workers;
    const auto records = run_ensemble(m, grid, opts);
    std::vector<VectorRe> jbar;
    jbar.reserve(records.size());
    for (const auto& rec : records) {
      if (rec.aborted)
        throw std::runtime_error("trajectory aborted: " + rec.abort_reason);
      jbar.push_back(filter_signal(rec.j, rec.dt, filt));
    }
    return jbar;
  };

  const auto jbar_sig = run_filtered(true, derive_seed(s.base_seed, 1));
  const auto jbar_vac = run_filtered(false, derive_seed(s.base_seed, 2));

  MetricsSummary best;
  best.fidelity = -1.0;
  for (double thr : s.thresholds) {
    const MetricsSummary m = compute_summary(jbar_sig, jbar_vac, s.record_dt,
                                             s.t_end, thr, 0.5 * s.t_end);
    if (m.fidelity > best.fidelity) best = m;
  }
  best.base_seed = s.base_seed;
  return best;
}

// ---------------------------------------------------------------------------
// Bounded Nelder-Mead with restarts.

namespace {

struct SearchSpace {
  int n_deltas = 0;
  bool has_gz = false;
  double delta_bound = 1.0;
  double gz_lo = 0.01, gz_hi = 2.0;

  int dim() const { return n_deltas + (has_gz ? 1 : 0); }

  /// Clamp into the box and sort the detuning block (permutation quotient).
  std::vector<double> canonical(std::vector<double> x) const {
    for (int i = 0; i < n_deltas; ++i)
      x[i] = std::clamp(x[i], -delta_bound, delta_bound);
    std::sort(x.begin(), x.begin() + n_deltas);
    if (has_gz) x.back() = std::clamp(x.back(), gz_lo, gz_hi);
    return x;
  }
};

}  // namespace

OptimizeResult optimize(const OptimizationProblem& problem) {
  const DetectorConfig& base = problem.base;
  base.validate();
  if (!problem.free_deltas && !problem.free_gz)
    throw std::invalid_argument("optimize: no free parameters selected");
  if (problem.free_gz && base.variant == ModelVariant::Dispersive)
    throw std::invalid_argument(
        "optimize: g_z is derived (2 chi alpha) for the dispersive variant");

  SearchSpace space;
  space.n_deltas = problem.free_deltas ? base.n_absorbers : 0;
  space.has_gz = problem.free_gz;
  space.delta_bound =
      problem.delta_bound > 0 ? problem.delta_bound : base.kappa_b;
  space.gz_hi = 2.0 * base.kappa_b;

  std::vector<double> x0;
  {
    const auto deltas = base.effective_deltas();
    if (problem.free_deltas)
      x0.insert(x0.end(), deltas.begin(), deltas.end());
    if (problem.free_gz) x0.push_back(base.g_z);
    x0 = space.canonical(std::move(x0));
  }

  OptimizeResult result;
  result.best_params = x0;
  result.best_score = -std::numeric_limits<double>::infinity();
  if (problem.budget <= 0) {
    result.incomplete = true;
    return result;
  }

  int evals_left = problem.budget;
  auto evaluate = [&](const std::vector<double>& raw) -> double {
    const auto x = space.canonical(raw);
    std::vector<double> deltas = base.effective_deltas();
    double gz = base.g_z;
    if (problem.free_deltas)
      deltas.assign(x.begin(), x.begin() + space.n_deltas);
    if (problem.free_gz) gz = x.back();

    double score;
    if (problem.objective == Objective::Surrogate) {
      DetectorConfig cfg = base;
      cfg.g_z = gz;  // the surrogate itself switches the coupling off
      score = surrogate_objective(deltas, cfg, problem.surrogate_t_end);
    } else {
      DetectorConfig cfg = base;
      cfg.deltas = deltas;
      cfg.g_z = gz;
      score = evaluate_full_fidelity(cfg, problem.fidelity_eval).fidelity;
    }
    --evals_left;
    result.log.push_back(
        {static_cast<int>(result.log.size()), x, score});
    if (score > result.best_score) {
      result.best_score = score;
      result.best_params = x;
    }
    return -score;  // simplex minimizes
  };

  std::mt19937_64 rng(problem.search_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int dim = space.dim();

  for (int restart = 0; restart < std::max(1, problem.restarts); ++restart) {
    if (evals_left <= 0) break;

    std::vector<double> start = x0;
    if (restart > 0) {
      for (int i = 0; i < space.n_deltas; ++i)
        start[i] = unit(rng) * space.delta_bound;
      if (space.has_gz)
        start.back() = space.gz_lo +
                       (0.5 + 0.5 * unit(rng)) * (space.gz_hi - space.gz_lo);
      start = space.canonical(std::move(start));
    }

    // Initial simplex around the start point.
    std::vector<std::vector<double>> verts(dim + 1, start);
    for (int i = 0; i < dim; ++i) {
      const double span = (i < space.n_deltas)
                              ? 2.0 * space.delta_bound
                              : (space.gz_hi - space.gz_lo);
      verts[i + 1][i] += problem.simplex_scale * span * (unit(rng) > 0 ? 1 : -1);
    }
    std::vector<double> fv(dim + 1);
    for (int i = 0; i <= dim && evals_left > 0; ++i) fv[i] = evaluate(verts[i]);
    if (evals_left <= 0) break;

    constexpr double kAlpha = 1.0, kGamma = 2.0, kRho = 0.5, kSigma = 0.5;
    while (evals_left > 0) {
      // Order vertices by value.
      std::vector<int> idx(dim + 1);
      for (int i = 0; i <= dim; ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(),
                [&](int a, int b) { return fv[a] < fv[b]; });
      std::vector<std::vector<double>> vs(dim + 1);
      std::vector<double> fs(dim + 1);
      for (int i = 0; i <= dim; ++i) {
        vs[i] = verts[idx[i]];
        fs[i] = fv[idx[i]];
      }
      verts = vs;
      fv = fs;

      if (std::abs(fv[dim] - fv[0]) <
          1e-7 * (1.0 + std::abs(fv[0])))
        break;  // simplex has collapsed; next restart

      std::vector<double> centroid(dim, 0.0);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) centroid[j] += verts[i][j] / dim;

      auto affine = [&](double t) {
        std::vector<double> p(dim);
        for (int j = 0; j < dim; ++j)
          p[j] = centroid[j] + t * (centroid[j] - verts[dim][j]);
        return p;
      };

      const auto xr = affine(kAlpha);
      const double fr = evaluate(xr);
      if (fr < fv[0] && evals_left > 0) {
        const auto xe = affine(kAlpha * kGamma);
        const double fe = evaluate(xe);
        if (fe < fr) {
          verts[dim] = xe;
          fv[dim] = fe;
        } else {
          verts[dim] = xr;
          fv[dim] = fr;
        }
      } else if (fr < fv[dim - 1]) {
        verts[dim] = xr;
        fv[dim] = fr;
      } else if (evals_left > 0) {
        const bool outside = fr < fv[dim];
        const auto xc = affine(outside ? kAlpha * kRho : -kRho);
        const double fc = evaluate(xc);
        if (fc < std::min(fr, fv[dim])) {
          verts[dim] = xc;
          fv[dim] = fc;
        } else {
          // Shrink toward the best vertex.
          for (int i = 1; i <= dim && evals_left > 0; ++i) {
            for (int j = 0; j < dim; ++j)
              verts[i][j] = verts[0][j] + kSigma * (verts[i][j] - verts[0][j]);
            fv[i] = evaluate(verts[i]);
          }
        }
      }
    }
  }

  result.incomplete = evals_left <= 0;
  return result;
}

}  // namespace photodet
