#pragma once

#include "photodet/metrics.hpp"
#include "photodet/model.hpp"

#include <cstdint>
#include <vector>

namespace photodet {

enum class Objective { Surrogate, FullFidelity };

/// Settings for the expensive objective: a full stochastic detection
/// pipeline evaluated with common random numbers so repeated evaluations of
/// the same point agree exactly.
struct FidelityEvalSettings {
  int n_traj = 200;
  std::uint64_t base_seed = 42;
  double t_end = -1.0;       // default 150 / kappa_b
  double record_dt = -1.0;   // default 10 integration steps
  std::vector<double> thresholds;  // default 2.2 .. 5.0 step 0.2
  int n_workers = 1;
};

struct OptimizationProblem {
  DetectorConfig base;
  bool free_deltas = true;
  bool free_gz = false;
  double delta_bound = -1.0;  // |delta_i| bound; default kappa_b
  Objective objective = Objective::Surrogate;
  int budget = 200;           // total objective evaluations
  std::uint64_t search_seed = 1;
  int restarts = 2;
  double simplex_scale = 0.15;  // initial simplex size relative to bounds
  double surrogate_t_end = -1.0;  // default 150 / kappa_b
  FidelityEvalSettings fidelity_eval;
};

/// Dwell-time surrogate: integral of <N_B>(t) over the detection horizon
/// from a deterministic master-equation run with the measurement coupling
/// switched off (g_z = 0). Proportional to the effective interaction time.
double surrogate_objective(const std::vector<double>& deltas,
                           const DetectorConfig& cfg, double t_end = -1.0);

struct TrapTime {
  double tau_trap = 0.0;
  bool clamped = false;  // negative excess (within noise) clamped to zero
};

/// Excess dwell time relative to the resonant (all detunings zero)
/// reference of the same configuration.
TrapTime trap_time(const std::vector<double>& deltas,
                   const DetectorConfig& cfg, double t_end = -1.0);

/// Detection fidelity of a configuration from a full stochastic pipeline:
/// ensembles, matched filter, threshold scan, window choice. Deterministic
/// for fixed settings.
MetricsSummary evaluate_full_fidelity(const DetectorConfig& cfg,
                                      const FidelityEvalSettings& settings);

struct EvalLogEntry {
  int eval_index = 0;
  std::vector<double> params;  // canonical (sorted-detunings) point
  double score = 0.0;
};

struct OptimizeResult {
  std::vector<double> best_params;
  double best_score = 0.0;
  bool incomplete = false;  // budget exhausted before the search settled
  std::vector<EvalLogEntry> log;
};

/// Bounded derivative-free maximization (Nelder-Mead simplex descent on the
/// negated score, with seeded random restarts). The detuning block is
/// canonicalized by sorting, quotienting the absorber permutation symmetry.
/// Deterministic for a fixed (problem, search_seed).
OptimizeResult optimize(const OptimizationProblem& problem);

}  // namespace photodet
