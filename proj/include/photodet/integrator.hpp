#pragma once

#include "photodet/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace photodet {

/// Uniform integration grid. Samples are recorded every `record_stride`
/// steps: expectation values as instantaneous values at the end of each
/// block, the homodyne current as the block average (which is statistically
/// exact for the white-noise part). n_steps is rounded up to a full block.
struct TimeGrid {
  double t_end = 0.0;
  double dt = 0.0;
  int record_stride = 1;

  int n_steps() const;
  int n_records() const { return n_steps() / record_stride; }
  double record_dt() const { return dt * record_stride; }
  /// Stability guard: dt > 0 and kappa_max * dt <= 0.02.
  void validate(double kappa_max) const;
};

/// Named expectation-value time series from a deterministic run.
struct ExpectationTraces {
  double dt = 0.0;              // sample spacing
  std::vector<double> t;        // sample times
  std::map<std::string, VectorRe> series;
  double final_trace_error = 0.0;
  // Truncation diagnostics for the measurement mode: the validity gate uses
  // the final value (the ceiling must be empty when the run ends); the
  // running maximum is reported as a convergence indicator.
  double final_top_level_pop = 0.0;
  double max_top_level_pop = 0.0;
};

/// One stochastic realization: the homodyne current record plus optional
/// expectation traces and truncation diagnostics.
struct TrajectoryRecord {
  std::uint64_t seed = 0;  // derived per-trajectory seed
  double dt = 0.0;         // sample spacing of j
  VectorRe j;              // homodyne current samples
  std::map<std::string, VectorRe> traces;
  double final_top_level_pop = 0.0;  // < 1e-6 for a valid run
  double max_top_level_pop = 0.0;    // convergence indicator
  bool aborted = false;
  std::string abort_reason;
};

enum class SolverChoice { Auto, PureFast, MixedReference };

struct SmeOptions {
  std::vector<std::string> record_traces;
};

struct EnsembleOptions {
  int n_traj = 1;
  std::uint64_t base_seed = 1;
  SolverChoice solver = SolverChoice::Auto;
  int n_workers = 1;
  std::vector<std::string> record_traces;
};

/// Per-trajectory stream seed, a SplitMix64 mix of (base_seed, index).
/// Identical (base_seed, index) gives an identical stream regardless of
/// worker count or scheduling.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

/// d(rho)/dt of the unconditional master equation:
/// -i[H, rho] + sum_j (L_j rho L_j† - 1/2 {L_j†L_j, rho}).
MatrixCx lindblad_rhs(const SystemModel& model, const MatrixCx& rho);

/// Deterministic master-equation integration (classic RK4), recording the
/// named observables. Attaches trace-conservation and truncation
/// diagnostics; a top-level population >= 1e-6 is reported, not fatal.
ExpectationTraces solve_master(const SystemModel& model,
                               const QuantumState& state0,
                               const TimeGrid& grid,
                               const std::vector<std::string>& observables);

/// One diffusive-homodyne trajectory on the density matrix
/// (Euler-Maruyama with per-step rehermitization and renormalization).
/// The emitted current is J_k = sqrt(eta_h kappa_A) <Y_A>_k + dW_k/dt.
TrajectoryRecord solve_sme_trajectory(const SystemModel& model,
                                      const QuantumState& state0,
                                      const TimeGrid& grid,
                                      std::uint64_t seed,
                                      const SmeOptions& opts = {});

/// Statistically equivalent pure-state unravelling for eta_h = 1: the
/// unmonitored channels are given fictitious diffusive measurement records,
/// which leaves the marginal statistics of the physical homodyne current
/// unchanged while reducing memory to O(total_dim). Falls back to the
/// mixed-state solver when eta_h < 1.
TrajectoryRecord solve_sme_pure(const SystemModel& model,
                                const QuantumState& state0,
                                const TimeGrid& grid,
                                std::uint64_t seed,
                                const SmeOptions& opts = {});

/// Runs n_traj independent trajectories from the model's configured initial
/// state. Trajectory k uses derive_seed(base_seed, k); records are returned
/// in index order and are bit-identical for any worker count. A trajectory
/// abort is reported in its record without cancelling the others.
std::vector<TrajectoryRecord> run_ensemble(const SystemModel& model,
                                           const TimeGrid& grid,
                                           const EnsembleOptions& opts);

}  // namespace photodet
