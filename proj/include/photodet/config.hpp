#pragma once

#include "photodet/integrator.hpp"
#include "photodet/optimizer.hpp"

#include <optional>
#include <string>

namespace photodet {

struct RunBlock {
  enum class Mode { Both, Signal, Vacuum };
  int n_traj = 2000;
  std::uint64_t base_seed = 1;
  SolverChoice solver = SolverChoice::Auto;
  int n_workers = 1;
  Mode mode = Mode::Both;
};

struct DetectionBlock {
  std::vector<double> thresholds;  // scan grid; may hold a single value
};

struct OutputBlock {
  bool write_csv_currents = false;
  bool write_filtered = false;
};

struct OptimizeBlock {
  Objective objective = Objective::Surrogate;
  bool free_deltas = true;
  bool free_gz = false;
  int budget = 150;
  int restarts = 2;
  std::uint64_t search_seed = 1;
  double delta_bound = -1.0;
  int n_traj = 200;  // full-fidelity evaluations
};

/// A fully validated experiment description: detector parameters, grids,
/// run and detection settings. Rates are normalized at parse time to one
/// internal unit system (kappa_b = 1 for ideal configs, angular 1/us for
/// dispersive ones).
struct ExperimentConfig {
  DetectorConfig detector;
  TimeGrid grid;
  RunBlock run;
  DetectionBlock detection;
  OutputBlock output;
  std::optional<OptimizeBlock> optimize;

  /// Deterministic normalized serialization; basis of the config hash, and
  /// re-parseable as a config file.
  std::string canonical_text() const;
  std::string hash_hex() const;
};

/// Parse + validate; throws std::invalid_argument with a field-level
/// message (section, key, line) on any violation. Validation is total: no
/// partially-initialized config escapes.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace photodet
