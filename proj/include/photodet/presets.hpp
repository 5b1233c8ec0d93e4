#pragma once

#include "photodet/config.hpp"

#include <string>

namespace photodet {

/// Bundled reference configurations: the ideal-model operating points for
/// N = 1..4 absorbers and the four-absorber dispersive implementation.
/// These back the `reproduce` figure bundles and the acceptance suite.
DetectorConfig ideal_preset(int n_absorbers);
DetectorConfig dispersive_preset();

/// Ready-to-run experiment around a preset: grid, thresholds, run defaults.
ExperimentConfig ideal_experiment(int n_absorbers);
ExperimentConfig dispersive_experiment();

/// Threshold that maximizes fidelity for the four-absorber ideal preset.
inline constexpr double kIdealN4Threshold = 3.8;

}  // namespace photodet
