#pragma once

#include "photodet/integrator.hpp"

#include <optional>
#include <vector>

namespace photodet {

/// Matched filter taken from the mean measured quadrature, rescaled to unit
/// discrete L2 norm (sum f_k^2 dt = 1). With this normalization, filtered
/// pure vacuum noise has unit variance per sample, so thresholds are read in
/// units of filtered-vacuum standard deviations.
struct MatchedFilter {
  double dt = 0.0;
  VectorRe f;
};

/// Build the filter from the "Y_A" series of a deterministic run.
/// Throws if the trace is identically zero.
MatchedFilter build_filter(const ExpectationTraces& traces);
MatchedFilter build_filter(const VectorRe& y_trace, double dt);

/// Causal discrete convolution on the record grid:
/// jbar[k] = dt * sum_{m<=k} f[m] j[k-m]. No padding beyond the record.
VectorRe filter_signal(const VectorRe& j, double dt, const MatchedFilter& f);

struct DetectionResult {
  bool clicked = false;
  double tau_c = 0.0;        // first upward crossing time; valid iff clicked
  double max_filtered = 0.0;
};

struct DetectionWindow {
  double t_a = 0.0;
  double t_b = 0.0;
};

/// Threshold test on a filtered record: clicked iff the maximum of jbar over
/// the window exceeds y_thr; tau_c is the first sample above threshold.
/// Samples live at t_k = (k+1) dt. Window defaults to the full record.
DetectionResult detect(const VectorRe& jbar, double dt, double y_thr,
                       std::optional<DetectionWindow> window = std::nullopt);

struct Histogram {
  double bin_width = 0.0;
  std::vector<double> centers;
  std::vector<double> density;  // normalized to unit area
  int n_events = 0;
};

/// Unit-area histogram of crossing times over the clicked results.
/// Throws if no result clicked.
Histogram crossing_histogram(const std::vector<DetectionResult>& results,
                             double bin_width);

}  // namespace photodet
