#include "photodet/detection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace photodet {

MatchedFilter build_filter(const VectorRe& y_trace, double dt) {
  if (dt <= 0) throw std::invalid_argument("build_filter: dt must be > 0");
  const double l2 = std::sqrt(y_trace.squaredNorm() * dt);
  if (l2 <= 0.0)
    throw std::invalid_argument(
        "build_filter: cannot build a filter from an identically-zero trace");
  MatchedFilter filt;
  filt.dt = dt;
  filt.f = y_trace / l2;
  return filt;
}

MatchedFilter build_filter(const ExpectationTraces& traces) {
  auto it = traces.series.find("Y_A");
  if (it == traces.series.end())
    throw std::invalid_argument("build_filter: traces are missing 'Y_A'");
  return build_filter(it->second, traces.dt);
}

VectorRe filter_signal(const VectorRe& j, double dt, const MatchedFilter& f) {
  if (std::abs(dt - f.dt) > 1e-12 * std::max(dt, f.dt))
    throw std::invalid_argument("filter_signal: sample spacing mismatch");
  const int n = static_cast<int>(j.size());
  const int nf = static_cast<int>(f.f.size());
  VectorRe out(n);
  for (int k = 0; k < n; ++k) {
    const int m = std::min(k + 1, nf);
    // sum_{i=0}^{m-1} f[i] * j[k-i]
    out(k) = dt * f.f.head(m).dot(j.segment(k - m + 1, m).reverse());
  }
  return out;
}

DetectionResult detect(const VectorRe& jbar, double dt, double y_thr,
                       std::optional<DetectionWindow> window) {
  if (y_thr <= 0) throw std::invalid_argument("detect: y_thr must be > 0");
  const int n = static_cast<int>(jbar.size());
  int k0 = 0, k1 = n;
  if (window) {
    // Samples live at t_k = (k+1) dt.
    k0 = std::max(0, static_cast<int>(std::ceil(window->t_a / dt - 1.0 - 1e-9)));
    k1 = std::min(n, static_cast<int>(std::floor(window->t_b / dt - 1e-9)));
  }
  if (k0 >= k1) throw std::invalid_argument("detect: empty window");

  DetectionResult res;
  res.max_filtered = jbar(k0);
  for (int k = k0; k < k1; ++k) {
    const double v = jbar(k);
    if (v > res.max_filtered) res.max_filtered = v;
    if (!res.clicked && v > y_thr) {
      res.clicked = true;
      res.tau_c = (k + 1) * dt;
    }
  }
  return res;
}

Histogram crossing_histogram(const std::vector<DetectionResult>& results,
                             double bin_width) {
  if (bin_width <= 0)
    throw std::invalid_argument("crossing_histogram: bin_width must be > 0");
  std::vector<double> taus;
  for (const auto& r : results)
    if (r.clicked) taus.push_back(r.tau_c);
  if (taus.empty())
    throw std::invalid_argument("crossing_histogram: no clicked results");

  const double t_max = *std::max_element(taus.begin(), taus.end());
  const int n_bins =
      std::max(1, static_cast<int>(std::ceil(t_max / bin_width - 1e-12)));

  Histogram h;
  h.bin_width = bin_width;
  h.n_events = static_cast<int>(taus.size());
  h.centers.resize(n_bins);
  h.density.assign(n_bins, 0.0);
  for (int b = 0; b < n_bins; ++b) h.centers[b] = (b + 0.5) * bin_width;
  for (double tau : taus) {
    int b = static_cast<int>(tau / bin_width);
    if (b >= n_bins) b = n_bins - 1;
    h.density[b] += 1.0;
  }
  const double norm = h.n_events * bin_width;
  for (double& d : h.density) d /= norm;
  return h;
}

}  // namespace photodet
