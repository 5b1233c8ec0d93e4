#include "photodet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace photodet {

ValueWithError efficiency(const std::vector<DetectionResult>& signal_results) {
  if (signal_results.empty())
    throw std::invalid_argument("efficiency: empty result set");
  const double n = static_cast<double>(signal_results.size());
  double clicks = 0;
  for (const auto& r : signal_results) clicks += r.clicked ? 1 : 0;
  const double eta = clicks / n;
  return {eta, std::sqrt(eta * (1.0 - eta) / n)};
}

DarkCountRate dark_count_empirical(
    const std::vector<DetectionResult>& vacuum_results, double record_t) {
  if (vacuum_results.empty())
    throw std::invalid_argument("dark_count_empirical: empty result set");
  if (record_t <= 0)
    throw std::invalid_argument("dark_count_empirical: record_t must be > 0");
  const double total_t = record_t * vacuum_results.size();
  double clicks = 0;
  for (const auto& r : vacuum_results) clicks += r.clicked ? 1 : 0;
  if (clicks == 0) return {1.0 / total_t, 1.0 / total_t, true};
  return {clicks / total_t, std::sqrt(clicks) / total_t, false};
}

FilteredVacuumStats analyze_filtered_vacuum(const std::vector<VectorRe>& jbar,
                                            double dt, double t_stationary) {
  if (jbar.empty())
    throw std::invalid_argument("analyze_filtered_vacuum: no records");
  const int n = static_cast<int>(jbar.front().size());
  const int k0 =
      std::min(n - 1, std::max(0, static_cast<int>(t_stationary / dt)));
  constexpr int kMaxLag = 4;
  if (n - k0 <= kMaxLag + 1)
    throw std::invalid_argument(
        "analyze_filtered_vacuum: records too short past t_stationary");

  // Pooled moments over the stationary section.
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  long count = 0;
  for (const auto& rec : jbar) {
    for (int k = k0; k < n; ++k) {
      const double v = rec(k);
      s1 += v;
      s2 += v * v;
      s3 += v * v * v;
      s4 += v * v * v * v;
      ++count;
    }
  }
  const double mean = s1 / count;
  const double var = s2 / count - mean * mean;
  const double sd = std::sqrt(std::max(var, 1e-300));
  const double m3 = s3 / count - 3 * mean * var - mean * mean * mean;
  const double m4c = s4 / count - 4 * mean * (s3 / count) +
                     6 * mean * mean * (s2 / count) - 3 * std::pow(mean, 4);

  // Autocovariance at small lags, averaged over records.
  double r[kMaxLag + 1] = {};
  long cnt[kMaxLag + 1] = {};
  for (const auto& rec : jbar) {
    for (int lag = 0; lag <= kMaxLag; ++lag) {
      for (int k = k0; k + lag < n; ++k) {
        r[lag] += (rec(k) - mean) * (rec(k + lag) - mean);
        ++cnt[lag];
      }
    }
  }
  for (int lag = 0; lag <= kMaxLag; ++lag) r[lag] /= cnt[lag];

  // Even quadratic fit r(tau) ~ a + c tau^2 over the first lags; -r''(0) = -2c.
  double sxx = 0, sxy = 0, sx = 0, sy = 0;
  for (int lag = 0; lag <= kMaxLag; ++lag) {
    const double x = (lag * dt) * (lag * dt);
    sx += x;
    sy += r[lag];
    sxx += x * x;
    sxy += x * r[lag];
  }
  const int m = kMaxLag + 1;
  const double denom = m * sxx - sx * sx;
  const double c = (m * sxy - sx * sy) / denom;

  FilteredVacuumStats stats;
  stats.r0 = r[0];
  stats.neg_r2 = -2.0 * c;
  stats.skewness = m3 / (sd * sd * sd);
  stats.ex_kurtosis = m4c / (var * var) - 3.0;
  stats.n_samples = count;
  stats.curvature_ok = c < 0.0 && r[0] > 0.0;
  return stats;
}

GaussianDarkEstimate dark_count_gaussian(const FilteredVacuumStats& stats,
                                         double y_thr) {
  if (y_thr <= 0)
    throw std::invalid_argument("dark_count_gaussian: y_thr must be > 0");
  GaussianDarkEstimate est;
  est.stats = stats;
  if (!stats.curvature_ok) return est;
  est.rate = std::sqrt(stats.neg_r2 / stats.r0) / (2.0 * std::numbers::pi) *
             std::exp(-y_thr * y_thr / (2.0 * stats.r0));
  est.reliable = std::abs(stats.skewness) < 0.2 &&
                 std::abs(stats.ex_kurtosis) < 0.5;
  return est;
}

GaussianDarkEstimate dark_count_gaussian(const std::vector<VectorRe>& jbar,
                                         double dt, double y_thr,
                                         double t_stationary) {
  return dark_count_gaussian(analyze_filtered_vacuum(jbar, dt, t_stationary),
                             y_thr);
}

double fidelity(double eta, double gamma_dark, double tau_m) {
  if (gamma_dark * tau_m > 1.0)
    throw std::domain_error(
        "fidelity: gamma_dark * tau_m > 1 is out of the valid regime");
  return 0.5 * (eta + 1.0 - gamma_dark * tau_m);
}

WindowChoice choose_window(const std::vector<DetectionResult>& signal_results,
                           double gamma_dark, double tau_max, double grid_dt) {
  if (signal_results.empty())
    throw std::invalid_argument("choose_window: empty result set");
  if (grid_dt <= 0 || tau_max < grid_dt)
    throw std::invalid_argument("choose_window: empty window grid");

  std::vector<double> taus;
  for (const auto& r : signal_results)
    if (r.clicked) taus.push_back(r.tau_c);
  std::sort(taus.begin(), taus.end());
  const double n = static_cast<double>(signal_results.size());

  const int n_grid = static_cast<int>(tau_max / grid_dt + 1e-9);
  // Single pass: eta(tau) is a step function of the sorted crossing times.
  std::vector<double> f_grid(n_grid);
  size_t ptr = 0;
  double best_f = -1.0;
  for (int i = 0; i < n_grid; ++i) {
    const double tau = (i + 1) * grid_dt;
    while (ptr < taus.size() && taus[ptr] <= tau + 1e-12) ++ptr;
    const double eta_tau = ptr / n;
    f_grid[i] = 0.5 * (eta_tau + 1.0 - gamma_dark * tau);
    best_f = std::max(best_f, f_grid[i]);
  }
  WindowChoice choice;
  ptr = 0;
  for (int i = 0; i < n_grid; ++i) {
    const double tau = (i + 1) * grid_dt;
    while (ptr < taus.size() && taus[ptr] <= tau + 1e-12) ++ptr;
    if (f_grid[i] >= best_f - 1e-4) {
      choice.tau_m = tau;
      choice.fidelity = f_grid[i];
      choice.n_click_at_tau = static_cast<int>(ptr);
      choice.eta_at_tau = ptr / n;
      return choice;
    }
  }
  throw std::logic_error("choose_window: grid scan failed");
}

std::vector<RocPoint> roc_curve(const std::vector<VectorRe>& jbar_signal,
                                const std::vector<VectorRe>& jbar_vacuum,
                                double dt, double record_t,
                                const std::vector<double>& thresholds,
                                double t_stationary) {
  if (thresholds.empty())
    throw std::invalid_argument("roc_curve: empty threshold grid");
  const FilteredVacuumStats stats =
      analyze_filtered_vacuum(jbar_vacuum, dt, t_stationary);

  std::vector<RocPoint> curve;
  curve.reserve(thresholds.size());
  for (double thr : thresholds) {
    std::vector<DetectionResult> sig, vac;
    sig.reserve(jbar_signal.size());
    vac.reserve(jbar_vacuum.size());
    for (const auto& j : jbar_signal) sig.push_back(detect(j, dt, thr));
    for (const auto& j : jbar_vacuum) vac.push_back(detect(j, dt, thr));

    RocPoint p;
    p.y_thr = thr;
    p.eta = efficiency(sig).value;
    const DarkCountRate emp = dark_count_empirical(vac, record_t);
    if (emp.is_bound) {
      p.gamma_dark = dark_count_gaussian(stats, thr).rate;
      p.dark_is_gaussian = true;
    } else {
      p.gamma_dark = emp.rate;
    }
    curve.push_back(p);
  }
  return curve;
}

MetricsSummary compute_summary(const std::vector<VectorRe>& jbar_signal,
                               const std::vector<VectorRe>& jbar_vacuum,
                               double dt, double record_t, double y_thr,
                               double t_stationary) {
  std::vector<DetectionResult> sig, vac;
  sig.reserve(jbar_signal.size());
  vac.reserve(jbar_vacuum.size());
  for (const auto& j : jbar_signal) sig.push_back(detect(j, dt, y_thr));
  for (const auto& j : jbar_vacuum) vac.push_back(detect(j, dt, y_thr));

  MetricsSummary s;
  s.y_thr = y_thr;
  s.record_t = record_t;
  s.n_traj_signal = static_cast<int>(sig.size());
  s.n_traj_vacuum = static_cast<int>(vac.size());
  for (const auto& r : vac) s.n_click_vacuum += r.clicked ? 1 : 0;

  const DarkCountRate emp = dark_count_empirical(vac, record_t);
  if (emp.is_bound) {
    const auto g = dark_count_gaussian(jbar_vacuum, dt, y_thr, t_stationary);
    s.gamma_dark = g.rate;
    s.gamma_dark_err = g.rate;  // order-of-magnitude estimate
    s.method_dark = DarkMethod::GaussianEstimate;
  } else {
    s.gamma_dark = emp.rate;
    s.gamma_dark_err = emp.err;
    s.method_dark = DarkMethod::Empirical;
  }

  const WindowChoice w =
      choose_window(sig, s.gamma_dark, record_t, dt);
  s.tau_m = w.tau_m;
  s.eta = w.eta_at_tau;
  s.n_click = w.n_click_at_tau;
  s.eta_err = std::sqrt(s.eta * (1.0 - s.eta) / s.n_traj_signal);
  s.fidelity = w.fidelity;
  s.fidelity_err = 0.5 * std::hypot(s.eta_err, s.tau_m * s.gamma_dark_err);
  return s;
}

const char* to_string(DarkMethod m) {
  return m == DarkMethod::Empirical ? "EMPIRICAL" : "GAUSSIAN_ESTIMATE";
}

}  // namespace photodet
