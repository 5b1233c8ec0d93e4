#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "photodet/metrics.hpp"

#include <cmath>
#include <random>

using namespace photodet;

namespace {

std::vector<DetectionResult> clicks_at(int n_click, int n_total, double tau) {
  std::vector<DetectionResult> r;
  for (int k = 0; k < n_total; ++k)
    r.push_back(k < n_click ? DetectionResult{true, tau, 5.0}
                            : DetectionResult{false, 0.0, 0.5});
  return r;
}

/// Synthetic filtered-vacuum ensemble: white noise through a smooth
/// unit-norm filter, so r(0) = 1 and -r''(0) = integral f'(t)^2 dt.
struct SyntheticVacuum {
  std::vector<VectorRe> jbar;
  double dt;
  double rice_bandwidth;  // sqrt(-r''(0)/r(0)), analytic
};

SyntheticVacuum make_vacuum(int n_rec, int n_samples, double dt,
                            std::uint64_t seed) {
  VectorRe f(n_samples);
  const double rise = 2.0, fall = 10.0;
  for (int k = 0; k < n_samples; ++k) {
    const double t = (k + 1) * dt;
    f(k) = (1.0 - std::exp(-t / rise)) * std::exp(-t / fall);
  }
  f /= std::sqrt(f.squaredNorm() * dt);

  double fp2 = 0.0;  // integral of f'^2 (forward differences)
  for (int k = 0; k + 1 < n_samples; ++k) {
    const double d = (f(k + 1) - f(k)) / dt;
    fp2 += d * d * dt;
  }

  SyntheticVacuum v;
  v.dt = dt;
  v.rice_bandwidth = std::sqrt(fp2);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(dt));
  for (int r = 0; r < n_rec; ++r) {
    VectorRe j(n_samples);
    for (int k = 0; k < n_samples; ++k) j(k) = gauss(rng);
    VectorRe out(n_samples);
    for (int k = 0; k < n_samples; ++k) {
      const int m = std::min(k + 1, n_samples);
      out(k) = dt * f.head(m).dot(j.segment(k - m + 1, m).reverse());
    }
    v.jbar.push_back(std::move(out));
  }
  return v;
}

}  // namespace

TEST_CASE("efficiency with binomial error") {
  const auto r = clicks_at(79, 100, 10.0);
  const ValueWithError eta = efficiency(r);
  CHECK(eta.value == doctest::Approx(0.79));
  CHECK(eta.err == doctest::Approx(std::sqrt(0.79 * 0.21 / 100)));

  CHECK(efficiency(clicks_at(0, 50, 0)).value == 0.0);
  CHECK_THROWS_AS(efficiency({}), std::invalid_argument);
}

TEST_CASE("empirical dark-count rate and the zero-click bound") {
  const auto some = clicks_at(6, 100, 3.0);
  const DarkCountRate d = dark_count_empirical(some, 50.0);
  CHECK(d.rate == doctest::Approx(6.0 / (100 * 50.0)));
  CHECK(d.err == doctest::Approx(std::sqrt(6.0) / (100 * 50.0)));
  CHECK(!d.is_bound);

  const DarkCountRate none = dark_count_empirical(clicks_at(0, 100, 0), 50.0);
  CHECK(none.is_bound);
  CHECK(none.rate == doctest::Approx(1.0 / (100 * 50.0)));
}

TEST_CASE("Gaussian upcrossing estimate against the Rice formula") {
  const SyntheticVacuum v = make_vacuum(300, 1200, 0.05, 19);
  const auto stats = analyze_filtered_vacuum(v.jbar, v.dt, 20.0);

  CHECK(stats.curvature_ok);
  CHECK(stats.r0 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::sqrt(stats.neg_r2 / stats.r0) ==
        doctest::Approx(v.rice_bandwidth).epsilon(0.15));

  const double y_thr = 3.0;
  const GaussianDarkEstimate est = dark_count_gaussian(stats, y_thr);
  CHECK(est.reliable);
  const double analytic = v.rice_bandwidth / (2 * M_PI) *
                          std::exp(-y_thr * y_thr / 2.0);
  CHECK(est.rate == doctest::Approx(analytic).epsilon(0.3));

  // Strictly decreasing in the threshold.
  CHECK(dark_count_gaussian(stats, 2 * y_thr).rate < est.rate);

  // Skewed data must be flagged unreliable.
  SyntheticVacuum skewed = v;
  for (auto& rec : skewed.jbar)
    for (int k = 0; k < rec.size(); ++k)
      rec(k) = rec(k) * rec(k) - 1.0;
  const auto bad = dark_count_gaussian(skewed.jbar, v.dt, y_thr, 20.0);
  CHECK(!bad.reliable);
}

TEST_CASE("Gaussian estimate agrees with direct counting within a factor 2") {
  // Moderate threshold so that direct counting has decent statistics.
  const SyntheticVacuum v = make_vacuum(2000, 3000, 0.05, 7);
  const double y_thr = 3.0;
  const double record_t = 3000 * 0.05;

  std::vector<DetectionResult> results;
  for (const auto& j : v.jbar) results.push_back(detect(j, v.dt, y_thr));
  const DarkCountRate emp = dark_count_empirical(results, record_t);
  REQUIRE(!emp.is_bound);

  const GaussianDarkEstimate est =
      dark_count_gaussian(v.jbar, v.dt, y_thr, 20.0);
  CHECK(est.rate / emp.rate > 0.5);
  CHECK(est.rate / emp.rate < 2.0);
}

TEST_CASE("fidelity formula") {
  CHECK(fidelity(1.0, 0.0, 100.0) == doctest::Approx(1.0));
  CHECK(fidelity(0.79, 1.4e-3, 125.0) == doctest::Approx(0.8075));
  CHECK(fidelity(0.92, 7e-6, 126.0) ==
        doctest::Approx(0.5 * (0.92 + 1.0 - 7e-6 * 126.0)));
  CHECK_THROWS_AS(fidelity(0.9, 0.5, 3.0), std::domain_error);
}

TEST_CASE("window choice maximizes fidelity at the smallest window") {
  // 80% of records click at tau = 10; dark counts penalize longer windows.
  auto results = clicks_at(80, 100, 10.0);
  const WindowChoice w = choose_window(results, 1e-3, 100.0, 0.5);
  CHECK(w.tau_m == doctest::Approx(10.0));
  CHECK(w.eta_at_tau == doctest::Approx(0.8));
  CHECK(w.fidelity == doctest::Approx(0.5 * (0.8 + 1.0 - 1e-3 * 10.0)));

  // With no dark counts, any window past the last click is equivalent;
  // the smallest one wins.
  const WindowChoice w0 = choose_window(results, 0.0, 100.0, 0.5);
  CHECK(w0.tau_m == doctest::Approx(10.0));

  CHECK_THROWS_AS(choose_window(results, 1e-3, 0.1, 0.5),
                  std::invalid_argument);
}

TEST_CASE("summary invariants: exact ratios and the exact formula") {
  SyntheticVacuum sig = make_vacuum(40, 600, 0.05, 2);
  // Inject a deterministic bump so some records click.
  for (size_t r = 0; r < sig.jbar.size(); r += 2)
    for (int k = 200; k < 260; ++k) sig.jbar[r](k) += 4.0;
  SyntheticVacuum vac = make_vacuum(40, 600, 0.05, 3);

  const double record_t = 600 * 0.05;
  const MetricsSummary s = compute_summary(sig.jbar, vac.jbar, 0.05, record_t,
                                           3.5, 0.5 * record_t);
  CHECK(s.n_traj_signal == 40);
  CHECK(s.eta == doctest::Approx(static_cast<double>(s.n_click) / 40).epsilon(1e-12));
  CHECK(s.fidelity ==
        doctest::Approx(0.5 * (s.eta + 1.0 - s.gamma_dark * s.tau_m))
            .epsilon(1e-12));
}

TEST_CASE("ROC curve: monotone and method switch at zero counts") {
  SyntheticVacuum sig = make_vacuum(60, 800, 0.05, 5);
  for (size_t r = 0; r < sig.jbar.size(); ++r)
    if (r % 3 != 0)
      for (int k = 300 + (r % 5) * 10; k < 360 + (r % 5) * 10; ++k)
        sig.jbar[r](k) += 3.0 + 0.02 * r;
  SyntheticVacuum vac = make_vacuum(60, 800, 0.05, 6);

  const std::vector<double> grid = {2.5, 3.0, 3.5, 4.5, 6.0, 9.0};
  const auto curve = roc_curve(sig.jbar, vac.jbar, 0.05, 800 * 0.05, grid,
                               20.0);
  REQUIRE(curve.size() == grid.size());
  for (size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].eta <= curve[i - 1].eta + 1e-12);
    CHECK(curve[i].gamma_dark <= curve[i - 1].gamma_dark + 1e-12);
  }
  // The extreme threshold has no vacuum clicks: Gaussian estimate kicks in.
  CHECK(curve.back().dark_is_gaussian);
  CHECK(curve.back().eta == doctest::Approx(0.0));

  CHECK_THROWS_AS(roc_curve(sig.jbar, vac.jbar, 0.05, 40.0, {}, 20.0),
                  std::invalid_argument);
}
