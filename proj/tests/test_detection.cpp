#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "photodet/detection.hpp"

#include <cmath>
#include <random>

using namespace photodet;

namespace {

/// Smooth pulse-like trace for synthetic filters.
VectorRe pulse_trace(int n, double dt, double rise, double fall) {
  VectorRe y(n);
  for (int k = 0; k < n; ++k) {
    const double t = (k + 1) * dt;
    y(k) = (1.0 - std::exp(-t / rise)) * std::exp(-t / fall);
  }
  return y;
}

VectorRe white_noise(int n, double dt, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(dt));
  VectorRe j(n);
  for (int k = 0; k < n; ++k) j(k) = gauss(rng);
  return j;
}

}  // namespace

TEST_CASE("filter normalization and scale invariance") {
  const double dt = 0.05;
  const VectorRe y = pulse_trace(600, dt, 2.0, 10.0);

  const MatchedFilter f = build_filter(y, dt);
  CHECK(std::abs(f.f.squaredNorm() * dt - 1.0) < 1e-10);

  const MatchedFilter f_scaled = build_filter(VectorRe(7.5 * y), dt);
  CHECK((f.f - f_scaled.f).cwiseAbs().maxCoeff() < 1e-12);

  // The filter peaks where the trace peaks (monotone rescale).
  int argmax_y = 0, argmax_f = 0;
  y.maxCoeff(&argmax_y);
  f.f.maxCoeff(&argmax_f);
  CHECK(argmax_y == argmax_f);

  CHECK_THROWS_AS(build_filter(VectorRe(VectorRe::Zero(100)), dt),
                  std::invalid_argument);

  // Sign-preserving: a negative-going trace gives a negative-going filter.
  const MatchedFilter f_neg = build_filter(VectorRe(-y), dt);
  CHECK(f_neg.f.minCoeff() < 0.0);
  CHECK(std::abs(f_neg.f.squaredNorm() * dt - 1.0) < 1e-10);
}

TEST_CASE("causal convolution identities") {
  const double dt = 0.1;
  const MatchedFilter f = build_filter(pulse_trace(80, dt, 1.0, 4.0), dt);

  const VectorRe zero = VectorRe::Zero(200);
  CHECK(filter_signal(zero, dt, f).cwiseAbs().maxCoeff() == 0.0);

  // Impulse at sample k0 reproduces the filter shifted to k0, scaled by dt.
  VectorRe impulse = VectorRe::Zero(200);
  const int k0 = 27;
  impulse(k0) = 1.0;
  const VectorRe out = filter_signal(impulse, dt, f);
  for (int k = 0; k < 200; ++k) {
    const double expect =
        (k >= k0 && k - k0 < f.f.size()) ? f.f(k - k0) * dt : 0.0;
    CHECK(std::abs(out(k) - expect) < 1e-14);
  }

  // Filtering commutes with positive scaling.
  std::mt19937_64 rng(3);
  const VectorRe j = white_noise(300, dt, rng);
  const VectorRe a = filter_signal(VectorRe(3.0 * j), dt, f);
  const VectorRe b = 3.0 * filter_signal(j, dt, f);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);

  MatchedFilter wrong_dt = f;
  wrong_dt.dt = dt * 2;
  CHECK_THROWS_AS(filter_signal(j, dt, wrong_dt), std::invalid_argument);
}

TEST_CASE("unit-norm filter gives unit variance on white noise") {
  const double dt = 0.05;
  const int n = 400;
  const MatchedFilter f = build_filter(pulse_trace(n, dt, 2.0, 10.0), dt);

  std::mt19937_64 rng(11);
  const int n_rec = 4000;
  double s1 = 0, s2 = 0;
  for (int r = 0; r < n_rec; ++r) {
    const VectorRe jbar = filter_signal(white_noise(n, dt, rng), dt, f);
    const double v = jbar(n - 1);  // past the filter transient
    s1 += v;
    s2 += v * v;
  }
  const double var = s2 / n_rec - (s1 / n_rec) * (s1 / n_rec);
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n_rec));
}

TEST_CASE("threshold detection and crossing times") {
  const double dt = 0.1;
  VectorRe jbar(50);
  for (int k = 0; k < 50; ++k)
    jbar(k) = std::sin(0.2 * (k + 1));  // peaks near t = 0.785 / 0.1

  const DetectionResult none = detect(jbar, dt, 1e9);
  CHECK(!none.clicked);

  const DetectionResult hit = detect(jbar, dt, 0.5);
  CHECK(hit.clicked);
  // First sample with sin(0.2 k) > 0.5 is k = 3 (0-based k=2), t = 0.3*...
  CHECK(hit.tau_c == doctest::Approx(3 * dt));
  CHECK(hit.max_filtered == doctest::Approx(jbar.maxCoeff()));

  // Monotonicity: click set shrinks as the threshold grows.
  std::mt19937_64 rng(5);
  const MatchedFilter f = build_filter(pulse_trace(100, dt, 1.0, 4.0), dt);
  int violations = 0;
  for (int r = 0; r < 50; ++r) {
    const VectorRe rec = filter_signal(white_noise(100, dt, rng), dt, f);
    const bool lo = detect(rec, dt, 1.0).clicked;
    const bool hi = detect(rec, dt, 1.8).clicked;
    if (hi && !lo) ++violations;
  }
  CHECK(violations == 0);

  CHECK_THROWS_AS(detect(jbar, dt, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(
      detect(jbar, dt, 0.5, DetectionWindow{4.0, 4.0}),
      std::invalid_argument);

  // Window restriction: sin(2t) is negative for t in [1.8, 3.0].
  const DetectionResult windowed =
      detect(jbar, dt, 0.99, DetectionWindow{1.8, 3.0});
  CHECK(!windowed.clicked);
  CHECK(windowed.max_filtered < 0.0);
}

TEST_CASE("crossing histogram normalization") {
  std::vector<DetectionResult> results;
  for (int k = 0; k < 40; ++k)
    results.push_back({true, 2.0 + 0.1 * (k % 10), 5.0});
  results.push_back({false, 0.0, 0.1});

  const Histogram h = crossing_histogram(results, 0.25);
  CHECK(h.n_events == 40);
  double area = 0.0;
  for (double d : h.density) area += d * h.bin_width;
  CHECK(std::abs(area - 1.0) < 1e-12);

  // Degenerate case: all crossing times equal -> one occupied bin.
  std::vector<DetectionResult> same(7, {true, 1.0, 3.0});
  const Histogram h1 = crossing_histogram(same, 0.5);
  int occupied = 0;
  for (double d : h1.density) occupied += d > 0 ? 1 : 0;
  CHECK(occupied == 1);

  std::vector<DetectionResult> no_clicks(3, {false, 0.0, 0.0});
  CHECK_THROWS_AS(crossing_histogram(no_clicks, 0.5), std::invalid_argument);
}
