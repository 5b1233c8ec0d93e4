#pragma once

#include "photodet/detection.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace photodet {

struct ValueWithError {
  double value = 0.0;
  double err = 0.0;
};

/// Click fraction over signal runs with its binomial standard error.
ValueWithError efficiency(const std::vector<DetectionResult>& signal_results);

struct DarkCountRate {
  double rate = 0.0;
  double err = 0.0;
  bool is_bound = false;  // true when no clicks occurred: rate = 1/(n*T)
};

/// Dark-count rate counted directly on vacuum records of length record_t.
DarkCountRate dark_count_empirical(
    const std::vector<DetectionResult>& vacuum_results, double record_t);

/// Second-order statistics of the filtered vacuum process, taken from the
/// stationary part (t >= t_stationary) of the records.
struct FilteredVacuumStats {
  double r0 = 0.0;       // variance of jbar
  double neg_r2 = 0.0;   // -r''(0) from an even quadratic fit at small lags
  double skewness = 0.0;
  double ex_kurtosis = 0.0;
  long n_samples = 0;
  bool curvature_ok = false;  // fit produced a negative curvature
};

FilteredVacuumStats analyze_filtered_vacuum(const std::vector<VectorRe>& jbar,
                                            double dt, double t_stationary);

struct GaussianDarkEstimate {
  double rate = 0.0;
  bool reliable = false;
  FilteredVacuumStats stats;
};

/// Mean upcrossing rate of a stationary Gaussian process through y_thr
/// (rate = sqrt(-r''(0)/r(0)) / (2 pi) * exp(-y_thr^2 / (2 r(0)))), with the
/// autocorrelation taken empirically from filtered vacuum records. Flagged
/// unreliable when the normality diagnostics fail.
GaussianDarkEstimate dark_count_gaussian(const FilteredVacuumStats& stats,
                                         double y_thr);
GaussianDarkEstimate dark_count_gaussian(const std::vector<VectorRe>& jbar,
                                         double dt, double y_thr,
                                         double t_stationary);

/// F = (eta + 1 - gamma_dark * tau_m) / 2.
/// Throws std::domain_error when gamma_dark * tau_m > 1 (out of regime).
double fidelity(double eta, double gamma_dark, double tau_m);

struct WindowChoice {
  double tau_m = 0.0;
  double fidelity = 0.0;
  double eta_at_tau = 0.0;
  int n_click_at_tau = 0;
};

/// Smallest window length on the grid whose fidelity is within 1e-4 of the
/// grid maximum, with eta(tau) the fraction of signal records whose first
/// crossing falls inside [0, tau].
WindowChoice choose_window(const std::vector<DetectionResult>& signal_results,
                           double gamma_dark, double tau_max, double grid_dt);

struct RocPoint {
  double y_thr = 0.0;
  double gamma_dark = 0.0;
  double eta = 0.0;
  bool dark_is_gaussian = false;  // estimator used where counts were zero
};

/// (gamma_dark, eta) against threshold, using the empirical dark rate where
/// vacuum clicks exist and the Gaussian upcrossing estimate where they are
/// zero.
std::vector<RocPoint> roc_curve(const std::vector<VectorRe>& jbar_signal,
                                const std::vector<VectorRe>& jbar_vacuum,
                                double dt, double record_t,
                                const std::vector<double>& thresholds,
                                double t_stationary);

enum class DarkMethod { Empirical, GaussianEstimate };

struct MetricsSummary {
  double eta = 0.0;
  double eta_err = 0.0;
  double gamma_dark = 0.0;
  double gamma_dark_err = 0.0;
  DarkMethod method_dark = DarkMethod::Empirical;
  double tau_m = 0.0;
  double fidelity = 0.0;
  double fidelity_err = 0.0;
  double y_thr = 0.0;
  int n_traj_signal = 0;
  int n_click = 0;
  int n_traj_vacuum = 0;
  int n_click_vacuum = 0;
  double record_t = 0.0;
  std::string config_hash;
  std::uint64_t base_seed = 0;
};

/// Full pipeline at one threshold: detection on both ensembles, dark rate
/// (empirical, or Gaussian estimate when no vacuum record clicks), window
/// choice and fidelity.
MetricsSummary compute_summary(const std::vector<VectorRe>& jbar_signal,
                               const std::vector<VectorRe>& jbar_vacuum,
                               double dt, double record_t, double y_thr,
                               double t_stationary);

const char* to_string(DarkMethod m);

}  // namespace photodet
