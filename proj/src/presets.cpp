#include "photodet/presets.hpp"

#include <numbers>
#include <stdexcept>

namespace photodet {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

DetectorConfig ideal_preset(int n_absorbers) {
  DetectorConfig cfg;
  cfg.variant = ModelVariant::Ideal;
  cfg.n_absorbers = n_absorbers;
  cfg.kappa_b = 1.0;
  cfg.kappa_a = 0.2;
  cfg.kappa_c = 0.1;
  cfg.eta_h = 1.0;
  cfg.trunc = {15, 2, 2};
  switch (n_absorbers) {
    case 1:
      cfg.g_z = 1.0;
      cfg.deltas = {0.0};
      break;
    case 2:
      cfg.g_z = 0.6;
      cfg.deltas = {0.55, -0.55};
      break;
    case 3:
      cfg.g_z = 0.5;
      cfg.deltas = {0.7, -0.7, 0.0};
      break;
    case 4:
      cfg.g_z = 0.4;
      cfg.deltas = {0.7, -0.7, 0.23, -0.23};
      break;
    default:
      throw std::invalid_argument("ideal_preset: no preset for N = " +
                                  std::to_string(n_absorbers));
  }
  return cfg;
}

DetectorConfig dispersive_preset() {
  DetectorConfig cfg;
  cfg.variant = ModelVariant::Dispersive;
  cfg.n_absorbers = 4;
  cfg.kappa_b = kTwoPi * 10.0;  // angular 1/us
  cfg.kappa_a = kTwoPi * 2.0;
  cfg.kappa_c = kTwoPi * 1.0;
  cfg.dispersive.chi = kTwoPi * 0.4;
  cfg.dispersive.alpha = 5.0;
  cfg.dispersive.delta_plus = 0.0;
  cfg.dispersive.t1 = 30.0;
  cfg.dispersive.t2 = 30.0;
  cfg.deltas = {kTwoPi * 6.6, kTwoPi * -7.4, kTwoPi * 2.3, kTwoPi * -2.3};
  cfg.g_z = cfg.effective_g_z();  // 2 chi alpha
  cfg.eta_h = 1.0;
  cfg.trunc = {20, 2, 2};
  return cfg;
}

ExperimentConfig ideal_experiment(int n_absorbers) {
  ExperimentConfig exp;
  exp.detector = ideal_preset(n_absorbers);
  exp.grid.t_end = 150.0;
  exp.grid.dt = 0.005;
  exp.grid.record_stride = 10;
  exp.run.n_traj = 2000;
  exp.run.base_seed = 1;
  for (double thr = 1.4; thr <= 5.2 + 1e-9; thr += 0.2)
    exp.detection.thresholds.push_back(thr);
  return exp;
}

ExperimentConfig dispersive_experiment() {
  ExperimentConfig exp;
  exp.detector = dispersive_preset();
  exp.grid.t_end = 3.0;        // us
  exp.grid.dt = 0.00025;       // kappa_b * dt ~ 0.016, inside the guard
  exp.grid.record_stride = 8;
  exp.run.n_traj = 2000;
  exp.run.base_seed = 1;
  for (double thr = 1.4; thr <= 5.2 + 1e-9; thr += 0.2)
    exp.detection.thresholds.push_back(thr);
  return exp;
}

}  // namespace photodet
