#pragma once

#include "photodet/hilbert.hpp"

#include <limits>
#include <map>
#include <string>
#include <vector>

namespace photodet {

enum class ModelVariant { Ideal, Dispersive };

/// Parameters of the dispersive readout implementation. Rates are angular
/// frequencies, times in the inverse units of those rates.
struct DispersiveParams {
  double chi = 0.0;         // dispersive shift per absorber excitation
  double alpha = 0.0;       // steady readout-field displacement
  double delta_plus = 0.0;  // residual collective shift of the bright mode
  double t1 = std::numeric_limits<double>::infinity();
  double t2 = std::numeric_limits<double>::infinity();

  bool finite_decoherence() const;
  /// Pure-dephasing rate 1/T2 - 1/(2 T1); negative pairs are invalid.
  double gamma_phi() const;
};

struct Truncations {
  int dim_a = 15;
  int dim_b = 2;
  int dim_c = 2;
};

/// All physical and numerical parameters of one detector instance.
/// Rates share one unit system: the natural convention is kappa_b = 1 for
/// the ideal variant and angular MHz (2*pi/us) for the dispersive one.
struct DetectorConfig {
  int n_absorbers = 1;
  double kappa_a = 0.2;
  double kappa_b = 1.0;
  double kappa_c = 0.1;
  double g_z = 1.0;            // ignored for Dispersive, where g_z = 2 chi alpha
  std::vector<double> deltas;  // per-absorber detunings; empty means all zero
  double eta_h = 1.0;
  ModelVariant variant = ModelVariant::Ideal;
  DispersiveParams dispersive;
  Truncations trunc;
  bool with_photon = true;

  /// g_z as used in the Hamiltonian: the configured value for Ideal,
  /// 2*chi*alpha (derived, not independently settable) for Dispersive.
  double effective_g_z() const;
  std::vector<double> effective_deltas() const;  // padded to n_absorbers
  /// Largest rate appearing in the model, used by the time-step guard.
  double max_rate() const;
  /// Throws std::invalid_argument with a field-level message on violation.
  void validate() const;
};

struct CollapseChannel {
  Operator op;
  bool monitored = false;
  std::string name;
};

/// A detector model ready for integration: Hamiltonian, collapse channels
/// (exactly one of them homodyne-monitored), the measured quadrature and a
/// registry of named observables.
struct SystemModel {
  HilbertSpace space;
  Operator hamiltonian;
  std::vector<CollapseChannel> channels;
  Operator y_meas;  // Y quadrature of the measurement mode
  std::map<std::string, Operator> observables;
  DetectorConfig config;

  const CollapseChannel& monitored_channel() const;
};

/// Single-absorber model: H = g_z b†b X_A + Δ₁ b†b + cascade(C -> B).
/// Requires n_absorbers == 1 and the Ideal variant.
SystemModel build_single_absorber(const DetectorConfig& cfg);

/// Inhomogeneous-ensemble model: H = g_z N_B X_A + Σ Δ_i b_i†b_i +
/// cascade(C -> bright mode), collective decay at kappa_b via b₊.
SystemModel build_ensemble(const DetectorConfig& cfg);

/// Dispersive implementation: ensemble Hamiltonian with g_z = 2 chi alpha
/// plus 2 chi N_B a†a and Δ₊ b₊†b₊, and per-absorber T1/T2 channels.
SystemModel build_dispersive(const DetectorConfig& cfg);

/// Dispatch on cfg.variant (and N=1 vs ensemble for Ideal).
SystemModel build_model(const DetectorConfig& cfg);

/// |1>_C ⊗ vac when cfg.with_photon, global vacuum otherwise.
QuantumState initial_state(const DetectorConfig& cfg,
                           const HilbertSpace& space);

}  // namespace photodet
