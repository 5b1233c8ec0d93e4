#include "photodet/model.hpp"

#include <cmath>
#include <stdexcept>

namespace photodet {

namespace {

const Complex kI(0.0, 1.0);

std::string absorber_label(int i) { return "B" + std::to_string(i + 1); }

HilbertSpace make_space(const DetectorConfig& cfg) {
  std::vector<SubsystemSpec> subs;
  subs.push_back({"C", cfg.trunc.dim_c});
  for (int i = 0; i < cfg.n_absorbers; ++i)
    subs.push_back({absorber_label(i), cfg.trunc.dim_b});
  subs.push_back({"A", cfg.trunc.dim_a});
  return HilbertSpace(std::move(subs));
}

/// Shared scaffolding: embedded mode operators and the cascade pieces.
struct ModeSet {
  Operator a, c, bright;           // annihilation operators
  std::vector<Operator> b;         // per-absorber annihilation
  Operator n_b, x_a, y_a;          // N_B, X_A, Y_A
};

ModeSet make_modes(const DetectorConfig& cfg, const HilbertSpace& space) {
  ModeSet m;
  m.a = embed(annihilation_op(cfg.trunc.dim_a), "A", space);
  m.c = embed(annihilation_op(cfg.trunc.dim_c), "C", space);
  for (int i = 0; i < cfg.n_absorbers; ++i)
    m.b.push_back(embed(annihilation_op(cfg.trunc.dim_b), absorber_label(i),
                        space));
  const double root_n = std::sqrt(static_cast<double>(cfg.n_absorbers));
  m.bright = (1.0 / root_n) * m.b[0];
  for (int i = 1; i < cfg.n_absorbers; ++i)
    m.bright = m.bright + (1.0 / root_n) * m.b[i];

  m.n_b = adjoint(m.b[0]) * m.b[0];
  for (int i = 1; i < cfg.n_absorbers; ++i)
    m.n_b = m.n_b + adjoint(m.b[i]) * m.b[i];

  auto quad = quadratures(m.a);
  m.x_a = std::move(quad.x);
  m.y_a = std::move(quad.y);
  return m;
}

/// Interaction-picture cascade coupling routing the source output into the
/// target mode, matched to the shared decay channel
/// L = sqrt(kappa_tgt) target + sqrt(kappa_src) source.
Operator cascade_term(const Operator& source, const Operator& target,
                      double kappa_src, double kappa_tgt) {
  const double g = std::sqrt(kappa_src * kappa_tgt);
  // + i g/2 (c† b - b† c): with the composite decay channel above this makes
  // the source evolve freely while driving the target (unidirectional flow).
  return (kI * (g / 2.0)) * (adjoint(source) * target -
                             adjoint(target) * source);
}

SystemModel assemble(const DetectorConfig& cfg, const HilbertSpace& space,
                     ModeSet& m, Operator h,
                     std::vector<CollapseChannel> extra_channels) {
  if (hermiticity_defect(h.mat) > 1e-10)
    throw std::runtime_error("model builder produced a non-Hermitian H");

  SystemModel model;
  model.space = space;
  model.hamiltonian = std::move(h);
  model.config = cfg;

  Operator l1 = std::sqrt(cfg.kappa_a) * m.a;
  Operator l2 = std::sqrt(cfg.kappa_b) * m.bright +
                std::sqrt(cfg.kappa_c) * m.c;
  model.channels.push_back({std::move(l1), true, "homodyne_a"});
  model.channels.push_back({std::move(l2), false, "waveguide"});
  for (auto& ch : extra_channels) model.channels.push_back(std::move(ch));

  model.y_meas = m.y_a;
  model.observables["N_B"] = m.n_b;
  model.observables["n_A"] = adjoint(m.a) * m.a;
  model.observables["n_C"] = adjoint(m.c) * m.c;
  model.observables["Y_A"] = m.y_a;
  model.observables["X_A"] = m.x_a;
  model.observables["top_A"] =
      embed(top_level_projector(cfg.trunc.dim_a), "A", space);
  return model;
}

}  // namespace

bool DispersiveParams::finite_decoherence() const {
  return std::isfinite(t1) || std::isfinite(t2);
}

double DispersiveParams::gamma_phi() const {
  const double r1 = std::isfinite(t1) ? 1.0 / t1 : 0.0;
  const double r2 = std::isfinite(t2) ? 1.0 / t2 : 0.0;
  return r2 - 0.5 * r1;
}

double DetectorConfig::effective_g_z() const {
  if (variant == ModelVariant::Dispersive)
    return 2.0 * dispersive.chi * dispersive.alpha;
  return g_z;
}

std::vector<double> DetectorConfig::effective_deltas() const {
  std::vector<double> d = deltas;
  if (d.empty()) d.assign(n_absorbers, 0.0);
  return d;
}

double DetectorConfig::max_rate() const {
  double m = std::max({kappa_a, kappa_b, kappa_c, std::abs(effective_g_z())});
  for (double d : effective_deltas()) m = std::max(m, std::abs(d));
  if (variant == ModelVariant::Dispersive) {
    m = std::max({m, std::abs(dispersive.chi), std::abs(dispersive.delta_plus)});
    if (std::isfinite(dispersive.t1)) m = std::max(m, 1.0 / dispersive.t1);
    if (std::isfinite(dispersive.t2)) m = std::max(m, 1.0 / dispersive.t2);
  }
  return m;
}

void DetectorConfig::validate() const {
  if (n_absorbers < 1)
    throw std::invalid_argument("detector.n_absorbers must be >= 1");
  if (kappa_a <= 0)
    throw std::invalid_argument("detector.kappa_a must be > 0");
  // kappa_b = kappa_c = 0 is allowed: it isolates the QND interaction.
  if (kappa_b < 0 || kappa_c < 0)
    throw std::invalid_argument("detector rates kappa_b/c must be >= 0");
  if (!(eta_h > 0.0 && eta_h <= 1.0))
    throw std::invalid_argument("detector.eta_h must lie in (0, 1]");
  if (!deltas.empty() && static_cast<int>(deltas.size()) != n_absorbers)
    throw std::invalid_argument(
        "detector.deltas must have one entry per absorber (got " +
        std::to_string(deltas.size()) + ", expected " +
        std::to_string(n_absorbers) + ")");
  if (trunc.dim_a < 2 || trunc.dim_b < 2 || trunc.dim_c < 2)
    throw std::invalid_argument("truncation dims must be >= 2");
  if (variant == ModelVariant::Dispersive) {
    if (dispersive.chi < 0.0 || dispersive.alpha < 0.0)
      throw std::invalid_argument(
          "dispersive chi and alpha must be >= 0");
    const double t1 = dispersive.t1, t2 = dispersive.t2;
    if (std::isfinite(t1) && t1 <= 0)
      throw std::invalid_argument("dispersive.t1 must be > 0");
    if (std::isfinite(t2) && t2 <= 0)
      throw std::invalid_argument("dispersive.t2 must be > 0");
    if (dispersive.gamma_phi() < -1e-12)
      throw std::invalid_argument(
          "invalid T1/T2 pair: requires T2 <= 2*T1 (gamma_phi >= 0)");
  } else {
    if (g_z < 0)
      throw std::invalid_argument("detector.g_z must be >= 0");
  }
}

const CollapseChannel& SystemModel::monitored_channel() const {
  for (const auto& ch : channels)
    if (ch.monitored) return ch;
  throw std::logic_error("SystemModel has no monitored channel");
}

SystemModel build_single_absorber(const DetectorConfig& cfg) {
  cfg.validate();
  if (cfg.n_absorbers != 1)
    throw std::invalid_argument(
        "build_single_absorber requires n_absorbers == 1");
  if (cfg.variant != ModelVariant::Ideal)
    throw std::invalid_argument("build_single_absorber requires Ideal variant");

  const HilbertSpace space = make_space(cfg);
  ModeSet m = make_modes(cfg, space);
  const double delta = cfg.effective_deltas()[0];

  Operator h = cfg.g_z * (m.n_b * m.x_a) +
               cascade_term(m.c, m.bright, cfg.kappa_c, cfg.kappa_b);
  if (delta != 0.0) h = h + delta * m.n_b;
  return assemble(cfg, space, m, std::move(h), {});
}

SystemModel build_ensemble(const DetectorConfig& cfg) {
  cfg.validate();
  if (cfg.variant != ModelVariant::Ideal)
    throw std::invalid_argument("build_ensemble requires Ideal variant");

  const HilbertSpace space = make_space(cfg);
  ModeSet m = make_modes(cfg, space);
  const auto deltas = cfg.effective_deltas();

  Operator h = cfg.g_z * (m.n_b * m.x_a) +
               cascade_term(m.c, m.bright, cfg.kappa_c, cfg.kappa_b);
  for (int i = 0; i < cfg.n_absorbers; ++i)
    if (deltas[i] != 0.0)
      h = h + deltas[i] * (adjoint(m.b[i]) * m.b[i]);
  return assemble(cfg, space, m, std::move(h), {});
}

SystemModel build_dispersive(const DetectorConfig& cfg) {
  cfg.validate();
  if (cfg.variant != ModelVariant::Dispersive)
    throw std::invalid_argument("build_dispersive requires Dispersive variant");

  const HilbertSpace space = make_space(cfg);
  ModeSet m = make_modes(cfg, space);
  const auto deltas = cfg.effective_deltas();
  const DispersiveParams& dp = cfg.dispersive;
  const double g_z = cfg.effective_g_z();

  Operator h = g_z * (m.n_b * m.x_a) +
               cascade_term(m.c, m.bright, cfg.kappa_c, cfg.kappa_b);
  for (int i = 0; i < cfg.n_absorbers; ++i)
    if (deltas[i] != 0.0)
      h = h + deltas[i] * (adjoint(m.b[i]) * m.b[i]);
  h = h + (2.0 * dp.chi) * (m.n_b * (adjoint(m.a) * m.a));
  if (dp.delta_plus != 0.0)
    h = h + dp.delta_plus * (adjoint(m.bright) * m.bright);

  std::vector<CollapseChannel> extra;
  if (dp.finite_decoherence()) {
    const double relax = std::isfinite(dp.t1) ? 1.0 / dp.t1 : 0.0;
    const double gphi = dp.gamma_phi();
    for (int i = 0; i < cfg.n_absorbers; ++i) {
      const std::string id = std::to_string(i + 1);
      if (relax > 0)
        extra.push_back({std::sqrt(relax) * m.b[i], false, "relax_b" + id});
      // sqrt(2 gamma_phi) b†b damps two-level coherences at exactly gamma_phi,
      // so 1/T2 = 1/(2 T1) + gamma_phi is the total coherence decay rate.
      if (gphi > 0)
        extra.push_back({std::sqrt(2.0 * gphi) * (adjoint(m.b[i]) * m.b[i]),
                         false, "dephase_b" + id});
    }
  }
  return assemble(cfg, space, m, std::move(h), std::move(extra));
}

SystemModel build_model(const DetectorConfig& cfg) {
  if (cfg.variant == ModelVariant::Dispersive) return build_dispersive(cfg);
  if (cfg.n_absorbers == 1) return build_single_absorber(cfg);
  return build_ensemble(cfg);
}

QuantumState initial_state(const DetectorConfig& cfg,
                           const HilbertSpace& space) {
  std::vector<int> levels(space.subsystems().size(), 0);
  if (cfg.with_photon) levels[space.index_of("C")] = 1;
  return QuantumState::basis_state(space, levels);
}

}  // namespace photodet
