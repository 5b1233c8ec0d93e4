#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "photodet/integrator.hpp"
#include "photodet/presets.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace photodet;

namespace {

DetectorConfig tiny_n1(double g_z = 1.0) {
  DetectorConfig cfg = ideal_preset(1);
  cfg.g_z = g_z;
  cfg.trunc.dim_a = 8;
  return cfg;
}

TimeGrid grid_of(double t_end, double dt, int stride = 1) {
  TimeGrid g;
  g.t_end = t_end;
  g.dt = dt;
  g.record_stride = stride;
  return g;
}

double mean(const VectorRe& v) { return v.sum() / v.size(); }

}  // namespace

TEST_CASE("time grid rounding and stability guard") {
  TimeGrid g = grid_of(1.0, 0.3, 2);
  CHECK(g.n_steps() == 4);  // ceil(3.33) = 4, already a multiple of 2
  CHECK(g.n_records() == 2);

  g = grid_of(10.0, 0.01, 1);
  CHECK(g.n_steps() == 1000);
  CHECK_NOTHROW(g.validate(2.0));         // kappa dt = 0.02, at the guard
  CHECK_THROWS_AS(g.validate(2.1), std::invalid_argument);
  CHECK_THROWS_AS(grid_of(1.0, -0.1).validate(1.0), std::invalid_argument);
}

TEST_CASE("derived seeds are deterministic and distinct") {
  CHECK(derive_seed(42, 0) == derive_seed(42, 0));
  CHECK(derive_seed(42, 0) != derive_seed(42, 1));
  CHECK(derive_seed(42, 0) != derive_seed(43, 0));
}

TEST_CASE("lindblad_rhs: decay generator, trace and Hermiticity") {
  DetectorConfig cfg = tiny_n1(0.0);
  const SystemModel model = build_single_absorber(cfg);
  const QuantumState s0 = initial_state(cfg, model.space);
  const MatrixCx rho = s0.to_mixed().rho;

  const MatrixCx rhs = lindblad_rhs(model, rho);
  CHECK(std::abs(rhs.trace()) < 1e-10);
  CHECK((rhs - rhs.adjoint()).cwiseAbs().maxCoeff() < 1e-12);

  // d<c†c>/dt = -kappa_c <c†c> for the cascade source.
  const Complex dn = expectation_trace(rhs, model.observables.at("n_C").mat);
  CHECK(std::real(dn) == doctest::Approx(-cfg.kappa_c).epsilon(1e-10));

  // On vacuum every channel annihilates the state: rhs = -i[H, rho] = 0 here.
  DetectorConfig vac_cfg = cfg;
  vac_cfg.with_photon = false;
  const MatrixCx rho_vac = initial_state(vac_cfg, model.space).to_mixed().rho;
  CHECK(lindblad_rhs(model, rho_vac).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("master equation reproduces the closed-form linear cascade") {
  DetectorConfig cfg = tiny_n1(0.0);  // g_z = 0: exactly the linear system
  const SystemModel model = build_single_absorber(cfg);
  const TimeGrid grid = grid_of(60.0, 0.01, 10);

  const auto traces = solve_master(model, initial_state(cfg, model.space),
                                   grid, {"n_C", "N_B", "Y_A"});
  CHECK(traces.final_trace_error < 1e-8);

  double max_dev_c = 0.0, max_dev_b = 0.0, max_y = 0.0;
  for (size_t k = 0; k < traces.t.size(); ++k) {
    const double t = traces.t[k];
    max_dev_c = std::max(
        max_dev_c, std::abs(traces.series.at("n_C")(k) -
                            oracles::cascade_source_population(cfg.kappa_c, t)));
    max_dev_b = std::max(
        max_dev_b,
        std::abs(traces.series.at("N_B")(k) -
                 oracles::cascade_target_population(cfg.kappa_b, cfg.kappa_c,
                                                    0.0, t)));
    max_y = std::max(max_y, std::abs(traces.series.at("Y_A")(k)));
  }
  CHECK(max_dev_c < 1e-6);
  CHECK(max_dev_b < 1e-4);
  CHECK(max_y < 1e-10);  // no coupling to the measurement mode at g_z = 0

  // Photon fully emitted: integral of <L2† L2> equals the initial excitation.
  SystemModel with_emission = model;
  const SparseCx& l2 = model.channels[1].op.mat;
  const Operator emission{model.space, SparseCx(SparseCx(l2.adjoint()) * l2)};
  with_emission.observables["emission"] = emission;
  const QuantumState s0 = initial_state(cfg, model.space);
  const auto em =
      solve_master(with_emission, s0, grid_of(300.0, 0.02, 10), {"emission"});
  const VectorRe& e = em.series.at("emission");
  // Records start one block after t = 0; include the initial value.
  double acc = 0.5 * (std::real(expectation(s0, emission)) + e(0));
  for (int k = 0; k + 1 < e.size(); ++k) acc += 0.5 * (e(k) + e(k + 1));
  acc *= em.dt;
  CHECK(acc == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("detuned cascade matches the oracle") {
  DetectorConfig cfg = tiny_n1(0.0);
  cfg.deltas = {0.45};
  const SystemModel model = build_single_absorber(cfg);
  const auto traces = solve_master(model, initial_state(cfg, model.space),
                                   grid_of(40.0, 0.01, 10), {"N_B"});
  double max_dev = 0.0;
  for (size_t k = 0; k < traces.t.size(); ++k)
    max_dev = std::max(
        max_dev,
        std::abs(traces.series.at("N_B")(k) -
                 oracles::cascade_target_population(cfg.kappa_b, cfg.kappa_c,
                                                    0.45, traces.t[k])));
  CHECK(max_dev < 1e-4);
}

TEST_CASE("QND invariant: N_B is conserved when the waveguide is closed") {
  DetectorConfig cfg = tiny_n1(1.0);
  cfg.kappa_b = 0.0;
  cfg.kappa_c = 0.0;
  const SystemModel model = build_single_absorber(cfg);

  // Superposition in the absorber; the unconditional mean must stay put.
  VectorCx psi = VectorCx::Zero(model.space.total_dim());
  psi(model.space.basis_index({0, 0, 0})) = 1.0 / std::sqrt(2.0);
  psi(model.space.basis_index({0, 1, 0})) = 1.0 / std::sqrt(2.0);
  const QuantumState s0 = QuantumState::pure(model.space, psi);

  const auto traces =
      solve_master(model, s0, grid_of(100.0, 0.02, 50), {"N_B"});
  const VectorRe& nb = traces.series.at("N_B");
  double drift = 0.0;
  for (int k = 0; k < nb.size(); ++k) drift = std::max(drift, std::abs(nb(k) - 0.5));
  CHECK(drift < 1e-6);

  // A conditional trajectory prepared in an N_B eigenstate stays in it.
  const QuantumState eigen = QuantumState::basis_state(model.space, {0, 1, 0});
  const auto rec = solve_sme_pure(model, eigen, grid_of(50.0, 0.005, 100), 7,
                                  {{"N_B"}});
  for (int k = 0; k < rec.traces.at("N_B").size(); ++k)
    CHECK(std::abs(rec.traces.at("N_B")(k) - 1.0) < 1e-6);
}

TEST_CASE("bright/dark equivalence: uniform N=3 ensemble vs single absorber") {
  DetectorConfig cfg3 = ideal_preset(3);
  cfg3.g_z = 0.5;
  cfg3.trunc.dim_a = 8;
  cfg3.deltas = {0.3, 0.3, 0.3};

  DetectorConfig cfg1 = tiny_n1(0.5);
  cfg1.deltas = {0.3};

  const TimeGrid grid = grid_of(30.0, 0.01, 10);
  const SystemModel m3 = build_ensemble(cfg3);
  const SystemModel m1 = build_single_absorber(cfg1);
  const auto t3 = solve_master(m3, initial_state(cfg3, m3.space), grid,
                               {"N_B", "n_C", "Y_A", "n_A"});
  const auto t1 = solve_master(m1, initial_state(cfg1, m1.space), grid,
                               {"N_B", "n_C", "Y_A", "n_A"});
  for (const auto& name : {"N_B", "n_C", "Y_A", "n_A"}) {
    const VectorRe& a = t3.series.at(name);
    const VectorRe& b = t1.series.at(name);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("cascade is unidirectional: source ignores the absorber rate") {
  DetectorConfig cfg = tiny_n1(0.0);
  const TimeGrid grid = grid_of(30.0, 0.005, 20);
  auto run = [&](double kappa_b) {
    DetectorConfig c = cfg;
    c.kappa_b = kappa_b;
    const SystemModel m = build_single_absorber(c);
    return solve_master(m, initial_state(c, m.space), grid, {"n_C"});
  };
  const VectorRe a = run(1.0).series.at("n_C");
  const VectorRe b = run(3.0).series.at("n_C");
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("mixed SME: determinism, vacuum statistics, state validity") {
  DetectorConfig cfg = tiny_n1(1.0);
  cfg.with_photon = false;
  const SystemModel model = build_single_absorber(cfg);
  const TimeGrid grid = grid_of(10.0, 0.01, 1);
  const QuantumState s0 = initial_state(cfg, model.space);

  const auto rec1 = solve_sme_trajectory(model, s0, grid, 99, {{"n_A"}});
  const auto rec2 = solve_sme_trajectory(model, s0, grid, 99, {{"n_A"}});
  CHECK(rec1.j == rec2.j);  // bit-identical for identical seeds

  // E[J] = 0 on vacuum and Var per sample 1/dt: check the pooled mean.
  int n_traj = 60;
  double pooled = 0.0;
  long count = 0;
  for (int k = 0; k < n_traj; ++k) {
    const auto rec = solve_sme_trajectory(model, s0, grid, derive_seed(3, k));
    pooled += rec.j.sum();
    count += rec.j.size();
  }
  const double sigma = std::sqrt(1.0 / grid.dt / count);
  CHECK(std::abs(pooled / count) < 3.0 * sigma);
}

TEST_CASE("Wiener integral variance: var(int J dt) = T on vacuum") {
  DetectorConfig cfg = tiny_n1(0.0);
  cfg.with_photon = false;
  cfg.trunc.dim_a = 2;
  const SystemModel model = build_single_absorber(cfg);
  const TimeGrid grid = grid_of(8.0, 0.01, 4);  // strided records
  const QuantumState s0 = initial_state(cfg, model.space);

  const int n = 400;
  double s1 = 0, s2 = 0;
  for (int k = 0; k < n; ++k) {
    const auto rec = solve_sme_pure(model, s0, grid, derive_seed(17, k));
    const double w = rec.j.sum() * rec.dt;
    s1 += w;
    s2 += w * w;
  }
  const double var = s2 / n - (s1 / n) * (s1 / n);
  // Sample variance of a chi^2-ish estimator: rel std ~ sqrt(2/n).
  CHECK(std::abs(var - 8.0) < 3.0 * 8.0 * std::sqrt(2.0 / n));
}

TEST_CASE("pure SSE ensemble mean matches the master equation") {
  DetectorConfig cfg = tiny_n1(1.0);
  const SystemModel model = build_single_absorber(cfg);
  const TimeGrid grid = grid_of(25.0, 0.005, 20);

  const auto me = solve_master(model, initial_state(cfg, model.space), grid,
                               {"Y_A", "N_B"});

  EnsembleOptions opts;
  opts.n_traj = 500;
  opts.base_seed = 21;
  opts.record_traces = {"Y_A"};
  const auto records = run_ensemble(model, grid, opts);

  const int n_rec = grid.n_records();
  VectorRe sum = VectorRe::Zero(n_rec), sum2 = VectorRe::Zero(n_rec);
  for (const auto& rec : records) {
    REQUIRE(!rec.aborted);
    sum += rec.traces.at("Y_A");
    sum2 += rec.traces.at("Y_A").cwiseProduct(rec.traces.at("Y_A"));
  }
  double chi2 = 0.0;
  int dof = 0;
  double max_z = 0.0;
  for (int k = 0; k < n_rec; ++k) {
    const double m = sum(k) / opts.n_traj;
    const double v = sum2(k) / opts.n_traj - m * m;
    const double se = std::sqrt(std::max(v, 1e-12) / opts.n_traj);
    const double z = (m - me.series.at("Y_A")(k)) / se;
    chi2 += z * z;
    max_z = std::max(max_z, std::abs(z));
    ++dof;
  }
  // Neighbouring samples of the ensemble-mean error are correlated over the
  // system response time, so the effective dof is T / tau_corr, not n_rec.
  CHECK(chi2 / dof < 3.0);
  CHECK(max_z < 5.0);
}

TEST_CASE("pure and mixed solvers agree on a single decaying mode") {
  DetectorConfig cfg = tiny_n1(0.0);
  cfg.trunc.dim_a = 2;
  const SystemModel model = build_single_absorber(cfg);
  const TimeGrid grid = grid_of(20.0, 0.01, 20);
  const QuantumState s0 = initial_state(cfg, model.space);

  const int n = 300;
  VectorRe mean_pure = VectorRe::Zero(grid.n_records());
  for (int k = 0; k < n; ++k) {
    const auto rec =
        solve_sme_pure(model, s0, grid, derive_seed(5, k), {{"n_C"}});
    mean_pure += rec.traces.at("n_C") / n;
  }
  double max_dev = 0.0;
  for (int k = 0; k < grid.n_records(); ++k) {
    const double t = (k + 1) * grid.record_dt();
    max_dev = std::max(max_dev,
                       std::abs(mean_pure(k) - std::exp(-cfg.kappa_c * t)));
  }
  CHECK(max_dev < 0.05);  // MC error at n = 300; conditional spread is O(1)
}

TEST_CASE("mixed SME stays a valid density matrix") {
  DetectorConfig cfg = tiny_n1(1.0);
  cfg.eta_h = 0.6;
  const SystemModel model = build_single_absorber(cfg);
  const TimeGrid grid = grid_of(10.0, 0.005, 100);
  MatrixCx rho = initial_state(cfg, model.space).to_mixed().rho;

  // Drive the stepper directly so we can inspect the final state.
  const auto rec = solve_sme_trajectory(model, initial_state(cfg, model.space),
                                        grid, 4, {{"n_A", "N_B"}});
  CHECK(!rec.aborted);
  for (const auto& [name, tr] : rec.traces)
    for (int k = 0; k < tr.size(); ++k) CHECK(std::isfinite(tr(k)));
  CHECK(rec.traces.at("N_B").minCoeff() > -1e-6);
}

TEST_CASE("solve_sme_pure falls back to the mixed solver when eta_h < 1") {
  DetectorConfig cfg = tiny_n1(1.0);
  cfg.eta_h = 0.5;
  const SystemModel model = build_single_absorber(cfg);
  const TimeGrid grid = grid_of(5.0, 0.01, 10);
  const QuantumState s0 = initial_state(cfg, model.space);
  const auto pure_path = solve_sme_pure(model, s0, grid, 12);
  const auto mixed_path = solve_sme_trajectory(model, s0, grid, 12);
  CHECK(pure_path.j == mixed_path.j);
}

TEST_CASE("ensemble runner: index seeding and worker-count invariance") {
  DetectorConfig cfg = tiny_n1(1.0);
  const SystemModel model = build_single_absorber(cfg);
  const TimeGrid grid = grid_of(5.0, 0.01, 10);

  EnsembleOptions opts;
  opts.n_traj = 12;
  opts.base_seed = 77;

  const auto one = run_ensemble(model, grid, opts);
  CHECK(one[0].j ==
        solve_sme_pure(model, initial_state(cfg, model.space), grid,
                       derive_seed(77, 0))
            .j);

  opts.n_workers = 4;
  const auto four = run_ensemble(model, grid, opts);
  opts.n_workers = 8;
  const auto eight = run_ensemble(model, grid, opts);
  for (int k = 0; k < opts.n_traj; ++k) {
    CHECK(one[k].j == four[k].j);
    CHECK(one[k].j == eight[k].j);
    CHECK(one[k].seed == four[k].seed);
  }
}

TEST_CASE("degenerate zero-length grid reports initial values") {
  DetectorConfig cfg = tiny_n1(1.0);
  const SystemModel model = build_single_absorber(cfg);
  const auto traces = solve_master(model, initial_state(cfg, model.space),
                                   grid_of(0.0, 0.01), {"n_C"});
  REQUIRE(traces.t.size() == 1);
  CHECK(traces.series.at("n_C")(0) == doctest::Approx(1.0));
}
