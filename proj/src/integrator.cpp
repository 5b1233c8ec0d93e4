#include "photodet/integrator.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace photodet {

namespace {

const Complex kI(0.0, 1.0);

struct NamedOp {
  std::string name;
  const SparseCx* mat;
};

std::vector<NamedOp> resolve_observables(
    const SystemModel& model, const std::vector<std::string>& names) {
  std::vector<NamedOp> ops;
  for (const auto& n : names) {
    auto it = model.observables.find(n);
    if (it == model.observables.end())
      throw std::invalid_argument("unknown observable '" + n + "'");
    ops.push_back({n, &it->second.mat});
  }
  return ops;
}

const SparseCx* top_projector(const SystemModel& model) {
  auto it = model.observables.find("top_A");
  return it == model.observables.end() ? nullptr : &it->second.mat;
}

/// Prebuilt unconditional Lindblad generator. rho is kept Hermitian along
/// the way, so every term reduces to one sparse*dense product plus an
/// adjoint: B rho + (B rho)† with B = -iH - 1/2 sum L†L, and
/// L rho L† = (L (L rho)†)†.
struct LindbladApplier {
  SparseCx b_op;
  std::vector<SparseCx> channels;
  MatrixCx t1, t2, t3;  // scratch

  explicit LindbladApplier(const SystemModel& model) {
    const int d = model.space.total_dim();
    SparseCx acc = SparseCx(-kI * model.hamiltonian.mat);
    for (const auto& ch : model.channels) {
      SparseCx ldl = SparseCx(ch.op.mat.adjoint()) * ch.op.mat;
      acc -= Complex(0.5, 0.0) * ldl;
      channels.push_back(ch.op.mat);
    }
    acc.makeCompressed();
    b_op = std::move(acc);
    t1.resize(d, d);
    t2.resize(d, d);
    t3.resize(d, d);
  }

  void apply(const MatrixCx& rho, MatrixCx& out) {
    t1.noalias() = b_op * rho;
    out = t1;
    out.noalias() += t1.adjoint();
    for (const auto& l : channels) {
      t2.noalias() = l * rho;
      t3.noalias() = l * t2.adjoint();
      out.noalias() += t3.adjoint();
    }
  }
};

double top_population(const VectorCx& psi, const SparseCx* proj) {
  if (!proj) return 0.0;
  double acc = 0.0;
  for (int c = 0; c < proj->outerSize(); ++c)
    for (SparseCx::InnerIterator it(*proj, c); it; ++it)
      acc += std::real(it.value()) * std::norm(psi(c));
  return acc;
}

double top_population(const MatrixCx& rho, const SparseCx* proj) {
  if (!proj) return 0.0;
  return std::real(expectation_trace(rho, *proj));
}

}  // namespace

int TimeGrid::n_steps() const {
  if (t_end <= 0.0) return 0;
  int n = static_cast<int>(std::ceil(t_end / dt - 1e-12));
  const int r = n % record_stride;
  if (r != 0) n += record_stride - r;
  return n;
}

void TimeGrid::validate(double kappa_max) const {
  if (dt <= 0.0) throw std::invalid_argument("grid.dt must be > 0");
  if (record_stride < 1)
    throw std::invalid_argument("grid.record_stride must be >= 1");
  if (t_end < 0.0) throw std::invalid_argument("grid.t_end must be >= 0");
  if (kappa_max * dt > 0.02 * (1.0 + 1e-9))
    throw std::invalid_argument(
        "grid.dt too large: kappa_max * dt = " +
        std::to_string(kappa_max * dt) + " exceeds the 0.02 stability guard");
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

MatrixCx lindblad_rhs(const SystemModel& model, const MatrixCx& rho) {
  const int d = model.space.total_dim();
  if (rho.rows() != d || rho.cols() != d)
    throw std::invalid_argument("lindblad_rhs: shape mismatch");
  LindbladApplier gen(model);
  MatrixCx out(d, d);
  gen.apply(rho, out);
  return out;
}

ExpectationTraces solve_master(const SystemModel& model,
                               const QuantumState& state0,
                               const TimeGrid& grid,
                               const std::vector<std::string>& observables) {
  grid.validate(model.config.max_rate());
  const auto ops = resolve_observables(model, observables);
  const SparseCx* top = top_projector(model);

  MatrixCx rho = state0.kind == QuantumState::Kind::Mixed
                     ? state0.rho
                     : MatrixCx(state0.psi * state0.psi.adjoint());
  if (rho.rows() != model.space.total_dim())
    throw std::invalid_argument("solve_master: state/model dimension mismatch");

  ExpectationTraces traces;
  traces.dt = grid.record_dt();
  const int n_rec = grid.n_records();
  for (const auto& op : ops) traces.series[op.name] = VectorRe(std::max(n_rec, 1));

  auto record = [&](int slot, double t) {
    traces.t.push_back(t);
    for (const auto& op : ops)
      traces.series[op.name](slot) = std::real(expectation_trace(rho, *op.mat));
    traces.final_top_level_pop = top_population(rho, top);
    traces.max_top_level_pop =
        std::max(traces.max_top_level_pop, traces.final_top_level_pop);
  };

  if (grid.n_steps() == 0) {
    // Degenerate grid: report the initial state's instantaneous values.
    record(0, 0.0);
    return traces;
  }

  LindbladApplier gen(model);
  const int d = model.space.total_dim();
  MatrixCx k1(d, d), k2(d, d), k3(d, d), k4(d, d), stage(d, d);
  const double dt = grid.dt;

  int slot = 0;
  for (int step = 0; step < grid.n_steps(); ++step) {
    gen.apply(rho, k1);
    stage = rho + (0.5 * dt) * k1;
    gen.apply(stage, k2);
    stage = rho + (0.5 * dt) * k2;
    gen.apply(stage, k3);
    stage = rho + dt * k3;
    gen.apply(stage, k4);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // The applier is the Lindbladian only on the Hermitian subspace; strip
    // the rounding-induced anti-Hermitian part so it cannot accumulate.
    stage = rho.adjoint();
    rho += stage;
    rho *= 0.5;

    if ((step + 1) % grid.record_stride == 0)
      record(slot++, (step + 1) * dt);
  }
  traces.final_trace_error = std::abs(rho.trace() - Complex(1.0, 0.0));
  return traces;
}

// ---------------------------------------------------------------------------
// Stochastic solvers.

namespace {

struct Rng {
  std::mt19937_64 engine;
  std::normal_distribution<double> normal;

  explicit Rng(std::uint64_t seed) : engine(seed), normal(0.0, 1.0) {}
  double gaussian() { return normal(engine); }
};

/// Mixed-state Euler-Maruyama step machinery for
/// d rho = L rho dt + sqrt(eta_h kappa_A) H[-i a] rho dW.
struct MixedSmeStepper {
  LindbladApplier lindblad;
  SparseCx m_meas;       // -i sqrt(eta_h kappa_A) * monitored op / sqrt(kappa_A)
  SparseCx x_meas;       // m_meas + m_meas†; <x_meas> = sqrt(eta_h kappa_A) <Y_A>
  MatrixCx drift, noise, u;

  explicit MixedSmeStepper(const SystemModel& model) : lindblad(model) {
    const int d = model.space.total_dim();
    // The monitored channel is L1 = sqrt(kappa_A) a; the measured jump
    // operator in the H superoperator is -i a scaled by sqrt(eta_h kappa_A).
    const SparseCx& l1 = model.monitored_channel().op.mat;
    m_meas = SparseCx((-kI * std::sqrt(model.config.eta_h)) * l1);
    x_meas = SparseCx(m_meas + SparseCx(m_meas.adjoint()));
    x_meas.makeCompressed();
    drift.resize(d, d);
    noise.resize(d, d);
    u.resize(d, d);
  }

  /// Advances rho by one step using dw[0]; returns the current sample
  /// J = sqrt(eta_h kappa_A) <Y_A> + dW/dt.
  double step(MatrixCx& rho, double dt, const double* dw_arr) {
    const double dw = dw_arr[0];
    lindblad.apply(rho, drift);
    const double x = std::real(expectation_trace(rho, x_meas));
    u.noalias() = m_meas * rho;
    noise = u;
    noise.noalias() += u.adjoint();
    noise -= x * rho;

    rho += dt * drift + dw * noise;
    // Rehermitize and renormalize; Euler-Maruyama drifts at O(dt^2) per step.
    u = rho.adjoint();
    rho += u;
    rho *= 0.5;
    const Complex tr = rho.trace();
    if (!std::isfinite(std::real(tr)) || std::abs(tr) < 1e-12)
      throw std::runtime_error("mixed SME step produced an invalid state");
    rho /= tr;
    return x + dw / dt;
  }
};

/// Pure-state diffusive unravelling step machinery. Every channel j gets a
/// diffusive record (the physical one for the monitored channel, fictitious
/// ones otherwise):
///   d psi = [K + sum_j (x_j m_j / 2 - x_j^2/8)] psi dt
///           + sum_j (m_j - x_j/2) psi dW_j,
/// with K = -iH - 1/2 sum_j M_j†M_j, m_j = M_j psi, x_j = 2 Re <psi|m_j>.
struct PureSseStepper {
  SparseCx k_drift;
  std::vector<SparseCx> m_ops;  // index 0 = monitored (-i L1)
  std::vector<VectorCx> m_psi;
  VectorCx phi, psi_new;
  std::vector<double> x;

  explicit PureSseStepper(const SystemModel& model) {
    const int d = model.space.total_dim();
    SparseCx acc = SparseCx(-kI * model.hamiltonian.mat);
    // Monitored channel first so that x[0] is the physical signal.
    m_ops.push_back(SparseCx(-kI * model.monitored_channel().op.mat));
    for (const auto& ch : model.channels)
      if (!ch.monitored) m_ops.push_back(ch.op.mat);
    for (const auto& m : m_ops) {
      SparseCx mdm = SparseCx(m.adjoint()) * m;
      acc -= Complex(0.5, 0.0) * mdm;
    }
    acc.makeCompressed();
    k_drift = std::move(acc);
    m_psi.assign(m_ops.size(), VectorCx(d));
    x.assign(m_ops.size(), 0.0);
    phi.resize(d);
    psi_new.resize(d);
  }

  /// Advances psi by one step; dw must hold one increment per channel.
  /// Returns J = x_0 + dW_0/dt (eta_h = 1 path).
  double step(VectorCx& psi, double dt, const double* dw) {
    phi.noalias() = k_drift * psi;
    double x2_sum = 0.0;
    for (size_t j = 0; j < m_ops.size(); ++j) {
      m_psi[j].noalias() = m_ops[j] * psi;
      x[j] = 2.0 * std::real(psi.dot(m_psi[j]));
      x2_sum += x[j] * x[j];
    }
    psi_new = psi + dt * phi - (dt * x2_sum / 8.0) * psi;
    for (size_t j = 0; j < m_ops.size(); ++j) {
      psi_new += (0.5 * dt * x[j]) * m_psi[j];
      psi_new += dw[j] * (m_psi[j] - (0.5 * x[j]) * psi);
    }
    const double nrm = psi_new.norm();
    if (!std::isfinite(nrm) || nrm < 1e-9)
      throw std::runtime_error("pure SSE step produced an invalid state");
    psi = psi_new / nrm;
    return x[0] + dw[0] / dt;
  }
};

template <typename State, typename Stepper, typename ExpectFn>
TrajectoryRecord run_trajectory(const SystemModel& model, State state,
                                Stepper& stepper, const TimeGrid& grid,
                                std::uint64_t seed, const SmeOptions& opts,
                                int n_noise, ExpectFn&& expect_value) {
  const auto ops = resolve_observables(model, opts.record_traces);
  const SparseCx* top = top_projector(model);

  TrajectoryRecord rec;
  rec.seed = seed;
  rec.dt = grid.record_dt();
  const int n_rec = grid.n_records();
  rec.j = VectorRe::Zero(n_rec);
  for (const auto& op : ops) rec.traces[op.name] = VectorRe(n_rec);

  Rng rng(seed);
  const double sqrt_dt = std::sqrt(grid.dt);
  std::vector<double> dw(n_noise);

  double block_sum = 0.0;
  int slot = 0;
  for (int step = 0; step < grid.n_steps(); ++step) {
    for (int j = 0; j < n_noise; ++j) dw[j] = sqrt_dt * rng.gaussian();
    block_sum += stepper.step(state, grid.dt, dw.data());
    if ((step + 1) % grid.record_stride == 0) {
      rec.j(slot) = block_sum / grid.record_stride;
      block_sum = 0.0;
      for (const auto& op : ops)
        rec.traces[op.name](slot) = std::real(expect_value(state, *op.mat));
      rec.final_top_level_pop = top_population(state, top);
      rec.max_top_level_pop =
          std::max(rec.max_top_level_pop, rec.final_top_level_pop);
      ++slot;
    }
  }
  return rec;
}

}  // namespace

TrajectoryRecord solve_sme_trajectory(const SystemModel& model,
                                      const QuantumState& state0,
                                      const TimeGrid& grid,
                                      std::uint64_t seed,
                                      const SmeOptions& opts) {
  grid.validate(model.config.max_rate());
  MatrixCx rho = state0.kind == QuantumState::Kind::Mixed
                     ? state0.rho
                     : MatrixCx(state0.psi * state0.psi.adjoint());
  if (rho.rows() != model.space.total_dim())
    throw std::invalid_argument("solve_sme_trajectory: dimension mismatch");

  MixedSmeStepper stepper(model);
  auto expect = [](const MatrixCx& r, const SparseCx& op) {
    return expectation_trace(r, op);
  };
  // One physical Wiener increment per step (the mixed SME keeps the
  // unmonitored channels as plain dissipators).
  return run_trajectory(model, std::move(rho), stepper, grid, seed, opts, 1,
                        expect);
}

TrajectoryRecord solve_sme_pure(const SystemModel& model,
                                const QuantumState& state0,
                                const TimeGrid& grid, std::uint64_t seed,
                                const SmeOptions& opts) {
  if (model.config.eta_h < 1.0)
    return solve_sme_trajectory(model, state0, grid, seed, opts);
  if (state0.kind != QuantumState::Kind::Pure)
    throw std::invalid_argument("solve_sme_pure requires a pure initial state");
  grid.validate(model.config.max_rate());
  if (state0.psi.size() != model.space.total_dim())
    throw std::invalid_argument("solve_sme_pure: dimension mismatch");

  PureSseStepper stepper(model);
  auto expect = [](const VectorCx& p, const SparseCx& op) {
    return expectation(p, op);
  };
  return run_trajectory(model, VectorCx(state0.psi), stepper, grid, seed, opts,
                        static_cast<int>(stepper.m_ops.size()), expect);
}

std::vector<TrajectoryRecord> run_ensemble(const SystemModel& model,
                                           const TimeGrid& grid,
                                           const EnsembleOptions& opts) {
  if (opts.n_traj < 1)
    throw std::invalid_argument("run_ensemble: n_traj must be >= 1");
  grid.validate(model.config.max_rate());

  const bool use_pure =
      opts.solver == SolverChoice::PureFast ||
      (opts.solver == SolverChoice::Auto && model.config.eta_h >= 1.0);
  const QuantumState state0 = initial_state(model.config, model.space);

  SmeOptions sme_opts{opts.record_traces};
  std::vector<TrajectoryRecord> records(opts.n_traj);
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= opts.n_traj) return;
      const std::uint64_t seed = derive_seed(opts.base_seed, k);
      try {
        records[k] = use_pure
                         ? solve_sme_pure(model, state0, grid, seed, sme_opts)
                         : solve_sme_trajectory(model, state0, grid, seed,
                                                sme_opts);
      } catch (const std::exception& e) {
        records[k].seed = seed;
        records[k].aborted = true;
        records[k].abort_reason = e.what();
      }
    }
  };

  const int n_workers = std::max(1, std::min(opts.n_workers, opts.n_traj));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

}  // namespace photodet
