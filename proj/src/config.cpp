#include "photodet/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace photodet {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// Sectioned key-value file: [section] headers, key = value lines,
/// '#' comments. Tracks consumption so unknown keys are rejected.
class KvFile {
public:
  explicit KvFile(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          fail(line_no, "malformed section header '" + line + "'");
        section = trim(line.substr(1, line.size() - 2));
        sections_.insert(section);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail(line_no, "expected 'key = value', got '" + line + "'");
      if (section.empty()) fail(line_no, "key outside of any [section]");
      const std::string key = trim(line.substr(0, eq));
      values_[section + "." + key] = trim(line.substr(eq + 1));
    }
  }

  bool has_section(const std::string& s) const { return sections_.count(s); }

  std::optional<std::string> get(const std::string& section,
                                 const std::string& key) {
    const std::string full = section + "." + key;
    auto it = values_.find(full);
    if (it == values_.end()) return std::nullopt;
    consumed_.insert(full);
    return it->second;
  }

  std::string require(const std::string& section, const std::string& key) {
    auto v = get(section, key);
    if (!v)
      throw std::invalid_argument("config: missing required key '" + key +
                                  "' in [" + section + "]");
    return *v;
  }

  void reject_unconsumed() const {
    for (const auto& [key, value] : values_)
      if (!consumed_.count(key))
        throw std::invalid_argument("config: unknown key '" + key + "'");
  }

private:
  [[noreturn]] static void fail(int line_no, const std::string& what) {
    throw std::invalid_argument("config line " + std::to_string(line_no) +
                                ": " + what);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> sections_;
  std::set<std::string> consumed_;
};

double to_double(const std::string& v, const std::string& ctx) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::invalid_argument("config: '" + ctx + "' is not a number: '" +
                                v + "'");
  }
}

long long to_int(const std::string& v, const std::string& ctx) {
  try {
    size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::invalid_argument("config: '" + ctx + "' is not an integer: '" +
                                v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& ctx) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: '" + ctx + "' is not a boolean: '" +
                              v + "'");
}

std::vector<double> to_double_list(const std::string& v,
                                   const std::string& ctx) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(to_double(trim(item), ctx));
  if (out.empty())
    throw std::invalid_argument("config: empty list for '" + ctx + "'");
  return out;
}

/// "2.2:6.0:0.2" range, a comma list, or a single value.
std::vector<double> to_threshold_grid(const std::string& v,
                                      const std::string& ctx) {
  if (v.find(':') != std::string::npos) {
    std::stringstream ss(v);
    std::string a, b, c;
    std::getline(ss, a, ':');
    std::getline(ss, b, ':');
    std::getline(ss, c);
    const double lo = to_double(trim(a), ctx), hi = to_double(trim(b), ctx),
                 step = to_double(trim(c), ctx);
    if (step <= 0 || hi < lo)
      throw std::invalid_argument("config: bad range for '" + ctx + "'");
    std::vector<double> out;
    for (double x = lo; x <= hi + 1e-9 * step; x += step) out.push_back(x);
    return out;
  }
  return to_double_list(v, ctx);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  KvFile kv(text);
  ExperimentConfig cfg;

  // --- [detector] ---
  const std::string variant = kv.require("detector", "variant");
  DetectorConfig& det = cfg.detector;
  det.n_absorbers =
      static_cast<int>(to_int(kv.require("detector", "n_absorbers"),
                              "detector.n_absorbers"));
  if (auto v = kv.get("detector", "eta_h"))
    det.eta_h = to_double(*v, "detector.eta_h");
  if (auto v = kv.get("detector", "dim_a"))
    det.trunc.dim_a = static_cast<int>(to_int(*v, "detector.dim_a"));
  if (auto v = kv.get("detector", "dim_b"))
    det.trunc.dim_b = static_cast<int>(to_int(*v, "detector.dim_b"));
  if (auto v = kv.get("detector", "dim_c"))
    det.trunc.dim_c = static_cast<int>(to_int(*v, "detector.dim_c"));

  if (variant == "ideal") {
    det.variant = ModelVariant::Ideal;
    det.kappa_b = 1.0;  // the unit of the ideal regime
    det.kappa_a = to_double(kv.require("detector", "kappa_a_in_kB_units"),
                            "detector.kappa_a_in_kB_units");
    det.kappa_c = to_double(kv.require("detector", "kappa_c_in_kB_units"),
                            "detector.kappa_c_in_kB_units");
    det.g_z = to_double(kv.require("detector", "g_z_in_kB_units"),
                        "detector.g_z_in_kB_units");
    if (auto v = kv.get("detector", "deltas_in_kB_units"))
      det.deltas = to_double_list(*v, "detector.deltas_in_kB_units");
  } else if (variant == "dispersive") {
    det.variant = ModelVariant::Dispersive;
    det.trunc.dim_a = 20;
    if (auto v = kv.get("detector", "dim_a"))
      det.trunc.dim_a = static_cast<int>(to_int(*v, "detector.dim_a"));
    // Angular rates in 1/us from kappa/2pi given in MHz.
    det.kappa_a = kTwoPi * to_double(kv.require("detector", "kappa_a_over_2pi_MHz"),
                                     "detector.kappa_a_over_2pi_MHz");
    det.kappa_b = kTwoPi * to_double(kv.require("detector", "kappa_b_over_2pi_MHz"),
                                     "detector.kappa_b_over_2pi_MHz");
    det.kappa_c = kTwoPi * to_double(kv.require("detector", "kappa_c_over_2pi_MHz"),
                                     "detector.kappa_c_over_2pi_MHz");
    det.dispersive.chi = kTwoPi * to_double(kv.require("detector", "chi_over_2pi_MHz"),
                                            "detector.chi_over_2pi_MHz");
    det.dispersive.alpha =
        to_double(kv.require("detector", "alpha"), "detector.alpha");
    if (auto v = kv.get("detector", "delta_plus_over_2pi_MHz"))
      det.dispersive.delta_plus =
          kTwoPi * to_double(*v, "detector.delta_plus_over_2pi_MHz");
    if (auto v = kv.get("detector", "deltas_over_2pi_MHz")) {
      det.deltas = to_double_list(*v, "detector.deltas_over_2pi_MHz");
      for (double& d : det.deltas) d *= kTwoPi;
    }
    if (auto v = kv.get("detector", "t1_us"))
      det.dispersive.t1 = to_double(*v, "detector.t1_us");
    if (auto v = kv.get("detector", "t2_us"))
      det.dispersive.t2 = to_double(*v, "detector.t2_us");
    det.g_z = det.effective_g_z();
  } else {
    throw std::invalid_argument(
        "config: detector.variant must be 'ideal' or 'dispersive', got '" +
        variant + "'");
  }
  det.validate();

  // --- [grid] --- (times in the same unit system as the rates)
  const bool ideal = det.variant == ModelVariant::Ideal;
  const std::string t_key = ideal ? "t_end_kB_units" : "t_end_us";
  const std::string dt_key = ideal ? "dt_kB_units" : "dt_us";
  cfg.grid.t_end = to_double(kv.require("grid", t_key), "grid." + t_key);
  cfg.grid.dt = to_double(kv.require("grid", dt_key), "grid." + dt_key);
  if (auto v = kv.get("grid", "record_stride"))
    cfg.grid.record_stride =
        static_cast<int>(to_int(*v, "grid.record_stride"));
  cfg.grid.validate(det.max_rate());

  // --- [run] ---
  if (kv.has_section("run")) {
    if (auto v = kv.get("run", "n_traj"))
      cfg.run.n_traj = static_cast<int>(to_int(*v, "run.n_traj"));
    if (auto v = kv.get("run", "base_seed"))
      cfg.run.base_seed =
          static_cast<std::uint64_t>(to_int(*v, "run.base_seed"));
    if (auto v = kv.get("run", "n_workers"))
      cfg.run.n_workers = static_cast<int>(to_int(*v, "run.n_workers"));
    if (auto v = kv.get("run", "solver")) {
      if (*v == "auto") cfg.run.solver = SolverChoice::Auto;
      else if (*v == "pure") cfg.run.solver = SolverChoice::PureFast;
      else if (*v == "mixed") cfg.run.solver = SolverChoice::MixedReference;
      else throw std::invalid_argument("config: run.solver must be auto|pure|mixed");
    }
    if (auto v = kv.get("run", "mode")) {
      if (*v == "both") cfg.run.mode = RunBlock::Mode::Both;
      else if (*v == "signal") cfg.run.mode = RunBlock::Mode::Signal;
      else if (*v == "vacuum") cfg.run.mode = RunBlock::Mode::Vacuum;
      else throw std::invalid_argument("config: run.mode must be both|signal|vacuum");
    }
  }
  if (cfg.run.n_traj < 1)
    throw std::invalid_argument("config: run.n_traj must be >= 1");
  if (cfg.run.n_workers < 1)
    throw std::invalid_argument("config: run.n_workers must be >= 1");

  // --- [detection] ---
  if (kv.has_section("detection")) {
    const auto single = kv.get("detection", "threshold");
    const auto grid = kv.get("detection", "thresholds");
    if (single && grid)
      throw std::invalid_argument(
          "config: give either detection.threshold or detection.thresholds");
    if (single)
      cfg.detection.thresholds = {to_double(*single, "detection.threshold")};
    if (grid)
      cfg.detection.thresholds =
          to_threshold_grid(*grid, "detection.thresholds");
  }
  if (cfg.detection.thresholds.empty())
    for (double thr = 1.4; thr <= 5.2 + 1e-9; thr += 0.2)
      cfg.detection.thresholds.push_back(thr);
  for (double thr : cfg.detection.thresholds)
    if (thr <= 0)
      throw std::invalid_argument("config: thresholds must be > 0");

  // --- [output] ---
  if (kv.has_section("output")) {
    if (auto v = kv.get("output", "write_csv_currents"))
      cfg.output.write_csv_currents = to_bool(*v, "output.write_csv_currents");
    if (auto v = kv.get("output", "write_filtered"))
      cfg.output.write_filtered = to_bool(*v, "output.write_filtered");
  }

  // --- [optimize] ---
  if (kv.has_section("optimize")) {
    OptimizeBlock ob;
    if (auto v = kv.get("optimize", "objective")) {
      if (*v == "surrogate") ob.objective = Objective::Surrogate;
      else if (*v == "full_fidelity") ob.objective = Objective::FullFidelity;
      else throw std::invalid_argument(
          "config: optimize.objective must be surrogate|full_fidelity");
    }
    if (auto v = kv.get("optimize", "free")) {
      if (*v == "deltas") { ob.free_deltas = true; ob.free_gz = false; }
      else if (*v == "gz") { ob.free_deltas = false; ob.free_gz = true; }
      else if (*v == "deltas_gz") { ob.free_deltas = true; ob.free_gz = true; }
      else throw std::invalid_argument(
          "config: optimize.free must be deltas|gz|deltas_gz");
    }
    if (auto v = kv.get("optimize", "budget"))
      ob.budget = static_cast<int>(to_int(*v, "optimize.budget"));
    if (auto v = kv.get("optimize", "restarts"))
      ob.restarts = static_cast<int>(to_int(*v, "optimize.restarts"));
    if (auto v = kv.get("optimize", "search_seed"))
      ob.search_seed = static_cast<std::uint64_t>(to_int(*v, "optimize.search_seed"));
    if (auto v = kv.get("optimize", "n_traj"))
      ob.n_traj = static_cast<int>(to_int(*v, "optimize.n_traj"));
    const std::string bound_key =
        ideal ? "delta_bound_in_kB_units" : "delta_bound_over_2pi_MHz";
    if (auto v = kv.get("optimize", bound_key)) {
      ob.delta_bound = to_double(*v, "optimize." + bound_key);
      if (!ideal) ob.delta_bound *= kTwoPi;
    }
    if (ob.budget < 0)
      throw std::invalid_argument("config: optimize.budget must be >= 0");
    cfg.optimize = ob;
  }

  kv.reject_unconsumed();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config: cannot open file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string ExperimentConfig::canonical_text() const {
  const bool ideal = detector.variant == ModelVariant::Ideal;
  std::ostringstream out;
  out << "[detector]\n";
  out << "variant = " << (ideal ? "ideal" : "dispersive") << "\n";
  out << "n_absorbers = " << detector.n_absorbers << "\n";
  out << "eta_h = " << fmt(detector.eta_h) << "\n";
  out << "dim_a = " << detector.trunc.dim_a << "\n";
  out << "dim_b = " << detector.trunc.dim_b << "\n";
  out << "dim_c = " << detector.trunc.dim_c << "\n";
  auto list = [&](const std::vector<double>& v, double scale) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i)
      s += (i ? ", " : "") + fmt(v[i] / scale);
    return s;
  };
  if (ideal) {
    out << "kappa_a_in_kB_units = " << fmt(detector.kappa_a) << "\n";
    out << "kappa_c_in_kB_units = " << fmt(detector.kappa_c) << "\n";
    out << "g_z_in_kB_units = " << fmt(detector.g_z) << "\n";
    if (!detector.deltas.empty())
      out << "deltas_in_kB_units = " << list(detector.deltas, 1.0) << "\n";
  } else {
    out << "kappa_a_over_2pi_MHz = " << fmt(detector.kappa_a / kTwoPi) << "\n";
    out << "kappa_b_over_2pi_MHz = " << fmt(detector.kappa_b / kTwoPi) << "\n";
    out << "kappa_c_over_2pi_MHz = " << fmt(detector.kappa_c / kTwoPi) << "\n";
    out << "chi_over_2pi_MHz = " << fmt(detector.dispersive.chi / kTwoPi) << "\n";
    out << "alpha = " << fmt(detector.dispersive.alpha) << "\n";
    out << "delta_plus_over_2pi_MHz = "
        << fmt(detector.dispersive.delta_plus / kTwoPi) << "\n";
    if (!detector.deltas.empty())
      out << "deltas_over_2pi_MHz = " << list(detector.deltas, kTwoPi) << "\n";
    if (std::isfinite(detector.dispersive.t1))
      out << "t1_us = " << fmt(detector.dispersive.t1) << "\n";
    if (std::isfinite(detector.dispersive.t2))
      out << "t2_us = " << fmt(detector.dispersive.t2) << "\n";
  }
  out << "\n[grid]\n";
  out << (ideal ? "t_end_kB_units = " : "t_end_us = ") << fmt(grid.t_end) << "\n";
  out << (ideal ? "dt_kB_units = " : "dt_us = ") << fmt(grid.dt) << "\n";
  out << "record_stride = " << grid.record_stride << "\n";
  out << "\n[run]\n";
  out << "n_traj = " << run.n_traj << "\n";
  out << "base_seed = " << run.base_seed << "\n";
  out << "solver = "
      << (run.solver == SolverChoice::Auto
              ? "auto"
              : run.solver == SolverChoice::PureFast ? "pure" : "mixed")
      << "\n";
  out << "n_workers = " << run.n_workers << "\n";
  out << "mode = "
      << (run.mode == RunBlock::Mode::Both
              ? "both"
              : run.mode == RunBlock::Mode::Signal ? "signal" : "vacuum")
      << "\n";
  out << "\n[detection]\n";
  out << "thresholds = " << list(detection.thresholds, 1.0) << "\n";
  out << "\n[output]\n";
  out << "write_csv_currents = " << (output.write_csv_currents ? "true" : "false") << "\n";
  out << "write_filtered = " << (output.write_filtered ? "true" : "false") << "\n";
  if (optimize) {
    out << "\n[optimize]\n";
    out << "objective = "
        << (optimize->objective == Objective::Surrogate ? "surrogate"
                                                        : "full_fidelity")
        << "\n";
    out << "free = "
        << (optimize->free_deltas && optimize->free_gz
                ? "deltas_gz"
                : optimize->free_deltas ? "deltas" : "gz")
        << "\n";
    out << "budget = " << optimize->budget << "\n";
    out << "restarts = " << optimize->restarts << "\n";
    out << "search_seed = " << optimize->search_seed << "\n";
    out << "n_traj = " << optimize->n_traj << "\n";
    if (optimize->delta_bound > 0) {
      out << (ideal ? "delta_bound_in_kB_units = "
                    : "delta_bound_over_2pi_MHz = ")
          << fmt(ideal ? optimize->delta_bound
                       : optimize->delta_bound / kTwoPi)
          << "\n";
    }
  }
  return out.str();
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(canonical_text())));
  return buf;
}

}  // namespace photodet
