#include "photodet/io.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace photodet {

namespace {

constexpr char kCurrentsMagic[8] = {'P', 'D', 'C', 'U', 'R', 'R', '0', '2'};

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_currents(const std::string& path,
                    const std::vector<TrajectoryRecord>& records) {
  if (records.empty())
    throw std::invalid_argument("write_currents: no records");
  auto out = open_out(path, true);
  const std::uint64_t n_traj = records.size();
  const std::uint64_t n_samples = records.front().j.size();
  const double dt = records.front().dt;
  out.write(kCurrentsMagic, 8);
  out.write(reinterpret_cast<const char*>(&n_traj), 8);
  out.write(reinterpret_cast<const char*>(&n_samples), 8);
  out.write(reinterpret_cast<const char*>(&dt), 8);
  for (const auto& rec : records) {
    if (static_cast<std::uint64_t>(rec.j.size()) != n_samples)
      throw std::invalid_argument("write_currents: ragged record lengths");
    out.write(reinterpret_cast<const char*>(rec.j.data()), 8 * n_samples);
  }
  for (const auto& rec : records)
    out.write(reinterpret_cast<const char*>(&rec.seed), 8);
  for (const auto& rec : records)
    out.write(reinterpret_cast<const char*>(&rec.final_top_level_pop), 8);
  for (const auto& rec : records)
    out.write(reinterpret_cast<const char*>(&rec.max_top_level_pop), 8);
  if (!out) throw std::runtime_error("write_currents: write failed");
}

CurrentsFile read_currents(const std::string& path) {
  auto in = open_in(path, true);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCurrentsMagic, 8) != 0)
    throw std::runtime_error("read_currents: '" + path +
                             "' is not a currents file");
  std::uint64_t n_traj = 0, n_samples = 0;
  CurrentsFile f;
  in.read(reinterpret_cast<char*>(&n_traj), 8);
  in.read(reinterpret_cast<char*>(&n_samples), 8);
  in.read(reinterpret_cast<char*>(&f.dt), 8);
  f.j.resize(n_traj);
  for (auto& row : f.j) {
    row.resize(n_samples);
    in.read(reinterpret_cast<char*>(row.data()), 8 * n_samples);
  }
  f.seeds.resize(n_traj);
  in.read(reinterpret_cast<char*>(f.seeds.data()), 8 * n_traj);
  f.final_top_pops.resize(n_traj);
  in.read(reinterpret_cast<char*>(f.final_top_pops.data()), 8 * n_traj);
  f.max_top_pops.resize(n_traj);
  in.read(reinterpret_cast<char*>(f.max_top_pops.data()), 8 * n_traj);
  if (!in) throw std::runtime_error("read_currents: truncated file");
  return f;
}

void write_currents_csv(const std::string& path,
                        const std::vector<TrajectoryRecord>& records) {
  auto out = open_out(path);
  out << "traj,t,j\n";
  for (size_t k = 0; k < records.size(); ++k) {
    const auto& rec = records[k];
    for (int i = 0; i < rec.j.size(); ++i)
      out << k << ',' << fmt((i + 1) * rec.dt) << ',' << fmt(rec.j(i))
          << '\n';
  }
}

void write_traces_csv(const std::string& path,
                      const ExpectationTraces& traces) {
  auto out = open_out(path);
  out << "t";
  for (const auto& [name, series] : traces.series) out << ',' << name;
  out << '\n';
  for (size_t i = 0; i < traces.t.size(); ++i) {
    out << fmt(traces.t[i]);
    for (const auto& [name, series] : traces.series)
      out << ',' << fmt(series(static_cast<int>(i)));
    out << '\n';
  }
}

ExpectationTraces read_traces_csv(const std::string& path) {
  auto in = open_in(path);
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("read_traces_csv: empty file '" + path + "'");
  std::vector<std::string> names;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) names.push_back(col);
  }
  if (names.empty() || names.front() != "t")
    throw std::runtime_error("read_traces_csv: malformed header");

  std::vector<std::vector<double>> cols(names.size());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= cols.size())
        throw std::runtime_error("read_traces_csv: ragged row");
      cols[c++].push_back(std::stod(cell));
    }
  }
  ExpectationTraces traces;
  traces.t = cols[0];
  traces.dt = traces.t.size() > 1 ? traces.t[1] - traces.t[0] : 0.0;
  for (size_t c = 1; c < names.size(); ++c) {
    VectorRe v(cols[c].size());
    for (size_t i = 0; i < cols[c].size(); ++i)
      v(static_cast<int>(i)) = cols[c][i];
    traces.series[names[c]] = std::move(v);
  }
  return traces;
}

void write_filtered_csv(const std::string& path, const VectorRe& jbar,
                        double dt) {
  auto out = open_out(path);
  out << "t,jbar\n";
  for (int i = 0; i < jbar.size(); ++i)
    out << fmt((i + 1) * dt) << ',' << fmt(jbar(i)) << '\n';
}

void write_metrics_json(const std::string& path, const MetricsSummary& s) {
  nlohmann::ordered_json j;
  j["eta"] = s.eta;
  j["eta_err"] = s.eta_err;
  j["gamma_dark"] = s.gamma_dark;
  j["gamma_dark_err"] = s.gamma_dark_err;
  j["method_dark"] = to_string(s.method_dark);
  j["tau_m"] = s.tau_m;
  j["fidelity"] = s.fidelity;
  j["fidelity_err"] = s.fidelity_err;
  j["y_thr"] = s.y_thr;
  j["n_traj_signal"] = s.n_traj_signal;
  j["n_click"] = s.n_click;
  j["n_traj_vacuum"] = s.n_traj_vacuum;
  j["n_click_vacuum"] = s.n_click_vacuum;
  j["record_t"] = s.record_t;
  j["config_hash"] = s.config_hash;
  j["base_seed"] = s.base_seed;
  open_out(path) << j.dump(2) << '\n';
}

void write_roc_csv(const std::string& path,
                   const std::vector<RocPoint>& curve) {
  auto out = open_out(path);
  out << "y_thr,gamma_dark,eta,dark_method\n";
  for (const auto& p : curve)
    out << fmt(p.y_thr) << ',' << fmt(p.gamma_dark) << ',' << fmt(p.eta)
        << ',' << (p.dark_is_gaussian ? "GAUSSIAN_ESTIMATE" : "EMPIRICAL")
        << '\n';
}

void write_histogram_csv(const std::string& path, const Histogram& h) {
  auto out = open_out(path);
  out << "bin_center,density\n";
  for (size_t i = 0; i < h.centers.size(); ++i)
    out << fmt(h.centers[i]) << ',' << fmt(h.density[i]) << '\n';
}

void write_eval_log_csv(const std::string& path, const OptimizeResult& r) {
  auto out = open_out(path);
  out << "eval";
  const size_t dim = r.best_params.size();
  for (size_t i = 0; i < dim; ++i) out << ",p" << i;
  out << ",score\n";
  for (const auto& e : r.log) {
    out << e.eval_index;
    for (double p : e.params) out << ',' << fmt(p);
    out << ',' << fmt(e.score) << '\n';
  }
}

void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool_version"] = m.tool_version;
  j["config_hash"] = m.config_hash;
  j["base_seed"] = m.base_seed;
  j["status"] = m.status;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["outputs"] = m.outputs;
  if (!m.note.empty()) j["note"] = m.note;
  open_out(path) << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
  auto in = open_in(path);
  nlohmann::json j;
  in >> j;
  RunManifest m;
  m.tool_version = j.value("tool_version", "");
  m.config_hash = j.value("config_hash", "");
  m.base_seed = j.value("base_seed", 0ull);
  m.status = j.value("status", "");
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  m.note = j.value("note", "");
  if (j.contains("outputs"))
    m.outputs = j["outputs"].get<std::vector<std::string>>();
  return m;
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace photodet
