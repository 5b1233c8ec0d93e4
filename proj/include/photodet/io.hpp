#pragma once

#include "photodet/detection.hpp"
#include "photodet/integrator.hpp"
#include "photodet/metrics.hpp"
#include "photodet/optimizer.hpp"

#include <string>
#include <vector>

namespace photodet {

inline constexpr const char* kToolVersion = "photodet 0.1.0";

/// Compact binary ensemble container: per-trajectory current rows plus the
/// seeds and truncation diagnostics needed for provenance.
struct CurrentsFile {
  double dt = 0.0;
  std::vector<VectorRe> j;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_top_pops;
  std::vector<double> max_top_pops;
};

void write_currents(const std::string& path,
                    const std::vector<TrajectoryRecord>& records);
CurrentsFile read_currents(const std::string& path);

/// Concatenated CSV stream with a trajectory-index column: traj,t,j.
void write_currents_csv(const std::string& path,
                        const std::vector<TrajectoryRecord>& records);

void write_traces_csv(const std::string& path,
                      const ExpectationTraces& traces);
ExpectationTraces read_traces_csv(const std::string& path);

/// One filtered record as t,jbar rows.
void write_filtered_csv(const std::string& path, const VectorRe& jbar,
                        double dt);

void write_metrics_json(const std::string& path, const MetricsSummary& s);
void write_roc_csv(const std::string& path,
                   const std::vector<RocPoint>& curve);
void write_histogram_csv(const std::string& path, const Histogram& h);
void write_eval_log_csv(const std::string& path, const OptimizeResult& r);

struct RunManifest {
  std::string config_hash;
  std::uint64_t base_seed = 0;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;
  std::string status = "running";  // running | complete | failed
  std::string note;
  std::vector<std::string> outputs;
};

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

std::string iso8601_now();

}  // namespace photodet
