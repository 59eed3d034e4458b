#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spike/geometry.hpp"
#include "spike/skeleton.hpp"

namespace spike {

inline constexpr double kDefaultThresholdM = 0.10;

struct ApRow {
  std::string name;
  std::size_t hits = 0;
  std::size_t total = 0;

  // Percentage, or nullopt when no valid joint fell in this row.
  std::optional<double> ap() const;
};

struct EvalReport {
  double threshold_m = kDefaultThresholdM;
  std::vector<ApRow> per_joint;
  // Paired rows pool left and right; then upper body and lower body. Only
  // filled for the 15-joint ITOP layout.
  std::vector<ApRow> groups;
  ApRow pooled;                   // every valid joint of every frame
  double mean_of_joints_ap = 0.0;  // unweighted mean of per-joint rows

  double mean_ap() const { return *pooled.ap(); }
  const ApRow* group(const std::string& name) const;

  // Human-readable table in Head, Neck, Shoulders, ..., Mean order.
  std::string table() const;
  // One `joint=<name> ap=<float>` line per row.
  std::string records() const;
};

// A joint scores when the Euclidean distance is strictly below threshold_m.
// Only joints flagged valid in the target are counted.
EvalReport map_at_threshold(const std::vector<std::vector<Vec3>>& predictions,
                            const std::vector<SkeletonFrame>& targets,
                            double threshold_m = kDefaultThresholdM);

struct LatencyStats {
  std::vector<double> samples_ms;
  double median_ms = 0.0;
  double p95_ms = 0.0;

  std::string record() const;  // median_ms=<float> p95_ms=<float>
};

LatencyStats summarize_latency(std::vector<double> samples_ms);

// Times `run_one_frame` iters times after `warmup` discarded runs.
LatencyStats benchmark_inference(const std::function<void()>& run_one_frame, std::size_t warmup,
                                 std::size_t iters);

}  // namespace spike
