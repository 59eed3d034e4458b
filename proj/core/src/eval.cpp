#include "spike/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spike/errors.hpp"

namespace spike {

std::optional<double> ApRow::ap() const {
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

const ApRow* EvalReport::group(const std::string& name) const {
  for (const ApRow& row : groups) {
    if (row.name == name) return &row;
  }
  return nullptr;
}

namespace {

std::string format_ap(const ApRow& row) {
  const auto ap = row.ap();
  if (!ap) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *ap);
  return buf;
}

struct GroupSpec {
  const char* name;
  std::vector<Joint> members;
};

const std::vector<GroupSpec>& itop_groups() {
  static const std::vector<GroupSpec> groups = {
      {"head", {Joint::kHead}},
      {"neck", {Joint::kNeck}},
      {"shoulders", {Joint::kRightShoulder, Joint::kLeftShoulder}},
      {"elbows", {Joint::kRightElbow, Joint::kLeftElbow}},
      {"hands", {Joint::kRightHand, Joint::kLeftHand}},
      {"torso", {Joint::kTorso}},
      {"hips", {Joint::kRightHip, Joint::kLeftHip}},
      {"knees", {Joint::kRightKnee, Joint::kLeftKnee}},
      {"feet", {Joint::kRightFoot, Joint::kLeftFoot}},
      {"upper_body",
       {Joint::kHead, Joint::kNeck, Joint::kRightShoulder, Joint::kLeftShoulder, Joint::kRightElbow,
        Joint::kLeftElbow, Joint::kRightHand, Joint::kLeftHand, Joint::kTorso}},
      {"lower_body",
       {Joint::kRightHip, Joint::kLeftHip, Joint::kRightKnee, Joint::kLeftKnee, Joint::kRightFoot,
        Joint::kLeftFoot}},
  };
  return groups;
}

}  // namespace

EvalReport map_at_threshold(const std::vector<std::vector<Vec3>>& predictions,
                            const std::vector<SkeletonFrame>& targets, double threshold_m) {
  if (predictions.size() != targets.size()) {
    throw DimensionError("map_at_threshold: " + std::to_string(predictions.size()) +
                         " predictions for " + std::to_string(targets.size()) + " targets");
  }
  if (!(threshold_m > 0.0)) throw ConfigError("map_at_threshold: threshold must be > 0");
  const std::size_t m = targets.empty() ? 0 : targets.front().size();
  EvalReport report;
  report.threshold_m = threshold_m;
  report.pooled.name = "mean";
  report.per_joint.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    report.per_joint[j].name =
        m == kNumItopJoints ? std::string(kJointNames[j]) : "joint" + std::to_string(j);
  }
  for (std::size_t f = 0; f < targets.size(); ++f) {
    const SkeletonFrame& target = targets[f];
    if (target.size() != m || target.valid.size() != m || predictions[f].size() != m) {
      throw DimensionError("map_at_threshold: frame " + std::to_string(f) + " joint count mismatch");
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (!target.valid[j]) continue;
      const bool hit = distance(predictions[f][j], target.joints[j]) < threshold_m;
      report.per_joint[j].total += 1;
      report.per_joint[j].hits += hit ? 1 : 0;
    }
  }
  for (const ApRow& row : report.per_joint) {
    report.pooled.hits += row.hits;
    report.pooled.total += row.total;
  }
  if (report.pooled.total == 0) throw DataError("map_at_threshold: no valid joints to score");

  double sum = 0.0;
  std::size_t rows = 0;
  for (const ApRow& row : report.per_joint) {
    if (auto ap = row.ap()) {
      sum += *ap;
      ++rows;
    }
  }
  report.mean_of_joints_ap = sum / static_cast<double>(rows);

  if (m == kNumItopJoints) {
    for (const GroupSpec& spec : itop_groups()) {
      ApRow row;
      row.name = spec.name;
      for (Joint j : spec.members) {
        row.hits += report.per_joint[index(j)].hits;
        row.total += report.per_joint[index(j)].total;
      }
      report.groups.push_back(std::move(row));
    }
  }
  return report;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  char line[96];
  std::snprintf(line, sizeof line, "mAP@%.2fm\n", threshold_m);
  os << line;
  auto emit = [&](const std::string& label, const std::string& value) {
    std::snprintf(line, sizeof line, "  %-16s %8s\n", label.c_str(), value.c_str());
    os << line;
  };
  const auto& rows = groups.empty() ? per_joint : groups;
  for (const ApRow& row : rows) emit(row.name, format_ap(row));
  emit(pooled.name, format_ap(pooled));
  std::snprintf(line, sizeof line, "%.2f", mean_of_joints_ap);
  emit("mean_of_joints", line);
  return os.str();
}

std::string EvalReport::records() const {
  std::ostringstream os;
  auto emit = [&](const std::string& name, const std::string& value) {
    os << "joint=" << name << " ap=" << value << '\n';
  };
  for (const ApRow& row : per_joint) emit(row.name, format_ap(row));
  for (const ApRow& row : groups) emit(row.name, format_ap(row));
  emit(pooled.name, format_ap(pooled));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", mean_of_joints_ap);
  emit("mean_of_joints", buf);
  return os.str();
}

std::string LatencyStats::record() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "median_ms=%.4f p95_ms=%.4f", median_ms, p95_ms);
  return buf;
}

LatencyStats summarize_latency(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw ConfigError("latency summary needs at least one sample");
  LatencyStats stats;
  stats.samples_ms = samples_ms;
  std::sort(samples_ms.begin(), samples_ms.end());
  const std::size_t n = samples_ms.size();
  stats.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  stats.p95_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
  return stats;
}

LatencyStats benchmark_inference(const std::function<void()>& run_one_frame, std::size_t warmup,
                                 std::size_t iters) {
  if (iters == 0) throw ConfigError("benchmark_inference: iters must be >= 1");
  for (std::size_t i = 0; i < warmup; ++i) run_one_frame();
  std::vector<double> samples;
  samples.reserve(iters);
  for (std::size_t i = 0; i < iters; ++i) {
    const auto start = std::chrono::steady_clock::now();
    run_one_frame();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  return summarize_latency(std::move(samples));
}

}  // namespace spike
