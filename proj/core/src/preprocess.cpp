#include "spike/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "spike/errors.hpp"
#include "spike/random.hpp"

namespace spike {

void SegmentationConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("segmentation config: " + field + " " + why);
  };
  if (!(depth_threshold_m > 0.0)) fail("depth_threshold_m", "must be > 0");
  if (histogram_bins <= 0) fail("histogram_bins", "must be > 0");
  if (floor_bins_discard < 0) fail("floor_bins_discard", "must be >= 0");
  if (floor_bins_discard >= histogram_bins) fail("floor_bins_discard", "must be < histogram_bins");
  if (!(dbscan_eps_m > 0.0)) fail("dbscan_eps_m", "must be > 0");
  if (dbscan_min_pts <= 0) fail("dbscan_min_pts", "must be > 0");
  if (!(cluster_offset_m > 0.0)) fail("cluster_offset_m", "must be > 0");
}

PointCloud depth_to_points(const DepthFrame& frame) {
  const Intrinsics& k = frame.intrinsics;
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw ConfigError("depth_to_points: fx and fy must be > 0");
  if (frame.depth.size() != frame.width * frame.height) {
    throw DataError("depth_to_points: depth buffer has " + std::to_string(frame.depth.size()) +
                    " values for a " + std::to_string(frame.width) + "x" +
                    std::to_string(frame.height) + " frame");
  }
  PointCloud pc;
  for (std::size_t v = 0; v < frame.height; ++v) {
    for (std::size_t u = 0; u < frame.width; ++u) {
      const double d = frame.depth[v * frame.width + u];
      if (d < 0.0) throw DataError("depth_to_points: negative depth");
      if (d == 0.0) continue;
      pc.points.push_back({(static_cast<double>(u) - k.cx) * d / k.fx,
                           (static_cast<double>(v) - k.cy) * d / k.fy, d});
    }
  }
  return pc;
}

PointCloud threshold_background(const PointCloud& pc, const SegmentationConfig& cfg) {
  PointCloud out;
  std::copy_if(pc.points.begin(), pc.points.end(), std::back_inserter(out.points),
               [&](const Vec3& p) { return p.z < cfg.depth_threshold_m; });
  return out;
}

PointCloud remove_floor(const PointCloud& pc, const SegmentationConfig& cfg) {
  if (pc.empty()) throw DataError("remove_floor: empty cloud");
  auto [lo, hi] = std::minmax_element(pc.points.begin(), pc.points.end(),
                                      [](const Vec3& a, const Vec3& b) { return a.y < b.y; });
  const double y_min = lo->y;
  const double span = hi->y - y_min;
  const int bins = cfg.histogram_bins;
  PointCloud out;
  for (const Vec3& p : pc.points) {
    int bin = span > 0.0 ? static_cast<int>(std::floor((p.y - y_min) / span * bins)) : 0;
    bin = std::clamp(bin, 0, bins - 1);
    const int from_floor = cfg.floor_side == FloorSide::kMaxY ? bins - 1 - bin : bin;
    if (from_floor >= cfg.floor_bins_discard) out.points.push_back(p);
  }
  return out;
}

namespace {

// Uniform grid with cell size eps; neighbor queries return indices in
// ascending order so results do not depend on bucket layout.
class NeighborGrid {
 public:
  NeighborGrid(const PointCloud& pc, double eps) : pc_(pc), eps_(eps), eps2_(eps * eps) {
    for (std::size_t i = 0; i < pc.size(); ++i) cells_[cell_of(pc.points[i])].push_back(i);
  }

  void query(std::size_t i, std::vector<std::size_t>& out) const {
    out.clear();
    const Vec3 p = pc_.points[i];
    const auto c = cell_of(p);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second) {
            if (squared_distance(p, pc_.points[j]) <= eps2_) out.push_back(j);
          }
        }
    std::sort(out.begin(), out.end());
  }

 private:
  std::array<long, 3> cell_of(const Vec3& p) const {
    return {static_cast<long>(std::floor(p.x / eps_)), static_cast<long>(std::floor(p.y / eps_)),
            static_cast<long>(std::floor(p.z / eps_))};
  }
  const PointCloud& pc_;
  double eps_;
  double eps2_;
  std::map<std::array<long, 3>, std::vector<std::size_t>> cells_;
};

constexpr int kUnvisited = -2;

}  // namespace

DbscanResult dbscan(const PointCloud& pc, const SegmentationConfig& cfg) {
  DbscanResult result;
  result.labels.assign(pc.size(), kUnvisited);
  if (pc.empty()) return result;
  const NeighborGrid grid(pc, cfg.dbscan_eps_m);
  const auto min_pts = static_cast<std::size_t>(cfg.dbscan_min_pts);
  std::vector<std::size_t> neighbors, inner;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (result.labels[i] != kUnvisited) continue;
    grid.query(i, neighbors);
    if (neighbors.size() < min_pts) {
      result.labels[i] = kNoise;
      continue;
    }
    const int cluster = result.num_clusters++;
    result.labels[i] = cluster;
    std::deque<std::size_t> frontier(neighbors.begin(), neighbors.end());
    while (!frontier.empty()) {
      const std::size_t j = frontier.front();
      frontier.pop_front();
      if (result.labels[j] == kNoise) result.labels[j] = cluster;  // border point
      if (result.labels[j] != kUnvisited) continue;
      result.labels[j] = cluster;
      grid.query(j, inner);
      if (inner.size() >= min_pts) frontier.insert(frontier.end(), inner.begin(), inner.end());
    }
  }
  return result;
}

std::vector<PointCloud> DbscanResult::clusters(const PointCloud& pc) const {
  std::vector<PointCloud> out(static_cast<std::size_t>(num_clusters));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].points.push_back(pc.points[i]);
  }
  return out;
}

PointCloud DbscanResult::noise(const PointCloud& pc) const {
  PointCloud out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) out.points.push_back(pc.points[i]);
  }
  return out;
}

namespace {

struct Box {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};

  static Box of(const PointCloud& pc) {
    Box b;
    for (const Vec3& p : pc.points) {
      b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y), std::min(b.lo.z, p.z)};
      b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y), std::max(b.hi.z, p.z)};
    }
    return b;
  }
};

bool overlaps(double a_lo, double a_hi, double b_lo, double b_hi, double margin) {
  return a_lo <= b_hi + margin && a_hi >= b_lo - margin;
}

}  // namespace

PointCloud select_human(const std::vector<PointCloud>& clusters, Vec3 sensor_origin,
                        const SegmentationConfig& cfg) {
  if (clusters.empty()) throw DataError("select_human: empty scene, no clusters");
  std::size_t largest = 0;
  for (std::size_t i = 1; i < clusters.size(); ++i) {
    if (clusters[i].size() > clusters[largest].size()) largest = i;
  }
  const Box body = Box::of(clusters[largest]);
  const double off = cfg.cluster_offset_m;
  const bool sensor_in_front = sensor_origin.z <= body.lo.z;

  PointCloud out = clusters[largest];
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (i == largest || clusters[i].empty()) continue;
    const Box b = Box::of(clusters[i]);
    const bool lateral_x = overlaps(b.lo.x, b.hi.x, body.lo.x, body.hi.x, off);
    // Above or below: same footprint on the ground plane, any height.
    const bool stacked = lateral_x && overlaps(b.lo.z, b.hi.z, body.lo.z, body.hi.z, off);
    // Between the body and the sensor along the optical axis.
    const bool between = sensor_in_front && lateral_x &&
                         overlaps(b.lo.y, b.hi.y, body.lo.y, body.hi.y, off) &&
                         b.lo.z >= sensor_origin.z && b.hi.z <= body.lo.z + off;
    if (stacked || between) {
      out.points.insert(out.points.end(), clusters[i].points.begin(), clusters[i].points.end());
    }
  }
  return out;
}

PointCloud segment_human(const PointCloud& pc, const SegmentationConfig& cfg, Vec3 sensor_origin) {
  cfg.validate();
  PointCloud foreground = threshold_background(pc, cfg);
  if (foreground.empty()) throw DataError("segment_human: nothing in front of the depth threshold");
  PointCloud no_floor = remove_floor(foreground, cfg);
  const DbscanResult labels = dbscan(no_floor, cfg);
  return select_human(labels.clusters(no_floor), sensor_origin, cfg);
}

PointCloud resample(const PointCloud& pc, std::size_t n, std::uint64_t seed) {
  if (pc.empty()) throw DataError("resample: empty cloud");
  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  if (pc.size() >= n) {
    std::vector<std::size_t> idx(pc.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + uniform_index(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.points.push_back(pc.points[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.points.push_back(pc.points[uniform_index(rng, pc.size())]);
  }
  return out;
}

std::pair<PointCloudSequence, Vec3> center_sequence(const PointCloudSequence& seq) {
  if (seq.frames.empty()) throw DataError("center_sequence: empty sequence");
  Vec3 acc{};
  std::size_t count = 0;
  for (const auto& frame : seq.frames) {
    for (const Vec3& p : frame.points) acc += p;
    count += frame.size();
  }
  if (count == 0) throw DataError("center_sequence: sequence has no points");
  const Vec3 centroid = acc * (1.0 / static_cast<double>(count));
  PointCloudSequence out = seq;
  for (auto& frame : out.frames)
    for (Vec3& p : frame.points) p -= centroid;
  return {std::move(out), centroid};
}

AugmentParams draw_augmentation(std::uint64_t seed) {
  Rng rng(seed);
  AugmentParams params;
  params.yaw_rad = uniform(rng, -std::numbers::pi / 2.0, std::numbers::pi / 2.0);
  params.mirror_x = uniform01(rng) < 0.5;
  return params;
}

std::pair<PointCloudSequence, SkeletonFrame> apply_augmentation(const PointCloudSequence& seq,
                                                                const SkeletonFrame& joints,
                                                                const AugmentParams& params) {
  const double c = std::cos(params.yaw_rad);
  const double s = std::sin(params.yaw_rad);
  const double sign = params.mirror_x ? -1.0 : 1.0;
  auto transform = [&](const Vec3& p) {
    const Vec3 r{c * p.x + s * p.z, p.y, -s * p.x + c * p.z};
    return Vec3{sign * r.x, r.y, r.z};
  };
  PointCloudSequence out = seq;
  for (auto& frame : out.frames)
    for (Vec3& p : frame.points) p = transform(p);

  SkeletonFrame labels = joints;
  for (Vec3& j : labels.joints) j = transform(j);
  if (params.mirror_x) {
    const auto perm = mirror_permutation(joints.size());
    SkeletonFrame swapped = labels;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      swapped.joints[i] = labels.joints[perm[i]];
      swapped.valid[i] = labels.valid[perm[i]];
    }
    labels = std::move(swapped);
  }
  return {std::move(out), std::move(labels)};
}

std::pair<PointCloudSequence, SkeletonFrame> augment(const PointCloudSequence& seq,
                                                     const SkeletonFrame& joints,
                                                     std::uint64_t seed) {
  return apply_augmentation(seq, joints, draw_augmentation(seed));
}

}  // namespace spike
