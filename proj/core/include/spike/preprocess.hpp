#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "spike/geometry.hpp"
#include "spike/skeleton.hpp"

namespace spike {

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Per-pixel range image in meters; 0 marks an invalid pixel.
struct DepthFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> depth;  // row-major, height × width
  Intrinsics intrinsics;
};

enum class FloorSide {
  kMaxY,  // camera y points down: the floor has the largest y
  kMinY,
};

struct SegmentationConfig {
  double depth_threshold_m = 4.0;
  int floor_bins_discard = 10;
  int histogram_bins = 100;
  double dbscan_eps_m = 0.15;
  int dbscan_min_pts = 10;
  double cluster_offset_m = 0.20;
  FloorSide floor_side = FloorSide::kMaxY;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Pinhole back-projection of every valid pixel.
PointCloud depth_to_points(const DepthFrame& frame);

// Keeps points with z < depth_threshold_m.
PointCloud threshold_background(const PointCloud& pc, const SegmentationConfig& cfg);

// Drops the floor_bins_discard floor-most bins of a histogram of y.
PointCloud remove_floor(const PointCloud& pc, const SegmentationConfig& cfg);

inline constexpr int kNoise = -1;

struct DbscanResult {
  std::vector<int> labels;  // cluster id per point, or kNoise
  int num_clusters = 0;

  std::vector<PointCloud> clusters(const PointCloud& pc) const;
  PointCloud noise(const PointCloud& pc) const;
};

// Density clustering with eps = dbscan_eps_m and minPts = dbscan_min_pts (the
// neighborhood count includes the point itself). Clusters are numbered in
// order of discovery while scanning points by index; border points join the
// first cluster that reaches them.
DbscanResult dbscan(const PointCloud& pc, const SegmentationConfig& cfg);

// Largest cluster plus every cluster above/below it or between it and the
// sensor, using bounding boxes widened by cluster_offset_m.
PointCloud select_human(const std::vector<PointCloud>& clusters, Vec3 sensor_origin,
                        const SegmentationConfig& cfg);

// Threshold, floor removal, clustering and human selection in one call.
PointCloud segment_human(const PointCloud& pc, const SegmentationConfig& cfg,
                         Vec3 sensor_origin = {});

// Exactly n points: without replacement when the cloud is large enough,
// otherwise uniform draws with replacement.
PointCloud resample(const PointCloud& pc, std::size_t n, std::uint64_t seed);

// Subtracts one centroid computed over every point of every frame.
std::pair<PointCloudSequence, Vec3> center_sequence(const PointCloudSequence& seq);

struct AugmentParams {
  double yaw_rad = 0.0;  // rotation about the y axis
  bool mirror_x = false;
};

// Draws yaw ~ U(-90°, 90°) and a fair coin for x mirroring.
AugmentParams draw_augmentation(std::uint64_t seed);

// Applies the same rigid transform to every frame and the joint labels.
// Mirroring also swaps left/right joint identities.
std::pair<PointCloudSequence, SkeletonFrame> apply_augmentation(const PointCloudSequence& seq,
                                                                const SkeletonFrame& joints,
                                                                const AugmentParams& params);

std::pair<PointCloudSequence, SkeletonFrame> augment(const PointCloudSequence& seq,
                                                     const SkeletonFrame& joints,
                                                     std::uint64_t seed);

}  // namespace spike
