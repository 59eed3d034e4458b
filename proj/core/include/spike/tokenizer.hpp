#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spike/geometry.hpp"
#include "spike/hyperparams.hpp"

namespace spike {

/// Neighborhood of one reference point, stored as displacements from it.
struct LocalVolume {
  Vec3 center;
  int frame = 0;                     // t, index within the sequence
  std::vector<Vec3> displacements;   // all with norm <= r
  std::vector<double> time_offsets;  // spatio-temporal variant only; parallel to displacements

  friend bool operator==(const LocalVolume&, const LocalVolume&) = default;
};

/// T·N_v volumes in frame-major order.
struct TokenBatch {
  std::vector<LocalVolume> volumes;
  std::size_t frames = 0;
  std::size_t volumes_per_frame = 0;

  std::size_t size() const { return volumes.size(); }
  friend bool operator==(const TokenBatch&, const TokenBatch&) = default;
};

// Greedy farthest point sampling from an explicit start index. Each step
// picks the unselected point farthest from the selected set, lowest index on
// ties. Past |pc| picks, the selection repeats cyclically.
std::vector<std::size_t> farthest_point_sampling_from(const PointCloud& pc, std::size_t k,
                                                      std::size_t start);

// As above with the start index drawn uniformly under `seed`.
std::vector<std::size_t> farthest_point_sampling(const PointCloud& pc, std::size_t k,
                                                 std::uint64_t seed);

// Gathers n_s displacements within `radius` of `center`:
//  - more candidates than n_s: FPS among them, starting from the one nearest the center;
//  - 1..n_s candidates: all of them, padded with the nearest;
//  - none: n_s zero displacements.
LocalVolume ball_group(const PointCloud& pc, Vec3 center, double radius, std::size_t n_s);

// Per-frame FPS references plus ball groups; grouping never crosses frames.
TokenBatch tokenize(const PointCloudSequence& seq, const HyperParams& hp, std::uint64_t seed);

// Ablation variant: each reference (chosen as in tokenize) also gathers ball
// groups around the same center in the temporal_kernel frames centered on its
// own frame, clamped at the sequence ends. time_offsets hold t' - t.
TokenBatch tokenize_spatiotemporal(const PointCloudSequence& seq, const HyperParams& hp,
                                   std::uint64_t seed);

}  // namespace spike
