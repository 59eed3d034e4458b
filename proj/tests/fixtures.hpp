#pragma once

#include <cstdint>
#include <vector>

#include "spike/geometry.hpp"
#include "spike/hyperparams.hpp"
#include "spike/random.hpp"
#include "spike/skeleton.hpp"
#include "spike/tensor.hpp"

namespace fixtures {

inline spike::PointCloud random_cloud(std::size_t n, spike::Rng& rng, double extent = 0.5) {
  spike::PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    pc.points.push_back({spike::uniform(rng, -extent, extent), spike::uniform(rng, -extent, extent),
                         spike::uniform(rng, -extent, extent)});
  }
  return pc;
}

inline spike::PointCloudSequence random_sequence(const spike::HyperParams& hp, std::uint64_t seed) {
  spike::Rng rng(seed);
  std::vector<spike::PointCloud> frames;
  for (std::size_t t = 0; t < hp.seq_len; ++t) frames.push_back(random_cloud(hp.num_points, rng));
  return spike::PointCloudSequence::from_frames(std::move(frames));
}

inline spike::SkeletonFrame random_target(std::size_t joints, std::uint64_t seed) {
  spike::Rng rng(seed);
  std::vector<spike::Vec3> j;
  for (std::size_t i = 0; i < joints; ++i) {
    j.push_back({spike::uniform(rng, -1, 1), spike::uniform(rng, -1, 1), spike::uniform(rng, -1, 1)});
  }
  return spike::SkeletonFrame::all_valid(std::move(j));
}

inline spike::Tensor random_tensor(spike::Shape shape, spike::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(spike::shape_numel(shape));
  for (double& x : v) x = spike::uniform(rng, lo, hi);
  return spike::Tensor::from(std::move(shape), std::move(v));
}

inline bool bit_equal(const spike::Tensor& a, const spike::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a.at(i) != b.at(i)) return false;
  }
  return true;
}

}  // namespace fixtures
