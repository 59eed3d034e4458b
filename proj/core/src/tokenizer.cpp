#include "spike/tokenizer.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "spike/errors.hpp"
#include "spike/random.hpp"

namespace spike {

std::vector<std::size_t> farthest_point_sampling_from(const PointCloud& pc, std::size_t k,
                                                      std::size_t start) {
  const std::size_t n = pc.size();
  if (n == 0) throw DataError("farthest_point_sampling: empty cloud");
  if (start >= n) throw DataError("farthest_point_sampling: start index out of range");
  std::vector<std::size_t> picked;
  picked.reserve(k);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::size_t current = start;
  for (std::size_t step = 0; step < std::min(k, n); ++step) {
    picked.push_back(current);
    taken[current] = true;
    const Vec3 c = pc.points[current];
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(pc.points[i], c));
      if (!taken[i] && nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    current = best;
  }
  for (std::size_t step = n; step < k; ++step) picked.push_back(picked[step % n]);
  return picked;
}

std::vector<std::size_t> farthest_point_sampling(const PointCloud& pc, std::size_t k,
                                                 std::uint64_t seed) {
  if (pc.empty()) throw DataError("farthest_point_sampling: empty cloud");
  Rng rng(seed);
  return farthest_point_sampling_from(pc, k, uniform_index(rng, pc.size()));
}

LocalVolume ball_group(const PointCloud& pc, Vec3 center, double radius, std::size_t n_s) {
  LocalVolume vol;
  vol.center = center;
  vol.displacements.reserve(n_s);
  const double r2 = radius * radius;
  PointCloud candidates;
  std::size_t nearest = 0;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (const Vec3& p : pc.points) {
    const double d = squared_distance(p, center);
    if (d > r2) continue;
    if (d < nearest_d) {
      nearest_d = d;
      nearest = candidates.size();
    }
    candidates.points.push_back(p);
  }
  if (candidates.empty()) {
    vol.displacements.assign(n_s, Vec3{});
    return vol;
  }
  if (candidates.size() > n_s) {
    for (std::size_t i : farthest_point_sampling_from(candidates, n_s, nearest)) {
      vol.displacements.push_back(candidates.points[i] - center);
    }
    return vol;
  }
  for (const Vec3& p : candidates.points) vol.displacements.push_back(p - center);
  const Vec3 pad = candidates.points[nearest] - center;
  while (vol.displacements.size() < n_s) vol.displacements.push_back(pad);
  return vol;
}

namespace {

void check_sequence(const PointCloudSequence& seq) {
  seq.validate();
  if (seq.points_per_frame() == 0) throw DataError("tokenize: frames have no points");
}

}  // namespace

TokenBatch tokenize(const PointCloudSequence& seq, const HyperParams& hp, std::uint64_t seed) {
  check_sequence(seq);
  TokenBatch batch;
  batch.frames = seq.length();
  batch.volumes_per_frame = hp.num_volumes;
  batch.volumes.reserve(seq.length() * hp.num_volumes);
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const PointCloud& frame = seq.frames[t];
    for (std::size_t ref : farthest_point_sampling(frame, hp.num_volumes, derive_seed(seed, {t}))) {
      LocalVolume vol = ball_group(frame, frame.points[ref], hp.radius, hp.num_samples);
      vol.frame = static_cast<int>(t);
      batch.volumes.push_back(std::move(vol));
    }
  }
  return batch;
}

TokenBatch tokenize_spatiotemporal(const PointCloudSequence& seq, const HyperParams& hp,
                                   std::uint64_t seed) {
  check_sequence(seq);
  if (hp.temporal_kernel % 2 == 0) throw ConfigError("temporal_kernel must be odd");
  const auto half = static_cast<long>(hp.temporal_kernel / 2);
  const auto last = static_cast<long>(seq.length()) - 1;
  TokenBatch batch;
  batch.frames = seq.length();
  batch.volumes_per_frame = hp.num_volumes;
  batch.volumes.reserve(seq.length() * hp.num_volumes);
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const PointCloud& frame = seq.frames[t];
    for (std::size_t ref : farthest_point_sampling(frame, hp.num_volumes, derive_seed(seed, {t}))) {
      LocalVolume vol;
      vol.center = frame.points[ref];
      vol.frame = static_cast<int>(t);
      for (long o = -half; o <= half; ++o) {
        const long src = std::clamp(static_cast<long>(t) + o, 0L, last);
        const LocalVolume part =
            ball_group(seq.frames[static_cast<std::size_t>(src)], vol.center, hp.radius, hp.num_samples);
        vol.displacements.insert(vol.displacements.end(), part.displacements.begin(),
                                 part.displacements.end());
        vol.time_offsets.insert(vol.time_offsets.end(), part.displacements.size(),
                                static_cast<double>(src - static_cast<long>(t)));
      }
      batch.volumes.push_back(std::move(vol));
    }
  }
  return batch;
}

}  // namespace spike
