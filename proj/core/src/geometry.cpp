#include "spike/geometry.hpp"

#include <string>

#include "spike/errors.hpp"

namespace spike {

void PointCloudSequence::validate() const {
  if (frames.empty()) throw DataError("point cloud sequence has no frames");
  if (timestamps.size() != frames.size()) {
    throw DataError("sequence has " + std::to_string(frames.size()) + " frames but " +
                    std::to_string(timestamps.size()) + " timestamps");
  }
  const std::size_t n = frames.front().size();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != n) {
      throw DataError("frame " + std::to_string(t) + " has " + std::to_string(frames[t].size()) +
                      " points, expected " + std::to_string(n));
    }
    if (t > 0 && timestamps[t] <= timestamps[t - 1]) {
      throw DataError("timestamps not strictly increasing at frame " + std::to_string(t));
    }
  }
}

PointCloudSequence PointCloudSequence::from_frames(std::vector<PointCloud> frames) {
  PointCloudSequence seq;
  seq.timestamps.resize(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) seq.timestamps[t] = static_cast<int>(t);
  seq.frames = std::move(frames);
  return seq;
}

}  // namespace spike
