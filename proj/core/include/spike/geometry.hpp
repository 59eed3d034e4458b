#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace spike {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend bool operator==(Vec3 a, Vec3 b) = default;
  Vec3& operator+=(Vec3 o) { return *this = *this + o; }
  Vec3& operator-=(Vec3 o) { return *this = *this - o; }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double squared_norm(Vec3 a) { return dot(a, a); }
inline double norm(Vec3 a) { return std::sqrt(squared_norm(a)); }
inline double squared_distance(Vec3 a, Vec3 b) { return squared_norm(a - b); }
inline double distance(Vec3 a, Vec3 b) { return std::sqrt(squared_distance(a, b)); }

/// Unordered set of 3-D points, meters, camera coordinates (y down, z forward).
struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// T frames of equal point count plus strictly increasing integer timestamps.
struct PointCloudSequence {
  std::vector<PointCloud> frames;
  std::vector<int> timestamps;

  std::size_t length() const { return frames.size(); }
  std::size_t points_per_frame() const { return frames.empty() ? 0 : frames.front().size(); }
  friend bool operator==(const PointCloudSequence&, const PointCloudSequence&) = default;

  // Throws DataError when frame sizes differ or timestamps are not increasing.
  void validate() const;

  // Frames with timestamps 0..T-1.
  static PointCloudSequence from_frames(std::vector<PointCloud> frames);
};

}  // namespace spike
