#include "spike/skeleton.hpp"

#include <algorithm>
#include <numeric>

namespace spike {

std::size_t SkeletonFrame::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

SkeletonFrame SkeletonFrame::all_valid(std::vector<Vec3> joints) {
  SkeletonFrame f;
  f.valid.assign(joints.size(), true);
  f.joints = std::move(joints);
  return f;
}

std::vector<std::size_t> mirror_permutation(std::size_t num_joints) {
  std::vector<std::size_t> perm(num_joints);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (num_joints != kNumItopJoints) return perm;
  const std::pair<Joint, Joint> pairs[] = {
      {Joint::kRightShoulder, Joint::kLeftShoulder}, {Joint::kRightElbow, Joint::kLeftElbow},
      {Joint::kRightHand, Joint::kLeftHand},         {Joint::kRightHip, Joint::kLeftHip},
      {Joint::kRightKnee, Joint::kLeftKnee},         {Joint::kRightFoot, Joint::kLeftFoot}};
  for (auto [r, l] : pairs) std::swap(perm[index(r)], perm[index(l)]);
  return perm;
}

}  // namespace spike
