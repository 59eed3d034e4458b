#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "spike/geometry.hpp"

namespace spike {

// ITOP joint order.
enum class Joint : std::size_t {
  kHead = 0,
  kNeck,
  kRightShoulder,
  kLeftShoulder,
  kRightElbow,
  kLeftElbow,
  kRightHand,
  kLeftHand,
  kTorso,
  kRightHip,
  kLeftHip,
  kRightKnee,
  kLeftKnee,
  kRightFoot,
  kLeftFoot,
};

inline constexpr std::size_t kNumItopJoints = 15;

inline constexpr std::array<std::string_view, kNumItopJoints> kJointNames = {
    "head",     "neck",      "r_shoulder", "l_shoulder", "r_elbow", "l_elbow", "r_hand", "l_hand",
    "torso",    "r_hip",     "l_hip",      "r_knee",     "l_knee",  "r_foot",  "l_foot"};

constexpr std::size_t index(Joint j) { return static_cast<std::size_t>(j); }

// The 14 bones of the 15-joint tree, used for plotting and the synthetic rig.
inline constexpr std::array<std::pair<Joint, Joint>, 14> kBones = {{
    {Joint::kHead, Joint::kNeck},
    {Joint::kNeck, Joint::kRightShoulder},
    {Joint::kNeck, Joint::kLeftShoulder},
    {Joint::kRightShoulder, Joint::kRightElbow},
    {Joint::kRightElbow, Joint::kRightHand},
    {Joint::kLeftShoulder, Joint::kLeftElbow},
    {Joint::kLeftElbow, Joint::kLeftHand},
    {Joint::kNeck, Joint::kTorso},
    {Joint::kTorso, Joint::kRightHip},
    {Joint::kTorso, Joint::kLeftHip},
    {Joint::kRightHip, Joint::kRightKnee},
    {Joint::kRightKnee, Joint::kRightFoot},
    {Joint::kLeftHip, Joint::kLeftKnee},
    {Joint::kLeftKnee, Joint::kLeftFoot},
}};

/// Joint coordinates (meters) with a per-joint validity flag.
struct SkeletonFrame {
  std::vector<Vec3> joints;
  std::vector<bool> valid;

  std::size_t size() const { return joints.size(); }
  std::size_t valid_count() const;
  bool any_valid() const { return valid_count() > 0; }
  friend bool operator==(const SkeletonFrame&, const SkeletonFrame&) = default;

  static SkeletonFrame all_valid(std::vector<Vec3> joints);
};

// Index map taking each joint to its left/right counterpart. Identity unless
// the layout is the 15-joint ITOP skeleton.
std::vector<std::size_t> mirror_permutation(std::size_t num_joints);

}  // namespace spike
