#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spike/geometry.hpp"
#include "spike/hyperparams.hpp"
#include "spike/preprocess.hpp"
#include "spike/skeleton.hpp"

namespace spike {

struct Frame {
  std::string id;  // e.g. "03_02244"
  PointCloud cloud;
  SkeletonFrame labels;

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Temporally ordered frames of one subject.
struct Recording {
  std::string subject;
  std::string recording;
  std::vector<Frame> frames;

  friend bool operator==(const Recording&, const Recording&) = default;
};

struct SequenceDataset {
  std::vector<Recording> recordings;

  std::size_t frame_count() const;
  std::vector<std::string> subjects() const;  // sorted, unique
  friend bool operator==(const SequenceDataset&, const SequenceDataset&) = default;
};

enum class Split { kTrain, kTest };

// ITOP subject split: subjects 00-04 are test, everything else train.
Split itop_split(const std::string& subject);

SequenceDataset filter_subjects(const SequenceDataset& data, const std::vector<std::string>& keep);
SequenceDataset split_subset(const SequenceDataset& data, Split split);

/// (recording index, frame index) of a frame to predict.
struct SamplePair {
  std::size_t recording = 0;
  std::size_t frame = 0;
  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

enum class PairSelection {
  kAllFrames,  // every frame with at least one valid joint
  kLastFrame,  // only the final frame of each recording
};

PairSelection parse_pair_selection(const std::string& text);
std::string_view to_string(PairSelection selection);

std::vector<SamplePair> eval_pairs(const SequenceDataset& data,
                                   PairSelection selection = PairSelection::kAllFrames);

struct Window {
  PointCloudSequence sequence;              // raw clouds, sizes may differ
  std::vector<std::size_t> frame_indices;   // source frame of every window slot
  SkeletonFrame target;                     // labels of the predicted frame
};

// Past: frames t-T+1..t. Past-future: t-floor(T/2)..t+ceil(T/2)-1. Indices
// outside the recording are clamped to its first/last frame.
Window window(const Recording& rec, std::size_t t, std::size_t seq_len, WindowMode mode);

/// Model-ready input: resampled to N points per frame and centered.
struct Example {
  PointCloudSequence sequence;
  SkeletonFrame target;  // centered like the clouds
  Vec3 centroid;
};

Example make_example(const Recording& rec, std::size_t t, const HyperParams& hp,
                     std::uint64_t seed, bool augment_on);

// ---- on-disk format ---------------------------------------------------------
//
// <dir>/<recording>/manifest.txt   subject=<id> recording=<id> frames=<n>
// <dir>/<recording>/labels.txt     frame=<id> joints=<3M comma-separated> valid=<M bits>
// <dir>/<recording>/points/<frame id>.sppc
//     "SPPC", u32 point count, count×3 f32 (x, y, z), little-endian.

void write_native(const SequenceDataset& data, const std::filesystem::path& dir);
SequenceDataset load_native(const std::filesystem::path& dir);

void write_point_file(const PointCloud& pc, const std::filesystem::path& path);
PointCloud read_point_file(const std::filesystem::path& path);

// Loads the converted ITOP layout (same as native) and enforces the ITOP
// rules: 15 joints per labeled frame and two-digit subject ids. When `segment`
// is given the raw clouds are reduced to the human by segment_human().
SequenceDataset load_itop(const std::filesystem::path& dir, const SegmentationConfig* segment = nullptr);

// ---- synthetic articulated rig ------------------------------------------------

enum class OcclusionMode {
  kNone,
  kHideArmCurrentFrame,  // left arm removed from the last frame of each recording
};

OcclusionMode parse_occlusion_mode(const std::string& text);
std::string_view to_string(OcclusionMode mode);

struct SyntheticRigConfig {
  double limb_radius_m = 0.045;
  double torso_radius_m = 0.13;
  double head_radius_m = 0.10;
  double upper_arm_m = 0.30;
  double forearm_m = 0.28;
  double thigh_m = 0.42;
  double shin_m = 0.42;
  double motion_amplitude_rad = 0.6;
  double motion_frequency_hz = 0.5;
  double frame_interval_s = 1.0 / 30.0;
  std::size_t points_per_frame = 512;
  std::size_t frames_per_recording = 6;
  std::size_t subjects = 10;
  double noise_sigma_m = 0.0;
  OcclusionMode occlusion = OcclusionMode::kNone;

  void validate() const;
};

// Stick figure with sinusoidal limb motion; points sampled on limb capsule
// surfaces (rounded to single precision). Deterministic under seed.
SequenceDataset generate_synthetic(const SyntheticRigConfig& cfg, std::size_t recordings,
                                   std::uint64_t seed);

// Segment (a, b) with radius; a == b describes a sphere.
struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius;
};

// Capsules of the rig for one skeleton pose.
std::vector<Capsule> rig_capsules(const std::vector<Vec3>& joints, const SyntheticRigConfig& cfg);
double distance_to_segment(Vec3 p, Vec3 a, Vec3 b);

}  // namespace spike
