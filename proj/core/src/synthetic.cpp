#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "spike/data.hpp"
#include "spike/errors.hpp"
#include "spike/random.hpp"

namespace spike {

OcclusionMode parse_occlusion_mode(const std::string& text) {
  if (text == "none") return OcclusionMode::kNone;
  if (text == "hide-arm-current-frame") return OcclusionMode::kHideArmCurrentFrame;
  throw ConfigError("occlusion must be 'none' or 'hide-arm-current-frame', got '" + text + "'");
}

std::string_view to_string(OcclusionMode mode) {
  return mode == OcclusionMode::kNone ? "none" : "hide-arm-current-frame";
}

void SyntheticRigConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("synthetic rig: ") + name + " must be > 0");
  };
  positive(limb_radius_m, "limb_radius_m");
  positive(torso_radius_m, "torso_radius_m");
  positive(head_radius_m, "head_radius_m");
  positive(upper_arm_m, "upper_arm_m");
  positive(forearm_m, "forearm_m");
  positive(thigh_m, "thigh_m");
  positive(shin_m, "shin_m");
  if (!(motion_amplitude_rad >= 0.0)) throw ConfigError("synthetic rig: motion_amplitude_rad must be >= 0");
  positive(motion_frequency_hz, "motion_frequency_hz");
  positive(frame_interval_s, "frame_interval_s");
  positive(static_cast<double>(points_per_frame), "points_per_frame");
  positive(static_cast<double>(frames_per_recording), "frames_per_recording");
  positive(static_cast<double>(subjects), "subjects");
  if (noise_sigma_m < 0.0) throw ConfigError("synthetic rig: noise_sigma_m must be >= 0");
  if (subjects > 100) throw ConfigError("synthetic rig: at most 100 subjects (two-digit ids)");
}

double distance_to_segment(Vec3 p, Vec3 a, Vec3 b) {
  const Vec3 ab = b - a;
  const double len2 = squared_norm(ab);
  const double s = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return distance(p, a + ab * s);
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Capsule indices returned by rig_capsules.
constexpr std::size_t kLeftUpperArm = 4;
constexpr std::size_t kLeftForearm = 5;
constexpr double kHiddenHandClearance = 0.05;

struct Oscillator {
  double base = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;

  double at(double t) const { return base + amplitude * std::sin(kTwoPi * frequency * t + phase); }
};

struct Performer {
  double scale = 1.0;
  double yaw = 0.0;
  Vec3 root;
  // Per side (0 right, 1 left): abduction, flexion, elbow bend, hip flexion, knee bend.
  Oscillator abduction[2], flexion[2], elbow[2], hip[2], knee[2];
};

Oscillator draw_oscillator(Rng& rng, double base, double amplitude, const SyntheticRigConfig& cfg) {
  return {base, amplitude * uniform(rng, 0.7, 1.3), cfg.motion_frequency_hz * uniform(rng, 0.7, 1.3),
          uniform(rng, 0.0, kTwoPi)};
}

Performer draw_performer(Rng& rng, const SyntheticRigConfig& cfg) {
  Performer p;
  p.scale = uniform(rng, 0.9, 1.1);
  p.yaw = uniform(rng, -0.4, 0.4);
  p.root = {uniform(rng, -0.3, 0.3), uniform(rng, -0.1, 0.1), uniform(rng, 2.4, 3.2)};
  const double a = cfg.motion_amplitude_rad;
  for (int side = 0; side < 2; ++side) {
    p.abduction[side] = draw_oscillator(rng, 0.8, a, cfg);
    p.flexion[side] = draw_oscillator(rng, 0.3, 0.6 * a, cfg);
    p.elbow[side] = draw_oscillator(rng, 0.6, 0.6 * a, cfg);
    p.hip[side] = draw_oscillator(rng, 0.1, 0.4 * a, cfg);
    p.knee[side] = draw_oscillator(rng, 0.3, 0.4 * a, cfg);
  }
  return p;
}

// Rotation about the x axis applied to (x, y, 0).
Vec3 bend(double x, double y, double angle) { return {x, y * std::cos(angle), -y * std::sin(angle)}; }

std::vector<Vec3> pose(const Performer& p, const SyntheticRigConfig& cfg, double t) {
  const double s = p.scale;
  std::vector<Vec3> local(kNumItopJoints);
  const Vec3 torso{0.0, 0.0, 0.0};
  const Vec3 neck{0.0, -0.30 * s, 0.0};
  local[index(Joint::kTorso)] = torso;
  local[index(Joint::kNeck)] = neck;
  local[index(Joint::kHead)] = neck + Vec3{0.0, -0.20 * s, 0.0};
  const Joint shoulder[2] = {Joint::kRightShoulder, Joint::kLeftShoulder};
  const Joint elbow[2] = {Joint::kRightElbow, Joint::kLeftElbow};
  const Joint hand[2] = {Joint::kRightHand, Joint::kLeftHand};
  const Joint hip[2] = {Joint::kRightHip, Joint::kLeftHip};
  const Joint knee[2] = {Joint::kRightKnee, Joint::kLeftKnee};
  const Joint foot[2] = {Joint::kRightFoot, Joint::kLeftFoot};
  for (int side = 0; side < 2; ++side) {
    // Facing the camera, the performer's left is +x in the image.
    const double sgn = side == 0 ? -1.0 : 1.0;
    const Vec3 sh = neck + Vec3{sgn * 0.18 * s, 0.04 * s, 0.0};
    const double abd = p.abduction[side].at(t);
    const double flex = p.flexion[side].at(t);
    const double bend_elbow = std::max(0.0, p.elbow[side].at(t));
    const Vec3 upper = bend(sgn * std::sin(abd), std::cos(abd), flex);
    const Vec3 lower = bend(sgn * std::sin(abd), std::cos(abd), flex + bend_elbow);
    const Vec3 el = sh + upper * (cfg.upper_arm_m * s);
    local[index(shoulder[side])] = sh;
    local[index(elbow[side])] = el;
    local[index(hand[side])] = el + lower * (cfg.forearm_m * s);

    const Vec3 hp = torso + Vec3{sgn * 0.10 * s, 0.25 * s, 0.0};
    const double hip_flex = p.hip[side].at(t);
    const double knee_bend = std::max(0.0, p.knee[side].at(t));
    const Vec3 kn = hp + bend(0.0, 1.0, hip_flex) * (cfg.thigh_m * s);
    local[index(hip[side])] = hp;
    local[index(knee[side])] = kn;
    local[index(foot[side])] = kn + bend(0.0, 1.0, hip_flex - knee_bend) * (cfg.shin_m * s);
  }
  const double c = std::cos(p.yaw), sn = std::sin(p.yaw);
  std::vector<Vec3> world(kNumItopJoints);
  for (std::size_t j = 0; j < kNumItopJoints; ++j) {
    const Vec3 q = local[j];
    world[j] = Vec3{c * q.x + sn * q.z, q.y, -sn * q.x + c * q.z} + p.root;
  }
  return world;
}

Vec3 unit(Vec3 v) { return v * (1.0 / norm(v)); }

Vec3 sample_surface(const Capsule& cap, Rng& rng) {
  const Vec3 axis = cap.b - cap.a;
  if (squared_norm(axis) == 0.0) {
    Vec3 dir;
    do {
      dir = {standard_normal(rng), standard_normal(rng), standard_normal(rng)};
    } while (squared_norm(dir) < 1e-12);
    return cap.a + unit(dir) * cap.radius;
  }
  const Vec3 u = unit(axis);
  const Vec3 helper = std::fabs(u.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  const Vec3 e1 = unit(cross(u, helper));
  const Vec3 e2 = cross(u, e1);
  const double s = uniform01(rng);
  const double phi = uniform(rng, 0.0, kTwoPi);
  return cap.a + axis * s + (e1 * std::cos(phi) + e2 * std::sin(phi)) * cap.radius;
}

double surface_area(const Capsule& cap) {
  const double len = distance(cap.a, cap.b);
  return len > 0.0 ? kTwoPi * cap.radius * len : 2.0 * kTwoPi * cap.radius * cap.radius;
}

Vec3 round_to_float(Vec3 p) {
  return {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
}

}  // namespace

std::vector<Capsule> rig_capsules(const std::vector<Vec3>& j, const SyntheticRigConfig& cfg) {
  auto at = [&](Joint joint) { return j[index(joint)]; };
  const Vec3 chest = at(Joint::kNeck) + (at(Joint::kTorso) - at(Joint::kNeck)) * 0.3;
  const Vec3 pelvis = (at(Joint::kRightHip) + at(Joint::kLeftHip)) * 0.5;
  const double r = cfg.limb_radius_m;
  return {
      {at(Joint::kHead), at(Joint::kHead), cfg.head_radius_m},
      {chest, pelvis, cfg.torso_radius_m},
      {at(Joint::kRightShoulder), at(Joint::kRightElbow), r},
      {at(Joint::kRightElbow), at(Joint::kRightHand), r},
      {at(Joint::kLeftShoulder), at(Joint::kLeftElbow), r},
      {at(Joint::kLeftElbow), at(Joint::kLeftHand), r},
      {at(Joint::kRightHip), at(Joint::kRightKnee), r},
      {at(Joint::kRightKnee), at(Joint::kRightFoot), r},
      {at(Joint::kLeftHip), at(Joint::kLeftKnee), r},
      {at(Joint::kLeftKnee), at(Joint::kLeftFoot), r},
  };
}

SequenceDataset generate_synthetic(const SyntheticRigConfig& cfg, std::size_t recordings,
                                   std::uint64_t seed) {
  cfg.validate();
  SequenceDataset data;
  std::size_t frame_counter = 0;
  for (std::size_t r = 0; r < recordings; ++r) {
    Rng rng(derive_seed(seed, {r}));
    const Performer performer = draw_performer(rng, cfg);
    const double start_time = uniform(rng, 0.0, 10.0);
    Recording rec;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02zu", r % cfg.subjects);
    rec.subject = buf;
    std::snprintf(buf, sizeof buf, "%03zu", r);
    rec.recording = buf;
    for (std::size_t f = 0; f < cfg.frames_per_recording; ++f) {
      const double t = start_time + static_cast<double>(f) * cfg.frame_interval_s;
      std::vector<Vec3> joints = pose(performer, cfg, t);
      for (Vec3& jt : joints) jt = round_to_float(jt);
      const bool occluded = cfg.occlusion == OcclusionMode::kHideArmCurrentFrame &&
                            f + 1 == cfg.frames_per_recording;
      const auto capsules = rig_capsules(joints, cfg);
      std::vector<double> cumulative;
      double total = 0.0;
      for (std::size_t c = 0; c < capsules.size(); ++c) {
        const bool hidden = occluded && (c == kLeftUpperArm || c == kLeftForearm);
        total += hidden ? 0.0 : surface_area(capsules[c]);
        cumulative.push_back(total);
      }
      const Vec3 hidden_hand = joints[index(Joint::kLeftHand)];
      Frame frame;
      std::snprintf(buf, sizeof buf, "_%05zu", frame_counter++);
      frame.id = rec.subject + buf;
      frame.labels = SkeletonFrame::all_valid(joints);
      while (frame.cloud.size() < cfg.points_per_frame) {
        const double pick = uniform(rng, 0.0, total);
        const auto c = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        Vec3 p = sample_surface(capsules[std::min(c, capsules.size() - 1)], rng);
        if (cfg.noise_sigma_m > 0.0) {
          p += Vec3{standard_normal(rng), standard_normal(rng), standard_normal(rng)} * cfg.noise_sigma_m;
        }
        p = round_to_float(p);
        if (occluded && distance(p, hidden_hand) < kHiddenHandClearance) continue;
        frame.cloud.points.push_back(p);
      }
      rec.frames.push_back(std::move(frame));
    }
    data.recordings.push_back(std::move(rec));
  }
  return data;
}

}  // namespace spike
