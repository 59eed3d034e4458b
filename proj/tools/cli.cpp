#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "spike/checkpoint.hpp"
#include "spike/errors.hpp"
#include "spike/model.hpp"
#include "spike/random.hpp"

namespace fs = std::filesystem;

namespace spike::cli {

namespace {

// ---- value codecs -------------------------------------------------------------

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* expected) {
  throw ConfigError("key '" + key + "': expected " + expected + ", got '" + text + "'");
}

void parse_into(const std::string& key, const std::string& text, std::size_t& v) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) bad_value(key, text, "a non-negative integer");
}

void parse_into(const std::string& key, const std::string& text, int& v) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) bad_value(key, text, "an integer");
}

void parse_into(const std::string& key, const std::string& text, double& v) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    bad_value(key, text, "a finite number");
  }
}

void parse_into(const std::string& key, const std::string& text, bool& v) {
  if (text == "true" || text == "1") {
    v = true;
  } else if (text == "false" || text == "0") {
    v = false;
  } else {
    bad_value(key, text, "true or false");
  }
}

void parse_into(const std::string&, const std::string& text, std::string& v) { v = text; }
void parse_into(const std::string&, const std::string& text, fs::path& v) { v = text; }

template <typename Enum, typename Parse>
void parse_enum(const std::string& key, const std::string& text, Enum& v, Parse parse) {
  try {
    v = parse(text);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

void parse_into(const std::string& key, const std::string& text, WindowMode& v) {
  parse_enum(key, text, v, [](const std::string& t) { return parse_window_mode(t); });
}
void parse_into(const std::string& key, const std::string& text, ConvMode& v) {
  parse_enum(key, text, v, [](const std::string& t) { return parse_conv_mode(t); });
}
void parse_into(const std::string& key, const std::string& text, PairSelection& v) {
  parse_enum(key, text, v, parse_pair_selection);
}
void parse_into(const std::string& key, const std::string& text, OcclusionMode& v) {
  parse_enum(key, text, v, parse_occlusion_mode);
}
void parse_into(const std::string& key, const std::string& text, FloorSide& v) {
  if (text == "max-y") {
    v = FloorSide::kMaxY;
  } else if (text == "min-y") {
    v = FloorSide::kMinY;
  } else {
    bad_value(key, text, "max-y or min-y");
  }
}

std::string format(std::size_t v) { return std::to_string(v); }
std::string format(int v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }
std::string format(const fs::path& v) { return v.string(); }
std::string format(WindowMode v) { return std::string(to_string(v)); }
std::string format(ConvMode v) { return std::string(to_string(v)); }
std::string format(PairSelection v) { return std::string(to_string(v)); }
std::string format(OcclusionMode v) { return std::string(to_string(v)); }
std::string format(FloorSide v) { return v == FloorSide::kMaxY ? "max-y" : "min-y"; }
std::string format(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// ---- key registry -------------------------------------------------------------

struct Field {
  std::string key;
  bool architecture;  // part of HyperParams, stored in checkpoints
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Get>
Field field(std::string key, Get get, bool architecture = false) {
  return {key, architecture,
          [key, get](RunConfig& c, const std::string& text) { parse_into(key, text, get(c)); },
          [get](const RunConfig& c) { return format(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field hp_field(std::string key, Get get) {
  return field(std::move(key), get, true);
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      // paths and selection
      field("data", [](RunConfig& c) -> auto& { return c.data; }),
      field("data_format", [](RunConfig& c) -> auto& { return c.data_format; }),
      field("segment", [](RunConfig& c) -> auto& { return c.segment; }),
      field("split", [](RunConfig& c) -> auto& { return c.split; }),
      field("checkpoint", [](RunConfig& c) -> auto& { return c.checkpoint; }),
      field("out", [](RunConfig& c) -> auto& { return c.out; }),
      field("sequence", [](RunConfig& c) -> auto& { return c.sequence; }),
      field("plot", [](RunConfig& c) -> auto& { return c.plot; }),
      field("seed", [](RunConfig& c) -> auto& { return c.train.seed; }),
      // model
      hp_field("seq_len", [](RunConfig& c) -> auto& { return c.hp.seq_len; }),
      hp_field("num_points", [](RunConfig& c) -> auto& { return c.hp.num_points; }),
      hp_field("num_volumes", [](RunConfig& c) -> auto& { return c.hp.num_volumes; }),
      hp_field("num_samples", [](RunConfig& c) -> auto& { return c.hp.num_samples; }),
      hp_field("radius", [](RunConfig& c) -> auto& { return c.hp.radius; }),
      hp_field("channels", [](RunConfig& c) -> auto& { return c.hp.channels; }),
      hp_field("conv_channels", [](RunConfig& c) -> auto& { return c.hp.conv_channels; }),
      hp_field("key_channels", [](RunConfig& c) -> auto& { return c.hp.key_channels; }),
      hp_field("value_channels", [](RunConfig& c) -> auto& { return c.hp.value_channels; }),
      hp_field("heads", [](RunConfig& c) -> auto& { return c.hp.heads; }),
      hp_field("blocks", [](RunConfig& c) -> auto& { return c.hp.blocks; }),
      hp_field("joints", [](RunConfig& c) -> auto& { return c.hp.joints; }),
      hp_field("temporal_kernel", [](RunConfig& c) -> auto& { return c.hp.temporal_kernel; }),
      hp_field("window_mode", [](RunConfig& c) -> auto& { return c.hp.window_mode; }),
      hp_field("conv_mode", [](RunConfig& c) -> auto& { return c.hp.conv_mode; }),
      // training
      field("batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; }),
      field("learning_rate", [](RunConfig& c) -> auto& { return c.train.learning_rate; }),
      field("momentum", [](RunConfig& c) -> auto& { return c.train.momentum; }),
      field("epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }),
      field("augment", [](RunConfig& c) -> auto& { return c.train.augment; }),
      field("pairs", [](RunConfig& c) -> auto& { return c.train.pairs; }),
      field("val_fraction", [](RunConfig& c) -> auto& { return c.train.val_fraction; }),
      field("checkpoint_every", [](RunConfig& c) -> auto& { return c.train.checkpoint_every; }),
      field("max_steps", [](RunConfig& c) -> auto& { return c.train.max_steps; }),
      field("threads", [](RunConfig& c) -> auto& { return c.train.threads; }),
      field("resume", [](RunConfig& c) -> auto& { return c.train.resume; }),
      // evaluation and benchmark
      field("threshold", [](RunConfig& c) -> auto& { return c.threshold; }),
      field("warmup", [](RunConfig& c) -> auto& { return c.warmup; }),
      field("iters", [](RunConfig& c) -> auto& { return c.iters; }),
      // segmentation
      field("depth_threshold", [](RunConfig& c) -> auto& { return c.segmentation.depth_threshold_m; }),
      field("floor_bins_discard", [](RunConfig& c) -> auto& { return c.segmentation.floor_bins_discard; }),
      field("histogram_bins", [](RunConfig& c) -> auto& { return c.segmentation.histogram_bins; }),
      field("dbscan_eps", [](RunConfig& c) -> auto& { return c.segmentation.dbscan_eps_m; }),
      field("dbscan_min_pts", [](RunConfig& c) -> auto& { return c.segmentation.dbscan_min_pts; }),
      field("cluster_offset", [](RunConfig& c) -> auto& { return c.segmentation.cluster_offset_m; }),
      field("floor_side", [](RunConfig& c) -> auto& { return c.segmentation.floor_side; }),
      // synthetic data
      field("recordings", [](RunConfig& c) -> auto& { return c.recordings; }),
      field("points_per_frame", [](RunConfig& c) -> auto& { return c.synth.points_per_frame; }),
      field("frames_per_recording", [](RunConfig& c) -> auto& { return c.synth.frames_per_recording; }),
      field("subjects", [](RunConfig& c) -> auto& { return c.synth.subjects; }),
      field("noise_sigma", [](RunConfig& c) -> auto& { return c.synth.noise_sigma_m; }),
      field("motion_amplitude", [](RunConfig& c) -> auto& { return c.synth.motion_amplitude_rad; }),
      field("motion_frequency", [](RunConfig& c) -> auto& { return c.synth.motion_frequency_hz; }),
      field("occlusion", [](RunConfig& c) -> auto& { return c.synth.occlusion; }),
  };
  return all;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kFile:
      return "file";
    case Source::kFlag:
      return "flag";
    default:
      return "default";
  }
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

void validate(const RunConfig& c) {
  c.hp.validate();
  c.train.validate();
  c.segmentation.validate();
  c.synth.validate();
  if (c.data_format != "native" && c.data_format != "itop") {
    throw ConfigError("key 'data_format': expected native or itop, got '" + c.data_format + "'");
  }
  if (c.split != "all" && c.split != "train" && c.split != "test") {
    throw ConfigError("key 'split': expected all, train or test, got '" + c.split + "'");
  }
  if (!(c.threshold > 0.0)) throw ConfigError("key 'threshold': must be > 0");
  if (c.iters == 0) throw ConfigError("key 'iters': must be >= 1");
  if (c.recordings == 0) throw ConfigError("key 'recordings': must be >= 1");
}

// ---- shared command plumbing -------------------------------------------------

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.threads = effective_threads(t.threads);
  return t;
}

// Explicitly configured architecture keys must agree with the checkpoint.
void check_architecture(const RunConfig& cfg, const HyperParams& stored) {
  RunConfig from_file = cfg;
  from_file.hp = stored;
  for (const Field& f : fields()) {
    if (!f.architecture || cfg.source(f.key) == Source::kDefault) continue;
    if (f.get(cfg) != f.get(from_file)) {
      throw ConfigError("key '" + f.key + "' is " + f.get(cfg) + " but the checkpoint has " +
                        f.get(from_file));
    }
  }
}

void check_joint_count(const SequenceDataset& data, const HyperParams& hp) {
  for (const auto& rec : data.recordings) {
    for (const auto& frame : rec.frames) {
      if (frame.labels.size() != hp.joints) {
        throw DataError("frame " + frame.id + " has " + std::to_string(frame.labels.size()) +
                        " joints, checkpoint predicts " + std::to_string(hp.joints));
      }
    }
  }
}

Checkpoint require_checkpoint(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("key 'checkpoint' must be set");
  if (!fs::exists(cfg.checkpoint)) {
    throw ConfigError("key 'checkpoint': no such file " + cfg.checkpoint.string());
  }
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  check_architecture(cfg, ck.hp);
  return ck;
}

std::vector<fs::path> split_paths(const std::string& text) {
  std::vector<fs::path> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    part = trim(part);
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

// Window slot of the predicted frame when the recording is exactly one window.
std::size_t target_slot(const HyperParams& hp) {
  return hp.window_mode == WindowMode::kPast ? hp.seq_len - 1 : hp.seq_len / 2;
}

Recording unlabeled(std::vector<PointCloud> clouds, std::size_t joints) {
  Recording rec{"input", "input", {}};
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    Frame f;
    f.id = "input_" + std::to_string(i);
    f.cloud = std::move(clouds[i]);
    f.labels.joints.assign(joints, Vec3{});
    f.labels.valid.assign(joints, false);
    rec.frames.push_back(std::move(f));
  }
  return rec;
}

}  // namespace

Source RunConfig::source(const std::string& key) const {
  const auto it = sources.find(key);
  return it == sources.end() ? Source::kDefault : it->second;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key + "=" + f.get(*this) + "  # " + std::string(to_string(source(f.key))) + "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

RunConfig resolve_config(const std::string& file_text, const std::map<std::string, std::string>& flags) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream is(file_text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("key '" + key + "' given twice in config file");
    f->set(cfg, trim(line.substr(eq + 1)));
    cfg.sources[key] = Source::kFile;
  }
  for (const auto& [key, value] : flags) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown config key '" + key + "'");
    f->set(cfg, value);
    cfg.sources[key] = Source::kFlag;
  }
  validate(cfg);
  return cfg;
}

RunConfig resolve_config_file(const fs::path& file, const std::map<std::string, std::string>& flags) {
  if (file.empty()) return resolve_config("", flags);
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return resolve_config(ss.str(), flags);
}

std::size_t effective_threads(std::size_t requested) {
  const char* env = std::getenv("SPIKE_THREADS");
  if (!env || !*env) return requested;
  std::size_t cap = 0;
  parse_into("SPIKE_THREADS", env, cap);
  if (cap == 0) throw ConfigError("SPIKE_THREADS must be >= 1");
  return std::min(requested, cap);
}

SequenceDataset load_dataset(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("key 'data' must be set");
  if (!fs::is_directory(cfg.data)) throw ConfigError("key 'data': no such directory " + cfg.data.string());
  SequenceDataset data;
  if (cfg.data_format == "itop") {
    data = load_itop(cfg.data, cfg.segment ? &cfg.segmentation : nullptr);
  } else {
    data = load_native(cfg.data);
  }
  if (cfg.split == "train") data = split_subset(data, Split::kTrain);
  if (cfg.split == "test") data = split_subset(data, Split::kTest);
  if (data.frame_count() == 0) throw DataError("no frames in " + cfg.data.string() + " (split " + cfg.split + ")");
  return data;
}

// ---- commands -------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const SequenceDataset data = load_dataset(cfg);
  if (cfg.out.empty()) throw ConfigError("key 'out' must be set");
  fs::create_directories(cfg.out);
  write_text(cfg.out / "resolved_config.txt", cfg.dump());
  TrainConfig t = train_config(cfg);
  t.out_dir = cfg.out;
  train(data, cfg.hp, t, [&](const EpochLog& e) { out << e.line() << '\n' << std::flush; });
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const Checkpoint ck = require_checkpoint(cfg);
  const SequenceDataset data = load_dataset(cfg);
  check_joint_count(data, ck.hp);
  const auto pairs = eval_pairs(data, cfg.train.pairs);
  const Evaluation ev = evaluate(data, pairs, ck.hp, ck.params, cfg.train.seed, cfg.threshold,
                                 effective_threads(cfg.train.threads));
  out << ev.report.table();
  if (!cfg.out.empty()) write_text(cfg.out / "eval_report.txt", ev.report.records());
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  const Checkpoint ck = require_checkpoint(cfg);
  const auto files = split_paths(cfg.sequence.string());
  if (files.size() != ck.hp.seq_len) {
    throw DataError("predict: sequence has " + std::to_string(files.size()) + " frames, model expects " +
                    std::to_string(ck.hp.seq_len));
  }
  std::vector<PointCloud> clouds;
  for (const auto& f : files) {
    clouds.push_back(read_point_file(f));
    if (clouds.back().empty()) throw DataError("predict: " + f.string() + " has no points");
  }
  const Recording rec = unlabeled(std::move(clouds), ck.hp.joints);
  const Example ex = make_example(rec, target_slot(ck.hp), ck.hp, cfg.train.seed, false);
  std::vector<Vec3> joints = to_joints(forward(ex.sequence, ck.hp, ck.params, cfg.train.seed));
  char line[96];
  for (Vec3& j : joints) {
    j += ex.centroid;
    std::snprintf(line, sizeof line, "%.9g %.9g %.9g\n", j.x, j.y, j.z);
    out << line;
  }
  if (!cfg.plot.empty()) write_text(cfg.plot, skeleton_svg(joints));
  return 0;
}

std::string AblationCell::line() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "seq_len=%zu window_mode=%s conv_mode=%s temporal_kernel=%zu map=%.2f peak_bytes=%zu",
                seq_len, std::string(to_string(window_mode)).c_str(),
                std::string(to_string(conv_mode)).c_str(), temporal_kernel, mean_ap, peak_bytes);
  return buf;
}

std::vector<AblationCell> run_ablation(const SequenceDataset& data, const RunConfig& cfg) {
  const auto held_out = validation_subjects(data, cfg.train.val_fraction);
  std::vector<std::string> rest;
  for (const auto& s : data.subjects()) {
    if (std::find(held_out.begin(), held_out.end(), s) == held_out.end()) rest.push_back(s);
  }
  const SequenceDataset train_data = filter_subjects(data, rest);
  const SequenceDataset eval_data = held_out.empty() ? train_data : filter_subjects(data, held_out);
  const auto pairs = eval_pairs(eval_data, cfg.train.pairs);
  TrainConfig t = train_config(cfg);
  t.val_fraction = 0.0;

  std::vector<AblationCell> cells;
  for (std::size_t T = 1; T <= 4; ++T) {
    for (WindowMode mode : {WindowMode::kPast, WindowMode::kPastFuture}) {
      for (ConvMode conv : {ConvMode::kSpatial, ConvMode::kSpatioTemporal}) {
        HyperParams hp = cfg.hp;
        hp.seq_len = T;
        hp.window_mode = mode;
        hp.conv_mode = conv;
        // k_t = 3 where the window allows it.
        hp.temporal_kernel = conv == ConvMode::kSpatioTemporal && T >= 3 ? 3 : 1;
        reset_peak_memory();
        const TrainResult result = train(train_data, hp, t);
        const Evaluation ev = evaluate(eval_data, pairs, hp, result.params, cfg.train.seed, cfg.threshold,
                                       t.threads);
        cells.push_back({T, mode, conv, hp.temporal_kernel, ev.report.mean_ap(), memory_stats().peak_bytes});
      }
    }
  }
  return cells;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  const SequenceDataset data = load_dataset(cfg);
  std::string report;
  for (const AblationCell& cell : run_ablation(data, cfg)) {
    out << cell.line() << '\n' << std::flush;
    report += cell.line() + "\n";
  }
  if (!cfg.out.empty()) {
    write_text(cfg.out / "ablation.txt", report);
    write_text(cfg.out / "resolved_config.txt", cfg.dump());
  }
  return 0;
}

LatencyStats run_bench(const RunConfig& cfg) {
  HyperParams hp = cfg.hp;
  ModelParams params;
  if (!cfg.checkpoint.empty()) {
    Checkpoint ck = require_checkpoint(cfg);
    hp = ck.hp;
    params = std::move(ck.params);
  } else {
    params = ModelParams::init(hp, cfg.train.seed);
  }
  Recording rec;
  if (!cfg.data.empty()) {
    rec = load_dataset(cfg).recordings.front();
  } else {
    SyntheticRigConfig rig = cfg.synth;
    rig.frames_per_recording = std::max(rig.frames_per_recording, hp.seq_len);
    rec = generate_synthetic(rig, 1, cfg.train.seed).recordings.front();
  }
  const Example ex = make_example(rec, rec.frames.size() - 1, hp, cfg.train.seed, false);
  return benchmark_inference([&] { forward(ex.sequence, hp, params, cfg.train.seed); }, cfg.warmup, cfg.iters);
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
  out << run_bench(cfg).record() << '\n';
  return 0;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  if (cfg.out.empty()) throw ConfigError("key 'out' must be set");
  const SequenceDataset data = generate_synthetic(cfg.synth, cfg.recordings, cfg.train.seed);
  write_native(data, cfg.out);
  out << "recordings=" << data.recordings.size() << " frames=" << data.frame_count()
      << " out=" << cfg.out.string() << '\n';
  return 0;
}

std::string skeleton_svg(const std::vector<Vec3>& joints) {
  if (joints.size() != kNumItopJoints) {
    throw ConfigError("plot needs " + std::to_string(kNumItopJoints) + " joints, got " +
                      std::to_string(joints.size()));
  }
  constexpr double kSize = 400.0;
  constexpr double kMargin = 20.0;
  double lo_x = joints[0].x, hi_x = joints[0].x, lo_y = joints[0].y, hi_y = joints[0].y;
  for (const Vec3& j : joints) {
    lo_x = std::min(lo_x, j.x);
    hi_x = std::max(hi_x, j.x);
    lo_y = std::min(lo_y, j.y);
    hi_y = std::max(hi_y, j.y);
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  const double s = (kSize - 2 * kMargin) / span;
  // Image y grows downward like camera y.
  auto px = [&](const Vec3& j) { return kMargin + (j.x - lo_x) * s; };
  auto py = [&](const Vec3& j) { return kMargin + (j.y - lo_y) * s; };

  std::ostringstream os;
  char buf[160];
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"400\" viewBox=\"0 0 400 400\">\n";
  os << "<rect width=\"400\" height=\"400\" fill=\"white\"/>\n";
  for (const auto& [a, b] : kBones) {
    const Vec3& p = joints[index(a)];
    const Vec3& q = joints[index(b)];
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#1f4e79\" stroke-width=\"3\"/>\n",
                  px(p), py(p), px(q), py(q));
    os << buf;
  }
  for (std::size_t j = 0; j < joints.size(); ++j) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#c0392b\"><title>%s</title></circle>\n",
                  px(joints[j]), py(joints[j]), std::string(kJointNames[j]).c_str());
    os << buf;
  }
  os << "</svg>\n";
  return os.str();
}

// ---- entry point --------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"SPiKE point-cloud-sequence pose estimation", "spike"};
  app.require_subcommand(1);

  using Command = int (*)(const RunConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"train", "Train a model and write checkpoints", cmd_train},
      {"eval", "Evaluate a checkpoint (mAP table)", cmd_eval},
      {"predict", "Predict the joints of one point-cloud sequence", cmd_predict},
      {"ablate", "Sweep sequence length, window mode and convolution type", cmd_ablate},
      {"bench", "Per-frame inference latency", cmd_bench},
      {"synth", "Write a synthetic dataset", cmd_synth},
  };

  std::string config_path;
  std::map<std::string, std::string> raw;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value config file");
    for (const Field& f : fields()) {
      options.emplace_back(f.key, sub->add_option("--" + f.key, raw[f.key]));
    }
    subs.emplace_back(sub, fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  std::map<std::string, std::string> flags;
  for (const auto& [key, opt] : options) {
    if (opt->count() > 0) flags[key] = raw[key];
  }

  try {
    const RunConfig cfg = resolve_config_file(config_path, flags);
    for (const auto& [sub, fn] : subs) {
      if (sub->parsed()) return fn(cfg, out);
    }
    return 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace spike::cli
