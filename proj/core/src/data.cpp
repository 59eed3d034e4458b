#include "spike/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "spike/checkpoint.hpp"
#include "spike/errors.hpp"
#include "spike/random.hpp"

namespace fs = std::filesystem;

namespace spike {

std::size_t SequenceDataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& rec : recordings) n += rec.frames.size();
  return n;
}

std::vector<std::string> SequenceDataset::subjects() const {
  std::set<std::string> unique;
  for (const auto& rec : recordings) unique.insert(rec.subject);
  return {unique.begin(), unique.end()};
}

Split itop_split(const std::string& subject) {
  int id = -1;
  try {
    std::size_t used = 0;
    id = std::stoi(subject, &used);
    if (used != subject.size()) id = -1;
  } catch (const std::exception&) {
    id = -1;
  }
  if (id < 0) throw DataError("subject id '" + subject + "' is not numeric");
  return id <= 4 ? Split::kTest : Split::kTrain;
}

SequenceDataset filter_subjects(const SequenceDataset& data, const std::vector<std::string>& keep) {
  SequenceDataset out;
  for (const auto& rec : data.recordings) {
    if (std::find(keep.begin(), keep.end(), rec.subject) != keep.end()) out.recordings.push_back(rec);
  }
  return out;
}

SequenceDataset split_subset(const SequenceDataset& data, Split split) {
  SequenceDataset out;
  for (const auto& rec : data.recordings) {
    if (itop_split(rec.subject) == split) out.recordings.push_back(rec);
  }
  return out;
}

PairSelection parse_pair_selection(const std::string& text) {
  if (text == "all") return PairSelection::kAllFrames;
  if (text == "last") return PairSelection::kLastFrame;
  throw ConfigError("pairs must be 'all' or 'last', got '" + text + "'");
}

std::string_view to_string(PairSelection selection) {
  return selection == PairSelection::kAllFrames ? "all" : "last";
}

std::vector<SamplePair> eval_pairs(const SequenceDataset& data, PairSelection selection) {
  std::vector<SamplePair> pairs;
  for (std::size_t r = 0; r < data.recordings.size(); ++r) {
    const auto& frames = data.recordings[r].frames;
    if (frames.empty()) continue;
    const std::size_t first = selection == PairSelection::kLastFrame ? frames.size() - 1 : 0;
    for (std::size_t f = first; f < frames.size(); ++f) {
      if (frames[f].labels.any_valid()) pairs.push_back({r, f});
    }
  }
  return pairs;
}

Window window(const Recording& rec, std::size_t t, std::size_t seq_len, WindowMode mode) {
  if (seq_len == 0) throw ConfigError("window: sequence length must be >= 1");
  if (t >= rec.frames.size()) throw DataError("window: frame index out of range");
  const auto T = static_cast<long>(seq_len);
  const long first = mode == WindowMode::kPast ? static_cast<long>(t) - T + 1
                                               : static_cast<long>(t) - T / 2;
  const auto last = static_cast<long>(rec.frames.size()) - 1;
  Window w;
  for (long k = 0; k < T; ++k) {
    const auto src = static_cast<std::size_t>(std::clamp(first + k, 0L, last));
    w.frame_indices.push_back(src);
    w.sequence.frames.push_back(rec.frames[src].cloud);
    w.sequence.timestamps.push_back(static_cast<int>(k));
  }
  w.target = rec.frames[t].labels;
  return w;
}

Example make_example(const Recording& rec, std::size_t t, const HyperParams& hp,
                     std::uint64_t seed, bool augment_on) {
  Window w = window(rec, t, hp.seq_len, hp.window_mode);
  for (std::size_t k = 0; k < w.sequence.frames.size(); ++k) {
    w.sequence.frames[k] = resample(w.sequence.frames[k], hp.num_points, derive_seed(seed, {k}));
  }
  auto [centered, centroid] = center_sequence(w.sequence);
  Example ex{std::move(centered), std::move(w.target), centroid};
  for (Vec3& j : ex.target.joints) j -= centroid;
  if (augment_on) {
    auto [seq, target] = augment(ex.sequence, ex.target, derive_seed(seed, {0xa5a5a5a5ULL}));
    ex.sequence = std::move(seq);
    ex.target = std::move(target);
  }
  return ex;
}

// ---- native format ------------------------------------------------------------

namespace {

constexpr char kPointMagic[4] = {'S', 'P', 'P', 'C'};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string recording_dir_name(std::size_t index, const Recording& rec) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return std::string(buf) + "_" + rec.subject + "_" + rec.recording;
}

void require_token(const std::string& token) {
  if (token.empty() || token.find_first_of(" \t\n/=") != std::string::npos) {
    throw DataError("identifier '" + token + "' is empty or contains reserved characters");
  }
}

// Splits "key=value key=value" into pairs, in order.
std::vector<std::pair<std::string, std::string>> parse_fields(const std::string& line,
                                                              const std::string& file,
                                                              std::size_t offset) {
  std::vector<std::pair<std::string, std::string>> fields;
  std::istringstream in(line);
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError(file, offset, "expected key=value, got '" + token + "'");
    fields.emplace_back(token.substr(0, eq), token.substr(eq + 1));
  }
  return fields;
}

const std::string& field(const std::vector<std::pair<std::string, std::string>>& fields,
                         const std::string& key, const std::string& file, std::size_t offset) {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  throw ParseError(file, offset, "missing field '" + key + "'");
}

std::size_t parse_count(const std::string& text, const std::string& file, std::size_t offset) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError(file, offset, "expected a non-negative integer, got '" + text + "'");
  }
  return std::stoull(text);
}

double parse_double(const std::string& text, const std::string& file, std::size_t offset) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || !std::isfinite(v)) {
    throw ParseError(file, offset, "expected a finite number, got '" + text + "'");
  }
  return v;
}

struct LabelLine {
  std::string id;
  SkeletonFrame labels;
};

std::vector<LabelLine> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<LabelLine> out;
  std::string line;
  std::size_t offset = 0;
  const std::string file = path.string();
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    const auto fields = parse_fields(line, file, line_start);
    LabelLine rec;
    rec.id = field(fields, "frame", file, line_start);
    const std::string& joints = field(fields, "joints", file, line_start);
    const std::string& valid = field(fields, "valid", file, line_start);
    std::vector<double> coords;
    std::stringstream js(joints);
    std::string item;
    while (std::getline(js, item, ',')) coords.push_back(parse_double(item, file, line_start));
    if (coords.size() != 3 * valid.size() || valid.empty()) {
      throw ParseError(file, line_start,
                       "frame " + rec.id + ": " + std::to_string(coords.size()) + " coordinates for " +
                           std::to_string(valid.size()) + " validity bits");
    }
    for (std::size_t j = 0; j < valid.size(); ++j) {
      if (valid[j] != '0' && valid[j] != '1') throw ParseError(file, line_start, "validity bits must be 0/1");
      rec.labels.joints.push_back({coords[3 * j], coords[3 * j + 1], coords[3 * j + 2]});
      rec.labels.valid.push_back(valid[j] == '1');
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

void write_point_file(const PointCloud& pc, const fs::path& path) {
  std::vector<std::uint8_t> bytes(kPointMagic, kPointMagic + 4);
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put32(static_cast<std::uint32_t>(pc.size()));
  for (const Vec3& p : pc.points) {
    for (double c : {p.x, p.y, p.z}) put32(std::bit_cast<std::uint32_t>(static_cast<float>(c)));
  }
  write_file_bytes(path, bytes);
}

PointCloud read_point_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string file = path.string();
  if (bytes.size() < 8) throw ParseError(file, bytes.size(), "truncated point file header");
  if (!std::equal(kPointMagic, kPointMagic + 4, bytes.begin())) throw ParseError(file, 0, "bad magic, expected 'SPPC'");
  auto get32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  };
  const std::uint64_t count = get32(4);
  if (bytes.size() != 8 + 12 * count) {
    throw ParseError(file, 4, "point count " + std::to_string(count) + " needs " +
                                  std::to_string(8 + 12 * count) + " bytes, file has " +
                                  std::to_string(bytes.size()));
  }
  PointCloud pc;
  pc.points.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = 8 + 12 * i;
    const float x = std::bit_cast<float>(get32(at));
    const float y = std::bit_cast<float>(get32(at + 4));
    const float z = std::bit_cast<float>(get32(at + 8));
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw ParseError(file, at, "non-finite coordinate");
    }
    pc.points[i] = {x, y, z};
  }
  return pc;
}

void write_native(const SequenceDataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t r = 0; r < data.recordings.size(); ++r) {
    const Recording& rec = data.recordings[r];
    require_token(rec.subject);
    require_token(rec.recording);
    const fs::path rdir = dir / recording_dir_name(r, rec);
    fs::create_directories(rdir / "points");
    {
      std::ofstream manifest(rdir / "manifest.txt");
      manifest << "subject=" << rec.subject << " recording=" << rec.recording
               << " frames=" << rec.frames.size() << '\n';
    }
    std::ofstream labels(rdir / "labels.txt");
    for (const Frame& frame : rec.frames) {
      require_token(frame.id);
      labels << "frame=" << frame.id << " joints=";
      for (std::size_t j = 0; j < frame.labels.size(); ++j) {
        const Vec3 p = frame.labels.joints[j];
        labels << (j ? "," : "") << format_double(p.x) << ',' << format_double(p.y) << ','
               << format_double(p.z);
      }
      labels << " valid=";
      for (bool v : frame.labels.valid) labels << (v ? '1' : '0');
      labels << '\n';
      write_point_file(frame.cloud, rdir / "points" / (frame.id + ".sppc"));
    }
    if (!labels) throw DataError("failed writing " + (rdir / "labels.txt").string());
  }
}

SequenceDataset load_native(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  std::vector<fs::path> rdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) rdirs.push_back(entry.path());
  }
  std::sort(rdirs.begin(), rdirs.end());
  SequenceDataset data;
  for (const fs::path& rdir : rdirs) {
    const fs::path manifest_path = rdir / "manifest.txt";
    std::ifstream manifest(manifest_path);
    if (!manifest) throw DataError("missing manifest: " + manifest_path.string());
    std::string line;
    std::getline(manifest, line);
    const auto fields = parse_fields(line, manifest_path.string(), 0);
    Recording rec;
    rec.subject = field(fields, "subject", manifest_path.string(), 0);
    rec.recording = field(fields, "recording", manifest_path.string(), 0);
    const std::size_t expected = parse_count(field(fields, "frames", manifest_path.string(), 0),
                                             manifest_path.string(), 0);

    const auto labels = read_labels(rdir / "labels.txt");
    if (labels.size() != expected) {
      throw DataError(manifest_path.string() + ": manifest lists " + std::to_string(expected) +
                      " frames, labels.txt has " + std::to_string(labels.size()));
    }
    std::set<std::string> labeled;
    for (const auto& l : labels) {
      if (!labeled.insert(l.id).second) throw DataError((rdir / "labels.txt").string() + ": duplicate frame id " + l.id);
    }
    if (fs::is_directory(rdir / "points")) {
      for (const auto& entry : fs::directory_iterator(rdir / "points")) {
        const std::string id = entry.path().stem().string();
        if (entry.path().extension() == ".sppc" && !labeled.count(id)) {
          throw DataError(rdir.string() + ": missing label for frame id " + id);
        }
      }
    }
    for (const auto& l : labels) {
      const fs::path pfile = rdir / "points" / (l.id + ".sppc");
      if (!fs::exists(pfile)) throw DataError(rdir.string() + ": no point file for frame id " + l.id);
      rec.frames.push_back({l.id, read_point_file(pfile), l.labels});
    }
    data.recordings.push_back(std::move(rec));
  }
  return data;
}

SequenceDataset load_itop(const fs::path& dir, const SegmentationConfig* segment) {
  SequenceDataset data = load_native(dir);
  for (Recording& rec : data.recordings) {
    if (rec.subject.size() != 2) throw DataError("ITOP subject id '" + rec.subject + "' is not two digits");
    itop_split(rec.subject);
    for (Frame& frame : rec.frames) {
      if (frame.labels.size() != kNumItopJoints) {
        throw DataError("ITOP frame " + frame.id + " has " + std::to_string(frame.labels.size()) +
                        " joints, expected 15");
      }
      if (frame.id.rfind(rec.subject + "_", 0) != 0) {
        throw DataError("ITOP frame id " + frame.id + " does not belong to subject " + rec.subject);
      }
      if (segment) frame.cloud = segment_human(frame.cloud, *segment);
    }
  }
  return data;
}

}  // namespace spike
