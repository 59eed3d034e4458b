#include "spike/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "spike/errors.hpp"

namespace spike {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'I', 'K'};
constexpr char kStateMagic[4] = {'S', 'P', 'K', 'O'};

class ByteWriter {
 public:
  void raw(const char* bytes, std::size_t n) { out_.insert(out_.end(), bytes, bytes + n); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { little(v); }
  void u64(std::uint64_t v) { little(v); }
  void f32(float v) { little(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { little(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  template <typename U>
  void little(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  void expect_magic(const char (&magic)[4]) {
    need(4, "magic");
    if (std::memcmp(&bytes_[pos_], magic, 4) != 0) fail("bad magic, expected '" + std::string(magic, 4) + "'");
    pos_ += 4;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) { return little<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return little<std::uint64_t>(what); }
  float f32(const char* what) { return std::bit_cast<float>(little<std::uint32_t>(what)); }
  double f64(const char* what) { return std::bit_cast<double>(little<std::uint64_t>(what)); }
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(name_, pos_, what); }
  [[noreturn]] void fail_at(std::size_t offset, const std::string& what) const {
    throw ParseError(name_, offset, what);
  }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) fail(std::string("truncated while reading ") + what);
  }
  template <typename U>
  U little(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

void write_hyperparams(ByteWriter& w, const HyperParams& hp) {
  w.u32(static_cast<std::uint32_t>(hp.seq_len));
  w.u32(static_cast<std::uint32_t>(hp.num_points));
  w.u32(static_cast<std::uint32_t>(hp.num_volumes));
  w.u32(static_cast<std::uint32_t>(hp.num_samples));
  w.f64(hp.radius);
  w.u32(static_cast<std::uint32_t>(hp.channels));
  w.u32(static_cast<std::uint32_t>(hp.conv_channels));
  w.u32(static_cast<std::uint32_t>(hp.key_channels));
  w.u32(static_cast<std::uint32_t>(hp.value_channels));
  w.u32(static_cast<std::uint32_t>(hp.heads));
  w.u32(static_cast<std::uint32_t>(hp.blocks));
  w.u32(static_cast<std::uint32_t>(hp.joints));
  w.u32(static_cast<std::uint32_t>(hp.temporal_kernel));
  w.u8(hp.window_mode == WindowMode::kPast ? 0 : 1);
  w.u8(hp.conv_mode == ConvMode::kSpatial ? 0 : 1);
}

HyperParams read_hyperparams(ByteReader& r) {
  const std::size_t start = r.offset();
  HyperParams hp;
  hp.seq_len = r.u32("seq_len");
  hp.num_points = r.u32("num_points");
  hp.num_volumes = r.u32("num_volumes");
  hp.num_samples = r.u32("num_samples");
  hp.radius = r.f64("radius");
  hp.channels = r.u32("channels");
  hp.conv_channels = r.u32("conv_channels");
  hp.key_channels = r.u32("key_channels");
  hp.value_channels = r.u32("value_channels");
  hp.heads = r.u32("heads");
  hp.blocks = r.u32("blocks");
  hp.joints = r.u32("joints");
  hp.temporal_kernel = r.u32("temporal_kernel");
  const std::uint8_t window = r.u8("window_mode");
  const std::uint8_t conv = r.u8("conv_mode");
  if (window > 1) r.fail("window_mode byte out of range");
  if (conv > 1) r.fail("conv_mode byte out of range");
  hp.window_mode = window == 0 ? WindowMode::kPast : WindowMode::kPastFuture;
  hp.conv_mode = conv == 0 ? ConvMode::kSpatial : ConvMode::kSpatioTemporal;
  try {
    hp.validate();
  } catch (const ConfigError& e) {
    r.fail_at(start, e.what());
  }
  return hp;
}

// Name of the first differing field, or empty.
std::string first_difference(const HyperParams& a, const HyperParams& b) {
#define SPIKE_CMP(field) \
  if (a.field != b.field) return #field;
  SPIKE_CMP(seq_len)
  SPIKE_CMP(num_points)
  SPIKE_CMP(num_volumes)
  SPIKE_CMP(num_samples)
  SPIKE_CMP(radius)
  SPIKE_CMP(channels)
  SPIKE_CMP(conv_channels)
  SPIKE_CMP(key_channels)
  SPIKE_CMP(value_channels)
  SPIKE_CMP(heads)
  SPIKE_CMP(blocks)
  SPIKE_CMP(joints)
  SPIKE_CMP(temporal_kernel)
  SPIKE_CMP(window_mode)
  SPIKE_CMP(conv_mode)
#undef SPIKE_CMP
  return {};
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_checkpoint(ModelParams& params, const HyperParams& hp) {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  write_hyperparams(w, hp);
  const auto named = params.named();
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& nt : named) {
    const Tensor& t = *nt.tensor;
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  ByteReader r(bytes, name);
  r.expect_magic(kMagic);
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    r.fail_at(version_at, "unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck{ModelParams{}, read_hyperparams(r)};
  ck.params = ModelParams::zeros(ck.hp);
  auto named = ck.params.named();
  const std::size_t count_at = r.offset();
  const std::uint32_t count = r.u32("tensor count");
  if (count != named.size()) {
    r.fail_at(count_at, "expected " + std::to_string(named.size()) + " tensors, file has " +
                            std::to_string(count));
  }
  for (auto& nt : named) {
    const std::size_t at = r.offset();
    const std::uint32_t rank = r.u32("rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank && i < 8; ++i) shape.push_back(r.u32("extent"));
    if (shape != nt.tensor->shape()) {
      r.fail_at(at, "tensor " + nt.name + " has shape " + to_string(shape) + ", expected " +
                        to_string(nt.tensor->shape()));
    }
    for (double& v : nt.tensor->mutable_data()) v = r.f32("tensor values");
  }
  if (!r.at_end()) r.fail("trailing bytes after last tensor");
  return ck;
}

void save_checkpoint(ModelParams& params, const HyperParams& hp, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(params, hp));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const HyperParams& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (const std::string field = first_difference(ck.hp, expected); !field.empty()) {
    throw ConfigError("checkpoint " + path.string() + " was trained with a different " + field);
  }
  return ck;
}

void save_train_state(const TrainState& state, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw(kStateMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(state.next_epoch);
  w.u64(state.steps);
  w.f64(state.best_val_loss);
  w.u32(static_cast<std::uint32_t>(state.velocity.size()));
  for (const auto& v : state.velocity) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) w.f64(x);
  }
  write_file_bytes(path, w.take());
}

TrainState load_train_state(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, path.string());
  r.expect_magic(kStateMagic);
  if (r.u32("version") != kCheckpointVersion) r.fail("unsupported train state version");
  TrainState state;
  state.next_epoch = r.u32("next_epoch");
  state.steps = r.u64("steps");
  state.best_val_loss = r.f64("best_val_loss");
  const std::uint32_t n = r.u32("parameter count");
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.u32("velocity length");
    if (len > bytes.size()) r.fail("velocity length exceeds file size");
    std::vector<double> v(len);
    for (double& x : v) x = r.f64("velocity");
    state.velocity.push_back(std::move(v));
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return state;
}

}  // namespace spike
