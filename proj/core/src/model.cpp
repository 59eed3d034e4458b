#include "spike/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "spike/errors.hpp"
#include "spike/random.hpp"

namespace spike {

namespace {

Tensor uniform_tensor(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = static_cast<float>(uniform(rng, -bound, bound));
  return Tensor::from(std::move(shape), std::move(values));
}

struct ShapePlan {
  std::size_t c, cp, ck, cv, lift_in, joints;
};

ShapePlan plan(const HyperParams& hp) {
  hp.validate();
  return {hp.channels, hp.conv_channels, hp.key_channels, hp.value_channels,
          hp.conv_mode == ConvMode::kSpatial ? std::size_t{3} : std::size_t{4}, hp.joints};
}

template <typename Make>
ModelParams build(const HyperParams& hp, Make make) {
  const ShapePlan s = plan(hp);
  ModelParams p;
  p.w_s = make(Shape{s.cp, s.lift_in}, s.lift_in);
  p.conv1_w = make(Shape{s.cp, s.cp}, s.cp);
  p.conv1_b = make(Shape{s.cp}, s.cp);
  p.conv2_w = make(Shape{s.c, s.cp}, s.cp);
  p.conv2_b = make(Shape{s.c}, s.cp);
  p.w_i = make(Shape{s.c, 4}, 4);
  for (std::size_t b = 0; b < hp.blocks; ++b) {
    BlockParams blk;
    blk.w_q = make(Shape{s.ck, s.c}, s.c);
    blk.w_k = make(Shape{s.ck, s.c}, s.c);
    blk.w_v = make(Shape{s.cv, s.c}, s.c);
    blk.w_o = make(Shape{s.c, s.cv}, s.cv);
    blk.ff1_w = make(Shape{2 * s.c, s.c}, s.c);
    blk.ff1_b = make(Shape{2 * s.c}, s.c);
    blk.ff2_w = make(Shape{s.c, 2 * s.c}, 2 * s.c);
    blk.ff2_b = make(Shape{s.c}, 2 * s.c);
    blk.ln1_gain = Tensor::full({s.c}, 1.0);
    blk.ln1_bias = Tensor::zeros({s.c});
    blk.ln2_gain = Tensor::full({s.c}, 1.0);
    blk.ln2_bias = Tensor::zeros({s.c});
    p.blocks.push_back(std::move(blk));
  }
  p.head1_w = make(Shape{s.c / 2, s.c}, s.c);
  p.head1_b = make(Shape{s.c / 2}, s.c);
  p.head2_w = make(Shape{3 * s.joints, s.c / 2}, s.c / 2);
  p.head2_b = make(Shape{3 * s.joints}, s.c / 2);
  return p;
}

}  // namespace

ModelParams ModelParams::init(const HyperParams& hp, std::uint64_t seed) {
  Rng rng(seed);
  return build(hp, [&](Shape shape, std::size_t fan_in) {
    return uniform_tensor(std::move(shape), fan_in, rng);
  });
}

ModelParams ModelParams::zeros(const HyperParams& hp) {
  ModelParams p = build(hp, [](Shape shape, std::size_t) { return Tensor::zeros(std::move(shape)); });
  for (auto& b : p.blocks) {
    b.ln1_gain = Tensor::zeros({hp.channels});
    b.ln2_gain = Tensor::zeros({hp.channels});
  }
  return p;
}

std::vector<NamedTensor> ModelParams::named() {
  std::vector<NamedTensor> out{{"w_s", &w_s},         {"conv1_w", &conv1_w}, {"conv1_b", &conv1_b},
                               {"conv2_w", &conv2_w}, {"conv2_b", &conv2_b}, {"w_i", &w_i}};
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string pre = "block" + std::to_string(b) + ".";
    BlockParams& k = blocks[b];
    for (auto [name, t] : {std::pair{"w_q", &k.w_q}, {"w_k", &k.w_k}, {"w_v", &k.w_v},
                           {"w_o", &k.w_o}, {"ff1_w", &k.ff1_w}, {"ff1_b", &k.ff1_b},
                           {"ff2_w", &k.ff2_w}, {"ff2_b", &k.ff2_b}, {"ln1_gain", &k.ln1_gain},
                           {"ln1_bias", &k.ln1_bias}, {"ln2_gain", &k.ln2_gain},
                           {"ln2_bias", &k.ln2_bias}}) {
      out.push_back({pre + name, t});
    }
  }
  out.push_back({"head1_w", &head1_w});
  out.push_back({"head1_b", &head1_b});
  out.push_back({"head2_w", &head2_w});
  out.push_back({"head2_b", &head2_b});
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  std::vector<const Tensor*> out;
  for (auto& nt : const_cast<ModelParams*>(this)->named()) out.push_back(nt.tensor);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->numel();
  return n;
}

ModelParams ModelParams::clone() const {
  ModelParams copy = *this;
  for (auto& nt : copy.named()) *nt.tensor = nt.tensor->clone();
  return copy;
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& nt : named()) nt.tensor->set_requires_grad(on);
}

void ModelParams::zero_grad() {
  for (auto& nt : named()) nt.tensor->zero_grad();
}

void round_to_float(ModelParams& params) {
  for (auto& nt : params.named()) {
    for (double& v : nt.tensor->mutable_data()) v = static_cast<float>(v);
  }
}

Tensor point_spatial_conv(const TokenBatch& tokens, const ModelParams& params) {
  if (tokens.volumes.empty()) throw DimensionError("point_spatial_conv: no volumes");
  const std::size_t lift_in = params.w_s.dim(1);
  const std::size_t samples = tokens.volumes.front().displacements.size();
  const std::size_t n = tokens.volumes.size();
  std::vector<double> rows;
  rows.reserve(n * samples * lift_in);
  for (const LocalVolume& vol : tokens.volumes) {
    if (vol.displacements.size() != samples) {
      throw DimensionError("point_spatial_conv: volumes differ in sample count");
    }
    const bool temporal = lift_in == 4;
    if (temporal && vol.time_offsets.size() != samples) {
      throw DimensionError("point_spatial_conv: spatio-temporal weights need time offsets");
    }
    if (!temporal && !vol.time_offsets.empty()) {
      throw DimensionError("point_spatial_conv: spatial weights given spatio-temporal volumes");
    }
    for (std::size_t s = 0; s < samples; ++s) {
      const Vec3 d = vol.displacements[s];
      rows.insert(rows.end(), {d.x, d.y, d.z});
      if (temporal) rows.push_back(vol.time_offsets[s]);
    }
  }
  const Tensor disp = Tensor::from({n * samples, lift_in}, std::move(rows));
  const Tensor lifted = linear(disp, params.w_s);
  const Tensor hidden = relu(linear(lifted, params.conv1_w, params.conv1_b));
  const Tensor per_point = linear(hidden, params.conv2_w, params.conv2_b);
  const std::size_t c = params.conv2_w.dim(0);
  return max_reduce(reshape(per_point, {n, samples, c}), 1);
}

Tensor reference_matrix(const TokenBatch& tokens) {
  std::vector<double> rows;
  rows.reserve(tokens.volumes.size() * 4);
  for (const LocalVolume& vol : tokens.volumes) {
    rows.insert(rows.end(), {vol.center.x, vol.center.y, vol.center.z, static_cast<double>(vol.frame)});
  }
  return Tensor::from({tokens.volumes.size(), 4}, std::move(rows));
}

Tensor positional_embed(const Tensor& features, const Tensor& references, const Tensor& w_i) {
  if (features.rank() != 2 || references.rank() != 2 || features.dim(0) != references.dim(0)) {
    throw DimensionError("positional_embed: features " + to_string(features.shape()) +
                         " and references " + to_string(references.shape()) + " disagree");
  }
  return add(linear(references, w_i), features);
}

Tensor multi_head_attention(const Tensor& input, const BlockParams& block, std::size_t heads) {
  const std::size_t ck = block.w_q.dim(0), cv = block.w_v.dim(0);
  if (heads == 0 || ck % heads != 0 || cv % heads != 0) {
    throw ConfigError("multi_head_attention: head count must divide key and value widths");
  }
  const Tensor q = linear(input, block.w_q);
  const Tensor k = linear(input, block.w_k);
  const Tensor v = linear(input, block.w_v);
  const std::size_t dk = ck / heads, dv = cv / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_last(q, h * dk, (h + 1) * dk);
    const Tensor kh = slice_last(k, h * dk, (h + 1) * dk);
    const Tensor vh = slice_last(v, h * dv, (h + 1) * dv);
    const Tensor weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dk));
    outputs.push_back(matmul(weights, vh));
  }
  const Tensor merged = heads == 1 ? outputs.front() : concat(outputs);
  return linear(merged, block.w_o);
}

Tensor transformer_block(const Tensor& input, const BlockParams& block, std::size_t heads) {
  const Tensor attended =
      add(input, multi_head_attention(layer_norm(input, block.ln1_gain, block.ln1_bias), block, heads));
  const Tensor normed = layer_norm(attended, block.ln2_gain, block.ln2_bias);
  const Tensor ff = linear(relu(linear(normed, block.ff1_w, block.ff1_b)), block.ff2_w, block.ff2_b);
  return add(attended, ff);
}

namespace {

bool volume_less(const LocalVolume& a, const LocalVolume& b) {
  auto key = [](const LocalVolume& v) { return std::tie(v.frame, v.center.x, v.center.y, v.center.z); };
  if (key(a) != key(b)) return key(a) < key(b);
  auto vec_less = [](const Vec3& p, const Vec3& q) {
    return std::tie(p.x, p.y, p.z) < std::tie(q.x, q.y, q.z);
  };
  if (a.displacements != b.displacements) {
    return std::lexicographical_compare(a.displacements.begin(), a.displacements.end(),
                                        b.displacements.begin(), b.displacements.end(), vec_less);
  }
  return a.time_offsets < b.time_offsets;
}

}  // namespace

Tensor forward_tokens(const TokenBatch& tokens, const ModelParams& params, const HyperParams& hp,
                      const ForwardOptions& options) {
  if (tokens.volumes.empty()) throw DimensionError("forward: empty token batch");
  const TokenBatch* batch = &tokens;
  TokenBatch sorted;
  if (options.canonical_token_order) {
    sorted = tokens;
    std::sort(sorted.volumes.begin(), sorted.volumes.end(), volume_less);
    batch = &sorted;
  }
  Tensor x = positional_embed(point_spatial_conv(*batch, params), reference_matrix(*batch), params.w_i);
  for (const BlockParams& block : params.blocks) x = transformer_block(x, block, hp.heads);
  const Tensor global = reshape(max_reduce(x, 0), {1, hp.channels});
  const Tensor hidden = relu(linear(global, params.head1_w, params.head1_b));
  return reshape(linear(hidden, params.head2_w, params.head2_b), {hp.joints, 3});
}

TokenBatch tokenize_for(const PointCloudSequence& seq, const HyperParams& hp, std::uint64_t seed) {
  return hp.conv_mode == ConvMode::kSpatial ? tokenize(seq, hp, seed)
                                            : tokenize_spatiotemporal(seq, hp, seed);
}

Tensor forward(const PointCloudSequence& seq, const HyperParams& hp, const ModelParams& params,
               std::uint64_t seed) {
  if (seq.length() != hp.seq_len || seq.points_per_frame() != hp.num_points) {
    throw DimensionError("forward: sequence is " + std::to_string(seq.length()) + " frames of " +
                         std::to_string(seq.points_per_frame()) + " points, model expects " +
                         std::to_string(hp.seq_len) + " of " + std::to_string(hp.num_points));
  }
  return forward_tokens(tokenize_for(seq, hp, seed), params, hp);
}

std::vector<Vec3> to_joints(const Tensor& prediction) {
  if (prediction.rank() != 2 || prediction.dim(1) != 3) {
    throw DimensionError("to_joints: expected M×3, got " + to_string(prediction.shape()));
  }
  std::vector<Vec3> joints(prediction.dim(0));
  for (std::size_t j = 0; j < joints.size(); ++j) {
    joints[j] = {prediction.at(j, 0), prediction.at(j, 1), prediction.at(j, 2)};
  }
  return joints;
}

}  // namespace spike
