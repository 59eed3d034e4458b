#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spike/geometry.hpp"
#include "spike/hyperparams.hpp"
#include "spike/tensor.hpp"
#include "spike/tokenizer.hpp"

namespace spike {

struct BlockParams {
  Tensor w_q;  // C_k × C
  Tensor w_k;  // C_k × C
  Tensor w_v;  // C_v × C
  Tensor w_o;  // C × C_v
  Tensor ff1_w, ff1_b;  // 2C × C, 2C
  Tensor ff2_w, ff2_b;  // C × 2C, C
  Tensor ln1_gain, ln1_bias;
  Tensor ln2_gain, ln2_bias;
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

/// Learnable weights. Values are kept exactly representable in single
/// precision so a checkpoint round trip is lossless.
struct ModelParams {
  Tensor w_s;                 // C' × 3 (C' × 4 for the spatio-temporal variant)
  Tensor conv1_w, conv1_b;    // C' × C', C'
  Tensor conv2_w, conv2_b;    // C × C', C
  Tensor w_i;                 // C × 4
  std::vector<BlockParams> blocks;
  Tensor head1_w, head1_b;    // C/2 × C, C/2
  Tensor head2_w, head2_b;    // 3M × C/2, 3M

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; layer-norm
  // gains 1 and offsets 0.
  static ModelParams init(const HyperParams& hp, std::uint64_t seed);
  // Correctly shaped, all zero.
  static ModelParams zeros(const HyperParams& hp);

  // Declaration order; this is also the checkpoint order.
  std::vector<NamedTensor> named();
  std::vector<const Tensor*> tensors() const;
  std::size_t parameter_count() const;

  ModelParams clone() const;
  void set_requires_grad(bool on);
  void zero_grad();
};

// Rounds every parameter to the nearest single-precision value.
void round_to_float(ModelParams& params);

// Eq. 1 applied to every volume at once: lift displacements by W_s, run the
// shared MLP, max over each volume's samples. Returns (#volumes × C).
Tensor point_spatial_conv(const TokenBatch& tokens, const ModelParams& params);

// (#volumes × 4) rows (x, y, z, t) of the reference points.
Tensor reference_matrix(const TokenBatch& tokens);

// I = (W_i · refᵀ)ᵀ + F.
Tensor positional_embed(const Tensor& features, const Tensor& references, const Tensor& w_i);

// softmax(Q Kᵀ / sqrt(d_k)) V per head, heads concatenated, projected by W_o.
Tensor multi_head_attention(const Tensor& input, const BlockParams& block, std::size_t heads);

// Pre-norm residual block: x + MHA(LN(x)), then x + FF(LN(x)).
Tensor transformer_block(const Tensor& input, const BlockParams& block, std::size_t heads);

struct ForwardOptions {
  // Sort tokens into a content-defined order before encoding. The network is
  // permutation invariant mathematically; the canonical order also makes the
  // floating-point reductions order independent, so outputs are bit-stable.
  bool canonical_token_order = true;
};

// Token batch → (M × 3) joint coordinates in the centered frame.
Tensor forward_tokens(const TokenBatch& tokens, const ModelParams& params, const HyperParams& hp,
                      const ForwardOptions& options = {});

// Tokenizes (spatial or spatio-temporal per hp.conv_mode) then forward_tokens.
Tensor forward(const PointCloudSequence& seq, const HyperParams& hp, const ModelParams& params,
               std::uint64_t seed);

TokenBatch tokenize_for(const PointCloudSequence& seq, const HyperParams& hp, std::uint64_t seed);

std::vector<Vec3> to_joints(const Tensor& prediction);

}  // namespace spike
