#include "spike/hyperparams.hpp"

#include "spike/errors.hpp"

namespace spike {

std::string_view to_string(WindowMode mode) {
  return mode == WindowMode::kPast ? "past" : "past-future";
}

std::string_view to_string(ConvMode mode) {
  return mode == ConvMode::kSpatial ? "spatial" : "st";
}

WindowMode parse_window_mode(std::string_view text) {
  if (text == "past") return WindowMode::kPast;
  if (text == "past-future") return WindowMode::kPastFuture;
  throw ConfigError("window_mode must be 'past' or 'past-future', got '" + std::string(text) + "'");
}

ConvMode parse_conv_mode(std::string_view text) {
  if (text == "spatial") return ConvMode::kSpatial;
  if (text == "st") return ConvMode::kSpatioTemporal;
  throw ConfigError("conv_mode must be 'spatial' or 'st', got '" + std::string(text) + "'");
}

void HyperParams::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("hyperparameter ") + name + " must be positive");
  };
  positive(seq_len, "seq_len");
  positive(num_points, "num_points");
  positive(num_volumes, "num_volumes");
  positive(num_samples, "num_samples");
  positive(channels, "channels");
  positive(conv_channels, "conv_channels");
  positive(key_channels, "key_channels");
  positive(value_channels, "value_channels");
  positive(heads, "heads");
  positive(blocks, "blocks");
  positive(joints, "joints");
  positive(temporal_kernel, "temporal_kernel");
  if (!(radius > 0.0)) throw ConfigError("hyperparameter radius must be positive");
  if (key_channels % heads != 0) {
    throw ConfigError("hyperparameter key_channels must be divisible by heads");
  }
  if (value_channels % heads != 0) {
    throw ConfigError("hyperparameter value_channels must be divisible by heads");
  }
  if (temporal_kernel % 2 == 0) throw ConfigError("hyperparameter temporal_kernel must be odd");
  if (temporal_kernel > seq_len) {
    throw ConfigError("hyperparameter temporal_kernel must not exceed seq_len");
  }
  if (channels < 2) throw ConfigError("hyperparameter channels must be at least 2");
}

HyperParams HyperParams::toy() {
  HyperParams hp;
  hp.seq_len = 2;
  hp.num_points = 64;
  hp.num_volumes = 8;
  hp.num_samples = 4;
  hp.radius = 0.2;
  hp.channels = 16;
  hp.conv_channels = 16;
  hp.key_channels = 16;
  hp.value_channels = 16;
  hp.heads = 2;
  hp.blocks = 2;
  hp.joints = 3;
  return hp;
}

}  // namespace spike
