#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace spike {

enum class WindowMode { kPast, kPastFuture };
enum class ConvMode { kSpatial, kSpatioTemporal };

std::string_view to_string(WindowMode mode);
std::string_view to_string(ConvMode mode);
WindowMode parse_window_mode(std::string_view text);
ConvMode parse_conv_mode(std::string_view text);

/// Every architectural size of the network in one record. Defaults are the
/// full-scale configuration.
struct HyperParams {
  std::size_t seq_len = 3;           // T
  std::size_t num_points = 4096;     // N, points per frame
  std::size_t num_volumes = 128;     // N_v, local volumes per frame
  std::size_t num_samples = 32;      // N_s, neighbors per volume
  double radius = 0.2;               // r, meters
  std::size_t channels = 1024;       // C
  std::size_t conv_channels = 1024;  // C', width of the displacement lift
  std::size_t key_channels = 1024;   // C_k
  std::size_t value_channels = 1024; // C_v
  std::size_t heads = 8;             // h
  std::size_t blocks = 5;            // m
  std::size_t joints = 15;           // M
  std::size_t temporal_kernel = 1;   // k_t, spatio-temporal variant only
  WindowMode window_mode = WindowMode::kPast;
  ConvMode conv_mode = ConvMode::kSpatial;

  // Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;

  // Small configuration used throughout the tests.
  static HyperParams toy();
};

}  // namespace spike
