#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "spike/hyperparams.hpp"
#include "spike/model.hpp"

namespace spike {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian): "SPIK", u32 version, hyperparameters, u32 tensor
// count, then per tensor u32 rank, u32 extents, f32 values, in
// ModelParams::named() order.
void save_checkpoint(ModelParams& params, const HyperParams& hp, const std::filesystem::path& path);

struct Checkpoint {
  ModelParams params;
  HyperParams hp;
};

// Throws ParseError (with byte offset) on malformed input; nothing is
// returned unless the whole file parses.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// As above, then rejects a file whose hyperparameters differ from `expected`,
// naming the first differing field.
Checkpoint load_checkpoint(const std::filesystem::path& path, const HyperParams& expected);

std::vector<std::uint8_t> encode_checkpoint(ModelParams& params, const HyperParams& hp);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& name);

// Optimizer state for resuming: "SPKO", u32 version, u32 next epoch, u64
// optimizer steps, f64 best validation loss, then per parameter u32 count and
// f64 velocity values.
struct TrainState {
  std::uint32_t next_epoch = 0;
  std::uint64_t steps = 0;
  double best_val_loss = 0.0;
  std::vector<std::vector<double>> velocity;
};
void save_train_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace spike
