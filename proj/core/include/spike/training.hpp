#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spike/data.hpp"
#include "spike/eval.hpp"
#include "spike/hyperparams.hpp"
#include "spike/model.hpp"
#include "spike/skeleton.hpp"
#include "spike/tensor.hpp"

namespace spike {

struct TrainConfig {
  std::size_t batch_size = 24;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 150;
  std::uint64_t seed = 0;
  bool augment = true;
  PairSelection pairs = PairSelection::kAllFrames;
  // Fraction of training subjects held out for checkpoint selection. When
  // nothing can be held out the training pairs double as validation.
  double val_fraction = 0.1;
  std::size_t checkpoint_every = 10;
  std::size_t max_steps = 0;  // 0 = no cap
  std::size_t threads = 1;    // example preparation workers
  std::filesystem::path out_dir;  // empty: keep everything in memory
  bool resume = false;

  void validate() const;
};

// Mean |pred - target| over the coordinates of valid joints. A target with no
// valid joint yields 0 and zero gradient.
Tensor l1_loss_masked(const Tensor& prediction, const SkeletonFrame& target);

class Sgd {
 public:
  // keep_float32 rounds parameters after every update so they stay exactly
  // representable in a checkpoint.
  Sgd(double learning_rate, double momentum, bool keep_float32 = true);

  // v <- momentum*v + g; p <- p - lr*v; then clears the gradients. Throws
  // NumericError naming the first parameter with a non-finite gradient.
  void step(const std::vector<NamedTensor>& params);

  std::vector<std::vector<double>>& velocity() { return velocity_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  bool keep_float32_;
  std::vector<std::vector<double>> velocity_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_map = 0.0;
  long long wall_ms = 0;

  // epoch=<int> loss=<float> val_map=<float> wall_ms=<int>
  std::string line() const;
  // Same without the wall-clock field; stable across identical runs.
  std::string deterministic_line() const;
};

struct Evaluation {
  EvalReport report;
  double loss = 0.0;
  std::vector<std::vector<Vec3>> predictions;  // camera frame, one per pair
  std::vector<SkeletonFrame> targets;
};

// Predicts every pair without augmentation. Deterministic under seed.
Evaluation evaluate(const SequenceDataset& data, const std::vector<SamplePair>& pairs,
                    const HyperParams& hp, const ModelParams& params, std::uint64_t seed,
                    double threshold_m = kDefaultThresholdM, std::size_t threads = 1);

struct TrainResult {
  ModelParams params;       // after the last step
  ModelParams best_params;  // lowest validation loss
  std::vector<EpochLog> log;
  std::size_t steps = 0;
  double best_val_loss = 0.0;
};

// Files written under cfg.out_dir: last.spik, best.spik, epoch_<n>.spik every
// checkpoint_every epochs, train_state.bin and train.log.
TrainResult train(const SequenceDataset& data, const HyperParams& hp, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// Subjects held out for validation (sorted, taken from the end).
std::vector<std::string> validation_subjects(const SequenceDataset& data, double fraction);

}  // namespace spike
