#include "spike/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include "spike/checkpoint.hpp"
#include "spike/errors.hpp"
#include "spike/random.hpp"

namespace fs = std::filesystem;

namespace spike {

namespace {

constexpr std::uint64_t kInitSalt = 0x696e6974;
constexpr std::uint64_t kShuffleSalt = 0x73687566;
constexpr std::uint64_t kSampleSalt = 0x73616d70;

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_targets(const SequenceDataset& data, const HyperParams& hp) {
  for (const auto& rec : data.recordings) {
    for (const auto& frame : rec.frames) {
      if (frame.labels.size() != hp.joints) {
        throw DataError("frame " + frame.id + " has " + std::to_string(frame.labels.size()) +
                        " joints, model predicts " + std::to_string(hp.joints));
      }
    }
  }
}

Tensor target_tensor(const SkeletonFrame& target, std::vector<double>& mask_values) {
  std::vector<double> values;
  values.reserve(3 * target.size());
  mask_values.assign(3 * target.size(), 0.0);
  for (std::size_t j = 0; j < target.size(); ++j) {
    values.push_back(target.joints[j].x);
    values.push_back(target.joints[j].y);
    values.push_back(target.joints[j].z);
    if (target.valid[j]) std::fill_n(mask_values.begin() + 3 * j, 3, 1.0);
  }
  return Tensor::from({target.size(), 3}, std::move(values));
}

std::string format_log(const EpochLog& e, bool with_wall) {
  char buf[160];
  if (with_wall) {
    std::snprintf(buf, sizeof buf, "epoch=%zu loss=%.9g val_map=%.4f wall_ms=%lld", e.epoch, e.loss,
                  e.val_map, e.wall_ms);
  } else {
    std::snprintf(buf, sizeof buf, "epoch=%zu loss=%.9g val_map=%.4f", e.epoch, e.loss, e.val_map);
  }
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
  if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be >= 1");
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

Tensor l1_loss_masked(const Tensor& prediction, const SkeletonFrame& target) {
  if (prediction.rank() != 2 || prediction.dim(0) != target.size() || prediction.dim(1) != 3) {
    throw DimensionError("l1_loss_masked: prediction " + to_string(prediction.shape()) + " vs " +
                         std::to_string(target.size()) + " target joints");
  }
  std::vector<double> mask_values;
  const Tensor goal = target_tensor(target, mask_values);
  const std::size_t valid = target.valid_count();
  const Tensor mask = Tensor::from({target.size(), 3}, std::move(mask_values));
  const Tensor masked = mul(abs(sub(prediction, goal)), mask);
  return scale(sum(masked), valid == 0 ? 0.0 : 1.0 / (3.0 * static_cast<double>(valid)));
}

Sgd::Sgd(double learning_rate, double momentum, bool keep_float32)
    : lr_(learning_rate), momentum_(momentum), keep_float32_(keep_float32) {}

void Sgd::step(const std::vector<NamedTensor>& params) {
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.tensor->numel(), 0.0);
  }
  if (velocity_.size() != params.size()) throw Error("sgd: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i].tensor;
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + params[i].name);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i].tensor;
    auto& v = velocity_[i];
    if (v.size() != t.numel()) throw Error("sgd: velocity size mismatch for " + params[i].name);
    auto values = t.mutable_data();
    const bool has_grad = t.has_grad();
    std::span<const double> g = has_grad ? t.grad() : std::span<const double>();
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = momentum_ * v[k] + (has_grad ? g[k] : 0.0);
      double p = values[k] - lr_ * v[k];
      if (keep_float32_) p = static_cast<float>(p);
      values[k] = p;
    }
    t.zero_grad();
  }
}

std::string EpochLog::line() const { return format_log(*this, true); }
std::string EpochLog::deterministic_line() const { return format_log(*this, false); }

Evaluation evaluate(const SequenceDataset& data, const std::vector<SamplePair>& pairs,
                    const HyperParams& hp, const ModelParams& params, std::uint64_t seed,
                    double threshold_m, std::size_t threads) {
  if (pairs.empty()) throw DataError("evaluate: no sample pairs");
  Evaluation ev;
  ev.predictions.resize(pairs.size());
  ev.targets.resize(pairs.size());
  std::vector<double> losses(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const SamplePair& sp = pairs[i];
    const std::uint64_t s = derive_seed(seed, {sp.recording, sp.frame});
    const Example ex = make_example(data.recordings.at(sp.recording), sp.frame, hp, s, false);
    const Tensor pred = forward(ex.sequence, hp, params, s);
    losses[i] = l1_loss_masked(pred, ex.target).item();
    std::vector<Vec3> joints = to_joints(pred);
    for (Vec3& j : joints) j += ex.centroid;
    ev.predictions[i] = std::move(joints);
    ev.targets[i] = data.recordings[sp.recording].frames[sp.frame].labels;
  });
  double total = 0.0;
  for (double l : losses) total += l;
  ev.loss = total / static_cast<double>(losses.size());
  ev.report = map_at_threshold(ev.predictions, ev.targets, threshold_m);
  return ev;
}

std::vector<std::string> validation_subjects(const SequenceDataset& data, double fraction) {
  const auto subjects = data.subjects();
  if (subjects.size() < 2 || fraction <= 0.0) return {};
  auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(subjects.size())));
  count = std::clamp<std::size_t>(count, 1, subjects.size() - 1);
  return {subjects.end() - static_cast<long>(count), subjects.end()};
}

TrainResult train(const SequenceDataset& data, const HyperParams& hp, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  hp.validate();
  cfg.validate();
  if (data.frame_count() == 0) throw DataError("train: dataset is empty");
  check_targets(data, hp);

  const auto held_out = validation_subjects(data, cfg.val_fraction);
  SequenceDataset train_data;
  SequenceDataset val_data;
  for (const auto& rec : data.recordings) {
    const bool val = std::find(held_out.begin(), held_out.end(), rec.subject) != held_out.end();
    (val ? val_data : train_data).recordings.push_back(rec);
  }
  const auto train_pairs = eval_pairs(train_data, cfg.pairs);
  if (train_pairs.empty()) throw DataError("train: no frame with a valid joint");
  auto val_pairs = eval_pairs(val_data, cfg.pairs);
  const SequenceDataset& val_source = val_pairs.empty() ? train_data : val_data;
  if (val_pairs.empty()) val_pairs = train_pairs;

  TrainResult result;
  result.params = ModelParams::init(hp, derive_seed(cfg.seed, {kInitSalt}));
  result.best_val_loss = std::numeric_limits<double>::infinity();
  Sgd sgd(cfg.learning_rate, cfg.momentum);
  std::size_t first_epoch = 1;

  const bool persist = !cfg.out_dir.empty();
  const fs::path last_path = cfg.out_dir / "last.spik";
  const fs::path best_path = cfg.out_dir / "best.spik";
  const fs::path state_path = cfg.out_dir / "train_state.bin";
  const fs::path log_path = cfg.out_dir / "train.log";
  if (persist) fs::create_directories(cfg.out_dir);
  if (persist && cfg.resume && fs::exists(state_path) && fs::exists(last_path)) {
    const TrainState state = load_train_state(state_path);
    result.params = load_checkpoint(last_path, hp).params;
    result.best_params = fs::exists(best_path) ? load_checkpoint(best_path, hp).params : result.params.clone();
    sgd.velocity() = state.velocity;
    first_epoch = state.next_epoch;
    result.steps = state.steps;
    result.best_val_loss = state.best_val_loss;
  } else {
    result.best_params = result.params.clone();
    if (persist) std::ofstream(log_path, std::ios::trunc);
  }

  result.params.set_requires_grad(true);
  const auto named = result.params.named();
  std::vector<std::size_t> order(train_pairs.size());

  for (std::size_t epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    if (cfg.max_steps != 0 && result.steps >= cfg.max_steps) break;
    const auto started = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(derive_seed(cfg.seed, {kShuffleSalt, epoch}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle, i)]);

    double loss_total = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      if (cfg.max_steps != 0 && result.steps >= cfg.max_steps) break;
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::size_t batch = end - begin;
      std::vector<Example> examples(batch);
      std::vector<std::uint64_t> seeds(batch);
      parallel_for(batch, cfg.threads, [&](std::size_t b) {
        const SamplePair& sp = train_pairs[order[begin + b]];
        seeds[b] = derive_seed(cfg.seed, {kSampleSalt, epoch, sp.recording, sp.frame});
        examples[b] = make_example(train_data.recordings[sp.recording], sp.frame, hp, seeds[b], cfg.augment);
      });
      for (std::size_t b = 0; b < batch; ++b) {
        Tape tape;
        Tape::Scope scope(tape);
        const Tensor pred = forward(examples[b].sequence, hp, result.params, seeds[b]);
        const Tensor loss = l1_loss_masked(pred, examples[b].target);
        loss_total += loss.item();
        ++loss_count;
        tape.backward(scale(loss, 1.0 / static_cast<double>(batch)));
      }
      sgd.step(named);
      ++result.steps;
    }

    const Evaluation val = evaluate(val_source, val_pairs, hp, result.params, cfg.seed, kDefaultThresholdM,
                                    cfg.threads);
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_count ? loss_total / static_cast<double>(loss_count) : 0.0;
    entry.val_map = val.report.mean_ap();
    const bool improved = val.loss < result.best_val_loss;
    if (improved) {
      result.best_val_loss = val.loss;
      result.best_params = result.params.clone();
    }
    if (persist) {
      if (improved) save_checkpoint(result.best_params, hp, best_path);
      if (epoch % cfg.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%04zu.spik", epoch);
        save_checkpoint(result.params, hp, cfg.out_dir / name);
      }
      save_checkpoint(result.params, hp, last_path);
      save_train_state({static_cast<std::uint32_t>(epoch + 1), result.steps, result.best_val_loss, sgd.velocity()},
                       state_path);
    }
    entry.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - started)
                        .count();
    if (persist) std::ofstream(log_path, std::ios::app) << entry.line() << '\n';
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.params.set_requires_grad(false);
  return result;
}

}  // namespace spike
