#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "spike/data.hpp"
#include "spike/eval.hpp"
#include "spike/hyperparams.hpp"
#include "spike/preprocess.hpp"
#include "spike/training.hpp"

namespace spike::cli {

enum class Source { kDefault, kFile, kFlag };

struct RunConfig {
  HyperParams hp;
  TrainConfig train;
  SegmentationConfig segmentation;
  SyntheticRigConfig synth;

  std::filesystem::path data;
  std::string data_format = "native";  // native | itop
  bool segment = false;                // run segment_human on itop clouds
  std::string split = "all";           // all | train | test
  std::filesystem::path checkpoint;
  std::filesystem::path out = "run";
  std::filesystem::path sequence;      // predict: comma-separated point files, oldest first
  std::filesystem::path plot;
  double threshold = kDefaultThresholdM;
  std::size_t warmup = 5;
  std::size_t iters = 50;
  std::size_t recordings = 50;         // synth

  std::map<std::string, Source> sources;

  Source source(const std::string& key) const;
  // key=value  # source, one line per key, re-readable as a config file.
  std::string dump() const;
};

std::vector<std::string> config_keys();

// Defaults, then the file (if any), then the flags. Unknown or repeated keys
// and unparsable values throw ConfigError naming the key.
RunConfig resolve_config(const std::string& file_text, const std::map<std::string, std::string>& flags);
RunConfig resolve_config_file(const std::filesystem::path& file,
                              const std::map<std::string, std::string>& flags);

// Worker count after the SPIKE_THREADS cap.
std::size_t effective_threads(std::size_t requested);

SequenceDataset load_dataset(const RunConfig& cfg);

int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_predict(const RunConfig& cfg, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, std::ostream& out);
int cmd_bench(const RunConfig& cfg, std::ostream& out);
int cmd_synth(const RunConfig& cfg, std::ostream& out);

struct AblationCell {
  std::size_t seq_len = 0;
  WindowMode window_mode = WindowMode::kPast;
  ConvMode conv_mode = ConvMode::kSpatial;
  std::size_t temporal_kernel = 1;
  double mean_ap = 0.0;
  std::size_t peak_bytes = 0;

  std::string line() const;
};
std::vector<AblationCell> run_ablation(const SequenceDataset& data, const RunConfig& cfg);

LatencyStats run_bench(const RunConfig& cfg);

// Orthographic xy projection of the skeleton (bones from kBones).
std::string skeleton_svg(const std::vector<Vec3>& joints);

// Parses argv, dispatches, maps errors to exit codes (0 ok, 2 config, 3 data,
// 4 numeric, 1 anything else).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spike::cli
