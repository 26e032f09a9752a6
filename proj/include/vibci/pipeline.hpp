#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vibci/channel_select.hpp"
#include "vibci/cnn.hpp"
#include "vibci/dsp.hpp"
#include "vibci/stats.hpp"
#include "vibci/synthgen.hpp"
#include "vibci/types.hpp"

namespace vibci {

// Raw recording -> decimated, band-passed recording -> epochs.
struct PreprocessSettings {
  Band band{0.5, 13.0};
  int decimation{10};
  int filter_order{200};
  double epoch_len_s{4.0};

  // Checks the settings against a raw sampling rate.
  void validate(double raw_fs_hz) const;
};

// Decimation first, then the zero-phase band-pass at the reduced rate.
Recording preprocess(const Recording& raw, const PreprocessSettings& settings);

// preprocess() followed by one epoch per marker (rest and imagery).
EpochedDataset preprocess_and_epoch(const Recording& raw, const PreprocessSettings& settings);

struct SynthSettings {
  std::size_t subjects{8};
  std::size_t trials_per_class{50};
  double fs_hz{1000.0};
  double rest_len_s{4.0};
  double snr{2.0};
  double background_rms_uv{10.0};
  std::vector<std::string> channels;  // empty: full 64-channel montage

  SubjectSpec subject_spec(double epoch_len_s) const;
};

struct PipelineConfig {
  SynthSettings synth;
  PreprocessSettings preprocess;
  double win_len_s{2.0};
  double overlap{0.5};
  double train_fraction{0.8};
  TrainConfig train;
  std::array<BlockSpec, Architecture::kBlocks> blocks = Architecture::default_blocks();
  std::size_t repetitions{5};
  std::vector<std::string> shortlist{"Fp1", "Fp2", "AFz", "AF3", "AF4", "POz", "Oz", "O1", "O2", "Iz"};
  std::size_t top_k{3};
  std::vector<std::pair<std::string, std::string>> pairs;  // empty: all pairs of the top_k channels
  Band stats_band{0.5, 13.0};
  double alpha{0.01};
  std::size_t n_perm{1000};
  bool bonferroni{false};
  ShortlistRule shortlist_rule{ShortlistRule::Union};
  std::size_t online_trials_per_class{10};
  std::size_t online_runs{3};
  std::uint64_t seed{0};

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  ScanConfig scan_config(std::size_t jobs) const;
  PermutationOptions permutation_options() const;
};

nlohmann::json to_json(const PipelineConfig& config);

// Missing keys keep their defaults; unknown keys are rejected. The result is
// validated before it is returned.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

// Name of synthetic subject i (0-based): "S1", "S2", ...
std::string subject_name(std::size_t index);

// Per-subject generator seed derived from the master seed.
std::uint64_t subject_seed(std::uint64_t master_seed, std::size_t index);

// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

// Pretty-printed JSON followed by a newline.
std::string dump_json(const nlohmann::json& j);

}  // namespace vibci
