#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vibci/cnn.hpp"
#include "vibci/types.hpp"

namespace vibci {

struct ScanConfig {
  TrainConfig train;  // train.seed is replaced by the per-repetition seed
  std::array<BlockSpec, Architecture::kBlocks> blocks = Architecture::default_blocks();
  std::size_t repetitions{5};
  double train_fraction{0.8};
  double win_len_s{2.0};
  double overlap{0.5};
  std::uint64_t master_seed{0};
  std::size_t jobs{1};

  void validate() const;
};

struct CellResult {
  double trial_accuracy{0.0};
  double window_accuracy{0.0};
};

// One split/augment/train/evaluate pass on the named channels. The split and
// the training run both use seed master_seed + repetition, so every channel
// set sees the same trial split within a repetition.
CellResult run_cell(const EpochedDataset& dataset, const std::vector<std::string>& channels, std::size_t repetition,
                    const ScanConfig& config);

// Mean and population standard deviation over repetitions.
struct ScanCell {
  std::string subject;
  std::string label;  // channel, or "A-B" for a pair
  std::vector<double> trial_accuracies;
  std::vector<double> window_accuracies;
  double mean{0.0};
  double std{0.0};
  double window_mean{0.0};
};

ScanCell summarize(std::string subject, std::string label, std::vector<CellResult> reps);

struct ChannelReport {
  std::vector<std::string> channels;
  std::vector<std::size_t> montage_index;  // tie-break order for ranking
  std::vector<std::string> subjects;
  std::vector<ScanCell> cells;  // subject-major: cells[s * channels.size() + c]

  const ScanCell& cell(std::size_t subject, std::size_t channel) const {
    return cells.at(subject * channels.size() + channel);
  }
  // Mean over subjects of the per-subject means (the Avg. row).
  std::vector<double> averages() const;
  // Mean over subjects of the per-subject standard deviations.
  std::vector<double> average_stds() const;
};

struct PairReport {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> subjects;
  std::vector<ScanCell> cells;  // cells[s * pairs.size() + p]

  const ScanCell& cell(std::size_t subject, std::size_t pair) const { return cells.at(subject * pairs.size() + pair); }
  // Mean over the subject's pairs (the Avg. column).
  std::vector<double> subject_averages() const;
};

std::string pair_label(const std::pair<std::string, std::string>& pair);

ChannelReport scan_single_channels(const EpochedDataset& dataset, const std::string& subject,
                                   const std::vector<std::string>& channels, const ScanConfig& config);

// Top-k channels by average accuracy (descending), ties by lower average
// std, then by montage order.
std::vector<std::string> rank_channels(const ChannelReport& report, std::size_t k);

// All unordered pairs of the given channels, in list order.
std::vector<std::pair<std::string, std::string>> all_pairs(const std::vector<std::string>& channels);

PairReport scan_pairs(const EpochedDataset& dataset, const std::string& subject,
                      const std::vector<std::pair<std::string, std::string>>& pairs, const ScanConfig& config);

// Concatenates subject rows; column sets must match.
ChannelReport merge(const std::vector<ChannelReport>& reports);
PairReport merge(const std::vector<PairReport>& reports);

nlohmann::json to_json(const ChannelReport& report);
nlohmann::json to_json(const PairReport& report);
ChannelReport channel_report_from_json(const nlohmann::json& j);
PairReport pair_report_from_json(const nlohmann::json& j);

// Aligned plain-text tables: "0.611 (±0.026)" cells with an Avg. row for
// channels; mean cells with an Avg. column for pairs.
std::string format_table(const ChannelReport& report);
std::string format_table(const PairReport& report);

}  // namespace vibci
