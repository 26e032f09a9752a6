#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vibci/dsp.hpp"
#include "vibci/types.hpp"

namespace vibci {

struct ChannelStat {
  std::string channel;
  double t_value{0.0};
  double p_value{1.0};  // (0, 1]
  bool significant{false};
};

struct PermutationOptions {
  std::size_t n_perm{1000};
  double alpha{0.01};
  bool bonferroni{false};  // compare p against alpha / channel count
  std::uint64_t seed{0};
};

// Welch two-sample t statistic. Returns 0 when both variances vanish.
double welch_t(std::span<const double> a, std::span<const double> b);

// Two-sided permutation test per channel on log band powers.
//
// imagery_powers[c] and rest_powers[c] hold one band power per epoch for
// channel c. The statistic is the Welch t of the log powers;
// p = (1 + #{|t*| >= |t_obs|}) / (n_perm + 1), with condition labels shuffled
// over the pooled epochs. Channel c draws from seed + c, so results do not
// depend on how channels are scheduled.
std::vector<ChannelStat> permutation_test(const std::vector<std::string>& channels,
                                          const std::vector<std::vector<double>>& imagery_powers,
                                          const std::vector<std::vector<double>>& rest_powers,
                                          const PermutationOptions& options, std::size_t jobs = 1);

// Channels with p <= alpha, by ascending p then descending |t|.
std::vector<std::string> significant_channels(const std::vector<ChannelStat>& stats, double alpha);

// One permutation test per imagery class against the rest epochs.
struct ClassVsRestStats {
  std::array<std::vector<ChannelStat>, kNumImageryClasses> per_class;
};

// Band power of every epoch and channel, then class-vs-rest tests. The
// dataset must contain Rest epochs and at least two epochs of each class.
ClassVsRestStats class_vs_rest(const EpochedDataset& dataset, const Band& band, const PermutationOptions& options,
                               std::size_t jobs = 1);

enum class ShortlistRule { Union, Intersection };

// Channels flagged significant for any (Union) or every (Intersection) class,
// in montage order.
std::vector<std::string> shortlist(const ClassVsRestStats& stats, const Montage& montage, ShortlistRule rule);

}  // namespace vibci
