#include "vibci/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vibci/parallel.hpp"
#include "vibci/rng.hpp"

namespace vibci {

namespace {

// Floor for log-transforming powers of an exactly silent epoch.
constexpr double kMinPower = 1e-300;

struct Moments {
  double mean{0.0};
  double var{0.0};  // unbiased
};

Moments moments(const double* x, std::size_t n) {
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (x[i] - mean) * (x[i] - mean);
  return {mean, ss / static_cast<double>(n - 1)};
}

double welch_from(const double* a, std::size_t na, const double* b, std::size_t nb) {
  const auto ma = moments(a, na);
  const auto mb = moments(b, nb);
  const double se2 = ma.var / static_cast<double>(na) + mb.var / static_cast<double>(nb);
  if (!(se2 > 0.0)) return 0.0;
  return (ma.mean - mb.mean) / std::sqrt(se2);
}

ChannelStat test_channel(const std::string& name, std::span<const double> imagery, std::span<const double> rest,
                         std::size_t n_perm, std::uint64_t seed) {
  if (imagery.size() < 2 || rest.size() < 2) {
    throw std::invalid_argument("permutation test needs at least 2 epochs per condition");
  }
  std::vector<double> log_a, log_b;
  for (double v : imagery) log_a.push_back(std::log(std::max(v, kMinPower)));
  for (double v : rest) log_b.push_back(std::log(std::max(v, kMinPower)));

  ChannelStat stat;
  stat.channel = name;
  stat.t_value = welch_from(log_a.data(), log_a.size(), log_b.data(), log_b.size());
  // Identical samples carry no evidence; skip the shuffles.
  if (stat.t_value == 0.0) {
    stat.p_value = 1.0;
    return stat;
  }

  // The pooled values are sorted and the permuted split always takes the
  // smaller group first, so swapping the condition labels reproduces the same
  // permutation statistics exactly.
  std::vector<double> pooled(log_a);
  pooled.insert(pooled.end(), log_b.begin(), log_b.end());
  std::sort(pooled.begin(), pooled.end());
  const std::size_t n_first = std::min(log_a.size(), log_b.size());
  const std::size_t n_second = pooled.size() - n_first;
  // Relative slack so that a permutation reproducing the observed split counts
  // as "at least as extreme" despite summation-order rounding.
  const double threshold = std::abs(stat.t_value) * (1.0 - 1e-9);

  Rng rng(seed);
  std::size_t exceed = 0;
  for (std::size_t i = 0; i < n_perm; ++i) {
    rng.shuffle(std::span<double>(pooled));
    if (std::abs(welch_from(pooled.data(), n_first, pooled.data() + n_first, n_second)) >= threshold) ++exceed;
  }
  stat.p_value = static_cast<double>(1 + exceed) / static_cast<double>(n_perm + 1);
  return stat;
}

}  // namespace

double welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t needs at least 2 values per sample");
  return welch_from(a.data(), a.size(), b.data(), b.size());
}

std::vector<ChannelStat> permutation_test(const std::vector<std::string>& channels,
                                          const std::vector<std::vector<double>>& imagery_powers,
                                          const std::vector<std::vector<double>>& rest_powers,
                                          const PermutationOptions& options, std::size_t jobs) {
  if (channels.size() != imagery_powers.size() || channels.size() != rest_powers.size()) {
    throw std::invalid_argument("permutation_test: channel count mismatch");
  }
  if (options.n_perm < 100) throw std::invalid_argument("permutation_test: n_perm must be >= 100");
  if (!(options.alpha > 0.0 && options.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const double alpha = options.bonferroni ? options.alpha / static_cast<double>(channels.size()) : options.alpha;

  std::vector<ChannelStat> out(channels.size());
  parallel_for(channels.size(), jobs, [&](std::size_t c) {
    out[c] = test_channel(channels[c], imagery_powers[c], rest_powers[c], options.n_perm, options.seed + c);
    out[c].significant = out[c].p_value <= alpha;
  });
  return out;
}

std::vector<std::string> significant_channels(const std::vector<ChannelStat>& stats, double alpha) {
  std::vector<const ChannelStat*> hits;
  for (const auto& s : stats) {
    if (s.p_value <= alpha) hits.push_back(&s);
  }
  std::stable_sort(hits.begin(), hits.end(), [](const ChannelStat* a, const ChannelStat* b) {
    if (a->p_value != b->p_value) return a->p_value < b->p_value;
    return std::abs(a->t_value) > std::abs(b->t_value);
  });
  std::vector<std::string> out;
  for (const auto* s : hits) out.push_back(s->channel);
  return out;
}

ClassVsRestStats class_vs_rest(const EpochedDataset& dataset, const Band& band, const PermutationOptions& options,
                               std::size_t jobs) {
  const std::size_t n_ch = dataset.montage.size();
  // powers[label][channel] -> per-epoch band powers
  std::array<std::vector<std::vector<double>>, 5> powers;
  for (auto& p : powers) p.assign(n_ch, {});
  std::vector<std::vector<double>> trial_powers(dataset.trials.size());
  parallel_for(dataset.trials.size(), jobs, [&](std::size_t i) {
    const auto& t = dataset.trials[i];
    trial_powers[i].resize(n_ch);
    for (std::size_t c = 0; c < n_ch; ++c) trial_powers[i][c] = band_power(t.data.row(c), dataset.fs_hz, band);
  });
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    const auto k = class_index(dataset.trials[i].label);
    for (std::size_t c = 0; c < n_ch; ++c) powers[k][c].push_back(trial_powers[i][c]);
  }

  const auto& rest = powers[class_index(ClassLabel::Rest)];
  ClassVsRestStats out;
  for (std::size_t k = 0; k < kNumImageryClasses; ++k) {
    PermutationOptions opt = options;
    // Separate stream per class; channel offsets are added inside.
    opt.seed = derive_seed(options.seed, "stats.class", k);
    out.per_class[k] = permutation_test(dataset.montage.names(), powers[k], rest, opt, jobs);
  }
  return out;
}

std::vector<std::string> shortlist(const ClassVsRestStats& stats, const Montage& montage, ShortlistRule rule) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < montage.size(); ++c) {
    std::size_t hits = 0;
    for (const auto& per : stats.per_class) {
      const auto it = std::find_if(per.begin(), per.end(), [&](const ChannelStat& s) { return s.channel == montage.name(c); });
      if (it != per.end() && it->significant) ++hits;
    }
    const bool keep = rule == ShortlistRule::Union ? hits > 0 : hits == stats.per_class.size();
    if (keep) out.push_back(montage.name(c));
  }
  return out;
}

}  // namespace vibci
