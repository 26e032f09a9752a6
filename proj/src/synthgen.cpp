#include "vibci/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vibci/rng.hpp"
#include "vibci/synth_defaults.hpp"

namespace vibci {

namespace {

constexpr double kPi = std::numbers::pi;

struct TrialDraw {
  double alpha_amp, delta_amp, alpha_hz, delta_hz, alpha_phase, delta_phase;
};

void check_weights(const std::vector<double>& w, std::size_t n, const char* what) {
  if (w.size() != n) throw std::invalid_argument(std::string(what) + " has wrong length");
  for (double v : w) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " weight outside [0, 1]");
  }
}

}  // namespace

void SubjectSpec::validate() const {
  if (montage.size() == 0) throw std::invalid_argument("SubjectSpec: empty montage");
  if (!(fs_hz > 0.0)) throw std::invalid_argument("SubjectSpec: fs_hz must be positive");
  if (trials_per_class < 1) throw std::invalid_argument("SubjectSpec: trials_per_class must be >= 1");
  if (!(epoch_len_s > 0.0) || !(rest_len_s > 0.0)) {
    throw std::invalid_argument("SubjectSpec: epoch and rest lengths must be positive");
  }
  if (!(snr >= 0.0)) throw std::invalid_argument("SubjectSpec: snr must be non-negative");
  if (!(background_rms_uv > 0.0)) throw std::invalid_argument("SubjectSpec: background_rms_uv must be positive");
  check_weights(alpha_gain, montage.size(), "alpha topography");
  check_weights(delta_gain, montage.size(), "delta topography");
  for (const auto& s : class_signatures) {
    if (!(s.alpha_hz >= 8.0 && s.alpha_hz <= 13.0)) throw std::invalid_argument("alpha_hz outside [8, 13]");
    if (!(s.delta_hz >= 0.5 && s.delta_hz <= 4.0)) throw std::invalid_argument("delta_hz outside [0.5, 4]");
    if (!(s.alpha_amp >= 0.0 && s.delta_amp >= 0.0)) throw std::invalid_argument("negative class amplitude");
  }
  if (!(std::max(13.0 + synth_defaults::kFreqJitterHz, 32.0) < fs_hz / 2.0)) {
    throw std::invalid_argument("SubjectSpec: fs_hz too low for the generator");
  }
}

std::vector<double> topography_from_map(const Montage& montage, const std::map<std::string, double>& weights) {
  std::vector<double> out(montage.size(), 0.0);
  for (const auto& [name, w] : weights) {
    if (auto idx = montage.find(name)) out[*idx] = w;
  }
  return out;
}

SubjectSpec SubjectSpec::defaults(const Montage& montage) {
  namespace d = synth_defaults;
  SubjectSpec spec;
  spec.montage = montage;
  spec.fs_hz = d::kFsHz;
  spec.trials_per_class = d::kTrialsPerClass;
  spec.epoch_len_s = d::kEpochLenS;
  spec.rest_len_s = d::kRestLenS;
  spec.snr = d::kSnr;
  spec.background_rms_uv = d::kBackgroundRmsUv;
  std::map<std::string, double> alpha, delta;
  for (const auto& [name, w] : d::kAlphaTopography) alpha.emplace(name, w);
  for (const auto& [name, w] : d::kDeltaTopography) delta.emplace(name, w);
  spec.alpha_gain = topography_from_map(montage, alpha);
  spec.delta_gain = topography_from_map(montage, delta);
  spec.class_signatures = d::kClassSignatures;
  return spec;
}

SubjectSpec SubjectSpec::restricted_to(const std::vector<std::string>& channels) const {
  SubjectSpec out = *this;
  out.montage = montage.subset(channels);
  out.alpha_gain.clear();
  out.delta_gain.clear();
  for (const auto& c : channels) {
    const auto i = montage.index_of(c);
    out.alpha_gain.push_back(alpha_gain.at(i));
    out.delta_gain.push_back(delta_gain.at(i));
  }
  return out;
}

Recording generate_subject(const SubjectSpec& spec, std::uint64_t seed) {
  namespace d = synth_defaults;
  spec.validate();
  const double fs = spec.fs_hz;
  const auto samples_of = [fs](double seconds) {
    return static_cast<std::size_t>(std::llround(seconds * fs));
  };
  const std::size_t lead = samples_of(d::kLeadInS);
  const std::size_t rest_n = samples_of(spec.rest_len_s);
  const std::size_t epoch_n = samples_of(spec.epoch_len_s);
  const std::size_t tail = samples_of(d::kTailS);
  const std::size_t n_trials = kNumImageryClasses * spec.trials_per_class;
  const std::size_t total = lead + n_trials * (rest_n + epoch_n) + tail;

  std::vector<ClassLabel> order;
  order.reserve(n_trials);
  for (auto label : kImageryLabels) order.insert(order.end(), spec.trials_per_class, label);
  Rng order_rng(derive_seed(seed, "synth.order"));
  order_rng.shuffle(std::span<ClassLabel>(order));

  Recording rec;
  rec.montage = spec.montage;
  rec.fs_hz = fs;
  rec.samples = Matrix<float>(spec.montage.size(), total);

  std::vector<TrialDraw> draws(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) {
    const auto& sig = spec.class_signatures[class_index(order[i])];
    Rng rng(derive_seed(seed, "synth.trial", i));
    auto& t = draws[i];
    t.alpha_amp = sig.alpha_amp * rng.uniform(1.0 - d::kAmpJitter, 1.0 + d::kAmpJitter);
    t.delta_amp = sig.delta_amp * rng.uniform(1.0 - d::kAmpJitter, 1.0 + d::kAmpJitter);
    t.alpha_hz = sig.alpha_hz + rng.uniform(-d::kFreqJitterHz, d::kFreqJitterHz);
    t.delta_hz = sig.delta_hz + rng.uniform(-d::kFreqJitterHz, d::kFreqJitterHz);
    t.alpha_phase = rng.uniform(0.0, 2.0 * kPi);
    t.delta_phase = rng.uniform(0.0, 2.0 * kPi);
    const std::size_t rest_onset = lead + i * (rest_n + epoch_n);
    rec.markers.push_back({rest_onset, ClassLabel::Rest});
    rec.markers.push_back({rest_onset + rest_n, order[i]});
  }

  // Background mixing coefficients and analytic variance of the sum.
  constexpr std::size_t kComponents = d::kBackgroundCornersHz.size();
  std::array<double, kComponents> a{}, gain{};
  for (std::size_t i = 0; i < kComponents; ++i) {
    a[i] = std::exp(-2.0 * kPi * d::kBackgroundCornersHz[i] / fs);
    gain[i] = std::sqrt(1.0 - a[i] * a[i]);
  }
  double var = 0.0;
  for (std::size_t i = 0; i < kComponents; ++i) {
    for (std::size_t j = 0; j < kComponents; ++j) var += gain[i] * gain[j] / (1.0 - a[i] * a[j]);
  }
  const double bg_scale = spec.background_rms_uv / std::sqrt(var);

  // Tukey envelope shared by all imagery trials.
  std::vector<double> envelope(epoch_n, 1.0);
  const std::size_t ramp = std::min(samples_of(d::kRampS), epoch_n / 2);
  for (std::size_t n = 0; n < ramp; ++n) {
    const double e = 0.5 * (1.0 - std::cos(kPi * static_cast<double>(n) / static_cast<double>(ramp)));
    envelope[n] = e;
    envelope[epoch_n - 1 - n] = e;
  }

  std::vector<double> row(total);
  for (std::size_t ch = 0; ch < spec.montage.size(); ++ch) {
    Rng rng(derive_seed(seed, "synth.background." + spec.montage.name(ch)));
    std::array<double, kComponents> state{};
    for (std::size_t n = 0; n < total; ++n) {
      const double w = rng.normal();
      double sum = 0.0;
      for (std::size_t i = 0; i < kComponents; ++i) {
        state[i] = a[i] * state[i] + gain[i] * w;
        sum += state[i];
      }
      row[n] = bg_scale * sum;
    }

    const double alpha_w = spec.alpha_gain[ch];
    const double delta_w = spec.delta_gain[ch];
    if (spec.snr > 0.0 && (alpha_w > 0.0 || delta_w > 0.0)) {
      const double amp = spec.snr * spec.background_rms_uv;
      for (std::size_t i = 0; i < n_trials; ++i) {
        const auto& t = draws[i];
        const std::size_t onset = lead + i * (rest_n + epoch_n) + rest_n;
        for (std::size_t n = 0; n < epoch_n; ++n) {
          const double time = static_cast<double>(n) / fs;
          const double s = alpha_w * t.alpha_amp * std::sin(2.0 * kPi * t.alpha_hz * time + t.alpha_phase) +
                           delta_w * t.delta_amp * std::sin(2.0 * kPi * t.delta_hz * time + t.delta_phase);
          row[onset + n] += amp * envelope[n] * s;
        }
      }
    }
    std::transform(row.begin(), row.end(), rec.samples.row(ch).begin(),
                   [](double v) { return static_cast<float>(v); });
  }
  return rec;
}

}  // namespace vibci
