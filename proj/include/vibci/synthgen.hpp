#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vibci/types.hpp"

namespace vibci {

// Frequencies and relative amplitudes of the two rhythms added during an
// imagery trial of one class.
struct ClassSignature {
  double alpha_hz{10.0};  // [8, 13]
  double delta_hz{2.0};   // [0.5, 4]
  double alpha_amp{1.0};
  double delta_amp{1.0};
};

struct SubjectSpec {
  Montage montage;
  double fs_hz{1000.0};
  std::size_t trials_per_class{50};
  double epoch_len_s{4.0};
  double rest_len_s{4.0};
  double snr{2.0};               // burst amplitude over background RMS
  double background_rms_uv{10.0};
  std::vector<double> alpha_gain;  // per montage channel, [0, 1]
  std::vector<double> delta_gain;  // per montage channel, [0, 1]
  std::array<ClassSignature, kNumImageryClasses> class_signatures{};

  // Throws std::invalid_argument on a violated constraint.
  void validate() const;

  // Spec with the committed default constants (see synth_defaults.hpp).
  static SubjectSpec defaults(const Montage& montage = Montage::standard64());

  // Same spec on a sub-montage; topography weights follow their channels.
  SubjectSpec restricted_to(const std::vector<std::string>& channels) const;
};

// Per-channel weights from a label -> weight map; unlisted channels get 0.
std::vector<double> topography_from_map(const Montage& montage,
                                        const std::map<std::string, double>& weights);

// Synthetic subject recording.
//
// Layout: 1 s lead-in, then for every trial a rest period (Rest marker)
// followed by an imagery period (class marker), then a 1 s tail. The class
// order is a seeded shuffle with exactly trials_per_class trials per class.
//
// Background, per channel: one white Gaussian sequence drives four leaky
// integrators y_i[n] = a_i y_i[n-1] + sqrt(1 - a_i^2) w[n] with corner
// frequencies 0.5, 2, 8 and 32 Hz (a_i = exp(-2 pi f_i / fs)). Their sum is
// scaled analytically to background_rms_uv. The spectrum falls roughly as 1/f
// across the EEG range.
//
// Imagery trial of class k, channel c: snr * background_rms_uv * envelope(t) *
// (alpha_gain[c] * alpha_amp_k * j_a * sin(2 pi (alpha_hz_k + df_a) t + phi_a) +
//  delta_gain[c] * delta_amp_k * j_d * sin(2 pi (delta_hz_k + df_d) t + phi_d)),
// where the per-trial jitters j in [0.8, 1.2], df in [-0.25, 0.25] Hz and phases
// phi are shared by all channels, and the envelope is a Tukey window with
// 0.25 s cosine ramps.
//
// Random streams are keyed by channel label and trial index, so generating a
// sub-montage reproduces the same per-channel values.
Recording generate_subject(const SubjectSpec& spec, std::uint64_t seed);

}  // namespace vibci
