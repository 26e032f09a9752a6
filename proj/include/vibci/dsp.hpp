#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vibci/types.hpp"

namespace vibci {

struct Band {
  double low_hz{0.0};
  double high_hz{0.0};
};

// Throws std::invalid_argument unless 0 <= low < high < fs/2.
void validate_band(const Band& band, double fs_hz);

struct FirFilter {
  std::vector<double> taps;  // order + 1 coefficients, symmetric
  int order{0};
  double low_hz{0.0};
  double high_hz{0.0};
  double fs_hz{0.0};
};

// Hamming-windowed band-pass FIR of the given (even) order.
//
// The taps are the difference of two windowed-sinc low-passes at the band
// edges. Each low-pass is scaled to unit gain at DC before the difference is
// taken, so the band-pass has an exact zero at DC regardless of how narrow the
// lower transition band is. A low edge of 0 yields a plain low-pass.
FirFilter design_bandpass_fir(const Band& band, double fs_hz, int order);

// Hamming-windowed low-pass with unit DC gain.
FirFilter design_lowpass_fir(double cutoff_hz, double fs_hz, int order);

// |H(f)| of the taps by direct evaluation of the DTFT.
double magnitude_response(const FirFilter& fir, double freq_hz);

// Forward-backward filtering (magnitude |H|^2, zero phase). The input is
// reflect-padded by order + 1 samples at each end and trimmed afterwards, so
// the output has the input length. Requires size > 3 * (order + 1).
std::vector<double> zero_phase_filter(std::span<const double> signal, const FirFilter& fir);

// Applies zero_phase_filter to every channel of a recording.
Recording filter_recording(const Recording& recording, const FirFilter& fir);

// Anti-alias low-pass (cutoff 0.4 * new rate, symmetric and therefore zero
// phase) followed by keeping every `factor`-th sample. Marker onsets are
// divided by `factor` (floor). factor == 1 returns a copy.
Recording decimate(const Recording& recording, int factor);

// One-sided periodogram bins p_k = |X_k|^2 / N^2 for k = 0..N/2 at
// frequencies k * fs / N.
std::vector<double> periodogram(std::span<const double> signal);

// Power of the periodogram bins whose frequency lies in [low_hz, high_hz].
// Requires at least 2 s of signal.
double band_power(std::span<const double> signal, double fs_hz, const Band& band);

}  // namespace vibci
