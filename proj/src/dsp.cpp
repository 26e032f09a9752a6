#include "vibci/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vibci {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

// Windowed-sinc low-pass taps scaled to unit DC gain.
std::vector<double> lowpass_taps(double cutoff_hz, double fs_hz, int order) {
  const double fc = cutoff_hz / fs_hz;
  const double half = order / 2.0;
  std::vector<double> h(static_cast<std::size_t>(order) + 1);
  double sum = 0.0;
  for (int n = 0; n <= order; ++n) {
    const double m = n - half;
    const double window = 0.54 - 0.46 * std::cos(2.0 * kPi * n / order);
    h[n] = 2.0 * fc * sinc(2.0 * fc * m) * window;
    sum += h[n];
  }
  for (auto& v : h) v /= sum;
  // Symmetrize so both halves hold bit-identical values.
  for (int n = 0; n < order / 2; ++n) h[order - n] = h[n];
  return h;
}

void validate_order(int order) {
  if (order < 2 || order % 2 != 0) {
    throw std::invalid_argument("FIR order must be even and >= 2, got " + std::to_string(order));
  }
}

// Causal FIR: y[n] = sum_k h[k] x[n - k], zero initial state.
void causal_fir(std::span<const double> x, std::span<const double> h, std::span<double> y) {
  const std::size_t taps = h.size();
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t kmax = std::min(taps - 1, n);
    double acc = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
}

std::size_t reflect_index(long long i, std::size_t n) {
  const auto last = static_cast<long long>(n) - 1;
  if (i < 0) i = -i;
  if (i > last) i = 2 * last - i;
  return static_cast<std::size_t>(i);
}

// |X_k|^2 / N^2 for k in [k_lo, k_hi] by direct DFT with an exact twiddle table.
std::vector<double> power_bins(std::span<const double> x, std::size_t k_lo, std::size_t k_hi) {
  const std::size_t n = x.size();
  std::vector<double> cos_table(n), sin_table(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    cos_table[i] = std::cos(a);
    sin_table[i] = std::sin(a);
  }
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  std::vector<double> out;
  out.reserve(k_hi - k_lo + 1);
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t t = 0; t < n; ++t) {
      re += x[t] * cos_table[idx];
      im -= x[t] * sin_table[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    out.push_back((re * re + im * im) * norm);
  }
  return out;
}

}  // namespace

void validate_band(const Band& band, double fs_hz) {
  if (!(fs_hz > 0.0)) throw std::invalid_argument("sampling rate must be positive");
  if (!(band.low_hz >= 0.0 && band.low_hz < band.high_hz && band.high_hz < fs_hz / 2.0)) {
    throw std::invalid_argument("band [" + std::to_string(band.low_hz) + ", " +
                                std::to_string(band.high_hz) + "] Hz invalid for fs " +
                                std::to_string(fs_hz) + " Hz (need 0 <= low < high < fs/2)");
  }
}

FirFilter design_lowpass_fir(double cutoff_hz, double fs_hz, int order) {
  validate_order(order);
  validate_band({0.0, cutoff_hz}, fs_hz);
  return {lowpass_taps(cutoff_hz, fs_hz, order), order, 0.0, cutoff_hz, fs_hz};
}

FirFilter design_bandpass_fir(const Band& band, double fs_hz, int order) {
  validate_order(order);
  validate_band(band, fs_hz);
  auto taps = lowpass_taps(band.high_hz, fs_hz, order);
  if (band.low_hz > 0.0) {
    const auto low = lowpass_taps(band.low_hz, fs_hz, order);
    for (std::size_t i = 0; i < taps.size(); ++i) taps[i] -= low[i];
  }
  return {std::move(taps), order, band.low_hz, band.high_hz, fs_hz};
}

double magnitude_response(const FirFilter& fir, double freq_hz) {
  double re = 0.0, im = 0.0;
  const double w = 2.0 * kPi * freq_hz / fir.fs_hz;
  for (std::size_t n = 0; n < fir.taps.size(); ++n) {
    re += fir.taps[n] * std::cos(w * static_cast<double>(n));
    im -= fir.taps[n] * std::sin(w * static_cast<double>(n));
  }
  return std::hypot(re, im);
}

std::vector<double> zero_phase_filter(std::span<const double> signal, const FirFilter& fir) {
  const std::size_t pad = static_cast<std::size_t>(fir.order) + 1;
  if (signal.size() <= 3 * pad) {
    throw std::invalid_argument("signal of " + std::to_string(signal.size()) +
                                " samples too short for zero-phase filtering with order " +
                                std::to_string(fir.order));
  }
  const std::size_t n = signal.size();
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < ext.size(); ++i) {
    ext[i] = signal[reflect_index(static_cast<long long>(i) - static_cast<long long>(pad), n)];
  }
  std::vector<double> tmp(ext.size());
  causal_fir(ext, fir.taps, tmp);
  std::reverse(tmp.begin(), tmp.end());
  causal_fir(tmp, fir.taps, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Recording filter_recording(const Recording& recording, const FirFilter& fir) {
  if (recording.fs_hz != fir.fs_hz) {
    throw std::invalid_argument("filter designed for a different sampling rate");
  }
  Recording out;
  out.montage = recording.montage;
  out.fs_hz = recording.fs_hz;
  out.markers = recording.markers;
  out.samples = Matrix<float>(recording.n_channels(), recording.n_samples());
  std::vector<double> row(recording.n_samples());
  for (std::size_t ch = 0; ch < recording.n_channels(); ++ch) {
    const auto src = recording.samples.row(ch);
    std::copy(src.begin(), src.end(), row.begin());
    const auto filtered = zero_phase_filter(row, fir);
    std::transform(filtered.begin(), filtered.end(), out.samples.row(ch).begin(),
                   [](double v) { return static_cast<float>(v); });
  }
  return out;
}

Recording decimate(const Recording& recording, int factor) {
  if (factor <= 0) throw std::invalid_argument("decimation factor must be positive");
  recording.validate();
  if (factor == 1) return recording;

  const double new_fs = recording.fs_hz / factor;
  const int order = 20 * factor;
  const auto fir = design_lowpass_fir(0.4 * new_fs, recording.fs_hz, order);
  const std::size_t n = recording.n_samples();
  if (n <= static_cast<std::size_t>(order)) {
    throw std::invalid_argument("recording too short to decimate by " + std::to_string(factor));
  }
  const std::size_t n_out = n / static_cast<std::size_t>(factor);
  const long long half = order / 2;

  Recording out;
  out.montage = recording.montage;
  out.fs_hz = new_fs;
  out.samples = Matrix<float>(recording.n_channels(), n_out);
  for (std::size_t ch = 0; ch < recording.n_channels(); ++ch) {
    const auto src = recording.samples.row(ch);
    auto dst = out.samples.row(ch);
    for (std::size_t j = 0; j < n_out; ++j) {
      const long long centre = static_cast<long long>(j) * factor;
      double acc = 0.0;
      if (centre - half >= 0 && centre + half < static_cast<long long>(n)) {
        const float* x = src.data() + (centre - half);
        for (int k = 0; k <= order; ++k) acc += fir.taps[k] * x[k];
      } else {
        for (int k = 0; k <= order; ++k) acc += fir.taps[k] * src[reflect_index(centre - half + k, n)];
      }
      dst[j] = static_cast<float>(acc);
    }
  }
  for (const auto& m : recording.markers) {
    out.markers.push_back({m.onset / static_cast<std::size_t>(factor), m.label});
  }
  return out;
}

std::vector<double> periodogram(std::span<const double> signal) {
  if (signal.empty()) return {};
  return power_bins(signal, 0, signal.size() / 2);
}

double band_power(std::span<const double> signal, double fs_hz, const Band& band) {
  if (!(band.low_hz >= 0.0 && band.low_hz < band.high_hz && band.high_hz <= fs_hz / 2.0)) {
    throw std::invalid_argument("band outside [0, Nyquist]");
  }
  const std::size_t n = signal.size();
  if (static_cast<double>(n) < 2.0 * fs_hz - 1e-9) {
    throw std::invalid_argument("band_power needs at least 2 s of signal");
  }
  const double df = fs_hz / static_cast<double>(n);
  const auto k_lo = static_cast<std::size_t>(std::ceil(band.low_hz / df - 1e-9));
  const auto k_hi = std::min(n / 2, static_cast<std::size_t>(std::floor(band.high_hz / df + 1e-9)));
  if (k_lo > k_hi) return 0.0;
  double total = 0.0;
  for (double p : power_bins(signal, k_lo, k_hi)) total += p;
  return total;
}

}  // namespace vibci
