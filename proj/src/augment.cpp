#include "vibci/augment.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "vibci/dataset.hpp"

namespace vibci {

WindowGeometry window_geometry(double fs_hz, double win_len_s, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("overlap must lie in [0, 1)");
  const std::size_t length = require_integral(win_len_s * fs_hz, "window length");
  const std::size_t step = require_integral((1.0 - overlap) * win_len_s * fs_hz, "window step");
  if (length == 0 || step == 0) throw std::invalid_argument("window length and step must be positive");
  return {length, step};
}

std::size_t window_count(std::size_t samples, const WindowGeometry& g) {
  if (samples < g.length) return 0;
  return (samples - g.length) / g.step + 1;
}

std::vector<Matrix<double>> sliding_windows(const Matrix<double>& trial, double fs_hz, double win_len_s,
                                            double overlap) {
  const auto g = window_geometry(fs_hz, win_len_s, overlap);
  const std::size_t count = window_count(trial.cols(), g);
  if (count == 0) {
    throw std::invalid_argument("trial of " + std::to_string(trial.cols()) +
                                " samples is shorter than one window of " + std::to_string(g.length));
  }
  std::vector<Matrix<double>> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Matrix<double> m(trial.rows(), g.length);
    for (std::size_t ch = 0; ch < trial.rows(); ++ch) {
      const auto src = trial.row(ch).subspan(w * g.step, g.length);
      std::copy(src.begin(), src.end(), m.row(ch).begin());
    }
    out.push_back(std::move(m));
  }
  return out;
}

WindowedDataset augment_dataset(const EpochedDataset& dataset, double win_len_s, double overlap) {
  WindowedDataset out;
  out.montage = dataset.montage;
  out.fs_hz = dataset.fs_hz;
  out.win_len_s = win_len_s;
  out.overlap_fraction = overlap;
  for (const auto& trial : dataset.trials) {
    for (auto& m : sliding_windows(trial.data, dataset.fs_hz, win_len_s, overlap)) {
      out.windows.push_back({std::move(m), trial.label, trial.id});
    }
  }
  return out;
}

}  // namespace vibci
