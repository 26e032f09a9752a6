#pragma once

#include <cstddef>
#include <vector>

#include "vibci/types.hpp"

namespace vibci {

struct WindowGeometry {
  std::size_t length{0};  // samples per window
  std::size_t step{0};    // samples between window starts
};

// Validates win_len_s * fs and (1 - overlap) * win_len_s * fs as positive
// integers and 0 <= overlap < 1.
WindowGeometry window_geometry(double fs_hz, double win_len_s, double overlap);

// floor((samples - length) / step) + 1, or 0 when samples < length.
std::size_t window_count(std::size_t samples, const WindowGeometry& geometry);

// Complete windows starting at 0, step, 2*step, ...; a trailing partial window
// is dropped. Throws if the trial is shorter than one window.
std::vector<Matrix<double>> sliding_windows(const Matrix<double>& trial, double fs_hz, double win_len_s,
                                            double overlap);

// Windows every trial in order; each window inherits the trial's label and id.
WindowedDataset augment_dataset(const EpochedDataset& dataset, double win_len_s, double overlap);

}  // namespace vibci
