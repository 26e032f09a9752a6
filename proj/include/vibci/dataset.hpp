#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vibci/types.hpp"

namespace vibci {

inline constexpr int kRecordingFormatVersion = 1;

// On-disk layout of a recording directory:
//   meta.json     format_version, byte_order, dtype, channel_names, fs_hz,
//                 n_channels, n_samples, markers [{onset, label}]
//   samples.f32le little-endian IEEE-754 binary32, channel-major, each
//                 channel's samples contiguous
// Returns the directory path. Throws std::runtime_error on I/O failure.
std::filesystem::path save_recording(const Recording& recording, const std::filesystem::path& dir);

// Throws std::runtime_error for missing files, a payload whose size disagrees
// with the metadata, or an unknown format version.
Recording load_recording(const std::filesystem::path& dir);

// Cuts one epoch per marker starting at onset + offset. fs_hz * epoch_len_s and
// fs_hz * offset_s must be integers.
EpochedDataset epoch(const Recording& recording, double epoch_len_s, double offset_s = 0.0);

// Keeps only the four imagery classes.
EpochedDataset imagery_only(const EpochedDataset& dataset);

// Copies the named channels (in the order given) into a new dataset.
EpochedDataset select_channels(const EpochedDataset& dataset, const std::vector<std::string>& channels);
Recording select_channels(const Recording& recording, const std::vector<std::string>& channels);

// Stratified trial-level split. Within each class the trial order is shuffled
// with `seed` and the first round(train_fraction * n) trials go to training.
// Both halves keep the original trial order. Throws if any present class has
// fewer than two trials.
std::pair<EpochedDataset, EpochedDataset> split_trials(const EpochedDataset& dataset,
                                                       double train_fraction, std::uint64_t seed);

// Returns round(value), throwing std::invalid_argument when value is not an
// integer to within 1e-9 relative. `what` names the quantity in the message.
std::size_t require_integral(double value, const char* what);

}  // namespace vibci
