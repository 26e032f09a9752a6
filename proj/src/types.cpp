#include "vibci/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace vibci {

namespace {

constexpr std::array<std::string_view, 5> kLabelNames = {"PourWater", "OpenDoor", "EatFood",
                                                         "PickUpPhone", "Rest"};

}  // namespace

std::string_view to_string(ClassLabel label) { return kLabelNames.at(class_index(label)); }

ClassLabel label_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return static_cast<ClassLabel>(i);
  }
  throw std::invalid_argument("unknown class label: " + std::string(name));
}

Montage::Montage(std::vector<std::string> channel_names) : names_(std::move(channel_names)) {
  index_.reserve(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw std::invalid_argument("Montage: empty channel name");
    if (!index_.emplace(names_[i], i).second) {
      throw std::invalid_argument("Montage: duplicate channel name " + names_[i]);
    }
  }
}

const Montage& Montage::standard64() {
  static const Montage montage({
      "Fp1", "Fp2", "AF3", "AF4", "AF7", "AF8", "AFz",                     //
      "F1",  "F2",  "F3",  "F4",  "F5",  "F6",  "F7",  "F8",  "Fz",        //
      "FC1", "FC2", "FC3", "FC4", "FC5", "FC6",                            //
      "FT7", "FT8", "FT9", "FT10",                                         //
      "C1",  "C2",  "C3",  "C4",  "C5",  "C6",  "Cz",  "T7",  "T8",        //
      "CP1", "CP2", "CP3", "CP4", "CP5", "CP6", "CPz",                     //
      "TP7", "TP8", "TP9", "TP10",                                         //
      "P1",  "P2",  "P3",  "P4",  "P5",  "P6",  "P7",  "P8",  "Pz",  "POz",  //
      "PO3", "PO4", "PO7", "PO8", "O1",  "O2",  "Oz",  "Iz",
  });
  return montage;
}

std::optional<std::size_t> Montage::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Montage::index_of(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  throw std::invalid_argument("channel not in montage: " + std::string(name));
}

Montage Montage::subset(const std::vector<std::string>& names) const {
  for (const auto& n : names) index_of(n);
  return Montage(names);
}

void Recording::validate() const {
  if (!(fs_hz > 0.0)) throw std::invalid_argument("Recording: fs_hz must be positive");
  if (samples.rows() != montage.size()) {
    throw std::invalid_argument("Recording: sample rows do not match montage size");
  }
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (markers[i].onset >= n_samples()) {
      throw std::invalid_argument("Recording: marker onset beyond end of recording");
    }
    if (i > 0 && markers[i].onset < markers[i - 1].onset) {
      throw std::invalid_argument("Recording: markers not sorted by onset");
    }
  }
}

std::array<std::size_t, 5> EpochedDataset::class_counts() const {
  std::array<std::size_t, 5> counts{};
  for (const auto& t : trials) ++counts[class_index(t.label)];
  return counts;
}

void EpochedDataset::validate() const {
  if (trials.empty()) return;
  const auto rows = trials.front().data.rows();
  const auto cols = trials.front().data.cols();
  if (rows != montage.size()) throw std::invalid_argument("EpochedDataset: rows != montage size");
  for (const auto& t : trials) {
    if (t.data.rows() != rows || t.data.cols() != cols) {
      throw std::invalid_argument("EpochedDataset: trials differ in shape");
    }
  }
}

std::array<std::size_t, 5> WindowedDataset::class_counts() const {
  std::array<std::size_t, 5> counts{};
  for (const auto& w : windows) ++counts[class_index(w.label)];
  return counts;
}

}  // namespace vibci
