#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vibci/matrix.hpp"

namespace vibci {

// The four imagery tasks plus the rest condition. The numeric value of an
// imagery label doubles as the decoder's class index.
enum class ClassLabel : std::uint8_t {
  PourWater = 0,
  OpenDoor = 1,
  EatFood = 2,
  PickUpPhone = 3,
  Rest = 4,
};

inline constexpr std::size_t kNumImageryClasses = 4;
inline constexpr std::array<ClassLabel, kNumImageryClasses> kImageryLabels = {
    ClassLabel::PourWater, ClassLabel::OpenDoor, ClassLabel::EatFood, ClassLabel::PickUpPhone};

std::string_view to_string(ClassLabel label);
// Throws std::invalid_argument for unknown names.
ClassLabel label_from_string(std::string_view name);
inline bool is_imagery(ClassLabel label) { return label != ClassLabel::Rest; }
inline std::size_t class_index(ClassLabel label) { return static_cast<std::size_t>(label); }

// Ordered, duplicate-free list of electrode labels. The position of a label is
// its channel index in every matrix built on this montage.
class Montage {
 public:
  Montage() = default;
  explicit Montage(std::vector<std::string> channel_names);

  // 64-electrode 10/20 cap used by the recorded dataset.
  static const Montage& standard64();

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t index) const { return names_.at(index); }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws std::invalid_argument when the label is not in the montage.
  std::size_t index_of(std::string_view name) const;

  // Sub-montage in the order given.
  Montage subset(const std::vector<std::string>& names) const;

  bool operator==(const Montage& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Marker {
  std::size_t onset{0};  // sample index
  ClassLabel label{ClassLabel::Rest};
  bool operator==(const Marker&) const = default;
};

// Continuous recording in microvolts, channels x samples.
struct Recording {
  Montage montage;
  double fs_hz{0.0};
  Matrix<float> samples;
  std::vector<Marker> markers;

  std::size_t n_channels() const { return samples.rows(); }
  std::size_t n_samples() const { return samples.cols(); }

  // Throws std::invalid_argument on a broken invariant.
  void validate() const;
};

struct Trial {
  Matrix<double> data;  // channels x samples
  ClassLabel label{ClassLabel::Rest};
  std::size_t id{0};  // position in the originating epoch list
};

struct EpochedDataset {
  Montage montage;
  double fs_hz{0.0};
  double epoch_len_s{0.0};
  std::vector<Trial> trials;

  // Indexed by ClassLabel value (five entries, Rest last).
  std::array<std::size_t, 5> class_counts() const;
  void validate() const;
};

struct Window {
  Matrix<double> data;  // channels x window samples
  ClassLabel label{ClassLabel::Rest};
  std::size_t source_trial_id{0};
};

struct WindowedDataset {
  Montage montage;
  double fs_hz{0.0};
  double win_len_s{0.0};
  double overlap_fraction{0.0};
  std::vector<Window> windows;

  std::array<std::size_t, 5> class_counts() const;
};

}  // namespace vibci
