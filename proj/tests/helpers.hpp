#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "vibci/types.hpp"

namespace testutil {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("vibci_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Epoched dataset with `per_class` trials per imagery class whose samples are
// filled by fn(trial_index, channel, sample).
template <typename Fn>
vibci::EpochedDataset make_dataset(std::size_t channels, std::size_t samples, std::size_t per_class, Fn fn) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < channels; ++c) names.push_back("C" + std::to_string(c));
  vibci::EpochedDataset ds{vibci::Montage(names), 100.0, static_cast<double>(samples) / 100.0, {}};
  for (std::size_t i = 0; i < per_class * vibci::kNumImageryClasses; ++i) {
    vibci::Trial t{vibci::Matrix<double>(channels, samples), vibci::kImageryLabels[i % vibci::kNumImageryClasses], i};
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t s = 0; s < samples; ++s) t.data(c, s) = fn(i, c, s);
    }
    ds.trials.push_back(std::move(t));
  }
  return ds;
}

}  // namespace testutil
