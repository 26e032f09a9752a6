#include "vibci/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "vibci/rng.hpp"

namespace vibci {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kSamplesFile = "samples.f32le";

void put_f32le(float v, char* out) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
}

float get_f32le(const char* in) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

long long require_integral_signed(double value, const char* what) {
  const double r = std::round(value);
  if (!std::isfinite(value) || std::abs(value - r) > 1e-9 * std::max(1.0, std::abs(value))) {
    throw std::invalid_argument(std::string(what) + " must be an integer number of samples");
  }
  return static_cast<long long>(r);
}

}  // namespace

std::size_t require_integral(double value, const char* what) {
  const long long n = require_integral_signed(value, what);
  if (n < 0) throw std::invalid_argument(std::string(what) + " must be non-negative");
  return static_cast<std::size_t>(n);
}

fs::path save_recording(const Recording& recording, const fs::path& dir) {
  recording.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());

  json markers = json::array();
  for (const auto& m : recording.markers) {
    markers.push_back({{"onset", m.onset}, {"label", to_string(m.label)}});
  }
  const json meta = {
      {"format_version", kRecordingFormatVersion},
      {"byte_order", "little"},
      {"dtype", "float32"},
      {"channel_names", recording.montage.names()},
      {"fs_hz", recording.fs_hz},
      {"n_channels", recording.n_channels()},
      {"n_samples", recording.n_samples()},
      {"markers", markers},
  };
  {
    std::ofstream out(dir / kMetaFile, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / kMetaFile).string());
    out << meta.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + (dir / kMetaFile).string());
  }

  std::ofstream out(dir / kSamplesFile, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / kSamplesFile).string());
  std::vector<char> buf(recording.n_samples() * 4);
  for (std::size_t ch = 0; ch < recording.n_channels(); ++ch) {
    const auto row = recording.samples.row(ch);
    for (std::size_t i = 0; i < row.size(); ++i) put_f32le(row[i], buf.data() + 4 * i);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + (dir / kSamplesFile).string());
  return dir;
}

Recording load_recording(const fs::path& dir) {
  const auto meta_path = dir / kMetaFile;
  const auto samples_path = dir / kSamplesFile;
  if (!fs::exists(meta_path)) throw std::runtime_error("missing " + meta_path.string());
  if (!fs::exists(samples_path)) throw std::runtime_error("missing " + samples_path.string());

  json meta;
  {
    std::ifstream in(meta_path);
    try {
      in >> meta;
    } catch (const json::exception& e) {
      throw std::runtime_error("malformed " + meta_path.string() + ": " + e.what());
    }
  }
  try {
    const int version = meta.at("format_version").get<int>();
    if (version != kRecordingFormatVersion) {
      throw std::runtime_error("unsupported recording format version " + std::to_string(version));
    }
    if (meta.at("byte_order").get<std::string>() != "little" ||
        meta.at("dtype").get<std::string>() != "float32") {
      throw std::runtime_error("unsupported sample encoding in " + meta_path.string());
    }
    Recording rec;
    rec.montage = Montage(meta.at("channel_names").get<std::vector<std::string>>());
    rec.fs_hz = meta.at("fs_hz").get<double>();
    const auto n_channels = meta.at("n_channels").get<std::size_t>();
    const auto n_samples = meta.at("n_samples").get<std::size_t>();
    if (n_channels != rec.montage.size()) {
      throw std::runtime_error("n_channels disagrees with channel_names");
    }
    const auto expected = static_cast<std::uintmax_t>(n_channels) * n_samples * 4;
    const auto actual = fs::file_size(samples_path);
    if (actual != expected) {
      throw std::runtime_error("payload size mismatch: " + samples_path.string() + " has " +
                               std::to_string(actual) + " bytes, metadata implies " +
                               std::to_string(expected));
    }
    for (const auto& m : meta.at("markers")) {
      rec.markers.push_back({m.at("onset").get<std::size_t>(),
                             label_from_string(m.at("label").get<std::string>())});
    }

    std::ifstream in(samples_path, std::ios::binary);
    std::vector<char> buf(n_samples * 4);
    std::vector<float> values(n_channels * n_samples);
    for (std::size_t ch = 0; ch < n_channels; ++ch) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      if (!in) throw std::runtime_error("short read on " + samples_path.string());
      for (std::size_t i = 0; i < n_samples; ++i) values[ch * n_samples + i] = get_f32le(buf.data() + 4 * i);
    }
    rec.samples = Matrix<float>(n_channels, n_samples, std::move(values));
    rec.validate();
    return rec;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed " + meta_path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("invalid recording in " + dir.string() + ": " + e.what());
  }
}

EpochedDataset epoch(const Recording& recording, double epoch_len_s, double offset_s) {
  recording.validate();
  if (!(epoch_len_s > 0.0)) throw std::invalid_argument("epoch length must be positive");
  const std::size_t len = require_integral(recording.fs_hz * epoch_len_s, "fs_hz * epoch_len_s");
  const long long offset = require_integral_signed(recording.fs_hz * offset_s, "fs_hz * offset_s");

  EpochedDataset out;
  out.montage = recording.montage;
  out.fs_hz = recording.fs_hz;
  out.epoch_len_s = epoch_len_s;
  out.trials.reserve(recording.markers.size());
  for (const auto& m : recording.markers) {
    const long long start = static_cast<long long>(m.onset) + offset;
    if (start < 0 || static_cast<std::size_t>(start) + len > recording.n_samples()) {
      throw std::invalid_argument("epoch at sample " + std::to_string(m.onset) +
                                  " overruns the recording");
    }
    Trial t;
    t.data = Matrix<double>(recording.n_channels(), len);
    for (std::size_t ch = 0; ch < recording.n_channels(); ++ch) {
      const auto src = recording.samples.row(ch).subspan(static_cast<std::size_t>(start), len);
      std::copy(src.begin(), src.end(), t.data.row(ch).begin());
    }
    t.label = m.label;
    t.id = out.trials.size();
    out.trials.push_back(std::move(t));
  }
  return out;
}

EpochedDataset imagery_only(const EpochedDataset& dataset) {
  EpochedDataset out;
  out.montage = dataset.montage;
  out.fs_hz = dataset.fs_hz;
  out.epoch_len_s = dataset.epoch_len_s;
  for (const auto& t : dataset.trials) {
    if (is_imagery(t.label)) out.trials.push_back(t);
  }
  return out;
}

EpochedDataset select_channels(const EpochedDataset& dataset, const std::vector<std::string>& channels) {
  std::vector<std::size_t> rows;
  for (const auto& c : channels) rows.push_back(dataset.montage.index_of(c));
  EpochedDataset out;
  out.montage = dataset.montage.subset(channels);
  out.fs_hz = dataset.fs_hz;
  out.epoch_len_s = dataset.epoch_len_s;
  out.trials.reserve(dataset.trials.size());
  for (const auto& t : dataset.trials) {
    Trial s;
    s.data = Matrix<double>(rows.size(), t.data.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto src = t.data.row(rows[i]);
      std::copy(src.begin(), src.end(), s.data.row(i).begin());
    }
    s.label = t.label;
    s.id = t.id;
    out.trials.push_back(std::move(s));
  }
  return out;
}

Recording select_channels(const Recording& recording, const std::vector<std::string>& channels) {
  Recording out;
  out.montage = recording.montage.subset(channels);
  out.fs_hz = recording.fs_hz;
  out.markers = recording.markers;
  out.samples = Matrix<float>(channels.size(), recording.n_samples());
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto src = recording.samples.row(recording.montage.index_of(channels[i]));
    std::copy(src.begin(), src.end(), out.samples.row(i).begin());
  }
  return out;
}

std::pair<EpochedDataset, EpochedDataset> split_trials(const EpochedDataset& dataset,
                                                       double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  std::array<std::vector<std::size_t>, 5> by_class;
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    by_class[class_index(dataset.trials[i].label)].push_back(i);
  }
  std::vector<bool> to_train(dataset.trials.size(), false);
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& idx = by_class[k];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw std::invalid_argument("class " + std::string(to_string(static_cast<ClassLabel>(k))) +
                                  " has fewer than 2 trials");
    }
    Rng rng(derive_seed(seed, "split", k));
    rng.shuffle(std::span<std::size_t>(idx));
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t i = 0; i < n_train; ++i) to_train[idx[i]] = true;
  }

  EpochedDataset train, test;
  for (auto* d : {&train, &test}) {
    d->montage = dataset.montage;
    d->fs_hz = dataset.fs_hz;
    d->epoch_len_s = dataset.epoch_len_s;
  }
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    (to_train[i] ? train : test).trials.push_back(dataset.trials[i]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace vibci
