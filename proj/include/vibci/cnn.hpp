#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vibci/types.hpp"

namespace vibci {

// One convolution block: valid cross-correlation along time, bias, ReLU, then
// non-overlapping average pooling (a trailing partial pool is dropped).
struct BlockSpec {
  std::size_t kernel_len{0};  // odd
  std::size_t out_features{0};
  std::size_t pool_len{1};
  bool operator==(const BlockSpec&) const = default;
};

struct Architecture {
  static constexpr std::size_t kBlocks = 3;
  static constexpr std::size_t kClasses = kNumImageryClasses;

  std::size_t input_channels{0};
  std::size_t input_samples{0};
  std::array<BlockSpec, kBlocks> blocks{};

  // (25, 8, 4), (11, 16, 4), (7, 32, 2).
  static std::array<BlockSpec, kBlocks> default_blocks();

  void validate() const;
  std::size_t in_features(std::size_t block) const;
  std::size_t in_length(std::size_t block) const;
  std::size_t conv_length(std::size_t block) const;
  std::size_t pooled_length(std::size_t block) const;
  std::size_t parameter_count() const;

  bool operator==(const Architecture&) const = default;
};

// Flat parameter vector with typed views. Layout: for each block its kernel
// (out x in x kernel_len) then its bias (out); then the head weight
// (classes x last features) and head bias (classes).
class Model {
 public:
  Model() = default;
  explicit Model(const Architecture& arch);

  const Architecture& arch() const { return arch_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> kernel(std::size_t block);
  std::span<const double> kernel(std::size_t block) const;
  std::span<double> bias(std::size_t block);
  std::span<const double> bias(std::size_t block) const;
  std::span<double> head_weight();
  std::span<const double> head_weight() const;
  std::span<double> head_bias();
  std::span<const double> head_bias() const;

  // Offsets into params() of the views above.
  std::size_t kernel_offset(std::size_t block) const { return kernel_off_[block]; }
  std::size_t bias_offset(std::size_t block) const { return bias_off_[block]; }
  std::size_t head_weight_offset() const { return head_w_off_; }
  std::size_t head_bias_offset() const { return head_b_off_; }

  bool operator==(const Model& other) const { return arch_ == other.arch_ && params_ == other.params_; }

 private:
  Architecture arch_;
  std::vector<double> params_;
  std::array<std::size_t, Architecture::kBlocks> kernel_off_{}, bias_off_{};
  std::size_t head_w_off_{0}, head_b_off_{0};
};

struct TrainConfig {
  std::size_t epochs{200};
  std::size_t batch_size{16};
  double learning_rate{1e-4};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
  std::uint64_t seed{0};

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step{0};

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

struct Metrics {
  double window_accuracy{0.0};
  double trial_accuracy{0.0};
  std::array<double, kNumImageryClasses> per_class_accuracy{};  // window level, by true class
  std::array<std::array<std::size_t, kNumImageryClasses>, kNumImageryClasses> confusion{};  // [true][pred]
  std::size_t n_windows{0};
  std::size_t n_trials{0};
  std::vector<double> loss_history;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_history;  // mean cross-entropy per epoch
};

// Kernels ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = in_features *
// kernel_len (last-features for the head); biases zero.
Model init_model(const Architecture& arch, std::uint64_t seed);

// batch holds batch_size inputs of input_channels x input_samples, contiguous.
// Returns batch_size x 4 softmax probabilities.
Matrix<double> forward(const Model& model, std::span<const double> batch, std::size_t batch_size);

struct LossAndGrad {
  double loss{0.0};
  std::vector<double> grad;  // same layout as Model::params()
};

// Mean cross-entropy over the batch and its gradient with respect to every
// parameter. labels are class indices in [0, 4).
LossAndGrad loss_and_grad(const Model& model, std::span<const double> batch, std::span<const std::size_t> labels);

// Bias-corrected Adam update of every parameter.
void adam_step(Model& model, std::span<const double> grad, AdamState& state, const TrainConfig& config);

// Per-channel standardization to zero mean and unit variance (variance
// floored at 1e-8), written into out (same layout as the window).
void standardize_window(const Matrix<double>& window, std::span<double> out);

// Architecture sized to the dataset, init, then epochs of shuffled
// mini-batches (the final short batch is kept). Deterministic per seed.
TrainResult train(const WindowedDataset& train_windows, const TrainConfig& config,
                  const std::array<BlockSpec, Architecture::kBlocks>& blocks = Architecture::default_blocks());

// Window probabilities (windows are standardized first).
Matrix<double> predict(const Model& model, const std::vector<Window>& windows);

// Majority vote over per-window argmax decisions; ties go to the tied class
// with the highest mean probability, then to the lowest class index.
std::size_t vote(std::span<const std::size_t> decisions, const Matrix<double>& probabilities,
                 std::span<const std::size_t> rows);

Metrics evaluate(const Model& model, const WindowedDataset& test_windows);
// Same scoring from precomputed window probabilities.
Metrics score(const Matrix<double>& probabilities, const std::vector<Window>& windows);

inline constexpr int kModelFormatVersion = 1;

// model.json (architecture, channel labels, sampling rate) plus params.f64le
// (little-endian binary64 in Model::params() order).
void save_model(const Model& model, const std::vector<std::string>& channels, double fs_hz,
                const std::filesystem::path& dir);

struct LoadedModel {
  Model model;
  std::vector<std::string> channels;
  double fs_hz{0.0};
};
LoadedModel load_model(const std::filesystem::path& dir);

}  // namespace vibci
