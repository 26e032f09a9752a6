#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vibci/cnn.hpp"
#include "vibci/pipeline.hpp"
#include "vibci/types.hpp"

namespace vibci {

struct SessionProtocol {
  std::size_t trials_per_class{10};
  std::size_t runs{3};
  double win_len_s{2.0};
  double overlap{0.5};

  std::size_t total_trials() const { return trials_per_class * kNumImageryClasses; }
  void validate() const;
};

// Ordered stream of preprocessed imagery trials.
class TrialSource {
 public:
  virtual ~TrialSource() = default;
  virtual std::size_t channel_count() const = 0;
  virtual double fs_hz() const = 0;
  // nullopt once the stream is exhausted.
  virtual std::optional<Trial> next() = 0;
};

class VectorTrialSource : public TrialSource {
 public:
  VectorTrialSource(std::vector<Trial> trials, std::size_t channels, double fs_hz);
  std::size_t channel_count() const override { return channels_; }
  double fs_hz() const override { return fs_hz_; }
  std::optional<Trial> next() override;

 private:
  std::vector<Trial> trials_;
  std::size_t channels_;
  double fs_hz_;
  std::size_t pos_{0};
};

// Fresh synthetic session: a recording with trials_per_class cued trials per
// class in seeded shuffled order, run through the same preprocessing as the
// training data, then cut into imagery epochs.
class SyntheticTrialSource : public TrialSource {
 public:
  SyntheticTrialSource(const SubjectSpec& spec, const PreprocessSettings& preprocess, std::uint64_t seed);
  std::size_t channel_count() const override { return inner_.channel_count(); }
  double fs_hz() const override { return inner_.fs_hz(); }
  std::optional<Trial> next() override { return inner_.next(); }

 private:
  static VectorTrialSource build(const SubjectSpec& spec, const PreprocessSettings& preprocess, std::uint64_t seed);
  VectorTrialSource inner_;
};

// Maps a trial's windows to per-window class probabilities (rows x 4).
class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual std::size_t channel_count() const = 0;
  virtual Matrix<double> window_probabilities(const std::vector<Window>& windows) const = 0;
};

class CnnDecoder : public Decoder {
 public:
  explicit CnnDecoder(Model model) : model_(std::move(model)) {}
  std::size_t channel_count() const override { return model_.arch().input_channels; }
  Matrix<double> window_probabilities(const std::vector<Window>& windows) const override;

 private:
  Model model_;
};

enum class ArmState : std::uint8_t { Idle, Executing };
std::string_view to_string(ArmState state);

struct ArmTransition {
  std::size_t trial_index{0};
  ClassLabel action{ClassLabel::PourWater};
  ArmState from{ArmState::Idle};
  ArmState to{ArmState::Idle};
};

// Logged stand-in for the robotic arm.
class RoboticArm {
 public:
  ArmState state() const { return state_; }
  const std::vector<ArmTransition>& trace() const { return trace_; }

  // Idle -> Executing. Throws std::logic_error unless Idle or for a Rest action.
  void begin(std::size_t trial_index, ClassLabel action);
  // Executing -> Idle. Throws std::logic_error unless Executing.
  void finish();
  // begin() then finish().
  void execute(std::size_t trial_index, ClassLabel action);

 private:
  ArmState state_{ArmState::Idle};
  ClassLabel current_{ClassLabel::PourWater};
  std::size_t current_trial_{0};
  std::vector<ArmTransition> trace_;
};

struct TrialLog {
  std::size_t index{0};
  std::size_t trial_id{0};
  ClassLabel true_label{ClassLabel::PourWater};
  ClassLabel decoded_label{ClassLabel::PourWater};
  std::vector<std::size_t> window_decisions;
};

struct RunReport {
  std::vector<TrialLog> trials;
  std::size_t correct{0};
  std::size_t total{0};
  double success_rate{0.0};
};

struct SessionResult {
  RunReport report;
  std::vector<ArmTransition> trace;
};

// Exact ratio. Throws std::invalid_argument when total == 0 or correct > total.
double success_rate(std::size_t correct, std::size_t total);

// "0.73 (29/40)": the ratio rounded half up to two decimals, then the counts.
std::string format_success(std::size_t correct, std::size_t total);

// Pulls protocol.total_trials() trials, windows each one, decodes and votes,
// and drives the arm with the decoded action. Throws std::runtime_error when
// the stream ends early and std::invalid_argument on a channel-count mismatch.
SessionResult run_online_session(const Decoder& decoder, TrialSource& source, const SessionProtocol& protocol);

nlohmann::json to_json(const RunReport& report);
nlohmann::json to_json(const std::vector<ArmTransition>& trace);

// "Run1  0.73 (29/40)" rows, one per run.
std::string format_runs(const std::vector<RunReport>& runs);

}  // namespace vibci
