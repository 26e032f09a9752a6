#include "vibci/online_sim.hpp"

#include <stdexcept>

#include "vibci/augment.hpp"
#include "vibci/dataset.hpp"
#include "vibci/synthgen.hpp"

namespace vibci {

using nlohmann::json;

void SessionProtocol::validate() const {
  if (trials_per_class < 1) throw std::invalid_argument("trials_per_class must be >= 1");
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (!(win_len_s > 0.0) || !(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("invalid window policy");
}

VectorTrialSource::VectorTrialSource(std::vector<Trial> trials, std::size_t channels, double fs_hz)
    : trials_(std::move(trials)), channels_(channels), fs_hz_(fs_hz) {}

std::optional<Trial> VectorTrialSource::next() {
  if (pos_ >= trials_.size()) return std::nullopt;
  return trials_[pos_++];
}

SyntheticTrialSource::SyntheticTrialSource(const SubjectSpec& spec, const PreprocessSettings& preprocess,
                                           std::uint64_t seed)
    : inner_(build(spec, preprocess, seed)) {}

VectorTrialSource SyntheticTrialSource::build(const SubjectSpec& spec, const PreprocessSettings& preprocess,
                                              std::uint64_t seed) {
  auto ds = imagery_only(preprocess_and_epoch(generate_subject(spec, seed), preprocess));
  const auto channels = ds.montage.size();
  return VectorTrialSource(std::move(ds.trials), channels, ds.fs_hz);
}

Matrix<double> CnnDecoder::window_probabilities(const std::vector<Window>& windows) const {
  return predict(model_, windows);
}

std::string_view to_string(ArmState state) { return state == ArmState::Idle ? "Idle" : "Executing"; }

void RoboticArm::begin(std::size_t trial_index, ClassLabel action) {
  if (state_ != ArmState::Idle) throw std::logic_error("arm is already executing");
  if (!is_imagery(action)) throw std::logic_error("rest is not an arm action");
  current_ = action;
  current_trial_ = trial_index;
  trace_.push_back({trial_index, action, ArmState::Idle, ArmState::Executing});
  state_ = ArmState::Executing;
}

void RoboticArm::finish() {
  if (state_ != ArmState::Executing) throw std::logic_error("arm is idle");
  trace_.push_back({current_trial_, current_, ArmState::Executing, ArmState::Idle});
  state_ = ArmState::Idle;
}

void RoboticArm::execute(std::size_t trial_index, ClassLabel action) {
  begin(trial_index, action);
  finish();
}

double success_rate(std::size_t correct, std::size_t total) {
  if (total == 0) throw std::invalid_argument("success_rate: total must be positive");
  if (correct > total) throw std::invalid_argument("success_rate: correct exceeds total");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::string format_success(std::size_t correct, std::size_t total) {
  success_rate(correct, total);
  // Integer rounding so that exact halves such as 31/40 go up.
  const std::size_t hundredths = (200 * correct + total) / (2 * total);
  const std::string frac = std::to_string(hundredths % 100);
  return std::to_string(hundredths / 100) + "." + (frac.size() < 2 ? "0" + frac : frac) + " (" +
         std::to_string(correct) + "/" + std::to_string(total) + ")";
}

SessionResult run_online_session(const Decoder& decoder, TrialSource& source, const SessionProtocol& protocol) {
  protocol.validate();
  if (decoder.channel_count() != source.channel_count()) {
    throw std::invalid_argument("decoder expects " + std::to_string(decoder.channel_count()) +
                                " channels, stream has " + std::to_string(source.channel_count()));
  }
  RoboticArm arm;
  SessionResult out;
  auto& report = out.report;
  for (std::size_t i = 0; i < protocol.total_trials(); ++i) {
    auto trial = source.next();
    if (!trial) {
      throw std::runtime_error("trial stream ended after " + std::to_string(i) + " of " +
                               std::to_string(protocol.total_trials()) + " trials");
    }
    if (trial->data.rows() != decoder.channel_count()) throw std::invalid_argument("trial channel count mismatch");

    std::vector<Window> windows;
    for (auto& w : sliding_windows(trial->data, source.fs_hz(), protocol.win_len_s, protocol.overlap)) {
      windows.push_back({std::move(w), trial->label, trial->id});
    }
    const auto probs = decoder.window_probabilities(windows);
    TrialLog log{i, trial->id, trial->label, ClassLabel::PourWater, {}};
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < probs.cols(); ++k) {
        if (probs(r, k) > probs(r, best)) best = k;
      }
      log.window_decisions.push_back(best);
      rows.push_back(r);
    }
    log.decoded_label = kImageryLabels[vote(log.window_decisions, probs, rows)];
    arm.execute(i, log.decoded_label);
    if (log.decoded_label == log.true_label) ++report.correct;
    report.trials.push_back(std::move(log));
  }
  report.total = report.trials.size();
  report.success_rate = success_rate(report.correct, report.total);
  out.trace = arm.trace();
  return out;
}

json to_json(const RunReport& report) {
  json trials = json::array();
  for (const auto& t : report.trials) {
    trials.push_back({{"index", t.index},
                      {"trial_id", t.trial_id},
                      {"true_label", to_string(t.true_label)},
                      {"decoded_label", to_string(t.decoded_label)},
                      {"window_decisions", t.window_decisions}});
  }
  return {{"correct", report.correct},
          {"total", report.total},
          {"success_rate", report.success_rate},
          {"display", format_success(report.correct, report.total)},
          {"trials", trials}};
}

json to_json(const std::vector<ArmTransition>& trace) {
  json out = json::array();
  for (const auto& t : trace) {
    out.push_back({{"trial", t.trial_index},
                   {"action", to_string(t.action)},
                   {"from", to_string(t.from)},
                   {"to", to_string(t.to)}});
  }
  return out;
}

std::string format_runs(const std::vector<RunReport>& runs) {
  std::string out;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    out += "Run" + std::to_string(r + 1) + "  " + format_success(runs[r].correct, runs[r].total) + "\n";
  }
  return out;
}

}  // namespace vibci
