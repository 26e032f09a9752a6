#include "doctest.h"

#include <algorithm>
#include <map>
#include <regex>

#include "vibci/online_sim.hpp"
#include "vibci/rng.hpp"
#include "vibci/synthgen.hpp"

using namespace vibci;

namespace {

// Always right: one-hot on each window's own label.
class OracleDecoder : public Decoder {
 public:
  explicit OracleDecoder(std::size_t channels) : channels_(channels) {}
  std::size_t channel_count() const override { return channels_; }
  Matrix<double> window_probabilities(const std::vector<Window>& windows) const override {
    Matrix<double> p(windows.size(), 4, 0.0);
    for (std::size_t i = 0; i < windows.size(); ++i) p(i, class_index(windows[i].label)) = 1.0;
    return p;
  }

 private:
  std::size_t channels_;
};

// Deterministic function of the window samples only.
class SignDecoder : public Decoder {
 public:
  std::size_t channel_count() const override { return 1; }
  Matrix<double> window_probabilities(const std::vector<Window>& windows) const override {
    Matrix<double> p(windows.size(), 4, 0.0);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      double s = 0;
      for (double v : windows[i].data.flat()) s += v;
      p(i, static_cast<std::size_t>(std::abs(static_cast<long long>(s * 1000.0))) % 4) = 1.0;
    }
    return p;
  }
};

std::vector<Trial> random_trials(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Trial> out;
  for (std::size_t i = 0; i < per_class * 4; ++i) {
    Trial t{Matrix<double>(1, 400), kImageryLabels[i % 4], i};
    for (auto& v : t.data.flat()) v = rng.normal();
    out.push_back(std::move(t));
  }
  return out;
}

// Half-up rounding to hundredths checked with integer arithmetic only.
bool rounds_half_up(std::size_t c, std::size_t t, std::size_t h) {
  const long long diff = 2 * (100 * static_cast<long long>(c) - static_cast<long long>(h * t));
  const long long tt = static_cast<long long>(t);
  if (diff > tt || diff < -tt) return false;  // more than half a hundredth away
  if (diff == tt) return false;               // exact half must round up
  return true;
}

}  // namespace

TEST_CASE("success rate examples") {
  CHECK(success_rate(29, 40) == 29.0 / 40.0);
  CHECK(success_rate(31, 40) == 0.775);
  CHECK(success_rate(22, 40) == 0.55);
  CHECK(success_rate(0, 40) == 0.0);
  CHECK(format_success(29, 40) == "0.73 (29/40)");
  CHECK(format_success(31, 40) == "0.78 (31/40)");
  CHECK(format_success(22, 40) == "0.55 (22/40)");
  CHECK(format_success(23, 40) == "0.58 (23/40)");
  CHECK(format_success(0, 40) == "0.00 (0/40)");
  CHECK(format_success(40, 40) == "1.00 (40/40)");
  CHECK_THROWS_AS(success_rate(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(success_rate(41, 40), std::invalid_argument);
  CHECK_THROWS_AS(format_success(1, 0), std::invalid_argument);
}

TEST_CASE("display rounding sweep") {
  const std::regex shape(R"((\d)\.(\d\d) \((\d+)/(\d+)\))");
  for (std::size_t t = 1; t <= 120; ++t) {
    for (std::size_t c = 0; c <= t; ++c) {
      const auto s = format_success(c, t);
      std::smatch m;
      REQUIRE(std::regex_match(s, m, shape));
      const std::size_t h = std::stoul(m[1].str()) * 100 + std::stoul(m[2].str());
      REQUIRE(rounds_half_up(c, t, h));
      REQUIRE(std::stoul(m[3].str()) == c);
      REQUIRE(std::stoul(m[4].str()) == t);
    }
  }
}

TEST_CASE("arm state machine") {
  RoboticArm arm;
  arm.execute(0, ClassLabel::PourWater);
  CHECK(arm.trace().size() == 2);
  CHECK(arm.state() == ArmState::Idle);
  arm.execute(1, ClassLabel::OpenDoor);
  REQUIRE(arm.trace().size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(arm.trace()[i].from == (i % 2 == 0 ? ArmState::Idle : ArmState::Executing));
    CHECK(arm.trace()[i].to == (i % 2 == 0 ? ArmState::Executing : ArmState::Idle));
  }
  CHECK(arm.trace()[3].action == ClassLabel::OpenDoor);
  CHECK(arm.trace()[3].trial_index == 1);

  arm.begin(2, ClassLabel::EatFood);
  CHECK(arm.state() == ArmState::Executing);
  CHECK_THROWS_AS(arm.execute(3, ClassLabel::PourWater), std::logic_error);
  CHECK_THROWS_AS(arm.begin(3, ClassLabel::PourWater), std::logic_error);
  arm.finish();
  CHECK_THROWS_AS(arm.finish(), std::logic_error);
  CHECK_THROWS_AS(arm.execute(4, ClassLabel::Rest), std::logic_error);
}

TEST_CASE("perfect decoder: rate 1.0, 40 actions, arm ends idle") {
  VectorTrialSource src(random_trials(10, 1), 1, 100.0);
  const auto res = run_online_session(OracleDecoder(1), src, SessionProtocol{});
  CHECK(res.report.total == 40);
  CHECK(res.report.correct == 40);
  CHECK(res.report.success_rate == 1.0);
  CHECK(res.trace.size() == 80);
  CHECK(res.trace.back().to == ArmState::Idle);
  for (const auto& t : res.report.trials) CHECK(t.window_decisions.size() == 3);
}

TEST_CASE("report and trace invariants") {
  VectorTrialSource src(random_trials(10, 2), 1, 100.0);
  const auto res = run_online_session(SignDecoder(), src, SessionProtocol{});
  std::size_t correct = 0;
  for (const auto& t : res.report.trials) correct += t.true_label == t.decoded_label;
  CHECK(res.report.correct == correct);
  CHECK(res.report.success_rate == static_cast<double>(correct) / 40.0);
  REQUIRE(res.trace.size() == 2 * res.report.trials.size());
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    CHECK_FALSE((res.trace[i].to == ArmState::Executing && res.trace[i - 1].to == ArmState::Executing));
  }
  for (std::size_t i = 0; i < res.report.trials.size(); ++i) {
    CHECK(res.trace[2 * i].action == res.report.trials[i].decoded_label);
    CHECK(res.trace[2 * i].trial_index == i);
  }
  const auto j = to_json(res.report);
  CHECK(j["total"] == 40);
  CHECK(j["display"].get<std::string>() == format_success(res.report.correct, 40));
}

TEST_CASE("shuffling trial order keeps the multiset of outcomes") {
  const auto trials = random_trials(10, 3);
  auto shuffled = trials;
  Rng rng(4);
  rng.shuffle(std::span<Trial>(shuffled));
  VectorTrialSource a(trials, 1, 100.0), b(shuffled, 1, 100.0);
  const auto ra = run_online_session(SignDecoder(), a, SessionProtocol{});
  const auto rb = run_online_session(SignDecoder(), b, SessionProtocol{});
  std::map<std::pair<int, int>, int> ma, mb;
  for (const auto& t : ra.report.trials) ++ma[{int(t.true_label), int(t.decoded_label)}];
  for (const auto& t : rb.report.trials) ++mb[{int(t.true_label), int(t.decoded_label)}];
  CHECK(ma == mb);
  CHECK(ra.report.correct == rb.report.correct);
}

TEST_CASE("session errors") {
  auto trials = random_trials(10, 5);
  trials.pop_back();
  VectorTrialSource short_src(trials, 1, 100.0);
  CHECK_THROWS_AS(run_online_session(OracleDecoder(1), short_src, SessionProtocol{}), std::runtime_error);
  VectorTrialSource src(random_trials(10, 5), 1, 100.0);
  CHECK_THROWS_AS(run_online_session(OracleDecoder(2), src, SessionProtocol{}), std::invalid_argument);
  SessionProtocol bad;
  bad.trials_per_class = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("synthetic source yields a balanced, seeded order") {
  auto spec = SubjectSpec::defaults().restricted_to({"AF3", "Oz"});
  spec.trials_per_class = 10;
  SyntheticTrialSource a(spec, PreprocessSettings{}, 1), b(spec, PreprocessSettings{}, 2);
  CHECK(a.channel_count() == 2);
  CHECK(a.fs_hz() == 100.0);
  std::array<int, 4> counts{};
  std::vector<ClassLabel> la, lb;
  while (auto t = a.next()) {
    ++counts[class_index(t->label)];
    la.push_back(t->label);
    CHECK(t->data.cols() == 400);
  }
  while (auto t = b.next()) lb.push_back(t->label);
  CHECK(counts == std::array<int, 4>{10, 10, 10, 10});
  CHECK(la.size() == lb.size());
  CHECK(la != lb);
}

TEST_CASE("run table format") {
  std::vector<RunReport> runs(3);
  runs[0].correct = 29;
  runs[1].correct = 31;
  runs[2].correct = 22;
  for (auto& r : runs) r.total = 40;
  CHECK(format_runs(runs) == "Run1  0.73 (29/40)\nRun2  0.78 (31/40)\nRun3  0.55 (22/40)\n");
}
