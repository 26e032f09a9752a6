#include "doctest.h"

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "oracles.hpp"
#include "vibci/augment.hpp"
#include "vibci/cnn.hpp"
#include "vibci/dataset.hpp"
#include "vibci/pipeline.hpp"
#include "vibci/rng.hpp"
#include "vibci/synthgen.hpp"

using namespace vibci;

namespace {

Architecture tiny_arch() {
  Architecture a;
  a.input_channels = 2;
  a.input_samples = 32;
  a.blocks = {{{5, 3, 2}, {3, 4, 2}, {3, 5, 1}}};
  return a;
}

std::vector<double> random_batch(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

Model random_model(const Architecture& arch, std::uint64_t seed) {
  auto m = init_model(arch, seed);
  Rng rng(seed + 100);
  // Non-zero biases so that every parameter has a gradient path.
  for (std::size_t b = 0; b < Architecture::kBlocks; ++b) {
    for (auto& v : m.bias(b)) v = rng.uniform(-0.1, 0.3);
  }
  for (auto& v : m.head_bias()) v = rng.uniform(-0.2, 0.2);
  return m;
}

}  // namespace

TEST_CASE("architecture sizes") {
  Architecture a{1, 200, Architecture::default_blocks()};
  CHECK_NOTHROW(a.validate());
  CHECK(a.conv_length(0) == 176);
  CHECK(a.pooled_length(0) == 44);
  CHECK(a.pooled_length(1) == 8);
  CHECK(a.pooled_length(2) == 1);
  CHECK(a.parameter_count() == (8 * 25 + 8) + (16 * 8 * 11 + 16) + (32 * 16 * 7 + 32) + 4 * 32 + 4);
  a.input_samples = 50;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a = tiny_arch();
  a.blocks[1].kernel_len = 4;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
}

TEST_CASE("init is seeded, bounded by fan-in and has zero biases") {
  const auto arch = tiny_arch();
  const auto a = init_model(arch, 1), b = init_model(arch, 1), c = init_model(arch, 2);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (std::size_t blk = 0; blk < Architecture::kBlocks; ++blk) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch.in_features(blk) * arch.blocks[blk].kernel_len));
    for (double w : a.kernel(blk)) CHECK(std::abs(w) <= bound);
    for (double v : a.bias(blk)) CHECK(v == 0.0);
  }
  for (double w : a.head_weight()) CHECK(std::abs(w) <= 1.0 / std::sqrt(5.0));
  for (double v : a.head_bias()) CHECK(v == 0.0);
}

TEST_CASE("forward agrees with the naive oracle") {
  for (const auto& arch : {tiny_arch(), Architecture{2, 200, Architecture::default_blocks()}}) {
    const auto m = random_model(arch, 3);
    const std::size_t per = arch.input_channels * arch.input_samples;
    const auto x = random_batch(5 * per, 4);
    const auto p = forward(m, x, 5);
    REQUIRE(p.rows() == 5);
    REQUIRE(p.cols() == 4);
    for (std::size_t r = 0; r < 5; ++r) {
      const auto ref = oracle::naive_forward(m, std::span<const double>(x).subspan(r * per, per));
      double sum = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(p(r, k) == doctest::Approx(ref[k]).epsilon(1e-10));
        sum += p(r, k);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("zero input gives uniform output; duplicated rows give duplicated outputs") {
  const auto arch = tiny_arch();
  const auto m = init_model(arch, 9);
  const std::vector<double> zeros(3 * 64, 0.0);
  const auto p = forward(m, zeros, 3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t k = 0; k < 4; ++k) CHECK(p(r, k) == doctest::Approx(0.25).epsilon(1e-12));
  }
  auto x = random_batch(64, 1);
  x.insert(x.end(), x.begin(), x.end());
  const auto q = forward(m, x, 2);
  for (std::size_t k = 0; k < 4; ++k) CHECK(q(0, k) == q(1, k));
  CHECK_THROWS_AS(forward(m, x, 3), std::invalid_argument);
}

TEST_CASE("loss at uniform output is ln 4") {
  const auto arch = tiny_arch();
  Model m(arch);  // all parameters zero
  const auto x = random_batch(4 * 64, 2);
  const std::vector<std::size_t> y{0, 1, 2, 3};
  const auto lg = loss_and_grad(m, x, y);
  CHECK(std::abs(lg.loss - std::log(4.0)) <= 1e-9);
}

TEST_CASE("analytic gradient matches central differences") {
  const auto arch = tiny_arch();
  auto m = random_model(arch, 11);
  const auto x = random_batch(3 * 64, 12);
  const std::vector<std::size_t> y{2, 0, 3};
  const auto lg = loss_and_grad(m, x, y);
  CHECK(lg.loss >= 0.0);
  REQUIRE(lg.grad.size() == m.params().size());
  const double h = 1e-5;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const double orig = m.params()[i];
    m.params()[i] = orig + h;
    const double up = loss_and_grad(m, x, y).loss;
    m.params()[i] = orig - h;
    const double down = loss_and_grad(m, x, y).loss;
    m.params()[i] = orig;
    const double fd = (up - down) / (2 * h);
    const double a = lg.grad[i];
    // Relative error; tiny entries fall back to an absolute 1e-10.
    const double scale = std::max({std::abs(a), std::abs(fd), 1e-6});
    CAPTURE(i);
    CHECK(std::abs(a - fd) <= 1e-4 * scale);
    ++checked;
  }
  CHECK(checked == arch.parameter_count());
}

TEST_CASE("loss is never negative") {
  const auto arch = tiny_arch();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto m = random_model(arch, s);
    const auto x = random_batch(2 * 64, s + 50);
    const std::vector<std::size_t> y{s % 4, (s + 1) % 4};
    CHECK(loss_and_grad(m, x, y).loss >= 0.0);
  }
}

TEST_CASE("Adam first step and zero gradient") {
  const auto arch = tiny_arch();
  TrainConfig cfg;
  auto m = random_model(arch, 5);
  const auto before = m;
  auto state = AdamState::zeros(m.params().size());
  adam_step(m, std::vector<double>(m.params().size(), 0.0), state, cfg);
  CHECK(m == before);

  m = before;
  state = AdamState::zeros(m.params().size());
  const auto g = random_batch(m.params().size(), 6);
  adam_step(m, g, state, cfg);
  for (std::size_t i = 0; i < g.size(); ++i) {
    // Bias correction cancels the moment scales: step = -lr g / (|g| + eps).
    const double expect = before.params()[i] - cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.eps);
    REQUIRE(std::abs(m.params()[i] - expect) <= 1e-9);
    REQUIRE(std::abs(std::abs(m.params()[i] - before.params()[i]) - cfg.learning_rate) <= 1e-9);
  }

  auto m2 = before;
  auto s2 = AdamState::zeros(m2.params().size());
  adam_step(m2, g, s2, cfg);
  CHECK(m2 == m);
  CHECK(s2.m == state.m);
  CHECK(s2.v == state.v);
}

TEST_CASE("standardize_window") {
  Matrix<double> w(2, 4, std::vector<double>{1, 2, 3, 4, 5, 5, 5, 5});
  std::vector<double> out(8);
  standardize_window(w, out);
  const double sd = std::sqrt(1.25);
  CHECK(out[0] == doctest::Approx(-1.5 / sd));
  CHECK(out[3] == doctest::Approx(1.5 / sd));
  for (int i = 4; i < 8; ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("vote and score") {
  // Windows voting (A, A, B) classify the trial as A.
  Matrix<double> p(3, 4, 0.0);
  p(0, 0) = 0.6;
  p(1, 0) = 0.5;
  p(2, 1) = 0.9;
  for (std::size_t r = 0; r < 3; ++r) {
    double rest = 1.0;
    for (std::size_t k = 0; k < 4; ++k) rest -= p(r, k);
    p(r, 3) += rest;
  }
  const std::vector<std::size_t> dec{0, 0, 1}, rows{0, 1, 2};
  CHECK(vote(dec, p, rows) == 0);

  // Tie between two classes goes to the higher mean probability.
  Matrix<double> q(2, 4, std::vector<double>{0.4, 0.3, 0.2, 0.1, 0.1, 0.8, 0.05, 0.05});
  const std::vector<std::size_t> dec2{0, 1}, rows2{0, 1};
  CHECK(vote(dec2, q, rows2) == 1);

  // Perfect predictor.
  std::vector<Window> windows;
  Matrix<double> probs(12, 4, 0.0);
  for (std::size_t i = 0; i < 12; ++i) {
    windows.push_back({Matrix<double>(1, 1), kImageryLabels[(i / 3) % 4], i / 3});
    probs(i, (i / 3) % 4) = 1.0;
  }
  const auto m = score(probs, windows);
  CHECK(m.window_accuracy == 1.0);
  CHECK(m.trial_accuracy == 1.0);
  CHECK(m.n_trials == 4);
  std::size_t total = 0;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      total += m.confusion[a][b];
      if (a != b) CHECK(m.confusion[a][b] == 0);
    }
  }
  CHECK(total == 12);
}

TEST_CASE("metrics are invariant to the order of test windows") {
  Rng rng(3);
  std::vector<Window> windows;
  Matrix<double> probs(30, 4);
  for (std::size_t i = 0; i < 30; ++i) {
    windows.push_back({Matrix<double>(1, 1), kImageryLabels[(i / 3) % 4], i / 3});
    double z = 0;
    for (std::size_t k = 0; k < 4; ++k) z += (probs(i, k) = rng.uniform());
    for (std::size_t k = 0; k < 4; ++k) probs(i, k) /= z;
  }
  const auto base = score(probs, windows);
  std::vector<std::size_t> perm(30);
  for (std::size_t i = 0; i < 30; ++i) perm[i] = i;
  for (int t = 0; t < 10; ++t) {
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<Window> w2;
    Matrix<double> p2(30, 4);
    for (std::size_t i = 0; i < 30; ++i) {
      w2.push_back(windows[perm[i]]);
      for (std::size_t k = 0; k < 4; ++k) p2(i, k) = probs(perm[i], k);
    }
    const auto m = score(p2, w2);
    CHECK(m.window_accuracy == base.window_accuracy);
    CHECK(m.trial_accuracy == base.trial_accuracy);
    CHECK(m.confusion == base.confusion);
  }
}

TEST_CASE("training is deterministic and learns a separable problem") {
  // Oz at snr 2, preprocessed as in the pipeline.
  auto spec = SubjectSpec::defaults().restricted_to({"Oz"});
  spec.trials_per_class = 12;
  const auto ds = imagery_only(preprocess_and_epoch(generate_subject(spec, 21), PreprocessSettings{}));
  const auto windows = augment_dataset(ds, 2.0, 0.5);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 1e-3;
  cfg.seed = 4;
  const auto a = train(windows, cfg);
  const auto b = train(windows, cfg);
  CHECK(a.model == b.model);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.loss_history.size() == 60);
  CHECK(a.loss_history.back() < a.loss_history.front());
  CHECK(evaluate(a.model, windows).window_accuracy >= 0.9);

  cfg.seed = 5;
  CHECK_FALSE(train(windows, cfg).model == a.model);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("model save/load round trip") {
  testutil::TempDir tmp("model");
  const auto m = random_model(tiny_arch(), 8);
  save_model(m, {"AF3", "Oz"}, 100.0, tmp.path());
  const auto back = load_model(tmp.path());
  CHECK(back.model == m);
  CHECK(back.channels == std::vector<std::string>{"AF3", "Oz"});
  CHECK(back.fs_hz == 100.0);
  std::filesystem::resize_file(tmp / "params.f64le", 16);
  CHECK_THROWS_AS(load_model(tmp.path()), std::runtime_error);
}
