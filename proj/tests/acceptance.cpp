// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 1 3 7      run a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "vibci/augment.hpp"
#include "vibci/channel_select.hpp"
#include "vibci/cnn.hpp"
#include "vibci/dataset.hpp"
#include "vibci/dsp.hpp"
#include "vibci/online_sim.hpp"
#include "vibci/pipeline.hpp"
#include "vibci/rng.hpp"
#include "vibci/stats.hpp"
#include "vibci/synthgen.hpp"

using namespace vibci;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome filter_correctness() {
  std::ostringstream d;
  bool ok = true;
  const auto fir = design_bandpass_fir({0.5, 13.0}, 250.0, 200);
  double asym = 0.0;
  for (std::size_t i = 0; i < fir.taps.size(); ++i) {
    asym = std::max(asym, std::abs(fir.taps[i] - fir.taps[fir.taps.size() - 1 - i]));
  }
  const double h0 = oracle::dft_magnitude(fir.taps, 0.0, 250.0);
  const double hc = oracle::dft_magnitude(fir.taps, 6.75, 250.0);
  ok &= asym <= 1e-12 && h0 <= 0.05 && hc >= 0.95;

  std::vector<double> x(2500);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * 6.75 * i / 250.0);
  const auto y = zero_phase_filter(x, fir);
  const int lag = oracle::xcorr_peak_lag(x, y, 25);
  ok &= lag == 0;
  d << "max asymmetry " << asym << ", |H(0)| " << fmt("%.2e", h0) << ", |H(6.75 Hz)| " << fmt("%.4f", hc)
    << ", xcorr peak lag " << lag;
  return {ok, d.str()};
}

Outcome augmentation_counts() {
  Rng rng(derive_seed(1, "acceptance.windows"));
  std::size_t cases = 0, mismatches = 0;
  for (int t = 0; t < 1500; ++t) {
    const double fs = static_cast<double>(50 + rng.below(451));
    const std::size_t len = 1 + rng.below(300);
    const std::size_t step = 1 + rng.below(len);
    const std::size_t n = len + rng.below(2000);
    Matrix<double> trial(1, n);
    const auto w = sliding_windows(trial, fs, static_cast<double>(len) / fs,
                                   1.0 - static_cast<double>(step) / static_cast<double>(len));
    mismatches += w.size() != (n - len) / step + 1;
    ++cases;
  }
  const auto four = sliding_windows(Matrix<double>(1, 400), 100.0, 2.0, 0.5).size();
  std::ostringstream d;
  d << cases << " random cases, " << mismatches << " mismatches; 4 s trial -> " << four << " windows";
  return {mismatches == 0 && cases >= 1000 && four == 3, d.str()};
}

Outcome gradient_check() {
  Architecture arch{2, 32, {{{5, 3, 2}, {3, 4, 2}, {3, 5, 1}}}};
  auto m = init_model(arch, 7);
  Rng rng(8);
  for (std::size_t b = 0; b < Architecture::kBlocks; ++b) {
    for (auto& v : m.bias(b)) v = rng.uniform(-0.1, 0.3);
  }
  for (auto& v : m.head_bias()) v = rng.uniform(-0.2, 0.2);
  std::vector<double> x(4 * 64);
  for (auto& v : x) v = rng.normal();
  const std::vector<std::size_t> y{0, 3, 1, 2};
  const auto lg = loss_and_grad(m, x, y);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const double orig = m.params()[i];
    m.params()[i] = orig + h;
    const double up = loss_and_grad(m, x, y).loss;
    m.params()[i] = orig - h;
    const double down = loss_and_grad(m, x, y).loss;
    m.params()[i] = orig;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(lg.grad[i] - fd) / std::max({std::abs(lg.grad[i]), std::abs(fd), 1e-6}));
  }
  const double uniform_loss = loss_and_grad(Model(arch), x, y).loss;
  const double loss_err = std::abs(uniform_loss - std::log(4.0));
  std::ostringstream d;
  d << m.params().size() << " parameters, worst relative error " << fmt("%.2e", worst) << ", |loss - ln 4| "
    << fmt("%.1e", loss_err);
  return {worst <= 1e-4 && loss_err <= 1e-9, d.str()};
}

Outcome chance_level() {
  auto spec = SubjectSpec::defaults().restricted_to({"Oz"});
  spec.trials_per_class = 100;
  const auto ds = imagery_only(preprocess_and_epoch(generate_subject(spec, 404), PreprocessSettings{}));
  std::vector<double> accs;
  std::size_t test_trials = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto [train_set, test_set] = split_trials(ds, 0.8, seed);
    // Permute the training labels across trials; the test labels stay true.
    std::vector<ClassLabel> labels;
    for (const auto& t : train_set.trials) labels.push_back(t.label);
    Rng rng(derive_seed(seed, "acceptance.shuffle"));
    rng.shuffle(std::span<ClassLabel>(labels));
    for (std::size_t i = 0; i < labels.size(); ++i) train_set.trials[i].label = labels[i];
    TrainConfig cfg;
    cfg.seed = seed;
    const auto model = train(augment_dataset(train_set, 2.0, 0.5), cfg).model;
    const auto m = evaluate(model, augment_dataset(test_set, 2.0, 0.5));
    accs.push_back(m.trial_accuracy);
    test_trials = m.n_trials;
  }
  const double mean = (accs[0] + accs[1] + accs[2]) / 3.0;
  std::ostringstream d;
  d << "test trial accuracy " << fmt("%.3f", accs[0]) << ", " << fmt("%.3f", accs[1]) << ", "
    << fmt("%.3f", accs[2]) << " (mean " << fmt("%.3f", mean) << ", " << test_trials << " test trials per seed)";
  return {std::abs(mean - 0.25) <= 0.08 && test_trials >= 40, d.str()};
}

Outcome table_reproduction() {
  const PipelineConfig pc;
  auto spec = SubjectSpec::defaults().restricted_to(pc.shortlist);
  const auto ds = imagery_only(preprocess_and_epoch(generate_subject(spec, 505), pc.preprocess));
  auto cfg = pc.scan_config(1);
  cfg.master_seed = 505;
  const auto singles = scan_single_channels(ds, "S1", pc.shortlist, cfg);
  const auto top = rank_channels(singles, 3);
  const auto pairs = scan_pairs(ds, "S1", all_pairs(top), cfg);

  const double oz = singles.cell(0, ds.montage.index_of("Oz")).mean;
  double best_single = 0.0, best_pair = 0.0;
  for (double a : singles.averages()) best_single = std::max(best_single, a);
  std::string best_pair_label;
  for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
    if (pairs.cell(0, p).mean > best_pair) {
      best_pair = pairs.cell(0, p).mean;
      best_pair_label = pair_label(pairs.pairs[p]);
    }
  }
  std::ostringstream d;
  d << "Oz " << fmt("%.3f", oz) << ", top-3 " << top[0] << "/" << top[1] << "/" << top[2] << ", best single "
    << fmt("%.3f", best_single) << ", best pair " << best_pair_label << " " << fmt("%.3f", best_pair) << " (R = "
    << cfg.repetitions << ")";
  std::printf("%s%s", format_table(singles).c_str(), format_table(pairs).c_str());
  return {oz >= 0.85 && best_pair >= best_single - 0.02, d.str()};
}

// Per-epoch band powers of coloured Gaussian noise (AR(1), fs 100 Hz, 4 s).
std::vector<double> noise_powers(Rng& rng, std::size_t epochs, double gain) {
  std::vector<double> out;
  std::vector<double> x(400);
  for (std::size_t e = 0; e < epochs; ++e) {
    double prev = rng.normal() / std::sqrt(1.0 - 0.81);
    for (auto& v : x) v = prev = 0.9 * prev + rng.normal();
    for (auto& v : x) v *= gain;
    out.push_back(band_power(x, 100.0, {0.5, 13.0}));
  }
  return out;
}

Outcome permutation_calibration() {
  const auto& names = Montage::standard64().names();
  const std::size_t oz = Montage::standard64().index_of("Oz");
  std::size_t false_pos = 0, tests = 0, detected = 0;
  const std::size_t runs = 20;
  for (std::size_t run = 0; run < runs; ++run) {
    for (int planted = 0; planted < 2; ++planted) {
      Rng rng(derive_seed(606 + planted, "acceptance.perm", run));
      std::vector<std::vector<double>> imagery, rest;
      for (std::size_t c = 0; c < names.size(); ++c) {
        const double gain = planted && c == oz ? std::sqrt(3.0) : 1.0;  // 3x power
        imagery.push_back(noise_powers(rng, 50, gain));
        rest.push_back(noise_powers(rng, 50, 1.0));
      }
      PermutationOptions opt;
      opt.seed = derive_seed(606, "acceptance.perm.test", 2 * run + planted);
      const auto s = permutation_test(names, imagery, rest, opt);
      if (planted) {
        detected += s[oz].p_value <= 0.01;
      } else {
        for (const auto& st : s) false_pos += st.p_value <= 0.01;
        tests += s.size();
      }
    }
  }
  const double fpr = static_cast<double>(false_pos) / static_cast<double>(tests);
  const double power = static_cast<double>(detected) / static_cast<double>(runs);
  std::ostringstream d;
  d << "null FPR " << fmt("%.4f", fpr) << " over " << runs << " x 64 channels, planted Oz detected in "
    << detected << "/" << runs << " runs";
  return {fpr <= 0.03 && power >= 0.95, d.str()};
}

class OracleDecoder : public Decoder {
 public:
  std::size_t channel_count() const override { return 2; }
  Matrix<double> window_probabilities(const std::vector<Window>& windows) const override {
    Matrix<double> p(windows.size(), 4, 0.0);
    for (std::size_t i = 0; i < windows.size(); ++i) p(i, class_index(windows[i].label)) = 1.0;
    return p;
  }
};

Outcome online_protocol() {
  const PipelineConfig pc;
  const std::vector<std::string> pair{"AF3", "Oz"};
  auto spec = SubjectSpec::defaults().restricted_to(pair);
  const auto ds = imagery_only(preprocess_and_epoch(generate_subject(spec, 707), pc.preprocess));
  const auto [train_set, test_set] = split_trials(ds, pc.train_fraction, 707);
  TrainConfig tc = pc.train;
  tc.seed = 707;
  const auto model = train(augment_dataset(train_set, pc.win_len_s, pc.overlap), tc, pc.blocks).model;
  const auto offline = evaluate(model, augment_dataset(test_set, pc.win_len_s, pc.overlap));
  const int k = static_cast<int>(std::lround(offline.trial_accuracy * static_cast<double>(offline.n_trials)));
  const auto [lo, hi] = oracle::clopper_pearson(k, static_cast<int>(offline.n_trials));

  SessionProtocol protocol;
  auto session_spec = spec;
  session_spec.trials_per_class = protocol.trials_per_class;
  const CnnDecoder decoder(model);
  std::size_t inside = 0;
  bool exact = true;
  std::vector<std::size_t> corrects;
  for (std::size_t s = 0; s < 20; ++s) {
    SyntheticTrialSource src(session_spec, pc.preprocess, derive_seed(707, "online.session", s));
    const auto r = run_online_session(decoder, src, protocol).report;
    exact &= r.total == 40 && r.success_rate == static_cast<double>(r.correct) / 40.0;
    inside += r.success_rate >= lo - 1e-12 && r.success_rate <= hi + 1e-12;
    corrects.push_back(r.correct);
  }

  SyntheticTrialSource src(session_spec, pc.preprocess, 1);
  const auto perfect = run_online_session(OracleDecoder(), src, protocol);
  const bool perfect_ok = perfect.report.success_rate == 1.0 && perfect.trace.size() == 80;
  const bool format_ok = format_success(29, 40) == "0.73 (29/40)" && format_success(31, 40) == "0.78 (31/40)" &&
                         format_success(22, 40) == "0.55 (22/40)";

  std::ostringstream d;
  d << "offline " << k << "/" << offline.n_trials << " (95% interval " << fmt("%.3f", lo) << "-" << fmt("%.3f", hi)
    << "), sessions inside " << inside << "/20 [";
  for (std::size_t i = 0; i < corrects.size(); ++i) d << (i ? " " : "") << corrects[i];
  d << "], perfect decoder " << format_success(perfect.report.correct, perfect.report.total);
  return {exact && inside >= 18 && perfect_ok && format_ok, d.str()};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(VIBCI_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_determinism() {
  testutil::TempDir tmp("accept_cli");
  write_text(tmp / "cfg.json", R"({
    "synth": {"subjects": 2, "trials_per_class": 8, "channels": ["Fp1", "AF3", "AFz", "Cz", "Oz", "O1"]},
    "train": {"epochs": 6},
    "scan": {"repetitions": 2, "shortlist": ["AF3", "AFz", "Oz", "O1"]},
    "stats": {"n_perm": 300},
    "online": {"trials_per_class": 5}
  })");
  const std::string cfg = " --config " + (tmp / "cfg.json").string() + " --seed 11";
  auto data = [&](const char* s) { return " --data " + (tmp / "base" / s).string(); };

  // Reference artifacts used as inputs by the downstream commands.
  if (run_cli("synth" + cfg + " --out " + (tmp / "base").string(), tmp / "log") != 0 ||
      run_cli("train" + cfg + data("S1") + " --channels AF3 --channels Oz --out " + (tmp / "model").string(),
              tmp / "log") != 0 ||
      run_cli("channel-scan" + cfg + data("S1") + " --out " + (tmp / "scan").string(), tmp / "log") != 0) {
    return {false, "setup commands failed: " + testutil::read_file(tmp / "log")};
  }

  struct Cmd {
    std::string name, args;
    std::vector<std::string> files;  // compared outputs; empty means stdout
  };
  const std::vector<Cmd> cmds = {
      {"synth", "synth" + cfg, {"synth.json", "S1/meta.json", "S1/samples.f32le", "S2/samples.f32le"}},
      {"preprocess", "preprocess" + cfg + data("S1") + data("S2"), {"preprocess.json", "S1/samples.f32le"}},
      {"stats", "stats" + cfg + data("S1"), {"stats.json"}},
      {"train", "train" + cfg + data("S1") + " --channels AF3 --channels Oz",
       {"train.json", "model/model.json", "model/params.f64le"}},
      {"channel-scan", "channel-scan" + cfg + data("S1") + data("S2"), {"channel_scan.json"}},
      {"pair-scan", "pair-scan" + cfg + data("S1"), {"pair_scan.json"}},
      {"online-sim", "online-sim" + cfg + " --model " + (tmp / "model" / "model").string(), {"online.json"}},
      {"report",
       "report --input " + (tmp / "scan" / "channel_scan.json").string(),
       {}},
  };

  std::ostringstream d;
  bool ok = true;
  for (const auto& c : cmds) {
    std::vector<std::vector<std::string>> outputs;
    int i = 0;
    for (const char* jobs : {"1", "1", "4"}) {
      const auto out = tmp / (c.name + "_" + std::to_string(i++));
      const bool takes_jobs = c.name != "report";
      const std::string args =
          c.args + (takes_jobs ? " --jobs " + std::string(jobs) + " --out " + out.string() : std::string());
      const auto log = tmp / (c.name + "_" + std::to_string(i) + ".log");
      if (run_cli(args, log) != 0) {
        ok = false;
        d << c.name << " failed; ";
        break;
      }
      std::vector<std::string> files;
      if (c.files.empty()) {
        files.push_back(testutil::read_file(log));
      } else {
        for (const auto& f : c.files) files.push_back(testutil::read_file(out / f));
      }
      outputs.push_back(std::move(files));
    }
    if (outputs.size() == 3) {
      const bool same = outputs[0] == outputs[1] && outputs[0] == outputs[2] && !outputs[0].front().empty();
      ok &= same;
      d << c.name << (same ? " ok" : " DIFFERS") << "; ";
    }
  }
  return {ok, d.str() + "runs: jobs 1, jobs 1, jobs 4"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Filter correctness", filter_correctness},
      {"Augmentation counts", augmentation_counts},
      {"Gradient check", gradient_check},
      {"Chance-level sanity", chance_level},
      {"Single-channel and pair scan on synthetic data", table_reproduction},
      {"Permutation-test calibration", permutation_calibration},
      {"Online protocol", online_protocol},
      {"CLI determinism", cli_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[1024];
    std::snprintf(line, sizeof(line), "%s  criterion %d  %s: %s [%.1f s]", o.pass ? "PASS" : "FAIL", id,
                  criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::printf("%s\n", line);
    std::fflush(stdout);
    lines.push_back(line);
    failed += !o.pass;
  }
  std::printf("\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  std::printf("%d of %zu criteria failed\n", failed, lines.size());
  return failed == 0 ? 0 : 1;
}
