// vibci: command-line front end for the synthetic visual-imagery pipeline.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vibci/augment.hpp"
#include "vibci/channel_select.hpp"
#include "vibci/cnn.hpp"
#include "vibci/dataset.hpp"
#include "vibci/online_sim.hpp"
#include "vibci/parallel.hpp"
#include "vibci/pipeline.hpp"
#include "vibci/rng.hpp"
#include "vibci/stats.hpp"
#include "vibci/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vibci;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs{1};
  std::vector<std::string> data;
  bool preprocessed{false};
  std::vector<std::string> channels;
  std::string model;
  std::string channel_report;
  std::vector<std::string> inputs;
};

PipelineConfig load(const Options& o) {
  PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

fs::path out_dir(const Options& o) {
  if (o.out.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

std::string subject_label(const std::string& dir) {
  auto p = fs::path(dir).lexically_normal();
  if (!p.has_filename()) p = p.parent_path();
  return p.filename().string();
}

// Epochs (rest and imagery) of a recording directory, preprocessed unless the
// caller says it already is.
EpochedDataset load_epochs(const std::string& dir, const PipelineConfig& c, bool preprocessed) {
  const auto rec = load_recording(dir);
  if (preprocessed) return epoch(rec, c.preprocess.epoch_len_s);
  return preprocess_and_epoch(rec, c.preprocess);
}

void emit(const fs::path& dir, const std::string& stem, const json& j, const std::string& text) {
  write_text(dir / (stem + ".json"), dump_json(j));
  if (!text.empty()) {
    write_text(dir / (stem + ".txt"), text);
    std::cout << text;
  }
}

int cmd_synth(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(o);
  const auto spec = c.synth.subject_spec(c.preprocess.epoch_len_s);
  std::vector<json> rows(c.synth.subjects);
  parallel_for(c.synth.subjects, o.jobs, [&](std::size_t i) {
    const auto rec = generate_subject(spec, subject_seed(c.seed, i));
    save_recording(rec, dir / subject_name(i));
    std::size_t imagery = 0;
    for (const auto& m : rec.markers) imagery += is_imagery(m.label);
    rows[i] = {{"subject", subject_name(i)},
               {"seed", subject_seed(c.seed, i)},
               {"n_samples", rec.n_samples()},
               {"imagery_markers", imagery},
               {"markers", rec.markers.size()}};
  });
  emit(dir, "synth", {{"config", to_json(c)}, {"subjects", rows}}, "");
  std::cout << "wrote " << rows.size() << " subjects to " << dir.string() << "\n";
  return 0;
}

int cmd_preprocess(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(o);
  if (o.data.empty()) throw std::invalid_argument("--data is required");
  json rows = json::array();
  for (const auto& d : o.data) {
    const auto rec = preprocess(load_recording(d), c.preprocess);
    const auto name = subject_label(d);
    save_recording(rec, dir / name);
    rows.push_back({{"subject", name}, {"fs_hz", rec.fs_hz}, {"n_samples", rec.n_samples()}});
  }
  emit(dir, "preprocess", {{"preprocess", to_json(c).at("preprocess")}, {"subjects", rows}}, "");
  return 0;
}

json stat_json(const ChannelStat& s) {
  return {{"channel", s.channel}, {"t", s.t_value}, {"p", s.p_value}, {"significant", s.significant}};
}

int cmd_stats(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(o);
  if (o.data.size() != 1) throw std::invalid_argument("stats takes exactly one --data directory");
  const auto ds = load_epochs(o.data[0], c, o.preprocessed);
  const auto result = class_vs_rest(ds, c.stats_band, c.permutation_options(), o.jobs);
  const auto picked = shortlist(result, ds.montage, c.shortlist_rule);

  json classes = json::array();
  std::string text;
  for (std::size_t k = 0; k < kNumImageryClasses; ++k) {
    json entries = json::array();
    for (const auto& s : result.per_class[k]) entries.push_back(stat_json(s));
    const double alpha = c.bonferroni ? c.alpha / static_cast<double>(ds.montage.size()) : c.alpha;
    const auto sig = significant_channels(result.per_class[k], alpha);
    classes.push_back({{"class", to_string(kImageryLabels[k])}, {"channels", entries}, {"significant", sig}});
    text += std::string(to_string(kImageryLabels[k])) + " vs Rest:";
    for (const auto& s : sig) text += " " + s;
    text += "\n";
  }
  text += "Shortlist:";
  for (const auto& s : picked) text += " " + s;
  text += "\n";
  emit(dir, "stats",
       {{"subject", subject_label(o.data[0])},
        {"band", {c.stats_band.low_hz, c.stats_band.high_hz}},
        {"alpha", c.alpha},
        {"n_perm", c.n_perm},
        {"bonferroni", c.bonferroni},
        {"classes", classes},
        {"shortlist", picked}},
       text);
  return 0;
}

json metrics_json(const Metrics& m) {
  return {{"trial_accuracy", m.trial_accuracy},
          {"window_accuracy", m.window_accuracy},
          {"per_class_accuracy", m.per_class_accuracy},
          {"confusion", m.confusion},
          {"n_trials", m.n_trials},
          {"n_windows", m.n_windows}};
}

int cmd_train(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(o);
  if (o.data.size() != 1) throw std::invalid_argument("train takes exactly one --data directory");
  const auto channels = o.channels.empty() ? c.shortlist : o.channels;
  const auto ds = select_channels(imagery_only(load_epochs(o.data[0], c, o.preprocessed)), channels);
  const auto [train_set, test_set] = split_trials(ds, c.train_fraction, c.seed);
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  const auto result = train(augment_dataset(train_set, c.win_len_s, c.overlap), tc, c.blocks);
  const auto m = evaluate(result.model, augment_dataset(test_set, c.win_len_s, c.overlap));
  save_model(result.model, channels, ds.fs_hz, dir / "model");

  char line[128];
  std::snprintf(line, sizeof(line), "trial accuracy %.3f  window accuracy %.3f  (%zu test trials)\n",
                m.trial_accuracy, m.window_accuracy, m.n_trials);
  emit(dir, "train",
       {{"subject", subject_label(o.data[0])},
        {"channels", channels},
        {"seed", c.seed},
        {"loss_history", result.loss_history},
        {"test", metrics_json(m)}},
       line);
  return 0;
}

// One dataset per --data directory, restricted to imagery epochs.
std::vector<std::pair<std::string, EpochedDataset>> load_subjects(const Options& o, const PipelineConfig& c) {
  if (o.data.empty()) throw std::invalid_argument("--data is required");
  std::vector<std::pair<std::string, EpochedDataset>> out;
  for (const auto& d : o.data) out.emplace_back(subject_label(d), imagery_only(load_epochs(d, c, o.preprocessed)));
  return out;
}

ChannelReport run_channel_scan(const std::vector<std::pair<std::string, EpochedDataset>>& subjects,
                               const std::vector<std::string>& channels, const PipelineConfig& c, std::size_t jobs) {
  std::vector<ChannelReport> parts;
  for (const auto& [name, ds] : subjects) parts.push_back(scan_single_channels(ds, name, channels, c.scan_config(jobs)));
  return merge(parts);
}

int cmd_channel_scan(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(o);
  const auto channels = o.channels.empty() ? c.shortlist : o.channels;
  const auto report = run_channel_scan(load_subjects(o, c), channels, c, o.jobs);
  json j = to_json(report);
  j["ranking"] = rank_channels(report, std::min(c.top_k, channels.size()));
  emit(dir, "channel_scan", j, format_table(report));
  return 0;
}

int cmd_pair_scan(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(o);
  const auto subjects = load_subjects(o, c);
  auto pairs = c.pairs;
  if (pairs.empty()) {
    ChannelReport ranked_from;
    if (!o.channel_report.empty()) {
      std::ifstream in(o.channel_report);
      if (!in) throw std::runtime_error("cannot open " + o.channel_report);
      ranked_from = channel_report_from_json(json::parse(in));
    } else {
      ranked_from = run_channel_scan(subjects, c.shortlist, c, o.jobs);
    }
    pairs = all_pairs(rank_channels(ranked_from, c.top_k));
  }
  std::vector<PairReport> parts;
  for (const auto& [name, ds] : subjects) parts.push_back(scan_pairs(ds, name, pairs, c.scan_config(o.jobs)));
  const auto report = merge(parts);
  emit(dir, "pair_scan", to_json(report), format_table(report));
  return 0;
}

int cmd_online_sim(const Options& o) {
  const auto c = load(o);
  const auto dir = out_dir(o);
  if (o.model.empty()) throw std::invalid_argument("--model is required");
  const auto loaded = load_model(o.model);
  const double fs = c.synth.fs_hz / c.preprocess.decimation;
  if (loaded.fs_hz != fs) throw std::invalid_argument("model sampling rate does not match the preprocessing settings");

  SessionProtocol protocol{c.online_trials_per_class, c.online_runs, c.win_len_s, c.overlap};
  auto synth = c.synth;
  synth.trials_per_class = protocol.trials_per_class;
  synth.channels = loaded.channels;
  const auto spec = synth.subject_spec(c.preprocess.epoch_len_s);
  const CnnDecoder decoder(loaded.model);

  std::vector<RunReport> runs;
  json run_json = json::array();
  for (std::size_t r = 0; r < protocol.runs; ++r) {
    const auto seed = derive_seed(c.seed, "online.session", r);
    SyntheticTrialSource source(spec, c.preprocess, seed);
    auto session = run_online_session(decoder, source, protocol);
    json j = to_json(session.report);
    j["run"] = r + 1;
    j["session_seed"] = seed;
    j["arm_trace"] = to_json(session.trace);
    run_json.push_back(j);
    runs.push_back(std::move(session.report));
  }
  emit(dir, "online", {{"kind", "online"}, {"channels", loaded.channels}, {"runs", run_json}}, format_runs(runs));
  return 0;
}

int cmd_report(const Options& o) {
  if (o.inputs.empty()) throw std::invalid_argument("report needs at least one --input file");
  for (const auto& path : o.inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    const auto j = json::parse(in);
    const auto kind = j.value("kind", std::string());
    if (kind == "channel_scan") {
      std::cout << format_table(channel_report_from_json(j));
    } else if (kind == "pair_scan") {
      std::cout << format_table(pair_report_from_json(j));
    } else if (kind == "online") {
      std::vector<RunReport> runs;
      for (const auto& r : j.at("runs")) {
        RunReport rr;
        rr.correct = r.at("correct").get<std::size_t>();
        rr.total = r.at("total").get<std::size_t>();
        runs.push_back(rr);
      }
      std::cout << format_runs(runs);
    } else {
      throw std::runtime_error(path + ": not a channel_scan, pair_scan or online report");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic visual-imagery BCI pipeline"};
  app.require_subcommand(0, 1);
  Options o;
  bool print_default = false;
  app.add_flag("--print-default-config", print_default, "Print the default configuration as JSON and exit");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed (overrides the config)");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto with_data = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "Recording directory (repeatable)");
    sub->add_flag("--preprocessed", o.preprocessed, "Recordings are already decimated and filtered");
  };

  auto* synth = app.add_subcommand("synth", "Generate synthetic subject recordings");
  common(synth);
  auto* pre = app.add_subcommand("preprocess", "Decimate and band-pass recordings");
  common(pre);
  with_data(pre);
  auto* stats = app.add_subcommand("stats", "Class-vs-rest permutation tests per channel");
  common(stats);
  with_data(stats);
  auto* tr = app.add_subcommand("train", "Train and evaluate one decoder");
  common(tr);
  with_data(tr);
  tr->add_option("--channels", o.channels, "Input channels (default: shortlist)");
  auto* scan = app.add_subcommand("channel-scan", "Single-channel accuracy scan");
  common(scan);
  with_data(scan);
  scan->add_option("--channels", o.channels, "Channels to scan (default: shortlist)");
  auto* pairs = app.add_subcommand("pair-scan", "Channel-pair accuracy scan");
  common(pairs);
  with_data(pairs);
  pairs->add_option("--channel-report", o.channel_report, "channel_scan.json used to pick the top channels");
  auto* online = app.add_subcommand("online-sim", "Simulated online sessions with a trained model");
  common(online);
  online->add_option("--model", o.model, "Model directory written by train");
  auto* report = app.add_subcommand("report", "Print tables from saved JSON reports");
  report->add_option("--input", o.inputs, "Report JSON (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_default) {
      std::cout << dump_json(to_json(PipelineConfig{}));
      return 0;
    }
    if (*synth) return cmd_synth(o);
    if (*pre) return cmd_preprocess(o);
    if (*stats) return cmd_stats(o);
    if (*tr) return cmd_train(o);
    if (*scan) return cmd_channel_scan(o);
    if (*pairs) return cmd_pair_scan(o);
    if (*online) return cmd_online_sim(o);
    if (*report) return cmd_report(o);
    std::cerr << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
