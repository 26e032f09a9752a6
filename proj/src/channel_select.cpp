#include "vibci/channel_select.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "vibci/augment.hpp"
#include "vibci/dataset.hpp"
#include "vibci/parallel.hpp"

namespace vibci {

using nlohmann::json;

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // Column widths count code points so "±" does not skew alignment.
  std::size_t glyphs = 0;
  for (unsigned char c : s) glyphs += (c & 0xc0) != 0x80;
  return glyphs >= width ? s : std::string(width - glyphs, ' ') + s;
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::size_t glyphs = 0;
      for (unsigned char c : r[i]) glyphs += (c & 0xc0) != 0x80;
      width[i] = std::max(width[i], glyphs);
    }
  }
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += "  ";
      out += pad(r[i], width[i]);
    }
    out += '\n';
  }
  return out;
}

json cell_json(const ScanCell& c) {
  return {{"label", c.label},
          {"mean", c.mean},
          {"std", c.std},
          {"window_mean", c.window_mean},
          {"trial_accuracies", c.trial_accuracies},
          {"window_accuracies", c.window_accuracies}};
}

ScanCell cell_from_json(const std::string& subject, const json& j) {
  ScanCell c;
  c.subject = subject;
  c.label = j.at("label").get<std::string>();
  c.mean = j.at("mean").get<double>();
  c.std = j.at("std").get<double>();
  c.window_mean = j.at("window_mean").get<double>();
  c.trial_accuracies = j.at("trial_accuracies").get<std::vector<double>>();
  c.window_accuracies = j.at("window_accuracies").get<std::vector<double>>();
  return c;
}

// Runs every (column, repetition) cell of one subject on the worker pool.
std::vector<ScanCell> scan_columns(const EpochedDataset& dataset, const std::string& subject,
                                   const std::vector<std::vector<std::string>>& columns,
                                   const std::vector<std::string>& labels, const ScanConfig& config) {
  config.validate();
  const auto imagery = imagery_only(dataset);
  const std::size_t reps = config.repetitions;
  std::vector<CellResult> results(columns.size() * reps);
  parallel_for(results.size(), config.jobs, [&](std::size_t i) {
    results[i] = run_cell(imagery, columns[i / reps], i % reps, config);
  });
  std::vector<ScanCell> cells;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::vector<CellResult> rep(results.begin() + static_cast<std::ptrdiff_t>(c * reps),
                                results.begin() + static_cast<std::ptrdiff_t>((c + 1) * reps));
    cells.push_back(summarize(subject, labels[c], std::move(rep)));
  }
  return cells;
}

}  // namespace

void ScanConfig::validate() const {
  train.validate();
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must lie in (0, 1)");
  if (!(win_len_s > 0.0) || !(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("invalid window settings");
}

CellResult run_cell(const EpochedDataset& dataset, const std::vector<std::string>& channels, std::size_t repetition,
                    const ScanConfig& config) {
  const std::uint64_t seed = config.master_seed + repetition;
  const auto subset = select_channels(imagery_only(dataset), channels);
  const auto [train_trials, test_trials] = split_trials(subset, config.train_fraction, seed);
  const auto train_windows = augment_dataset(train_trials, config.win_len_s, config.overlap);
  const auto test_windows = augment_dataset(test_trials, config.win_len_s, config.overlap);
  TrainConfig tc = config.train;
  tc.seed = seed;
  const auto trained = train(train_windows, tc, config.blocks);
  const auto m = evaluate(trained.model, test_windows);
  return {m.trial_accuracy, m.window_accuracy};
}

ScanCell summarize(std::string subject, std::string label, std::vector<CellResult> reps) {
  ScanCell c;
  c.subject = std::move(subject);
  c.label = std::move(label);
  for (const auto& r : reps) {
    c.trial_accuracies.push_back(r.trial_accuracy);
    c.window_accuracies.push_back(r.window_accuracy);
  }
  const double n = static_cast<double>(reps.size());
  c.mean = std::accumulate(c.trial_accuracies.begin(), c.trial_accuracies.end(), 0.0) / n;
  c.window_mean = std::accumulate(c.window_accuracies.begin(), c.window_accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : c.trial_accuracies) ss += (a - c.mean) * (a - c.mean);
  c.std = std::sqrt(ss / n);
  return c;
}

std::vector<double> ChannelReport::averages() const {
  std::vector<double> out(channels.size(), 0.0);
  if (subjects.empty()) return out;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    for (std::size_t s = 0; s < subjects.size(); ++s) out[c] += cell(s, c).mean;
    out[c] /= static_cast<double>(subjects.size());
  }
  return out;
}

std::vector<double> ChannelReport::average_stds() const {
  std::vector<double> out(channels.size(), 0.0);
  if (subjects.empty()) return out;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    for (std::size_t s = 0; s < subjects.size(); ++s) out[c] += cell(s, c).std;
    out[c] /= static_cast<double>(subjects.size());
  }
  return out;
}

std::vector<double> PairReport::subject_averages() const {
  std::vector<double> out(subjects.size(), 0.0);
  if (pairs.empty()) return out;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    for (std::size_t p = 0; p < pairs.size(); ++p) out[s] += cell(s, p).mean;
    out[s] /= static_cast<double>(pairs.size());
  }
  return out;
}

std::string pair_label(const std::pair<std::string, std::string>& pair) { return pair.first + "-" + pair.second; }

ChannelReport scan_single_channels(const EpochedDataset& dataset, const std::string& subject,
                                   const std::vector<std::string>& channels, const ScanConfig& config) {
  ChannelReport report;
  report.channels = channels;
  report.subjects = {subject};
  std::vector<std::vector<std::string>> columns;
  for (const auto& c : channels) {
    report.montage_index.push_back(dataset.montage.index_of(c));
    columns.push_back({c});
  }
  report.cells = scan_columns(dataset, subject, columns, channels, config);
  return report;
}

std::vector<std::string> rank_channels(const ChannelReport& report, std::size_t k) {
  if (k > report.channels.size()) throw std::invalid_argument("rank_channels: k exceeds channel count");
  const auto avg = report.averages();
  const auto sd = report.average_stds();
  std::vector<std::size_t> idx(report.channels.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (avg[a] != avg[b]) return avg[a] > avg[b];
    if (sd[a] != sd[b]) return sd[a] < sd[b];
    return report.montage_index[a] < report.montage_index[b];
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(report.channels[idx[i]]);
  return out;
}

std::vector<std::pair<std::string, std::string>> all_pairs(const std::vector<std::string>& channels) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    for (std::size_t j = i + 1; j < channels.size(); ++j) out.emplace_back(channels[i], channels[j]);
  }
  return out;
}

PairReport scan_pairs(const EpochedDataset& dataset, const std::string& subject,
                      const std::vector<std::pair<std::string, std::string>>& pairs, const ScanConfig& config) {
  PairReport report;
  report.pairs = pairs;
  report.subjects = {subject};
  std::vector<std::vector<std::string>> columns;
  std::vector<std::string> labels;
  for (const auto& p : pairs) {
    if (p.first == p.second) throw std::invalid_argument("pair repeats channel " + p.first);
    dataset.montage.index_of(p.first);
    dataset.montage.index_of(p.second);
    columns.push_back({p.first, p.second});
    labels.push_back(pair_label(p));
  }
  report.cells = scan_columns(dataset, subject, columns, labels, config);
  return report;
}

ChannelReport merge(const std::vector<ChannelReport>& reports) {
  ChannelReport out;
  if (reports.empty()) return out;
  out.channels = reports.front().channels;
  out.montage_index = reports.front().montage_index;
  for (const auto& r : reports) {
    if (r.channels != out.channels) throw std::invalid_argument("merge: channel lists differ");
    out.subjects.insert(out.subjects.end(), r.subjects.begin(), r.subjects.end());
    out.cells.insert(out.cells.end(), r.cells.begin(), r.cells.end());
  }
  return out;
}

PairReport merge(const std::vector<PairReport>& reports) {
  PairReport out;
  if (reports.empty()) return out;
  out.pairs = reports.front().pairs;
  for (const auto& r : reports) {
    if (r.pairs != out.pairs) throw std::invalid_argument("merge: pair lists differ");
    out.subjects.insert(out.subjects.end(), r.subjects.begin(), r.subjects.end());
    out.cells.insert(out.cells.end(), r.cells.begin(), r.cells.end());
  }
  return out;
}

json to_json(const ChannelReport& report) {
  json rows = json::array();
  for (std::size_t s = 0; s < report.subjects.size(); ++s) {
    json cells = json::array();
    for (std::size_t c = 0; c < report.channels.size(); ++c) cells.push_back(cell_json(report.cell(s, c)));
    rows.push_back({{"subject", report.subjects[s]}, {"cells", cells}});
  }
  json average = json::array();
  const auto avg = report.averages();
  const auto sd = report.average_stds();
  for (std::size_t c = 0; c < report.channels.size(); ++c) {
    average.push_back({{"channel", report.channels[c]}, {"mean", avg[c]}, {"std", sd[c]}});
  }
  return {{"kind", "channel_scan"},
          {"channels", report.channels},
          {"montage_index", report.montage_index},
          {"subjects", report.subjects},
          {"rows", rows},
          {"average", average}};
}

json to_json(const PairReport& report) {
  json pairs = json::array();
  for (const auto& p : report.pairs) pairs.push_back({p.first, p.second});
  json rows = json::array();
  const auto avg = report.subject_averages();
  for (std::size_t s = 0; s < report.subjects.size(); ++s) {
    json cells = json::array();
    for (std::size_t p = 0; p < report.pairs.size(); ++p) cells.push_back(cell_json(report.cell(s, p)));
    rows.push_back({{"subject", report.subjects[s]}, {"cells", cells}, {"average", avg[s]}});
  }
  return {{"kind", "pair_scan"}, {"pairs", pairs}, {"subjects", report.subjects}, {"rows", rows}};
}

ChannelReport channel_report_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "channel_scan") throw std::runtime_error("not a channel_scan report");
  ChannelReport r;
  r.channels = j.at("channels").get<std::vector<std::string>>();
  r.montage_index = j.at("montage_index").get<std::vector<std::size_t>>();
  r.subjects = j.at("subjects").get<std::vector<std::string>>();
  for (const auto& row : j.at("rows")) {
    const auto subject = row.at("subject").get<std::string>();
    for (const auto& c : row.at("cells")) r.cells.push_back(cell_from_json(subject, c));
  }
  if (r.cells.size() != r.channels.size() * r.subjects.size() || r.montage_index.size() != r.channels.size()) {
    throw std::runtime_error("channel_scan report has inconsistent shape");
  }
  return r;
}

PairReport pair_report_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "pair_scan") throw std::runtime_error("not a pair_scan report");
  PairReport r;
  for (const auto& p : j.at("pairs")) r.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  r.subjects = j.at("subjects").get<std::vector<std::string>>();
  for (const auto& row : j.at("rows")) {
    const auto subject = row.at("subject").get<std::string>();
    for (const auto& c : row.at("cells")) r.cells.push_back(cell_from_json(subject, c));
  }
  if (r.cells.size() != r.pairs.size() * r.subjects.size()) {
    throw std::runtime_error("pair_scan report has inconsistent shape");
  }
  return r;
}

std::string format_table(const ChannelReport& report) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{""};
  header.insert(header.end(), report.channels.begin(), report.channels.end());
  rows.push_back(header);
  for (std::size_t s = 0; s < report.subjects.size(); ++s) {
    std::vector<std::string> row{report.subjects[s]};
    for (std::size_t c = 0; c < report.channels.size(); ++c) {
      const auto& cell = report.cell(s, c);
      row.push_back(fixed3(cell.mean) + " (±" + fixed3(cell.std) + ")");
    }
    rows.push_back(row);
  }
  std::vector<std::string> avg_row{"Avg."};
  for (double a : report.averages()) avg_row.push_back(fixed3(a));
  rows.push_back(avg_row);
  return render(rows);
}

std::string format_table(const PairReport& report) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{""};
  for (const auto& p : report.pairs) header.push_back(pair_label(p));
  header.push_back("Avg.");
  rows.push_back(header);
  const auto avg = report.subject_averages();
  for (std::size_t s = 0; s < report.subjects.size(); ++s) {
    std::vector<std::string> row{report.subjects[s]};
    for (std::size_t p = 0; p < report.pairs.size(); ++p) row.push_back(fixed3(report.cell(s, p).mean));
    row.push_back(fixed3(avg[s]));
    rows.push_back(row);
  }
  return render(rows);
}

}  // namespace vibci
