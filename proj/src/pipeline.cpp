#include "vibci/pipeline.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "vibci/augment.hpp"
#include "vibci/dataset.hpp"
#include "vibci/rng.hpp"

namespace vibci {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("config: " + message);
}

// Every key of `given` must exist in `reference`, recursively through objects.
void check_keys(const json& given, const json& reference, const std::string& path) {
  if (!given.is_object() || !reference.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw std::invalid_argument("config: unknown key '" + where + "'");
    check_keys(value, reference.at(key), where);
  }
}

json band_json(const Band& b) { return json::array({b.low_hz, b.high_hz}); }

Band band_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("config: band must be [low_hz, high_hz]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

void PreprocessSettings::validate(double raw_fs_hz) const {
  require(decimation >= 1, "decimation must be >= 1");
  require(filter_order >= 2 && filter_order % 2 == 0, "filter_order must be even and >= 2");
  const double fs = raw_fs_hz / decimation;
  require_integral(fs, "decimated sampling rate");
  validate_band(band, fs);
  require(epoch_len_s > 0.0, "epoch_len_s must be positive");
  require_integral(epoch_len_s * fs, "epoch length in samples");
}

Recording preprocess(const Recording& raw, const PreprocessSettings& settings) {
  settings.validate(raw.fs_hz);
  const auto reduced = decimate(raw, settings.decimation);
  return filter_recording(reduced, design_bandpass_fir(settings.band, reduced.fs_hz, settings.filter_order));
}

EpochedDataset preprocess_and_epoch(const Recording& raw, const PreprocessSettings& settings) {
  return epoch(preprocess(raw, settings), settings.epoch_len_s);
}

SubjectSpec SynthSettings::subject_spec(double epoch_len_s) const {
  auto spec = SubjectSpec::defaults();
  spec.fs_hz = fs_hz;
  spec.trials_per_class = trials_per_class;
  spec.epoch_len_s = epoch_len_s;
  spec.rest_len_s = rest_len_s;
  spec.snr = snr;
  spec.background_rms_uv = background_rms_uv;
  if (!channels.empty()) spec = spec.restricted_to(channels);
  spec.validate();
  return spec;
}

void PipelineConfig::validate() const {
  require(synth.subjects >= 1, "synth.subjects must be >= 1");
  require(synth.trials_per_class >= 2, "synth.trials_per_class must be >= 2");
  const auto spec = synth.subject_spec(preprocess.epoch_len_s);
  preprocess.validate(synth.fs_hz);
  const double fs = synth.fs_hz / preprocess.decimation;

  const auto geometry = window_geometry(fs, win_len_s, overlap);
  require(window_count(require_integral(preprocess.epoch_len_s * fs, "epoch length"), geometry) >= 1,
          "window longer than an epoch");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  train.validate();
  Architecture arch{1, geometry.length, blocks};
  arch.validate();
  require(repetitions >= 1, "repetitions must be >= 1");

  const Montage& montage = spec.montage;
  require(!shortlist.empty(), "shortlist must not be empty");
  std::set<std::string> seen;
  for (const auto& c : shortlist) {
    require(montage.find(c).has_value(), "shortlist channel '" + c + "' is not in the montage");
    require(seen.insert(c).second, "shortlist repeats '" + c + "'");
  }
  require(top_k >= 2 && top_k <= shortlist.size(), "top_k must lie in [2, shortlist size]");
  for (const auto& [a, b] : pairs) {
    require(montage.find(a).has_value() && montage.find(b).has_value(), "pair " + a + "-" + b + " not in montage");
    require(a != b, "pair repeats channel " + a);
  }

  validate_band(stats_band, fs);
  require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  require(n_perm >= 100, "n_perm must be >= 100");
  require(online_trials_per_class >= 1, "online.trials_per_class must be >= 1");
  require(online_runs >= 1, "online.runs must be >= 1");
}

ScanConfig PipelineConfig::scan_config(std::size_t jobs) const {
  ScanConfig sc;
  sc.train = train;
  sc.blocks = blocks;
  sc.repetitions = repetitions;
  sc.train_fraction = train_fraction;
  sc.win_len_s = win_len_s;
  sc.overlap = overlap;
  sc.master_seed = seed;
  sc.jobs = jobs;
  return sc;
}

PermutationOptions PipelineConfig::permutation_options() const {
  return {n_perm, alpha, bonferroni, derive_seed(seed, "stats")};
}

json to_json(const PipelineConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.blocks) {
    blocks.push_back({{"kernel_len", b.kernel_len}, {"out_features", b.out_features}, {"pool_len", b.pool_len}});
  }
  json pairs = json::array();
  for (const auto& [a, b] : c.pairs) pairs.push_back({a, b});
  return {
      {"seed", c.seed},
      {"synth",
       {{"subjects", c.synth.subjects},
        {"trials_per_class", c.synth.trials_per_class},
        {"fs_hz", c.synth.fs_hz},
        {"rest_len_s", c.synth.rest_len_s},
        {"snr", c.synth.snr},
        {"background_rms_uv", c.synth.background_rms_uv},
        {"channels", c.synth.channels}}},
      {"preprocess",
       {{"band", band_json(c.preprocess.band)},
        {"decimation", c.preprocess.decimation},
        {"filter_order", c.preprocess.filter_order},
        {"epoch_len_s", c.preprocess.epoch_len_s}}},
      {"window", {{"length_s", c.win_len_s}, {"overlap", c.overlap}}},
      {"train",
       {{"train_fraction", c.train_fraction},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"eps", c.train.eps},
        {"blocks", blocks}}},
      {"scan", {{"repetitions", c.repetitions}, {"shortlist", c.shortlist}, {"top_k", c.top_k}, {"pairs", pairs}}},
      {"stats",
       {{"band", band_json(c.stats_band)},
        {"alpha", c.alpha},
        {"n_perm", c.n_perm},
        {"bonferroni", c.bonferroni},
        {"shortlist_rule", c.shortlist_rule == ShortlistRule::Union ? "union" : "intersection"}}},
      {"online", {{"trials_per_class", c.online_trials_per_class}, {"runs", c.online_runs}}},
  };
}

PipelineConfig config_from_json(const json& given) {
  if (!given.is_object()) throw std::invalid_argument("config: top level must be an object");
  const json reference = to_json(PipelineConfig{});
  check_keys(given, reference, "");
  json j = reference;
  j.merge_patch(given);

  PipelineConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& s = j.at("synth");
    c.synth.subjects = s.at("subjects").get<std::size_t>();
    c.synth.trials_per_class = s.at("trials_per_class").get<std::size_t>();
    c.synth.fs_hz = s.at("fs_hz").get<double>();
    c.synth.rest_len_s = s.at("rest_len_s").get<double>();
    c.synth.snr = s.at("snr").get<double>();
    c.synth.background_rms_uv = s.at("background_rms_uv").get<double>();
    c.synth.channels = s.at("channels").get<std::vector<std::string>>();

    const auto& p = j.at("preprocess");
    c.preprocess.band = band_from(p.at("band"));
    c.preprocess.decimation = p.at("decimation").get<int>();
    c.preprocess.filter_order = p.at("filter_order").get<int>();
    c.preprocess.epoch_len_s = p.at("epoch_len_s").get<double>();

    c.win_len_s = j.at("window").at("length_s").get<double>();
    c.overlap = j.at("window").at("overlap").get<double>();

    const auto& t = j.at("train");
    c.train_fraction = t.at("train_fraction").get<double>();
    c.train.epochs = t.at("epochs").get<std::size_t>();
    c.train.batch_size = t.at("batch_size").get<std::size_t>();
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.beta1 = t.at("beta1").get<double>();
    c.train.beta2 = t.at("beta2").get<double>();
    c.train.eps = t.at("eps").get<double>();
    const auto& blocks = t.at("blocks");
    if (!blocks.is_array() || blocks.size() != Architecture::kBlocks) {
      throw std::invalid_argument("config: train.blocks must list exactly 3 blocks");
    }
    for (std::size_t b = 0; b < Architecture::kBlocks; ++b) {
      c.blocks[b] = {blocks[b].at("kernel_len").get<std::size_t>(), blocks[b].at("out_features").get<std::size_t>(),
                     blocks[b].at("pool_len").get<std::size_t>()};
    }

    const auto& sc = j.at("scan");
    c.repetitions = sc.at("repetitions").get<std::size_t>();
    c.shortlist = sc.at("shortlist").get<std::vector<std::string>>();
    c.top_k = sc.at("top_k").get<std::size_t>();
    for (const auto& pr : sc.at("pairs")) {
      if (!pr.is_array() || pr.size() != 2) throw std::invalid_argument("config: scan.pairs entries must be [a, b]");
      c.pairs.emplace_back(pr[0].get<std::string>(), pr[1].get<std::string>());
    }

    const auto& st = j.at("stats");
    c.stats_band = band_from(st.at("band"));
    c.alpha = st.at("alpha").get<double>();
    c.n_perm = st.at("n_perm").get<std::size_t>();
    c.bonferroni = st.at("bonferroni").get<bool>();
    const auto rule = st.at("shortlist_rule").get<std::string>();
    if (rule == "union") {
      c.shortlist_rule = ShortlistRule::Union;
    } else if (rule == "intersection") {
      c.shortlist_rule = ShortlistRule::Intersection;
    } else {
      throw std::invalid_argument("config: stats.shortlist_rule must be 'union' or 'intersection'");
    }

    c.online_trials_per_class = j.at("online").at("trials_per_class").get<std::size_t>();
    c.online_runs = j.at("online").at("runs").get<std::size_t>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string subject_name(std::size_t index) { return "S" + std::to_string(index + 1); }

std::uint64_t subject_seed(std::uint64_t master_seed, std::size_t index) {
  return derive_seed(master_seed, "synth.subject", index);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace vibci
