#include "vibci/cnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "vibci/rng.hpp"

namespace vibci {

namespace {

constexpr std::size_t kBlocks = Architecture::kBlocks;
constexpr std::size_t kClasses = Architecture::kClasses;

// Intermediate values of one forward pass, reused across samples.
struct Workspace {
  std::array<std::vector<double>, kBlocks> z;   // pre-activation, features x conv_length
  std::array<std::vector<double>, kBlocks> p;   // pooled output, features x pooled_length
  std::array<std::vector<double>, kBlocks> dz;  // gradient w.r.t. z
  std::array<std::vector<double>, kBlocks> dp;  // gradient w.r.t. p
  std::array<std::vector<double>, kBlocks> cols;   // im2col patches, conv_length x (in_features * kernel_len)
  std::array<std::vector<double>, kBlocks> dcols;
  std::array<bool, kBlocks> use_cols{};
  std::vector<double> gap;
  std::vector<double> dgap;
  std::array<double, kClasses> logits{};
  std::array<double, kClasses> probs{};

  explicit Workspace(const Architecture& arch) {
    for (std::size_t b = 0; b < kBlocks; ++b) {
      const auto f = arch.blocks[b].out_features;
      z[b].resize(f * arch.conv_length(b));
      dz[b].resize(f * arch.conv_length(b));
      p[b].resize(f * arch.pooled_length(b));
      dp[b].resize(f * arch.pooled_length(b));
      // Patch layout wins when the output is short relative to the patch.
      const auto patch = arch.in_features(b) * arch.blocks[b].kernel_len;
      use_cols[b] = arch.conv_length(b) < patch;
      if (use_cols[b]) {
        cols[b].resize(arch.conv_length(b) * patch);
        dcols[b].resize(cols[b].size());
      }
    }
    gap.resize(arch.blocks.back().out_features);
    dgap.resize(gap.size());
  }
};

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void forward_sample(const Model& model, const double* x, Workspace& ws) {
  const auto& arch = model.arch();
  const double* in = x;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    const auto& spec = arch.blocks[b];
    const std::size_t cin = arch.in_features(b);
    const std::size_t lin = arch.in_length(b);
    const std::size_t lc = arch.conv_length(b);
    const std::size_t lp = arch.pooled_length(b);
    const std::size_t k = spec.kernel_len;
    const auto w = model.kernel(b);
    const auto bias = model.bias(b);
    const std::size_t patch = cin * k;
    if (ws.use_cols[b]) {
      for (std::size_t t = 0; t < lc; ++t) {
        double* col = ws.cols[b].data() + t * patch;
        for (std::size_t c = 0; c < cin; ++c) std::copy_n(in + c * lin + t, k, col + c * k);
      }
    }
    for (std::size_t f = 0; f < spec.out_features; ++f) {
      double* zf = ws.z[b].data() + f * lc;
      if (ws.use_cols[b]) {
        const double* wf = w.data() + f * patch;
        for (std::size_t t = 0; t < lc; ++t) zf[t] = bias[f] + dot(wf, ws.cols[b].data() + t * patch, patch);
      } else {
        std::fill(zf, zf + lc, bias[f]);
        for (std::size_t c = 0; c < cin; ++c) {
          const double* wfc = w.data() + (f * cin + c) * k;
          const double* inc = in + c * lin;
          for (std::size_t j = 0; j < k; ++j) axpy(wfc[j], inc + j, zf, lc);
        }
      }
      double* pf = ws.p[b].data() + f * lp;
      const double inv = 1.0 / static_cast<double>(spec.pool_len);
      for (std::size_t t = 0; t < lp; ++t) {
        double acc = 0.0;
        for (std::size_t u = 0; u < spec.pool_len; ++u) acc += std::max(0.0, zf[t * spec.pool_len + u]);
        pf[t] = acc * inv;
      }
    }
    in = ws.p[b].data();
  }

  const std::size_t feats = arch.blocks.back().out_features;
  const std::size_t lp = arch.pooled_length(kBlocks - 1);
  for (std::size_t f = 0; f < feats; ++f) {
    const double* pf = ws.p[kBlocks - 1].data() + f * lp;
    ws.gap[f] = std::accumulate(pf, pf + lp, 0.0) / static_cast<double>(lp);
  }
  const auto hw = model.head_weight();
  const auto hb = model.head_bias();
  double max_logit = -INFINITY;
  for (std::size_t k = 0; k < kClasses; ++k) {
    ws.logits[k] = hb[k] + dot(hw.data() + k * feats, ws.gap.data(), feats);
    max_logit = std::max(max_logit, ws.logits[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < kClasses; ++k) {
    ws.probs[k] = std::exp(ws.logits[k] - max_logit);
    sum += ws.probs[k];
  }
  for (auto& p : ws.probs) p /= sum;
}

// Accumulates the gradient of sum_k dlogits[k] * logits[k] into grad.
void backward_sample(const Model& model, const double* x, const std::array<double, kClasses>& dlogits,
                     Workspace& ws, std::span<double> grad) {
  const auto& arch = model.arch();
  const std::size_t feats = arch.blocks.back().out_features;
  const auto hw = model.head_weight();
  double* ghw = grad.data() + model.head_weight_offset();
  double* ghb = grad.data() + model.head_bias_offset();
  std::fill(ws.dgap.begin(), ws.dgap.end(), 0.0);
  for (std::size_t k = 0; k < kClasses; ++k) {
    ghb[k] += dlogits[k];
    axpy(dlogits[k], ws.gap.data(), ghw + k * feats, feats);
    axpy(dlogits[k], hw.data() + k * feats, ws.dgap.data(), feats);
  }
  {
    const std::size_t lp = arch.pooled_length(kBlocks - 1);
    for (std::size_t f = 0; f < feats; ++f) {
      std::fill_n(ws.dp[kBlocks - 1].data() + f * lp, lp, ws.dgap[f] / static_cast<double>(lp));
    }
  }

  for (std::size_t bi = kBlocks; bi-- > 0;) {
    const auto& spec = arch.blocks[bi];
    const std::size_t cin = arch.in_features(bi);
    const std::size_t lin = arch.in_length(bi);
    const std::size_t lc = arch.conv_length(bi);
    const std::size_t lp = arch.pooled_length(bi);
    const std::size_t k = spec.kernel_len;
    const double inv = 1.0 / static_cast<double>(spec.pool_len);
    const double* in = bi == 0 ? x : ws.p[bi - 1].data();
    double* din = bi == 0 ? nullptr : ws.dp[bi - 1].data();
    if (din) std::fill(din, din + cin * lin, 0.0);
    const auto w = model.kernel(bi);
    double* gw = grad.data() + model.kernel_offset(bi);
    double* gb = grad.data() + model.bias_offset(bi);

    for (std::size_t f = 0; f < spec.out_features; ++f) {
      const double* zf = ws.z[bi].data() + f * lc;
      const double* dpf = ws.dp[bi].data() + f * lp;
      double* dzf = ws.dz[bi].data() + f * lc;
      std::fill(dzf, dzf + lc, 0.0);
      double bias_grad = 0.0;
      for (std::size_t t = 0; t < lp; ++t) {
        const double g = dpf[t] * inv;
        for (std::size_t u = 0; u < spec.pool_len; ++u) {
          const std::size_t idx = t * spec.pool_len + u;
          if (zf[idx] > 0.0) {
            dzf[idx] = g;
            bias_grad += g;
          }
        }
      }
      gb[f] += bias_grad;
      if (ws.use_cols[bi]) continue;
      for (std::size_t c = 0; c < cin; ++c) {
        const double* inc = in + c * lin;
        double* gwfc = gw + (f * cin + c) * k;
        for (std::size_t j = 0; j < k; ++j) gwfc[j] += dot(dzf, inc + j, lc);
        if (din) {
          const double* wfc = w.data() + (f * cin + c) * k;
          double* dinc = din + c * lin;
          for (std::size_t j = 0; j < k; ++j) axpy(wfc[j], dzf, dinc + j, lc);
        }
      }
    }
    if (!ws.use_cols[bi]) continue;

    const std::size_t patch = cin * k;
    const double* cols = ws.cols[bi].data();
    for (std::size_t f = 0; f < spec.out_features; ++f) {
      const double* dzf = ws.dz[bi].data() + f * lc;
      double* gwf = gw + f * patch;
      for (std::size_t t = 0; t < lc; ++t) {
        if (dzf[t] != 0.0) axpy(dzf[t], cols + t * patch, gwf, patch);
      }
    }
    if (!din) continue;
    double* dcols = ws.dcols[bi].data();
    std::fill(ws.dcols[bi].begin(), ws.dcols[bi].end(), 0.0);
    for (std::size_t t = 0; t < lc; ++t) {
      for (std::size_t f = 0; f < spec.out_features; ++f) {
        const double g = ws.dz[bi][f * lc + t];
        if (g != 0.0) axpy(g, w.data() + f * patch, dcols + t * patch, patch);
      }
    }
    for (std::size_t t = 0; t < lc; ++t) {
      for (std::size_t c = 0; c < cin; ++c) axpy(1.0, dcols + t * patch + c * k, din + c * lin + t, k);
    }
  }
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_batch(const Architecture& arch, std::size_t values, std::size_t batch_size) {
  const std::size_t per = arch.input_channels * arch.input_samples;
  if (batch_size == 0 || values != per * batch_size) {
    throw std::invalid_argument("batch shape does not match architecture (" +
                                std::to_string(arch.input_channels) + " x " +
                                std::to_string(arch.input_samples) + ")");
  }
}

void put_f64le(double v, char* out) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
}

double get_f64le(const char* in) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

// ---------------------------------------------------------------------------
// Architecture / Model

std::array<BlockSpec, Architecture::kBlocks> Architecture::default_blocks() {
  return {{{25, 8, 4}, {11, 16, 4}, {7, 32, 2}}};
}

void Architecture::validate() const {
  if (input_channels == 0 || input_samples == 0) {
    throw std::invalid_argument("architecture needs at least one channel and one sample");
  }
  std::size_t len = input_samples;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    const auto& s = blocks[b];
    if (s.kernel_len == 0 || s.kernel_len % 2 == 0) {
      throw std::invalid_argument("block " + std::to_string(b) + ": kernel length must be odd");
    }
    if (s.out_features == 0 || s.pool_len == 0) {
      throw std::invalid_argument("block " + std::to_string(b) + ": features and pool length must be positive");
    }
    if (len < s.kernel_len || (len - s.kernel_len + 1) / s.pool_len == 0) {
      throw std::invalid_argument("block " + std::to_string(b) + ": input of " + std::to_string(len) +
                                  " samples too short for kernel " + std::to_string(s.kernel_len) +
                                  " and pool " + std::to_string(s.pool_len));
    }
    len = (len - s.kernel_len + 1) / s.pool_len;
  }
}

std::size_t Architecture::in_features(std::size_t block) const {
  return block == 0 ? input_channels : blocks[block - 1].out_features;
}

std::size_t Architecture::in_length(std::size_t block) const {
  return block == 0 ? input_samples : pooled_length(block - 1);
}

std::size_t Architecture::conv_length(std::size_t block) const {
  return in_length(block) - blocks[block].kernel_len + 1;
}

std::size_t Architecture::pooled_length(std::size_t block) const {
  return conv_length(block) / blocks[block].pool_len;
}

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    n += blocks[b].out_features * in_features(b) * blocks[b].kernel_len + blocks[b].out_features;
  }
  return n + kClasses * blocks.back().out_features + kClasses;
}

Model::Model(const Architecture& arch) : arch_(arch) {
  arch_.validate();
  std::size_t off = 0;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    kernel_off_[b] = off;
    off += arch_.blocks[b].out_features * arch_.in_features(b) * arch_.blocks[b].kernel_len;
    bias_off_[b] = off;
    off += arch_.blocks[b].out_features;
  }
  head_w_off_ = off;
  off += kClasses * arch_.blocks.back().out_features;
  head_b_off_ = off;
  off += kClasses;
  params_.assign(off, 0.0);
}

std::span<double> Model::kernel(std::size_t b) {
  return std::span<double>(params_).subspan(kernel_off_[b], bias_off_[b] - kernel_off_[b]);
}
std::span<const double> Model::kernel(std::size_t b) const {
  return std::span<const double>(params_).subspan(kernel_off_[b], bias_off_[b] - kernel_off_[b]);
}
std::span<double> Model::bias(std::size_t b) {
  return std::span<double>(params_).subspan(bias_off_[b], arch_.blocks[b].out_features);
}
std::span<const double> Model::bias(std::size_t b) const {
  return std::span<const double>(params_).subspan(bias_off_[b], arch_.blocks[b].out_features);
}
std::span<double> Model::head_weight() {
  return std::span<double>(params_).subspan(head_w_off_, head_b_off_ - head_w_off_);
}
std::span<const double> Model::head_weight() const {
  return std::span<const double>(params_).subspan(head_w_off_, head_b_off_ - head_w_off_);
}
std::span<double> Model::head_bias() { return std::span<double>(params_).subspan(head_b_off_, kClasses); }
std::span<const double> Model::head_bias() const {
  return std::span<const double>(params_).subspan(head_b_off_, kClasses);
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw std::invalid_argument("epochs and batch_size must be positive");
  if (!(learning_rate > 0.0) || !(eps > 0.0)) throw std::invalid_argument("learning_rate and eps must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  }
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
  Model model(arch);
  Rng rng(seed);
  for (std::size_t b = 0; b < kBlocks; ++b) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(arch.in_features(b) * arch.blocks[b].kernel_len));
    for (auto& w : model.kernel(b)) w = rng.uniform(-scale, scale);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(arch.blocks.back().out_features));
  for (auto& w : model.head_weight()) w = rng.uniform(-scale, scale);
  return model;
}

// ---------------------------------------------------------------------------
// Forward / backward

Matrix<double> forward(const Model& model, std::span<const double> batch, std::size_t batch_size) {
  const auto& arch = model.arch();
  check_batch(arch, batch.size(), batch_size);
  const std::size_t per = arch.input_channels * arch.input_samples;
  Workspace ws(arch);
  Matrix<double> out(batch_size, kClasses);
  for (std::size_t i = 0; i < batch_size; ++i) {
    forward_sample(model, batch.data() + i * per, ws);
    std::copy(ws.probs.begin(), ws.probs.end(), out.row(i).begin());
  }
  return out;
}

LossAndGrad loss_and_grad(const Model& model, std::span<const double> batch, std::span<const std::size_t> labels) {
  const auto& arch = model.arch();
  check_batch(arch, batch.size(), labels.size());
  const std::size_t per = arch.input_channels * arch.input_samples;
  const double inv_b = 1.0 / static_cast<double>(labels.size());
  Workspace ws(arch);
  LossAndGrad out;
  out.grad.assign(model.params().size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= kClasses) throw std::invalid_argument("label out of range");
    const double* x = batch.data() + i * per;
    forward_sample(model, x, ws);
    // log-softmax through the logits keeps the loss finite for confident outputs.
    const double max_logit = *std::max_element(ws.logits.begin(), ws.logits.end());
    double lse = 0.0;
    for (double l : ws.logits) lse += std::exp(l - max_logit);
    out.loss += (max_logit + std::log(lse) - ws.logits[labels[i]]) * inv_b;
    std::array<double, kClasses> dlogits{};
    for (std::size_t k = 0; k < kClasses; ++k) {
      dlogits[k] = (ws.probs[k] - (k == labels[i] ? 1.0 : 0.0)) * inv_b;
    }
    backward_sample(model, x, dlogits, ws, out.grad);
  }
  return out;
}

void adam_step(Model& model, std::span<const double> grad, AdamState& state, const TrainConfig& config) {
  auto params = model.params();
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: gradient/state size mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

// ---------------------------------------------------------------------------
// Training and evaluation

void standardize_window(const Matrix<double>& window, std::span<double> out) {
  const std::size_t n = window.cols();
  for (std::size_t ch = 0; ch < window.rows(); ++ch) {
    const auto row = window.row(ch);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var = std::max(var / static_cast<double>(n), 1e-8);
    const double inv_sd = 1.0 / std::sqrt(var);
    double* dst = out.data() + ch * n;
    for (std::size_t i = 0; i < n; ++i) dst[i] = (row[i] - mean) * inv_sd;
  }
}

namespace {

std::vector<double> standardized_inputs(const std::vector<Window>& windows, std::size_t per) {
  std::vector<double> x(windows.size() * per);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].data.size() != per) throw std::invalid_argument("windows differ in shape");
    standardize_window(windows[i].data, std::span<double>(x).subspan(i * per, per));
  }
  return x;
}

}  // namespace

TrainResult train(const WindowedDataset& data, const TrainConfig& config,
                  const std::array<BlockSpec, Architecture::kBlocks>& blocks) {
  config.validate();
  if (data.windows.empty()) throw std::invalid_argument("train: empty training set");
  Architecture arch;
  arch.input_channels = data.windows.front().data.rows();
  arch.input_samples = data.windows.front().data.cols();
  arch.blocks = blocks;
  arch.validate();

  const std::size_t per = arch.input_channels * arch.input_samples;
  const std::size_t n = data.windows.size();
  const auto x = standardized_inputs(data.windows, per);
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_imagery(data.windows[i].label)) throw std::invalid_argument("train: Rest windows cannot be decoded");
    y[i] = class_index(data.windows[i].label);
  }

  TrainResult result{init_model(arch, derive_seed(config.seed, "train.init")), {}};
  auto state = AdamState::zeros(result.model.params().size());
  std::vector<std::size_t> order(n);
  std::vector<double> batch;
  std::vector<std::size_t> labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, "train.shuffle", epoch));
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      batch.resize(b * per);
      labels.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(src * per), per,
                    batch.begin() + static_cast<std::ptrdiff_t>(i * per));
        labels[i] = y[src];
      }
      const auto lg = loss_and_grad(result.model, batch, labels);
      adam_step(result.model, lg.grad, state, config);
      epoch_loss += lg.loss * static_cast<double>(b);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

Matrix<double> predict(const Model& model, const std::vector<Window>& windows) {
  const auto& arch = model.arch();
  const std::size_t per = arch.input_channels * arch.input_samples;
  for (const auto& w : windows) {
    if (w.data.rows() != arch.input_channels || w.data.cols() != arch.input_samples) {
      throw std::invalid_argument("window shape does not match the model input");
    }
  }
  if (windows.empty()) return Matrix<double>(0, kClasses);
  return forward(model, standardized_inputs(windows, per), windows.size());
}

std::size_t vote(std::span<const std::size_t> decisions, const Matrix<double>& probabilities,
                 std::span<const std::size_t> rows) {
  std::array<std::size_t, kClasses> counts{};
  std::array<double, kClasses> prob_sum{};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ++counts[decisions[i]];
    for (std::size_t k = 0; k < kClasses; ++k) prob_sum[k] += probabilities(rows[i], k);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < kClasses; ++k) {
    if (counts[k] > counts[best] || (counts[k] == counts[best] && prob_sum[k] > prob_sum[best])) best = k;
  }
  return best;
}

Metrics score(const Matrix<double>& probabilities, const std::vector<Window>& windows) {
  if (windows.empty()) throw std::invalid_argument("evaluate: empty test set");
  if (probabilities.rows() != windows.size()) throw std::invalid_argument("score: row count mismatch");
  Metrics m;
  m.n_windows = windows.size();
  std::vector<std::size_t> decisions(windows.size());
  std::size_t correct = 0;
  std::array<std::size_t, kClasses> class_total{};
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!is_imagery(windows[i].label)) throw std::invalid_argument("evaluate: Rest windows cannot be scored");
    decisions[i] = argmax(probabilities.row(i));
    const auto truth = class_index(windows[i].label);
    ++m.confusion[truth][decisions[i]];
    ++class_total[truth];
    if (decisions[i] == truth) ++correct;
  }
  m.window_accuracy = static_cast<double>(correct) / static_cast<double>(windows.size());
  for (std::size_t k = 0; k < kClasses; ++k) {
    m.per_class_accuracy[k] =
        class_total[k] ? static_cast<double>(m.confusion[k][k]) / static_cast<double>(class_total[k]) : 0.0;
  }

  // Group windows by source trial. Sorting by id keeps the result independent
  // of window order.
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return windows[a].source_trial_id < windows[b].source_trial_id;
  });
  std::size_t trials_correct = 0;
  for (std::size_t start = 0; start < idx.size();) {
    std::size_t end = start;
    while (end < idx.size() && windows[idx[end]].source_trial_id == windows[idx[start]].source_trial_id) ++end;
    std::vector<std::size_t> rows(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                  idx.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<std::size_t> dec;
    for (auto r : rows) dec.push_back(decisions[r]);
    if (vote(dec, probabilities, rows) == class_index(windows[rows.front()].label)) ++trials_correct;
    ++m.n_trials;
    start = end;
  }
  m.trial_accuracy = static_cast<double>(trials_correct) / static_cast<double>(m.n_trials);
  return m;
}

Metrics evaluate(const Model& model, const WindowedDataset& test_windows) {
  if (test_windows.windows.empty()) throw std::invalid_argument("evaluate: empty test set");
  return score(predict(model, test_windows.windows), test_windows.windows);
}

// ---------------------------------------------------------------------------
// Serialization

void save_model(const Model& model, const std::vector<std::string>& channels, double fs_hz,
                const std::filesystem::path& dir) {
  using nlohmann::json;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
  const auto& arch = model.arch();
  json blocks = json::array();
  for (const auto& b : arch.blocks) {
    blocks.push_back({{"kernel_len", b.kernel_len}, {"out_features", b.out_features}, {"pool_len", b.pool_len}});
  }
  const json meta = {
      {"format_version", kModelFormatVersion},
      {"byte_order", "little"},
      {"dtype", "float64"},
      {"input_channels", arch.input_channels},
      {"input_samples", arch.input_samples},
      {"blocks", blocks},
      {"n_params", model.params().size()},
      {"channels", channels},
      {"fs_hz", fs_hz},
  };
  {
    std::ofstream out(dir / "model.json", std::ios::trunc);
    out << meta.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + (dir / "model.json").string());
  }
  std::vector<char> buf(model.params().size() * 8);
  for (std::size_t i = 0; i < model.params().size(); ++i) put_f64le(model.params()[i], buf.data() + 8 * i);
  std::ofstream out(dir / "params.f64le", std::ios::binary | std::ios::trunc);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + (dir / "params.f64le").string());
}

LoadedModel load_model(const std::filesystem::path& dir) {
  using nlohmann::json;
  const auto meta_path = dir / "model.json";
  const auto params_path = dir / "params.f64le";
  if (!std::filesystem::exists(meta_path)) throw std::runtime_error("missing " + meta_path.string());
  if (!std::filesystem::exists(params_path)) throw std::runtime_error("missing " + params_path.string());
  try {
    json meta;
    std::ifstream(meta_path) >> meta;
    if (meta.at("format_version").get<int>() != kModelFormatVersion) {
      throw std::runtime_error("unsupported model format version");
    }
    Architecture arch;
    arch.input_channels = meta.at("input_channels").get<std::size_t>();
    arch.input_samples = meta.at("input_samples").get<std::size_t>();
    const auto& blocks = meta.at("blocks");
    if (blocks.size() != Architecture::kBlocks) throw std::runtime_error("model must have exactly 3 blocks");
    for (std::size_t b = 0; b < Architecture::kBlocks; ++b) {
      arch.blocks[b] = {blocks[b].at("kernel_len").get<std::size_t>(), blocks[b].at("out_features").get<std::size_t>(),
                        blocks[b].at("pool_len").get<std::size_t>()};
    }
    LoadedModel out{Model(arch), meta.at("channels").get<std::vector<std::string>>(), meta.at("fs_hz").get<double>()};
    const std::size_t n = out.model.params().size();
    if (meta.at("n_params").get<std::size_t>() != n || std::filesystem::file_size(params_path) != n * 8) {
      throw std::runtime_error("parameter payload does not match the architecture");
    }
    std::vector<char> buf(n * 8);
    std::ifstream in(params_path, std::ios::binary);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("short read on " + params_path.string());
    for (std::size_t i = 0; i < n; ++i) {
      out.model.params()[i] = get_f64le(buf.data() + 8 * i);
      if (!std::isfinite(out.model.params()[i])) throw std::runtime_error("non-finite parameter in model");
    }
    return out;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed " + meta_path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("invalid model in " + dir.string() + ": " + e.what());
  }
}

}  // namespace vibci
