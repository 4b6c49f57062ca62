#include "dcgh/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dcgh/binary_io.hpp"
#include "dcgh/rng.hpp"

namespace dcgh {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kProxyOnly: return "pv";
    case Variant::kPairOnly: return "xv";
    case Variant::kNoVariance: return "v";
  }
  return "full";
}

Variant parse_variant(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  std::erase(s, '-');
  if (s == "full" || s == "dcgh") return Variant::kFull;
  if (s == "pv") return Variant::kProxyOnly;
  if (s == "xv") return Variant::kPairOnly;
  if (s == "v") return Variant::kNoVariance;
  throw Error(ErrorCode::kConfig, "unknown variant '" + std::string(text) + "' (expected full|pv|xv|v)");
}

void TrainConfig::validate() const {
  if (bits == 0) throw Error(ErrorCode::kConfig, "bits must be >= 1");
  if (batch_size == 0) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::kConfig, "lr must be finite and >= 0");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw Error(ErrorCode::kConfig, "alpha and beta must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw Error(ErrorCode::kConfig, "adam hyper-parameters out of range");
  }
}

Objective objective_for(const TrainConfig& cfg) {
  switch (cfg.variant) {
    case Variant::kFull: return {{true, true, true}, {cfg.alpha, cfg.beta}};
    case Variant::kProxyOnly: return {{true, false, false}, {cfg.alpha, cfg.beta}};
    case Variant::kPairOnly: return {{false, true, false}, {1.0, 1.0}};
    case Variant::kNoVariance: return {{true, true, false}, {cfg.alpha, cfg.beta}};
  }
  return {};
}

AdamState make_adam_state(std::span<const std::size_t> tensor_sizes) {
  AdamState s;
  for (auto n : tensor_sizes) {
    s.first.emplace_back(n, 0.0f);
    s.second.emplace_back(n, 0.0f);
  }
  return s;
}

void adam_step(std::span<const std::span<float>> params, std::span<const std::span<const double>> grads,
               AdamState& state, double lr, const AdamHyper& hyper) {
  if (params.size() != grads.size() || params.size() != state.first.size() ||
      params.size() != state.second.size()) {
    throw Error(ErrorCode::kShapeMismatch, "adam: tensor count mismatch");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() || params[t].size() != state.first[t].size() ||
        params[t].size() != state.second[t].size()) {
      throw Error(ErrorCode::kShapeMismatch, "adam: tensor " + std::to_string(t) + " shape mismatch");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.first[k];
    auto& v = state.second[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double mi = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      const double vi = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      p[i] = static_cast<float>(p[i] - lr * m_hat / (std::sqrt(v_hat) + hyper.eps));
    }
  }
}

std::vector<std::vector<std::size_t>> shuffle_batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch,
                                                      std::uint64_t seed) {
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(derive_seed(seed, 0xba7c4, epoch));
  rng.shuffle(std::span(perm));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const auto end = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

std::vector<std::span<float>> parameter_tensors(Model& model) {
  return {model.image.weights.values(), std::span(model.image.bias), model.text.weights.values(),
          std::span(model.text.bias), model.proxies.proxies.values()};
}

std::vector<std::size_t> parameter_sizes(const Model& model) {
  return {model.image.weights.size(), model.image.bias.size(), model.text.weights.size(), model.text.bias.size(),
          model.proxies.proxies.size()};
}

namespace {

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.proxy) && std::isfinite(b.pair_pos) && std::isfinite(b.pair_neg) &&
         std::isfinite(b.variance) && std::isfinite(b.total);
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b) {
  acc.proxy += b.proxy;
  acc.pair_pos += b.pair_pos;
  acc.pair_neg += b.pair_neg;
  acc.pair_weighted += b.pair_weighted;
  acc.variance += b.variance;
  acc.total += b.total;
}

void scale(LossBreakdown& b, double s) {
  b.proxy *= s;
  b.pair_pos *= s;
  b.pair_neg *= s;
  b.pair_weighted *= s;
  b.variance *= s;
  b.total *= s;
}

void check_alignment(const Model& model, const FeatureMatrix& x, const FeatureMatrix& y, const LabelMatrix& labels) {
  if (x.rows() != y.rows() || x.rows() != labels.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "image, text and label rows are not aligned (" +
                                               std::to_string(x.rows()) + ", " + std::to_string(y.rows()) + ", " +
                                               std::to_string(labels.rows()) + ")");
  }
  if (x.cols() != model.image.input_dim() || y.cols() != model.text.input_dim()) {
    throw Error(ErrorCode::kShapeMismatch, "feature dims do not match the hash heads");
  }
  if (labels.categories() != model.proxies.categories()) {
    throw Error(ErrorCode::kShapeMismatch, "label categories do not match the proxy bank");
  }
}

}  // namespace

LossBreakdown train_step(Model& model, AdamState& adam, const TrainConfig& cfg, const FeatureMatrix& x,
                         const FeatureMatrix& y, const LabelMatrix& labels, std::uint64_t step) {
  const auto objective = objective_for(cfg);
  const auto px = forward_pass(model.image, x, DropoutMode{cfg.seed, step, 0});
  const auto py = forward_pass(model.text, y, DropoutMode{cfg.seed, step, 1});
  const auto sim = label_similarity(labels);
  const auto ev = evaluate_loss(px.codes, py.codes, to_double(model.proxies.proxies), labels, sim, objective.weights,
                                objective.terms);
  if (!finite(ev.loss)) {
    throw Error(ErrorCode::kNonFinite, "loss at step " + std::to_string(step));
  }
  const auto gx = backward(model.image, x, px, ev.grad.d_codes_x);
  const auto gy = backward(model.text, y, py, ev.grad.d_codes_y);
  const std::vector<std::span<const double>> grads{gx.weights.values(), std::span(gx.bias), gy.weights.values(),
                                                   std::span(gy.bias), ev.grad.d_proxies.values()};
  const auto params = parameter_tensors(model);
  adam_step(params, grads, adam, cfg.lr, cfg.adam);
  return ev.loss;
}

TrainResult train(const TrainConfig& cfg, const FeatureMatrix& x, const FeatureMatrix& y, const LabelMatrix& labels) {
  cfg.validate();
  auto model = init_model(x.cols(), cfg.bits, labels.categories(), cfg.seed);
  auto adam = make_adam_state(parameter_sizes(model));
  return train(cfg, x, y, labels, std::move(model), std::move(adam));
}

TrainResult train(const TrainConfig& cfg, const FeatureMatrix& x, const FeatureMatrix& y, const LabelMatrix& labels,
                  Model model, AdamState adam) {
  cfg.validate();
  check_alignment(model, x, y, labels);
  if (model.image.code_length() != cfg.bits) {
    throw Error(ErrorCode::kShapeMismatch, "model code length differs from config bits");
  }
  TrainResult result{std::move(model), std::move(adam), {}};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = shuffle_batches(x.rows(), cfg.batch_size, epoch, cfg.seed);
    LossBreakdown sum;
    for (const auto& batch : batches) {
      const auto bx = gather_rows(x, batch);
      const auto by = gather_rows(y, batch);
      const auto bl = labels.select(batch);
      const auto step = result.adam.step;
      LossBreakdown loss;
      try {
        loss = train_step(result.model, result.adam, cfg, bx, by, bl, step);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFinite) throw;
        throw Error(ErrorCode::kNonFinite, "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                               std::to_string(step));
      }
      accumulate(sum, loss);
    }
    scale(sum, batches.empty() ? 0.0 : 1.0 / static_cast<double>(batches.size()));
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    result.report.epochs.push_back({epoch, result.adam.step, sum, elapsed.count()});
  }
  return result;
}

namespace {

constexpr std::string_view kCheckpointMagic = "DCGHCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const AdamState& adam) {
  const auto d = model.image.input_dim();
  const auto k = model.image.code_length();
  const auto c = model.proxies.categories();
  if (model.text.input_dim() != d || model.text.code_length() != k || model.proxies.code_length() != k) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint format requires both heads to share d and K");
  }
  const auto sizes = parameter_sizes(model);
  if (adam.first.size() != sizes.size() || adam.second.size() != sizes.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state does not mirror the parameters");
  }
  io::ByteWriter w;
  w.magic(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(d);
  w.u64(k);
  w.u64(c);
  w.f32s(model.image.weights.values());
  w.f32s(model.image.bias);
  w.f32s(model.text.weights.values());
  w.f32s(model.text.bias);
  w.f32s(model.proxies.proxies.values());
  w.u64(adam.step);
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    if (adam.first[t].size() != sizes[t] || adam.second[t].size() != sizes[t]) {
      throw Error(ErrorCode::kShapeMismatch, "optimizer moment shape mismatch");
    }
    w.f32s(adam.first[t]);
    w.f32s(adam.second[t]);
  }
  io::write_atomic(path, w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic(kCheckpointMagic);
  r.expect_version(kCheckpointVersion);
  const auto d = r.u64();
  const auto k = r.u64();
  const auto c = r.u64();
  if (d == 0 || k == 0 || c == 0) throw Error(ErrorCode::kDomain, path.string() + ": zero dimension in header");
  if (d > (1ULL << 32) || k > (1ULL << 32) || c > (1ULL << 32)) {
    throw Error(ErrorCode::kTruncated, path.string() + ": implausible header");
  }
  Checkpoint ck;
  auto head = [&] {
    HashHead h;
    h.weights = Matrix<float>(d, k, r.f32s(d * k));
    h.bias = r.f32s(k);
    return h;
  };
  ck.model.image = head();
  ck.model.text = head();
  ck.model.proxies.proxies = Matrix<float>(c, k, r.f32s(c * k));
  ck.adam.step = r.u64();
  for (auto n : parameter_sizes(ck.model)) {
    ck.adam.first.push_back(r.f32s(n));
    ck.adam.second.push_back(r.f32s(n));
  }
  for (auto tensor : parameter_tensors(ck.model)) {
    for (auto v : tensor) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, path.string() + ": parameter");
    }
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kDomain, path.string() + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return ck;
}

std::string format_train_log(const TrainReport& report) {
  std::ostringstream out;
  out << "epoch,step,proxy,pair_pos,pair_neg,variance,total\n";
  char line[256];
  for (const auto& e : report.epochs) {
    std::snprintf(line, sizeof line, "%zu,%llu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                  static_cast<unsigned long long>(e.steps), e.loss.proxy, e.loss.pair_pos, e.loss.pair_neg,
                  e.loss.variance, e.loss.total);
    out << line;
  }
  return out.str();
}

}  // namespace dcgh
