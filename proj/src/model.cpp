#include "dcgh/model.hpp"

#include <algorithm>
#include <cmath>

#include "dcgh/rng.hpp"

namespace dcgh {
namespace {

// tanh rounds to +-1 for large inputs in double; keep codes strictly inside.
constexpr double kCodeBound = 1.0 - 0x1.0p-53;

}  // namespace

Model init_model(std::size_t d, std::size_t k, std::size_t c, std::uint64_t seed) {
  if (d == 0 || k == 0 || c == 0) {
    throw Error(ErrorCode::kInvalidArgument, "model dimensions must be >= 1");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto make_head = [&](std::uint64_t stream) {
    Rng rng(derive_seed(seed, 0x4ead, stream));
    HashHead head{Matrix<float>(d, k), std::vector<float>(k, 0.0f), kDefaultDropout};
    for (auto& w : head.weights.values()) w = static_cast<float>(rng.uniform(-bound, bound));
    return head;
  };

  Model model{make_head(0), make_head(1), ProxyBank{Matrix<float>(c, k)}};
  Rng rng(derive_seed(seed, 0x960c5));
  std::vector<double> v(k);
  for (std::size_t j = 0; j < c; ++j) {
    double norm = 0.0;
    while (norm < 1e-6) {
      norm = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
    }
    for (std::size_t t = 0; t < k; ++t) model.proxies.proxies(j, t) = static_cast<float>(v[t] / norm);
  }
  return model;
}

Matrix<double> dropout_mask(std::size_t rows, std::size_t cols, double rate, const DropoutMode& mode) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dropout rate must lie in [0,1)");
  Rng rng(derive_seed(mode.seed, mode.step, 0xd0 + mode.stream));
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix<double> mask(rows, cols);
  for (auto& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

ForwardPass forward_pass(const HashHead& head, const FeatureMatrix& x, std::optional<DropoutMode> train) {
  if (x.cols() != head.input_dim()) {
    throw Error(ErrorCode::kShapeMismatch, "features have dim " + std::to_string(x.cols()) +
                                               ", head expects " + std::to_string(head.input_dim()));
  }
  const std::size_t n = x.rows();
  const std::size_t k = head.code_length();
  ForwardPass pass{BinaryLikeCodes(n, k), train ? dropout_mask(n, k, head.dropout_rate, *train)
                                                : Matrix<double>(n, k, 1.0)};
  std::vector<double> z(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) z[t] = head.bias[t];
    const auto xi = x.row(i);
    for (std::size_t f = 0; f < xi.size(); ++f) {
      const double xv = xi[f];
      if (xv == 0.0) continue;
      const auto w = head.weights.row(f);
      for (std::size_t t = 0; t < k; ++t) z[t] += xv * w[t];
    }
    for (std::size_t t = 0; t < k; ++t) {
      const double h = std::tanh(z[t] * pass.mask(i, t));
      pass.codes(i, t) = std::clamp(h, -kCodeBound, kCodeBound);
    }
  }
  return pass;
}

HeadGradients backward(const HashHead& head, const FeatureMatrix& x, const ForwardPass& pass,
                       const Matrix<double>& d_codes) {
  const std::size_t n = x.rows();
  const std::size_t k = head.code_length();
  if (d_codes.rows() != n || d_codes.cols() != k || pass.codes.rows() != n) {
    throw Error(ErrorCode::kShapeMismatch, "backward: gradient shape does not match forward pass");
  }
  HeadGradients g{Matrix<double>(head.input_dim(), k, 0.0), std::vector<double>(k, 0.0)};
  std::vector<double> dz(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double h = pass.codes(i, t);
      dz[t] = d_codes(i, t) * (1.0 - h * h) * pass.mask(i, t);
      g.bias[t] += dz[t];
    }
    const auto xi = x.row(i);
    for (std::size_t f = 0; f < xi.size(); ++f) {
      const double xv = xi[f];
      if (xv == 0.0) continue;
      auto gw = g.weights.row(f);
      for (std::size_t t = 0; t < k; ++t) gw[t] += xv * dz[t];
    }
  }
  return g;
}

}  // namespace dcgh
