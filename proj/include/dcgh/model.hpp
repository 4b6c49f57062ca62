#pragma once

#include <cstdint>
#include <optional>

#include "dcgh/data.hpp"
#include "dcgh/matrix.hpp"

namespace dcgh {

// Relaxed codes in (-1, 1)^K, one row per sample.
using BinaryLikeCodes = Matrix<double>;

inline constexpr double kDefaultDropout = 0.2;

// fc -> dropout -> tanh, one per modality.
struct HashHead {
  Matrix<float> weights;  // d x K
  std::vector<float> bias;  // K
  double dropout_rate = kDefaultDropout;

  std::size_t input_dim() const noexcept { return weights.rows(); }
  std::size_t code_length() const noexcept { return weights.cols(); }

  friend bool operator==(const HashHead&, const HashHead&) = default;
};

// One learnable K-dim proxy per category, shared by both modalities.
struct ProxyBank {
  Matrix<float> proxies;  // C x K

  std::size_t categories() const noexcept { return proxies.rows(); }
  std::size_t code_length() const noexcept { return proxies.cols(); }

  friend bool operator==(const ProxyBank&, const ProxyBank&) = default;
};

struct Model {
  HashHead image;
  HashHead text;
  ProxyBank proxies;

  friend bool operator==(const Model&, const Model&) = default;
};

// Weights ~ U(-1/sqrt(d), 1/sqrt(d)), zero bias, proxies uniform on the unit sphere.
Model init_model(std::size_t d, std::size_t k, std::size_t c, std::uint64_t seed);

// Train-mode dropout: the mask is a pure function of (seed, step, stream).
struct DropoutMode {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t stream = 0;
};

// Cached activations for an exact backward pass.
struct ForwardPass {
  BinaryLikeCodes codes;
  // Per pre-activation multiplier: 0 for dropped units, 1/(1-rate) for kept
  // ones, 1 everywhere in eval mode.
  Matrix<double> mask;
};

// std::nullopt selects eval mode (dropout is the identity).
ForwardPass forward_pass(const HashHead& head, const FeatureMatrix& x, std::optional<DropoutMode> train);

inline BinaryLikeCodes forward(const HashHead& head, const FeatureMatrix& x,
                               std::optional<DropoutMode> train = std::nullopt) {
  return forward_pass(head, x, train).codes;
}

Matrix<double> dropout_mask(std::size_t rows, std::size_t cols, double rate, const DropoutMode& mode);

struct HeadGradients {
  Matrix<double> weights;
  std::vector<double> bias;
};

// Chain rule from dL/dcodes back through tanh, dropout and the fc layer.
HeadGradients backward(const HashHead& head, const FeatureMatrix& x, const ForwardPass& pass,
                       const Matrix<double>& d_codes);

}  // namespace dcgh
