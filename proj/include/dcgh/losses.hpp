#pragma once

#include <span>

#include "dcgh/data.hpp"
#include "dcgh/model.hpp"

namespace dcgh {

// Guard added to squared norms so cosines are defined for zero vectors.
inline constexpr double kNormEpsilon = 1e-12;

struct LossWeights {
  double alpha = 0.05;  // relevant-pair weight
  double beta = 0.8;    // irrelevant-pair weight
};

// Which objective terms participate; disabled terms report 0 and contribute no gradient.
struct LossTerms {
  bool proxy = true;
  bool pair = true;
  bool variance = true;
};

struct LossBreakdown {
  double proxy = 0.0;
  double pair_pos = 0.0;
  double pair_neg = 0.0;
  double pair_weighted = 0.0;
  double variance = 0.0;
  double total = 0.0;
};

struct LossGradients {
  Matrix<double> d_codes_x;
  Matrix<double> d_codes_y;
  Matrix<double> d_proxies;
};

struct PairwiseLoss {
  double pos = 0.0;
  double neg = 0.0;
  double weighted = 0.0;
};

// <a,b> / (sqrt(|a|^2+eps) sqrt(|b|^2+eps))
double cosine(std::span<const double> a, std::span<const double> b);

// Pull term for a relevant proxy: -cos<h,p>.
double cos_plus(std::span<const double> h, std::span<const double> p);
// Push term for an irrelevant proxy: max(cos<h,p>, 0).
double cos_minus(std::span<const double> h, std::span<const double> p);

// Per modality: mean cos_plus over relevant (sample, proxy) pairs plus mean
// cos_minus over irrelevant ones; summed over both modalities. An empty pair
// class contributes 0.
double proxy_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& proxies,
                  const LabelMatrix& labels);

// Hinge losses over all ordered pairs (i, j), diagonal included. Both
// modalities are summed in the numerator and divided by the single-modality
// pair count of the respective class (S_ij > 0 or S_ij == 0).
PairwiseLoss pairwise_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const SimilarityMatrix& sim,
                           const LossWeights& weights);

// Mean over samples of the population variance of cos_plus to the sample's
// relevant proxies, summed over both modalities.
double variance_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& proxies,
                     const LabelMatrix& labels);

LossBreakdown total_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& proxies,
                         const LabelMatrix& labels, const SimilarityMatrix& sim, const LossWeights& weights,
                         const LossTerms& terms = {});

struct LossEvaluation {
  LossBreakdown loss;
  LossGradients grad;
};

// Loss values and exact analytic gradients in one pass. Hinge and clamp
// kinks use subgradient 0.
LossEvaluation evaluate_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& proxies,
                             const LabelMatrix& labels, const SimilarityMatrix& sim, const LossWeights& weights,
                             const LossTerms& terms = {});

inline LossGradients loss_gradients(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy,
                                    const Matrix<double>& proxies, const LabelMatrix& labels,
                                    const SimilarityMatrix& sim, const LossWeights& weights,
                                    const LossTerms& terms = {}) {
  return evaluate_loss(hx, hy, proxies, labels, sim, weights, terms).grad;
}

Matrix<double> to_double(const Matrix<float>& m);

}  // namespace dcgh
