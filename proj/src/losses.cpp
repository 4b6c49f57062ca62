#include "dcgh/losses.hpp"

#include <cmath>
#include <string>

namespace dcgh {
namespace {

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (auto x : v) s += x * x;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Accumulates coef * d cos<a,b> into grad_a and grad_b.
//   d cos / d a = b / (|a||b|) - cos * a / |a|^2
void add_cosine_grad(std::span<const double> a, std::span<const double> b, double coef, std::span<double> grad_a,
                     std::span<double> grad_b) {
  const double na2 = squared_norm(a) + kNormEpsilon;
  const double nb2 = squared_norm(b) + kNormEpsilon;
  const double inv_ab = 1.0 / (std::sqrt(na2) * std::sqrt(nb2));
  const double c = dot(a, b) * inv_ab;
  for (std::size_t k = 0; k < a.size(); ++k) {
    grad_a[k] += coef * (b[k] * inv_ab - c * a[k] / na2);
    grad_b[k] += coef * (a[k] * inv_ab - c * b[k] / nb2);
  }
}

void check_shapes(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy) {
  if (hx.rows() != hy.rows() || hx.cols() != hy.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "image and text code batches differ in shape");
  }
  if (hx.rows() == 0) throw Error(ErrorCode::kEmptyInput, "empty batch");
}

void check_proxy_shapes(const BinaryLikeCodes& h, const Matrix<double>& proxies, const LabelMatrix& labels) {
  if (proxies.cols() != h.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "proxy length " + std::to_string(proxies.cols()) +
                                               " != code length " + std::to_string(h.cols()));
  }
  if (labels.rows() != h.rows() || labels.categories() != proxies.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "labels do not match batch / proxy bank");
  }
}

void check_sim_shape(const BinaryLikeCodes& h, const SimilarityMatrix& sim) {
  if (sim.rows() != h.rows() || sim.cols() != h.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "similarity block must be batch x batch");
  }
}

// Sample-to-proxy cosines for one modality, B x C.
Matrix<double> proxy_cosines(const BinaryLikeCodes& h, const Matrix<double>& proxies) {
  Matrix<double> c(h.rows(), proxies.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < proxies.rows(); ++j) c(i, j) = cosine(h.row(i), proxies.row(j));
  }
  return c;
}

struct ModalityGrad {
  Matrix<double>* d_codes = nullptr;
  Matrix<double>* d_proxies = nullptr;
};

double proxy_term(const BinaryLikeCodes& h, const Matrix<double>& proxies, const Matrix<double>& cos,
                  const LabelMatrix& labels, ModalityGrad grad) {
  std::size_t relevant = 0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < proxies.rows(); ++j) relevant += labels.has(i, j) ? 1 : 0;
  }
  const std::size_t irrelevant = h.rows() * proxies.rows() - relevant;
  const double inv_rel = relevant > 0 ? 1.0 / static_cast<double>(relevant) : 0.0;
  const double inv_irr = irrelevant > 0 ? 1.0 / static_cast<double>(irrelevant) : 0.0;

  double pull = 0.0;
  double push = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < proxies.rows(); ++j) {
      const double c = cos(i, j);
      double coef = 0.0;
      if (labels.has(i, j)) {
        pull += -c;
        coef = -inv_rel;
      } else if (c > 0.0) {
        push += c;
        coef = inv_irr;
      }
      if (grad.d_codes != nullptr && coef != 0.0) {
        add_cosine_grad(h.row(i), proxies.row(j), coef, grad.d_codes->row(i), grad.d_proxies->row(j));
      }
    }
  }
  return pull * inv_rel + push * inv_irr;
}

double variance_term(const BinaryLikeCodes& h, const Matrix<double>& proxies, const Matrix<double>& cos,
                     const LabelMatrix& labels, ModalityGrad grad) {
  const double inv_batch = 1.0 / static_cast<double>(h.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < proxies.rows(); ++j) {
      if (labels.has(i, j)) {
        sum += -cos(i, j);
        ++count;
      }
    }
    if (count == 0) continue;
    const double u = static_cast<double>(count);
    const double mean = sum / u;
    double var = 0.0;
    for (std::size_t j = 0; j < proxies.rows(); ++j) {
      if (!labels.has(i, j)) continue;
      const double dev = -cos(i, j) - mean;
      var += dev * dev;
      // d var / d cos_j = -2 (v_j - mean) / U; the mean's own dependence cancels.
      if (grad.d_codes != nullptr && count > 1) {
        add_cosine_grad(h.row(i), proxies.row(j), -2.0 * dev / u * inv_batch, grad.d_codes->row(i),
                        grad.d_proxies->row(j));
      }
    }
    total += var / u;
  }
  return total * inv_batch;
}

struct PairSums {
  double pos = 0.0;
  double neg = 0.0;
};

PairSums pair_term(const BinaryLikeCodes& h, const SimilarityMatrix& sim, double pos_coef, double neg_coef,
                   Matrix<double>* d_codes) {
  PairSums sums;
  const std::size_t n = h.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = sim(i, j);
      const double c = cosine(h.row(i), h.row(j));
      double coef = 0.0;
      if (s > 0.0) {
        const double hinge = s - c;
        if (hinge > 0.0) {
          sums.pos += hinge;
          coef = -pos_coef;
        }
      } else if (c > 0.0) {
        sums.neg += c;
        coef = neg_coef;
      }
      if (d_codes != nullptr && coef != 0.0) {
        add_cosine_grad(h.row(i), h.row(j), coef, d_codes->row(i), d_codes->row(j));
      }
    }
  }
  return sums;
}

struct PairCounts {
  std::size_t relevant = 0;
  std::size_t irrelevant = 0;
};

PairCounts count_pairs(const SimilarityMatrix& sim) {
  PairCounts pc;
  for (auto s : sim.values()) {
    if (s > 0.0) {
      ++pc.relevant;
    } else {
      ++pc.irrelevant;
    }
  }
  return pc;
}

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "cosine of vectors of different length");
  return dot(a, b) / (std::sqrt(squared_norm(a) + kNormEpsilon) * std::sqrt(squared_norm(b) + kNormEpsilon));
}

double cos_plus(std::span<const double> h, std::span<const double> p) { return -cosine(h, p); }

double cos_minus(std::span<const double> h, std::span<const double> p) { return std::max(cosine(h, p), 0.0); }

double proxy_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& proxies,
                  const LabelMatrix& labels) {
  return total_loss(hx, hy, proxies, labels, SimilarityMatrix(hx.rows(), hx.rows(), 1.0), {},
                    {.proxy = true, .pair = false, .variance = false})
      .proxy;
}

PairwiseLoss pairwise_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const SimilarityMatrix& sim,
                           const LossWeights& weights) {
  check_shapes(hx, hy);
  check_sim_shape(hx, sim);
  const auto pc = count_pairs(sim);
  const double inv_rel = pc.relevant > 0 ? 1.0 / static_cast<double>(pc.relevant) : 0.0;
  const double inv_irr = pc.irrelevant > 0 ? 1.0 / static_cast<double>(pc.irrelevant) : 0.0;
  const auto x = pair_term(hx, sim, 0.0, 0.0, nullptr);
  const auto y = pair_term(hy, sim, 0.0, 0.0, nullptr);
  PairwiseLoss out;
  out.pos = (x.pos + y.pos) * inv_rel;
  out.neg = (x.neg + y.neg) * inv_irr;
  out.weighted = weights.alpha * out.pos + weights.beta * out.neg;
  return out;
}

double variance_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& proxies,
                     const LabelMatrix& labels) {
  return total_loss(hx, hy, proxies, labels, SimilarityMatrix(hx.rows(), hx.rows(), 1.0), {},
                    {.proxy = false, .pair = false, .variance = true})
      .variance;
}

LossBreakdown total_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& proxies,
                         const LabelMatrix& labels, const SimilarityMatrix& sim, const LossWeights& weights,
                         const LossTerms& terms) {
  check_shapes(hx, hy);
  check_proxy_shapes(hx, proxies, labels);
  LossBreakdown out;
  if (terms.proxy || terms.variance) {
    const auto cx = proxy_cosines(hx, proxies);
    const auto cy = proxy_cosines(hy, proxies);
    if (terms.proxy) {
      out.proxy = proxy_term(hx, proxies, cx, labels, {}) + proxy_term(hy, proxies, cy, labels, {});
    }
    if (terms.variance) {
      out.variance = variance_term(hx, proxies, cx, labels, {}) + variance_term(hy, proxies, cy, labels, {});
    }
  }
  if (terms.pair) {
    const auto p = pairwise_loss(hx, hy, sim, weights);
    out.pair_pos = p.pos;
    out.pair_neg = p.neg;
    out.pair_weighted = p.weighted;
  }
  out.total = out.proxy + out.pair_weighted + out.variance;
  return out;
}

LossEvaluation evaluate_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& proxies,
                             const LabelMatrix& labels, const SimilarityMatrix& sim, const LossWeights& weights,
                             const LossTerms& terms) {
  check_shapes(hx, hy);
  check_proxy_shapes(hx, proxies, labels);
  LossEvaluation ev{{},
                    {Matrix<double>(hx.rows(), hx.cols(), 0.0), Matrix<double>(hy.rows(), hy.cols(), 0.0),
                     Matrix<double>(proxies.rows(), proxies.cols(), 0.0)}};
  auto& g = ev.grad;
  if (terms.proxy || terms.variance) {
    const auto cx = proxy_cosines(hx, proxies);
    const auto cy = proxy_cosines(hy, proxies);
    if (terms.proxy) {
      ev.loss.proxy = proxy_term(hx, proxies, cx, labels, {&g.d_codes_x, &g.d_proxies}) +
                      proxy_term(hy, proxies, cy, labels, {&g.d_codes_y, &g.d_proxies});
    }
    if (terms.variance) {
      ev.loss.variance = variance_term(hx, proxies, cx, labels, {&g.d_codes_x, &g.d_proxies}) +
                         variance_term(hy, proxies, cy, labels, {&g.d_codes_y, &g.d_proxies});
    }
  }
  if (terms.pair) {
    check_sim_shape(hx, sim);
    const auto pc = count_pairs(sim);
    const double inv_rel = pc.relevant > 0 ? 1.0 / static_cast<double>(pc.relevant) : 0.0;
    const double inv_irr = pc.irrelevant > 0 ? 1.0 / static_cast<double>(pc.irrelevant) : 0.0;
    const double pos_coef = weights.alpha * inv_rel;
    const double neg_coef = weights.beta * inv_irr;
    const auto x = pair_term(hx, sim, pos_coef, neg_coef, &g.d_codes_x);
    const auto y = pair_term(hy, sim, pos_coef, neg_coef, &g.d_codes_y);
    ev.loss.pair_pos = (x.pos + y.pos) * inv_rel;
    ev.loss.pair_neg = (x.neg + y.neg) * inv_irr;
    ev.loss.pair_weighted = weights.alpha * ev.loss.pair_pos + weights.beta * ev.loss.pair_neg;
  }
  ev.loss.total = ev.loss.proxy + ev.loss.pair_weighted + ev.loss.variance;
  return ev;
}

Matrix<double> to_double(const Matrix<float>& m) {
  Matrix<double> out(m.rows(), m.cols());
  auto src = m.values();
  auto dst = out.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k];
  return out;
}

}  // namespace dcgh
