#pragma once

// Brute-force reference implementations used only by the tests. They follow
// the defining formulas literally (nested loops, full sorts, re-scans) and
// share no code with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "dcgh/encoder.hpp"
#include "dcgh/eval.hpp"
#include "dcgh/losses.hpp"

namespace oracle {

using dcgh::BinaryLikeCodes;
using dcgh::LabelMatrix;
using dcgh::Matrix;

inline double cos_sim(const Matrix<double>& a, std::size_t i, const Matrix<double>& b, std::size_t j) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    ab += a(i, k) * b(j, k);
    aa += a(i, k) * a(i, k);
    bb += b(j, k) * b(j, k);
  }
  return ab / (std::sqrt(aa + 1e-12) * std::sqrt(bb + 1e-12));
}

inline double label_cos(const LabelMatrix& l, std::size_t i, std::size_t j) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t c = 0; c < l.categories(); ++c) {
    const double a = l.row(i)[c];
    const double b = l.row(j)[c];
    ab += a * b;
    aa += a * a;
    bb += b * b;
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

inline Matrix<double> similarity(const LabelMatrix& l) {
  Matrix<double> s(l.rows(), l.rows());
  for (std::size_t i = 0; i < l.rows(); ++i)
    for (std::size_t j = 0; j < l.rows(); ++j) s(i, j) = label_cos(l, i, j);
  return s;
}

// Per-modality proxy loss: relevant mean of -cos plus irrelevant mean of max(cos,0).
inline double proxy_modality(const BinaryLikeCodes& h, const Matrix<double>& p, const LabelMatrix& l) {
  double num_rel = 0, den_rel = 0, num_irr = 0, den_irr = 0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < p.rows(); ++j) {
      const double c = cos_sim(h, i, p, j);
      if (l.row(i)[j] == 1) {
        num_rel += -c;
        den_rel += 1;
      } else {
        num_irr += std::max(c, 0.0);
        den_irr += 1;
      }
    }
  }
  return (den_rel > 0 ? num_rel / den_rel : 0.0) + (den_irr > 0 ? num_irr / den_irr : 0.0);
}

inline double proxy_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& p,
                         const LabelMatrix& l) {
  return proxy_modality(hx, p, l) + proxy_modality(hy, p, l);
}

struct Pair {
  double pos, neg;
};

// Both modalities summed in the numerator, single-modality pair count below.
inline Pair pairwise_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& s) {
  double pos_num = 0, pos_den = 0, neg_num = 0, neg_den = 0;
  const std::size_t n = hx.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (s(i, j) > 0) pos_den += 1;
      if (s(i, j) == 0) neg_den += 1;
    }
  }
  for (const auto* h : {&hx, &hy}) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double c = cos_sim(*h, i, *h, j);
        if (s(i, j) > 0) pos_num += std::max(s(i, j) - c, 0.0);
        if (s(i, j) == 0) neg_num += std::max(c, 0.0);
      }
    }
  }
  return {pos_den > 0 ? pos_num / pos_den : 0.0, neg_den > 0 ? neg_num / neg_den : 0.0};
}

inline double variance_modality(const BinaryLikeCodes& h, const Matrix<double>& p, const LabelMatrix& l) {
  double total = 0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < p.rows(); ++j)
      if (l.row(i)[j] == 1) d.push_back(-cos_sim(h, i, p, j));
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double var = 0;
    for (double v : d) var += (v - mean) * (v - mean);
    total += var / static_cast<double>(d.size());
  }
  return total / static_cast<double>(h.rows());
}

inline double variance_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& p,
                            const LabelMatrix& l) {
  return variance_modality(hx, p, l) + variance_modality(hy, p, l);
}

inline double total_loss(const BinaryLikeCodes& hx, const BinaryLikeCodes& hy, const Matrix<double>& p,
                         const LabelMatrix& l, double alpha, double beta) {
  const auto s = oracle::similarity(l);
  const auto pr = oracle::pairwise_loss(hx, hy, s);
  return oracle::proxy_loss(hx, hy, p, l) + alpha * pr.pos + beta * pr.neg + oracle::variance_loss(hx, hy, p, l);
}

// Central difference of f with respect to v[idx].
inline double central_difference(std::span<double> v, std::size_t idx, double step, const std::function<double()>& f) {
  const double saved = v[idx];
  v[idx] = saved + step;
  const double up = f();
  v[idx] = saved - step;
  const double down = f();
  v[idx] = saved;
  return (up - down) / (2 * step);
}

// ---- retrieval ---------------------------------------------------------

inline int naive_hamming(const dcgh::BinaryCodeMatrix& a, std::size_t i, const dcgh::BinaryCodeMatrix& b,
                         std::size_t j) {
  int d = 0;
  for (std::size_t t = 0; t < a.bits(); ++t) d += a.code(i, t) != b.code(j, t);
  return d;
}

inline std::vector<std::size_t> ranking(const dcgh::RetrievalTask& task, std::size_t q) {
  std::vector<std::size_t> idx(task.db.codes.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<int> dist(idx.size());
  for (auto j : idx) dist[j] = naive_hamming(task.query.codes, q, task.db.codes, j);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });
  return idx;
}

inline bool rel(const dcgh::RetrievalTask& task, std::size_t q, std::size_t j) {
  for (std::size_t c = 0; c < task.query.labels.categories(); ++c)
    if (task.query.labels.row(q)[c] && task.db.labels.row(j)[c]) return true;
  return false;
}

inline int grade(const dcgh::RetrievalTask& task, std::size_t q, std::size_t j) {
  int g = 0;
  for (std::size_t c = 0; c < task.query.labels.categories(); ++c)
    g += task.query.labels.row(q)[c] && task.db.labels.row(j)[c];
  return g;
}

// AP from a relevance pattern, recounting hits before every relevant rank.
inline double ap_of(const std::vector<int>& pattern) {
  double sum = 0;
  int found = 0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (!pattern[i]) continue;
    int hits = 0;
    for (std::size_t t = 0; t <= i; ++t) hits += pattern[t];
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    ++found;
  }
  return found ? sum / found : 0.0;
}

inline std::vector<int> pattern(const dcgh::RetrievalTask& task, std::size_t q, std::size_t limit) {
  const auto order = ranking(task, q);
  std::vector<int> p;
  for (std::size_t i = 0; i < std::min(limit, order.size()); ++i) p.push_back(rel(task, q, order[i]));
  return p;
}

// nan when no query has a relevant item.
inline double map(const dcgh::RetrievalTask& task, std::size_t limit) {
  double sum = 0;
  int count = 0;
  for (std::size_t q = 0; q < task.query.codes.rows(); ++q) {
    bool any = false;
    for (std::size_t j = 0; j < task.db.codes.rows(); ++j) any = any || rel(task, q, j);
    if (!any) continue;
    sum += ap_of(pattern(task, q, limit));
    ++count;
  }
  return count ? sum / count : std::nan("");
}

inline double ndcg(const dcgh::RetrievalTask& task, std::size_t k) {
  double total = 0;
  for (std::size_t q = 0; q < task.query.codes.rows(); ++q) {
    const auto order = ranking(task, q);
    std::vector<int> grades;
    for (std::size_t j = 0; j < order.size(); ++j) grades.push_back(grade(task, q, j));
    double dcg = 0, idcg = 0;
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i)
      dcg += (std::pow(2.0, grade(task, q, order[i])) - 1) / std::log2(i + 2.0);
    std::sort(grades.rbegin(), grades.rend());
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i)
      idcg += (std::pow(2.0, grades[i]) - 1) / std::log2(i + 2.0);
    total += idcg > 0 ? dcg / idcg : 0.0;
  }
  return total / static_cast<double>(task.query.codes.rows());
}

struct Point {
  double recall, precision;
};

inline std::vector<Point> pr_points(const dcgh::RetrievalTask& task, std::size_t q) {
  const auto p = pattern(task, q, task.db.codes.rows());
  const int total = std::accumulate(p.begin(), p.end(), 0);
  std::vector<Point> pts;
  if (total == 0) return pts;
  for (std::size_t n = 1; n <= p.size(); ++n) {
    int hits = 0;
    for (std::size_t t = 0; t < n; ++t) hits += p[t];
    pts.push_back({static_cast<double>(hits) / total, static_cast<double>(hits) / static_cast<double>(n)});
  }
  return pts;
}

inline std::vector<double> pr_interpolated(const dcgh::RetrievalTask& task) {
  std::vector<double> y(101, 0.0);
  int counted = 0;
  for (std::size_t q = 0; q < task.query.codes.rows(); ++q) {
    const auto pts = pr_points(task, q);
    if (pts.empty()) continue;
    ++counted;
    for (int g = 0; g <= 100; ++g) {
      const double r = g / 100.0;
      double best = 0;
      for (const auto& pt : pts)
        if (pt.recall >= r) best = std::max(best, pt.precision);
      y[g] += best;
    }
  }
  for (auto& v : y) v /= counted;
  return y;
}

inline double precision_at(const dcgh::RetrievalTask& task, std::size_t n) {
  double total = 0;
  for (std::size_t q = 0; q < task.query.codes.rows(); ++q) {
    const auto p = pattern(task, q, n);
    total += static_cast<double>(std::accumulate(p.begin(), p.end(), 0)) / static_cast<double>(n);
  }
  return total / static_cast<double>(task.query.codes.rows());
}

struct Radius {
  double precision, map;
};

inline Radius radius(const dcgh::RetrievalTask& task, int r) {
  double prec = 0, ap = 0;
  for (std::size_t q = 0; q < task.query.codes.rows(); ++q) {
    const auto order = ranking(task, q);
    std::vector<int> p;
    for (auto j : order)
      if (naive_hamming(task.query.codes, q, task.db.codes, j) <= r) p.push_back(rel(task, q, j));
    if (p.empty()) continue;
    prec += static_cast<double>(std::accumulate(p.begin(), p.end(), 0)) / static_cast<double>(p.size());
    ap += ap_of(p);
  }
  const double nq = static_cast<double>(task.query.codes.rows());
  return {prec / nq, ap / nq};
}

// Random task with small K so that ties and small radii are common.
inline dcgh::RetrievalTask random_task(std::mt19937_64& rng, std::size_t max_q = 50, std::size_t max_db = 50) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
  };
  const std::size_t nq = pick(1, max_q);
  const std::size_t nd = pick(1, max_db);
  const std::size_t bits = pick(3, 12);
  const std::size_t cats = pick(2, 6);
  auto side = [&](std::size_t rows) {
    dcgh::BinaryCodeMatrix codes(rows, bits);
    Matrix<std::uint8_t> lab(rows, cats, 0);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t t = 0; t < bits; ++t) codes.set(i, t, rng() & 1);
      lab(i, rng() % cats) = 1;
      for (std::size_t c = 0; c < cats; ++c)
        if (rng() % 5 == 0) lab(i, c) = 1;
    }
    return dcgh::CodeFile{std::move(codes), dcgh::LabelMatrix(std::move(lab))};
  };
  return dcgh::RetrievalTask{side(nq), side(nd), dcgh::Direction::kImg2Txt};
}

}  // namespace oracle
