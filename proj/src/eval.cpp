#include "dcgh/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dcgh/binary_io.hpp"
#include "dcgh/parallel.hpp"

namespace dcgh {

std::string to_string(Direction d) { return d == Direction::kImg2Txt ? "Img2Txt" : "Txt2Img"; }

Direction parse_direction(std::string_view text) {
  if (text == "Img2Txt" || text == "img2txt" || text == "i2t") return Direction::kImg2Txt;
  if (text == "Txt2Img" || text == "txt2img" || text == "t2i") return Direction::kTxt2Img;
  throw Error(ErrorCode::kInvalidArgument, "unknown direction '" + std::string(text) + "'");
}

void RetrievalTask::validate() const {
  if (query.codes.rows() == 0) throw Error(ErrorCode::kEmptyInput, "query set is empty");
  if (db.codes.rows() == 0) throw Error(ErrorCode::kEmptyInput, "database is empty");
  if (query.codes.bits() != db.codes.bits()) {
    throw Error(ErrorCode::kShapeMismatch, "query K=" + std::to_string(query.codes.bits()) +
                                               " but database K=" + std::to_string(db.codes.bits()));
  }
  if (query.labels.categories() != db.labels.categories()) {
    throw Error(ErrorCode::kShapeMismatch, "query and database label spaces differ");
  }
  if (query.labels.rows() != query.codes.rows() || db.labels.rows() != db.codes.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "codes and labels disagree on row count");
  }
  if (db.codes.rows() > UINT32_MAX) throw Error(ErrorCode::kInvalidArgument, "database too large");
}

std::uint32_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                               std::size_t bits) {
  const auto words = BinaryCodeMatrix::words_for(bits);
  if (a.size() != words || b.size() != words) {
    throw Error(ErrorCode::kShapeMismatch, "packed rows do not match code length " + std::to_string(bits));
  }
  std::uint32_t d = 0;
  for (std::size_t w = 0; w < words; ++w) {
    auto x = a[w] ^ b[w];
    if (w + 1 == words && bits % 64 != 0) x &= (std::uint64_t{1} << (bits % 64)) - 1;
    d += static_cast<std::uint32_t>(std::popcount(x));
  }
  return d;
}

std::uint32_t hamming_distance(const BinaryCodeMatrix& a, std::size_t i, const BinaryCodeMatrix& b,
                               std::size_t j) {
  if (a.bits() != b.bits()) {
    throw Error(ErrorCode::kShapeMismatch, "K mismatch: " + std::to_string(a.bits()) + " vs " +
                                               std::to_string(b.bits()));
  }
  return hamming_distance(a.row(i), b.row(j), a.bits());
}

namespace {

// Counting sort on distance; stable, so ties keep ascending database index.
RankedList rank_unchecked(const RetrievalTask& task, std::size_t q) {
  const auto& db = task.db.codes;
  const auto bits = db.bits();
  const auto n = db.rows();
  std::vector<std::uint32_t> dist(n);
  std::vector<std::size_t> bucket(bits + 2, 0);
  const auto qrow = task.query.codes.row(q);
  for (std::size_t j = 0; j < n; ++j) {
    dist[j] = hamming_distance(qrow, db.row(j), bits);
    ++bucket[dist[j] + 1];
  }
  for (std::size_t b = 1; b < bucket.size(); ++b) bucket[b] += bucket[b - 1];
  RankedList out{std::vector<std::uint32_t>(n), std::vector<std::uint32_t>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const auto pos = bucket[dist[j]]++;
    out.order[pos] = static_cast<std::uint32_t>(j);
    out.distance[pos] = dist[j];
  }
  return out;
}

std::vector<RankedList> rank_all_unchecked(const RetrievalTask& task) {
  std::vector<RankedList> out(task.query.codes.rows());
  parallel_for(out.size(), [&](std::size_t q) { out[q] = rank_unchecked(task, q); });
  return out;
}

bool shares_label(const LabelMatrix& a, std::size_t i, const LabelMatrix& b, std::size_t j) {
  const auto x = a.row(i);
  const auto y = b.row(j);
  for (std::size_t c = 0; c < x.size(); ++c) {
    if (x[c] & y[c]) return true;
  }
  return false;
}

// Relevance flags in ranked order.
std::vector<std::uint8_t> ranked_relevance(const RetrievalTask& task, std::size_t q, const RankedList& ranked) {
  std::vector<std::uint8_t> rel(ranked.order.size());
  for (std::size_t i = 0; i < rel.size(); ++i) {
    rel[i] = shares_label(task.query.labels, q, task.db.labels, ranked.order[i]) ? 1 : 0;
  }
  return rel;
}

// Average precision over the first `limit` ranked items, normalised by the
// relevant items found there; nullopt when there are none.
std::optional<double> average_precision(std::span<const std::uint8_t> rel, std::size_t limit) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < std::min(limit, rel.size()); ++i) {
    if (rel[i]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

double mean_of(std::span<const double> values) {
  double s = 0.0;
  for (auto v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

double map_impl(const RetrievalTask& task, const std::vector<RankedList>& ranks, std::optional<std::size_t> top_k) {
  const auto nq = ranks.size();
  std::vector<double> ap(nq, 0.0);
  std::vector<std::uint8_t> included(nq, 0);
  parallel_for(nq, [&](std::size_t q) {
    const auto rel = ranked_relevance(task, q, ranks[q]);
    if (std::find(rel.begin(), rel.end(), 1) == rel.end()) return;
    included[q] = 1;
    ap[q] = average_precision(rel, top_k.value_or(rel.size())).value_or(0.0);
  });
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t q = 0; q < nq; ++q) {
    if (included[q]) {
      sum += ap[q];
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::kUndefinedMetric, "no query has a relevant database item; mAP undefined");
  return sum / static_cast<double>(count);
}

double ndcg_impl(const RetrievalTask& task, const std::vector<RankedList>& ranks, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "NDCG cutoff must be >= 1");
  const auto nq = ranks.size();
  std::vector<double> scores(nq, 0.0);
  parallel_for(nq, [&](std::size_t q) {
    const auto& ranked = ranks[q];
    const auto n = ranked.order.size();
    const auto cut = std::min(k, n);
    std::vector<std::size_t> grades(n);
    for (std::size_t j = 0; j < n; ++j) grades[j] = task.query.labels.shared(q, task.db.labels, j);
    double dcg = 0.0;
    for (std::size_t i = 0; i < cut; ++i) {
      dcg += (std::exp2(static_cast<double>(grades[ranked.order[i]])) - 1.0) / std::log2(static_cast<double>(i + 2));
    }
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < cut; ++i) {
      idcg += (std::exp2(static_cast<double>(grades[i])) - 1.0) / std::log2(static_cast<double>(i + 2));
    }
    scores[q] = idcg > 0.0 ? dcg / idcg : 0.0;
  });
  return mean_of(scores);
}

std::vector<std::vector<PrPoint>> pr_points_impl(const RetrievalTask& task, const std::vector<RankedList>& ranks) {
  std::vector<std::vector<PrPoint>> out(ranks.size());
  parallel_for(ranks.size(), [&](std::size_t q) {
    const auto rel = ranked_relevance(task, q, ranks[q]);
    std::size_t total = 0;
    for (auto r : rel) total += r;
    if (total == 0) return;
    auto& pts = out[q];
    pts.reserve(rel.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
      hits += rel[i];
      pts.push_back({static_cast<double>(hits) / static_cast<double>(total),
                     static_cast<double>(hits) / static_cast<double>(i + 1)});
    }
  });
  return out;
}

constexpr std::size_t kRecallGrid = 101;

CurveSeries pr_curve_impl(const std::vector<std::vector<PrPoint>>& points) {
  CurveSeries curve{"recall", "precision", std::vector<double>(kRecallGrid), std::vector<double>(kRecallGrid, 0.0)};
  for (std::size_t g = 0; g < kRecallGrid; ++g) curve.x[g] = static_cast<double>(g) / 100.0;
  std::size_t counted = 0;
  std::vector<double> suffix_max;
  for (const auto& pts : points) {
    if (pts.empty()) continue;
    ++counted;
    // Recall is non-decreasing along the ranking, so {n : recall_n >= r} is a
    // suffix and the interpolated precision is that suffix's maximum.
    suffix_max.assign(pts.size(), 0.0);
    double best = 0.0;
    for (std::size_t i = pts.size(); i-- > 0;) {
      best = std::max(best, pts[i].precision);
      suffix_max[i] = best;
    }
    std::size_t i = 0;
    for (std::size_t g = 0; g < kRecallGrid; ++g) {
      while (pts[i].recall < curve.x[g]) ++i;  // final recall is exactly 1
      curve.y[g] += suffix_max[i];
    }
  }
  if (counted == 0) throw Error(ErrorCode::kUndefinedMetric, "no query has a relevant database item; PR undefined");
  for (auto& y : curve.y) y /= static_cast<double>(counted);
  return curve;
}

CurveSeries topn_impl(const RetrievalTask& task, const std::vector<RankedList>& ranks,
                      std::span<const std::size_t> grid) {
  const auto db_size = task.db.codes.rows();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == 0 || grid[i] > db_size) {
      throw Error(ErrorCode::kInvalidArgument, "top-N cutoff " + std::to_string(grid[i]) + " outside [1, " +
                                                   std::to_string(db_size) + "]");
    }
    if (i > 0 && grid[i] <= grid[i - 1]) throw Error(ErrorCode::kInvalidArgument, "top-N grid must increase");
  }
  const auto nq = ranks.size();
  Matrix<double> per_query(nq, grid.size(), 0.0);
  parallel_for(nq, [&](std::size_t q) {
    const auto rel = ranked_relevance(task, q, ranks[q]);
    std::size_t hits = 0;
    std::size_t g = 0;
    for (std::size_t i = 0; i < rel.size() && g < grid.size(); ++i) {
      hits += rel[i];
      while (g < grid.size() && grid[g] == i + 1) {
        per_query(q, g) = static_cast<double>(hits) / static_cast<double>(i + 1);
        ++g;
      }
    }
  });
  CurveSeries curve{"N", "precision", {}, std::vector<double>(grid.size(), 0.0)};
  for (auto n : grid) curve.x.push_back(static_cast<double>(n));
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t g = 0; g < grid.size(); ++g) curve.y[g] += per_query(q, g);
  }
  for (auto& y : curve.y) y /= static_cast<double>(nq);
  return curve;
}

struct RadiusScores {
  double precision = 0.0;
  double map = 0.0;
};

RadiusScores radius_impl(const RetrievalTask& task, const std::vector<RankedList>& ranks, std::uint32_t radius) {
  const auto nq = ranks.size();
  std::vector<double> prec(nq, 0.0);
  std::vector<double> ap(nq, 0.0);
  parallel_for(nq, [&](std::size_t q) {
    const auto& ranked = ranks[q];
    const auto ball = static_cast<std::size_t>(
        std::upper_bound(ranked.distance.begin(), ranked.distance.end(), radius) - ranked.distance.begin());
    if (ball == 0) return;
    const auto rel = ranked_relevance(task, q, ranked);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ball; ++i) hits += rel[i];
    prec[q] = static_cast<double>(hits) / static_cast<double>(ball);
    ap[q] = average_precision(rel, ball).value_or(0.0);
  });
  return {mean_of(prec), mean_of(ap)};
}

}  // namespace

RankedList rank_query(const RetrievalTask& task, std::size_t query) {
  task.validate();
  if (query >= task.query.codes.rows()) throw Error(ErrorCode::kInvalidArgument, "query index out of range");
  return rank_unchecked(task, query);
}

std::vector<RankedList> rank_all(const RetrievalTask& task) {
  task.validate();
  return rank_all_unchecked(task);
}

bool relevant(const RetrievalTask& task, std::size_t query, std::size_t item) {
  return shares_label(task.query.labels, query, task.db.labels, item);
}

double mean_average_precision(const RetrievalTask& task, std::optional<std::size_t> top_k) {
  return map_impl(task, rank_all(task), top_k);
}

double ndcg_at_k(const RetrievalTask& task, std::size_t k) { return ndcg_impl(task, rank_all(task), k); }

std::vector<std::vector<PrPoint>> precision_recall_points(const RetrievalTask& task) {
  return pr_points_impl(task, rank_all(task));
}

CurveSeries precision_recall_curve(const RetrievalTask& task) {
  return pr_curve_impl(pr_points_impl(task, rank_all(task)));
}

CurveSeries topn_precision_curve(const RetrievalTask& task, std::span<const std::size_t> n_grid) {
  return topn_impl(task, rank_all(task), n_grid);
}

std::vector<std::size_t> default_topn_grid(std::size_t db_size) {
  std::vector<std::size_t> grid;
  if (db_size == 0) return grid;
  grid.push_back(1);
  const std::size_t steps = 20;
  for (std::size_t s = 1; s <= steps; ++s) {
    const auto n = std::max<std::size_t>(1, db_size * s / steps);
    if (n > grid.back()) grid.push_back(n);
  }
  return grid;
}

double precision_at_radius(const RetrievalTask& task, std::uint32_t radius) {
  return radius_impl(task, rank_all(task), radius).precision;
}

double map_at_radius(const RetrievalTask& task, std::uint32_t radius) {
  return radius_impl(task, rank_all(task), radius).map;
}

MetricReport evaluate(const RetrievalTask& task) {
  task.validate();
  const auto ranks = rank_all_unchecked(task);
  MetricReport r;
  r.direction = task.direction;
  r.bits = task.query.codes.bits();
  r.queries = task.query.codes.rows();
  r.database = task.db.codes.rows();
  r.map = map_impl(task, ranks, std::nullopt);
  r.ndcg_at_1000 = ndcg_impl(task, ranks, 1000);
  const auto radius = radius_impl(task, ranks, 2);
  r.precision_h2 = radius.precision;
  r.map_h2 = radius.map;
  r.pr = pr_curve_impl(pr_points_impl(task, ranks));
  const auto grid = default_topn_grid(r.database);
  r.topn = topn_impl(task, ranks, grid);
  return r;
}

std::string report_json(const MetricReport& report) {
  auto curve = [](const CurveSeries& c) {
    return nlohmann::ordered_json{{"x_label", c.x_label}, {"y_label", c.y_label}, {"x", c.x}, {"y", c.y}};
  };
  nlohmann::ordered_json j;
  j["direction"] = to_string(report.direction);
  j["K"] = report.bits;
  j["queries"] = report.queries;
  j["database"] = report.database;
  j["mAP"] = report.map;
  j["NDCG@1000"] = report.ndcg_at_1000;
  j["P@H<=2"] = report.precision_h2;
  j["mAP@H<=2"] = report.map_h2;
  j["curves"] = {{"pr", curve(report.pr)}, {"topn", curve(report.topn)}};
  return j.dump(2) + "\n";
}

std::string curve_csv(const CurveSeries& curve) {
  std::ostringstream out;
  out << "x,y\n";
  char line[96];
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", curve.x[i], curve.y[i]);
    out << line;
  }
  return out.str();
}

void write_report(const std::filesystem::path& dir, const MetricReport& report) {
  std::filesystem::create_directories(dir);
  io::write_atomic(dir / "report.json", report_json(report));
  io::write_atomic(dir / "pr_curve.csv", curve_csv(report.pr));
  io::write_atomic(dir / "topn_curve.csv", curve_csv(report.topn));
}

}  // namespace dcgh
