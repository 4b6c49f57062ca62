#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcgh/encoder.hpp"

namespace dcgh {

enum class Direction { kImg2Txt, kTxt2Img };

std::string to_string(Direction d);
Direction parse_direction(std::string_view text);

struct RetrievalTask {
  CodeFile query;
  CodeFile db;
  Direction direction = Direction::kImg2Txt;

  // Equal K on both sides, shared category count, non-empty sides.
  void validate() const;
};

// Database order for one query: ascending distance, ties by ascending index.
struct RankedList {
  std::vector<std::uint32_t> order;
  std::vector<std::uint32_t> distance;
};

struct CurveSeries {
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
};

// popcount(a xor b) over packed rows of `bits` valid bits.
std::uint32_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                               std::size_t bits);
std::uint32_t hamming_distance(const BinaryCodeMatrix& a, std::size_t i, const BinaryCodeMatrix& b, std::size_t j);

RankedList rank_query(const RetrievalTask& task, std::size_t query);
std::vector<RankedList> rank_all(const RetrievalTask& task);

// Binary relevance: the two rows share at least one label.
bool relevant(const RetrievalTask& task, std::size_t query, std::size_t item);

// Queries without any relevant database item are excluded; if that leaves
// none, throws kUndefinedMetric. With top_k, AP is normalised by the relevant
// items found within the cutoff (0 if there are none).
double mean_average_precision(const RetrievalTask& task, std::optional<std::size_t> top_k = std::nullopt);

// Graded relevance r = |shared labels|, gain 2^r - 1, log2(i + 1) discount.
double ndcg_at_k(const RetrievalTask& task, std::size_t k = 1000);

// One (recall, precision) point per rank cutoff 1..|db|, per query.
struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};
std::vector<std::vector<PrPoint>> precision_recall_points(const RetrievalTask& task);

// Interpolated precision on the 101-point recall grid, averaged over queries
// with at least one relevant item.
CurveSeries precision_recall_curve(const RetrievalTask& task);

// Mean precision@n for each n of a strictly increasing grid within [1, |db|].
CurveSeries topn_precision_curve(const RetrievalTask& task, std::span<const std::size_t> n_grid);
std::vector<std::size_t> default_topn_grid(std::size_t db_size);

// Restricted to items within Hamming distance <= radius; an empty ball
// scores 0 for that query. Averaged over all queries.
double precision_at_radius(const RetrievalTask& task, std::uint32_t radius = 2);
double map_at_radius(const RetrievalTask& task, std::uint32_t radius = 2);

struct MetricReport {
  Direction direction = Direction::kImg2Txt;
  std::size_t bits = 0;
  std::size_t queries = 0;
  std::size_t database = 0;
  double map = 0.0;
  double ndcg_at_1000 = 0.0;
  double precision_h2 = 0.0;
  double map_h2 = 0.0;
  CurveSeries pr;
  CurveSeries topn;
};

MetricReport evaluate(const RetrievalTask& task);

std::string report_json(const MetricReport& report);
std::string curve_csv(const CurveSeries& curve);

// Writes report.json, pr_curve.csv and topn_curve.csv into dir.
void write_report(const std::filesystem::path& dir, const MetricReport& report);

}  // namespace dcgh
