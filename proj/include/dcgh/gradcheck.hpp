#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcgh/losses.hpp"

namespace dcgh {

enum class LossFamily { kProxy, kPair, kVariance, kTotal };
std::string to_string(LossFamily f);

// Random loss instance: codes, proxies, labels and the matching similarity block.
struct LossInstance {
  BinaryLikeCodes hx;
  BinaryLikeCodes hy;
  Matrix<double> proxies;
  LabelMatrix labels;
  SimilarityMatrix sim;
};

// Draws n samples over c categories with code length k. Codes are uniform in
// (-0.95, 0.95); every label row has at least one category.
LossInstance random_instance(std::size_t n, std::size_t c, std::size_t k, std::uint64_t seed);

// Smallest |argument| over all hinge / clamp terms, excluding self-pairs
// (whose hinge can never reach its kink).
double kink_margin(const LossInstance& inst);

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 20;
  std::size_t max_n = 8;
  std::size_t max_c = 5;
  std::vector<std::size_t> code_lengths{8, 16, 32};
  std::optional<std::size_t> fixed_n;
  std::optional<std::size_t> fixed_c;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Instances with a hinge argument closer than this to its kink are redrawn.
  double min_kink_margin = 1e-3;
  // Test hook: adds `fault_delta` to one analytic gradient entry (flat index
  // over [codes_x, codes_y, proxies]) of every family on the first instance.
  std::optional<std::size_t> fault_coordinate;
  double fault_delta = 1e-2;
};

struct FamilyResult {
  LossFamily family = LossFamily::kTotal;
  double max_rel_error = 0.0;
  std::size_t worst_instance = 0;
  std::string worst_coordinate;  // e.g. "codes_x[2,5]"
  bool pass = true;
};

struct GradcheckReport {
  std::vector<FamilyResult> families;
  std::size_t instances = 0;
  bool pass = true;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric);
inline constexpr double kRelativeErrorFloor = 1e-6;

GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace dcgh
