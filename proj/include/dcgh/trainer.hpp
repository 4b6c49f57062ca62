#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcgh/data.hpp"
#include "dcgh/losses.hpp"
#include "dcgh/model.hpp"

namespace dcgh {

// Ablations of the objective.
enum class Variant {
  kFull,        // proxy + weighted pairwise + variance
  kProxyOnly,   // "P-V": proxy loss alone
  kPairOnly,    // "X-V": pairwise loss alone, alpha = beta = 1
  kNoVariance,  // "V": proxy + weighted pairwise
};

std::string_view to_string(Variant v);
// Accepts full|pv|xv|v (case-insensitive) and the long forms P-V, X-V, V.
Variant parse_variant(std::string_view text);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t bits = 16;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 0.001;
  double alpha = 0.05;
  double beta = 0.8;
  std::uint64_t seed = 0;
  Variant variant = Variant::kFull;
  AdamHyper adam;

  void validate() const;
};

// Loss terms and weights selected by the variant.
struct Objective {
  LossTerms terms;
  LossWeights weights;
};
Objective objective_for(const TrainConfig& cfg);

struct AdamState {
  std::uint64_t step = 0;
  // One entry per parameter tensor, mirroring its shape (flattened).
  std::vector<std::vector<float>> first;
  std::vector<std::vector<float>> second;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

AdamState make_adam_state(std::span<const std::size_t> tensor_sizes);

// One bias-corrected Adam update over every tensor; increments state.step.
void adam_step(std::span<const std::span<float>> params, std::span<const std::span<const double>> grads,
               AdamState& state, double lr, const AdamHyper& hyper = {});

// Seeded permutation of 0..n-1 for the given epoch, chunked; the last batch may be short.
std::vector<std::vector<std::size_t>> shuffle_batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch,
                                                      std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  std::uint64_t steps = 0;  // optimizer steps completed at the end of this epoch
  LossBreakdown loss;       // mean over the epoch's batches
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::filesystem::path checkpoint;
};

struct TrainResult {
  Model model;
  AdamState adam;
  TrainReport report;
};

// Parameter tensors in checkpoint order: W_x, b_x, W_y, b_y, P.
std::vector<std::span<float>> parameter_tensors(Model& model);
std::vector<std::size_t> parameter_sizes(const Model& model);

// Runs a single optimizer step on one batch; exposed for tests.
LossBreakdown train_step(Model& model, AdamState& adam, const TrainConfig& cfg, const FeatureMatrix& x,
                         const FeatureMatrix& y, const LabelMatrix& labels, std::uint64_t step);

TrainResult train(const TrainConfig& cfg, const FeatureMatrix& x, const FeatureMatrix& y, const LabelMatrix& labels);

// Continues from an existing model / optimizer state.
TrainResult train(const TrainConfig& cfg, const FeatureMatrix& x, const FeatureMatrix& y, const LabelMatrix& labels,
                  Model model, AdamState adam);

struct Checkpoint {
  Model model;
  AdamState adam;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const AdamState& adam);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// CSV: epoch,step,proxy,pair_pos,pair_neg,variance,total
std::string format_train_log(const TrainReport& report);

}  // namespace dcgh
