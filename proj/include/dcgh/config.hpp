#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dcgh/data.hpp"
#include "dcgh/trainer.hpp"

namespace dcgh {

// Everything a pipeline run depends on. One seed drives data generation,
// splitting, initialization, shuffling and dropout.
struct RunConfig {
  SyntheticSpec synth;
  std::size_t n_query = 24;
  std::size_t n_train = 0;  // 0 = the whole retrieval set
  TrainConfig train;

  std::uint64_t seed() const noexcept { return train.seed; }
  void set_seed(std::uint64_t seed) noexcept {
    train.seed = seed;
    synth.seed = seed;
  }
};

// "key = value" lines; '#' starts a comment. Unknown or repeated keys and
// malformed values are kConfig errors.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical text form, parseable by parse_run_config.
std::string format_run_config(const RunConfig& cfg);

}  // namespace dcgh
