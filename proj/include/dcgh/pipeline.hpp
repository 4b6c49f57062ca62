#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcgh/config.hpp"
#include "dcgh/encoder.hpp"
#include "dcgh/eval.hpp"
#include "dcgh/gradcheck.hpp"
#include "dcgh/trainer.hpp"

namespace dcgh {

inline constexpr std::string_view kToolVersion = "0.1.0";

namespace files {
inline constexpr const char* kImage = "image.feat";
inline constexpr const char* kText = "text.feat";
inline constexpr const char* kLabels = "labels.lbl";
inline constexpr const char* kSplit = "split.txt";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kCheckpoint = "checkpoint.bin";
inline constexpr const char* kTrainLog = "train_log.csv";
}  // namespace files

struct RunManifest {
  std::string command;
  std::string config;  // canonical config text
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::vector<std::string> artifacts;
  std::string tool_version{kToolVersion};
};

// Digests every input as it is written; includes a UTC timestamp.
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

enum class Modality { kImage, kText };
Modality parse_modality(std::string_view text);

// Generates both modalities, labels and the split into out_dir.
void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Trains on the split's training rows; writes checkpoint, CSV log and manifest.
TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir);

// Encodes the chosen modality (optionally a subset of rows) into a code file.
CodeFile cmd_encode(const std::filesystem::path& checkpoint, const std::filesystem::path& features,
                    const std::filesystem::path& labels, Modality modality,
                    const std::optional<std::vector<std::size_t>>& rows, const std::filesystem::path& out);

MetricReport cmd_eval(const std::filesystem::path& query_codes, const std::filesystem::path& db_codes,
                      Direction direction, const std::filesystem::path& out_dir);

// In-memory train -> encode -> evaluate, both retrieval directions.
struct ExperimentResult {
  TrainResult training;
  MetricReport img2txt;
  MetricReport txt2img;
  double mean_map() const noexcept { return 0.5 * (img2txt.map + txt2img.map); }
};

ExperimentResult run_experiment(const TrainConfig& cfg, const SyntheticData& data, const DatasetSplit& split);

struct AblationRow {
  Variant variant = Variant::kFull;
  double img2txt = 0.0;
  double txt2img = 0.0;
};

// Trains every variant on the same data and tabulates mAP; writes ablation.csv.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const std::filesystem::path& data_dir,
                                    const std::filesystem::path& out_dir);

std::string format_gradcheck(const GradcheckReport& report);

}  // namespace dcgh
