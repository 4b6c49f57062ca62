#include "dcgh/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dcgh/binary_io.hpp"

namespace dcgh {
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::vector<std::size_t>& train_rows(const DatasetSplit& split) {
  if (split.train.empty()) throw Error(ErrorCode::kEmptyInput, "split has no training rows");
  return split.train;
}

MetricReport evaluate_direction(const CodeFile& query, const CodeFile& db, Direction direction) {
  return evaluate(RetrievalTask{query, db, direction});
}

}  // namespace

void write_manifest(const fs::path& path, const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["tool"] = "dcgh";
  j["tool_version"] = manifest.tool_version;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [p, digest] : manifest.input_digests) inputs[p] = digest;
  j["inputs"] = inputs;
  j["artifacts"] = manifest.artifacts;
  j["created_utc"] = utc_now();
  io::write_atomic(path, j.dump(2) + "\n");
}

Modality parse_modality(std::string_view text) {
  if (text == "image" || text == "img" || text == "x") return Modality::kImage;
  if (text == "text" || text == "txt" || text == "y") return Modality::kText;
  throw Error(ErrorCode::kInvalidArgument, "unknown modality '" + std::string(text) + "'");
}

void cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
  const auto data = generate_synthetic(cfg.synth);
  const auto n = data.labels.rows();
  const auto n_train = cfg.n_train == 0 && n > cfg.n_query ? n - cfg.n_query : cfg.n_train;
  const auto split = make_split(n, cfg.n_query, n_train, cfg.seed());
  fs::create_directories(out_dir);
  write_features(out_dir / files::kImage, data.image);
  write_features(out_dir / files::kText, data.text);
  write_labels(out_dir / files::kLabels, data.labels);
  write_split(out_dir / files::kSplit, split);
  RunManifest m;
  m.command = "synth";
  m.config = format_run_config(cfg);
  m.seed = cfg.seed();
  m.artifacts = {files::kImage, files::kText, files::kLabels, files::kSplit};
  write_manifest(out_dir / files::kManifest, m);
}

TrainResult cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  const fs::path inputs[] = {data_dir / files::kImage, data_dir / files::kText, data_dir / files::kLabels,
                             data_dir / files::kSplit};
  RunManifest m;
  m.command = "train";
  m.config = format_run_config(cfg);
  m.seed = cfg.seed();
  for (const auto& p : inputs) m.input_digests[p.string()] = io::sha256_file(p);
  m.artifacts = {files::kCheckpoint, files::kTrainLog};

  const auto x = load_features(inputs[0]);
  const auto y = load_features(inputs[1]);
  const auto labels = load_labels(inputs[2]);
  const auto split = load_split(inputs[3]);
  const auto& rows = train_rows(split);

  fs::create_directories(out_dir);
  write_manifest(out_dir / files::kManifest, m);

  auto result = train(cfg.train, gather_rows(x, rows), gather_rows(y, rows), labels.select(rows));
  save_checkpoint(out_dir / files::kCheckpoint, result.model, result.adam);
  io::write_atomic(out_dir / files::kTrainLog, format_train_log(result.report));
  result.report.checkpoint = out_dir / files::kCheckpoint;
  return result;
}

CodeFile cmd_encode(const fs::path& checkpoint, const fs::path& features, const fs::path& labels_path,
                    Modality modality, const std::optional<std::vector<std::size_t>>& rows, const fs::path& out) {
  const auto ck = load_checkpoint(checkpoint);
  auto x = load_features(features);
  auto labels = load_labels(labels_path);
  if (x.rows() != labels.rows()) throw Error(ErrorCode::kShapeMismatch, "features and labels differ in rows");
  if (labels.categories() != ck.model.proxies.categories()) {
    throw Error(ErrorCode::kShapeMismatch, "labels have " + std::to_string(labels.categories()) +
                                               " categories, checkpoint has " +
                                               std::to_string(ck.model.proxies.categories()));
  }
  if (rows) {
    x = gather_rows(x, *rows);
    labels = labels.select(*rows);
  }
  const auto& head = modality == Modality::kImage ? ck.model.image : ck.model.text;
  CodeFile file{encode_dataset(head, x), std::move(labels)};
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_code_file(out, file);
  return file;
}

MetricReport cmd_eval(const fs::path& query_codes, const fs::path& db_codes, Direction direction,
                      const fs::path& out_dir) {
  const auto query = load_code_file(query_codes);
  const auto db = load_code_file(db_codes);
  const auto report = evaluate_direction(query, db, direction);
  write_report(out_dir, report);
  return report;
}

ExperimentResult run_experiment(const TrainConfig& cfg, const SyntheticData& data, const DatasetSplit& split) {
  auto training = train(cfg, gather_rows(data.image, split.train), gather_rows(data.text, split.train),
                        data.labels.select(split.train));
  const auto& model = training.model;
  const auto q_labels = data.labels.select(split.query);
  const auto db_labels = data.labels.select(split.retrieval);
  const CodeFile q_img{encode_dataset(model.image, gather_rows(data.image, split.query)), q_labels};
  const CodeFile q_txt{encode_dataset(model.text, gather_rows(data.text, split.query)), q_labels};
  const CodeFile db_img{encode_dataset(model.image, gather_rows(data.image, split.retrieval)), db_labels};
  const CodeFile db_txt{encode_dataset(model.text, gather_rows(data.text, split.retrieval)), db_labels};
  auto i2t = evaluate_direction(q_img, db_txt, Direction::kImg2Txt);
  auto t2i = evaluate_direction(q_txt, db_img, Direction::kTxt2Img);
  return {std::move(training), std::move(i2t), std::move(t2i)};
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  const SyntheticData data{load_features(data_dir / files::kImage), load_features(data_dir / files::kText),
                           load_labels(data_dir / files::kLabels)};
  const auto split = load_split(data_dir / files::kSplit);
  std::vector<AblationRow> rows;
  std::ostringstream csv;
  csv << "variant,img2txt,txt2img,mean\n";
  for (auto v : {Variant::kProxyOnly, Variant::kPairOnly, Variant::kNoVariance, Variant::kFull}) {
    auto tc = cfg.train;
    tc.variant = v;
    const auto r = run_experiment(tc, data, split);
    rows.push_back({v, r.img2txt.map, r.txt2img.map});
    char line[128];
    std::snprintf(line, sizeof line, "%s,%.17g,%.17g,%.17g\n", std::string(to_string(v)).c_str(), r.img2txt.map,
                  r.txt2img.map, r.mean_map());
    csv << line;
  }
  fs::create_directories(out_dir);
  io::write_atomic(out_dir / "ablation.csv", csv.str());
  return rows;
}

std::string format_gradcheck(const GradcheckReport& report) {
  std::ostringstream out;
  char line[256];
  for (const auto& f : report.families) {
    std::snprintf(line, sizeof line, "%-9s max_rel_error=%.3e %s", to_string(f.family).c_str(), f.max_rel_error,
                  f.pass ? "PASS" : "FAIL");
    out << line;
    if (!f.pass) out << " at instance " << f.worst_instance << " " << f.worst_coordinate;
    out << '\n';
  }
  out << "instances=" << report.instances << " result=" << (report.pass ? "PASS" : "FAIL") << '\n';
  return out.str();
}

}  // namespace dcgh
