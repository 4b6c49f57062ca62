// dcgh: synth / train / encode / eval / gradcheck / ablate.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dcgh/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dcgh;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> bits;
};

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg = flags.config.empty() ? RunConfig{} : load_run_config(flags.config);
  if (flags.seed) cfg.set_seed(*flags.seed);
  if (flags.variant) cfg.train.variant = parse_variant(*flags.variant);
  if (flags.bits) cfg.train.bits = *flags.bits;
  cfg.train.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool training) {
  cmd->add_option("--config", flags.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "overrides the config seed");
  if (training) {
    cmd->add_option("--variant", flags.variant, "full|pv|xv|v");
    cmd->add_option("--bits", flags.bits, "code length K");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label cross-modal hashing: training, encoding and Hamming retrieval evaluation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  CommonFlags synth_flags;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-label dataset");
  add_common(synth, synth_flags, false);
  synth->add_option("--out", synth_out, "output directory")->required();

  CommonFlags train_flags;
  std::string train_data;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "train hash heads and proxies");
  add_common(train_cmd, train_flags, true);
  train_cmd->add_option("--data", train_data, "directory written by synth")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_out, "output directory")->required();

  std::string enc_ckpt;
  std::string enc_features;
  std::string enc_labels;
  std::string enc_modality = "image";
  std::string enc_split;
  std::string enc_subset;
  std::string enc_out;
  auto* encode = app.add_subcommand("encode", "encode features into packed binary codes");
  encode->add_option("--checkpoint", enc_ckpt)->required();
  encode->add_option("--features", enc_features)->required();
  encode->add_option("--labels", enc_labels)->required();
  encode->add_option("--modality", enc_modality, "image|text")->capture_default_str();
  encode->add_option("--split", enc_split, "split file selecting rows");
  encode->add_option("--subset", enc_subset, "query|retrieval|train (with --split)");
  encode->add_option("--out", enc_out, "output code file")->required();

  std::string eval_query;
  std::string eval_db;
  std::string eval_direction = "Img2Txt";
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate Hamming retrieval");
  eval_cmd->add_option("--query", eval_query, "query code file")->required();
  eval_cmd->add_option("--db", eval_db, "database code file")->required();
  eval_cmd->add_option("--direction", eval_direction, "Img2Txt|Txt2Img")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "report directory")->required();

  GradcheckOptions gc;
  std::optional<std::size_t> gc_n;
  std::optional<std::size_t> gc_c;
  std::optional<std::size_t> gc_fault;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  gradcheck->add_option("--seed", gc.seed)->capture_default_str();
  gradcheck->add_option("--instances", gc.instances)->capture_default_str();
  gradcheck->add_option("--n", gc_n, "fix the batch size");
  gradcheck->add_option("--c", gc_c, "fix the category count");
  gradcheck->add_option("--inject-fault", gc_fault, "perturb one analytic gradient entry (test hook)");

  CommonFlags ablate_flags;
  std::string ablate_data;
  std::string ablate_out;
  auto* ablate = app.add_subcommand("ablate", "train every loss variant and tabulate mAP");
  add_common(ablate, ablate_flags, true);
  ablate->add_option("--data", ablate_data)->required()->check(CLI::ExistingDirectory);
  ablate->add_option("--out", ablate_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      cmd_synth(resolve_config(synth_flags), synth_out);
      std::cout << "wrote synthetic dataset to " << synth_out << '\n';
    } else if (*train_cmd) {
      const auto result = cmd_train(resolve_config(train_flags), train_data, train_out);
      for (const auto& e : result.report.epochs) {
        std::printf("epoch %zu total=%.6f proxy=%.6f pair=%.6f var=%.6f (%.3fs)\n", e.epoch, e.loss.total,
                    e.loss.proxy, e.loss.pair_weighted, e.loss.variance, e.seconds);
      }
      std::cout << "checkpoint: " << result.report.checkpoint.string() << '\n';
    } else if (*encode) {
      std::optional<std::vector<std::size_t>> rows;
      if (!enc_split.empty()) {
        const auto split = load_split(enc_split);
        if (enc_subset == "query") {
          rows = split.query;
        } else if (enc_subset == "retrieval") {
          rows = split.retrieval;
        } else if (enc_subset == "train") {
          rows = split.train;
        } else {
          throw Error(ErrorCode::kInvalidArgument, "--subset must be query, retrieval or train");
        }
      } else if (!enc_subset.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "--subset requires --split");
      }
      const auto file = cmd_encode(enc_ckpt, enc_features, enc_labels, parse_modality(enc_modality), rows, enc_out);
      std::cout << "encoded " << file.codes.rows() << " rows at K=" << file.codes.bits() << " -> " << enc_out << '\n';
    } else if (*eval_cmd) {
      const auto report = cmd_eval(eval_query, eval_db, parse_direction(eval_direction), eval_out);
      std::printf("%s K=%zu queries=%zu db=%zu mAP=%.4f NDCG@1000=%.4f P@H<=2=%.4f mAP@H<=2=%.4f -> %s\n",
                  to_string(report.direction).c_str(), report.bits, report.queries, report.database, report.map,
                  report.ndcg_at_1000, report.precision_h2, report.map_h2, eval_out.c_str());
    } else if (*gradcheck) {
      gc.fixed_n = gc_n;
      gc.fixed_c = gc_c;
      gc.fault_coordinate = gc_fault;
      const auto report = run_gradcheck(gc);
      std::cout << format_gradcheck(report);
      return report.pass ? 0 : 1;
    } else if (*ablate) {
      const auto rows = cmd_ablate(resolve_config(ablate_flags), ablate_data, ablate_out);
      std::printf("%-6s %8s %8s\n", "variant", "Img2Txt", "Txt2Img");
      for (const auto& r : rows) {
        std::printf("%-6s %8.4f %8.4f\n", std::string(to_string(r.variant)).c_str(), r.img2txt, r.txt2img);
      }
    }
  } catch (const Error& e) {
    std::cerr << "dcgh: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dcgh: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
