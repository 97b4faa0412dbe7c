// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/cli/cli.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "commands.hpp"
#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"

namespace slidekit::cli {
namespace {

using nlohmann::json;

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                     fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

json versions() {
  return {{"slidekit", std::string(kVersion)},
          {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                        NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)},
          {"fmt", fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100,
                              FMT_VERSION % 100)},
          {"spdlog", fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH)},
          {"CLI11", CLI11_VERSION}};
}

/// <out>/<command>.run.json: what ran, with which configuration, and the
/// digest of every file it wrote. The only place wall-clock time appears.
void write_manifest(const RunContext& ctx, const std::string& command,
                    const std::vector<std::string>& args, const std::string& started,
                    const std::string& status, const std::string& error) {
  json outputs = json::array();
  for (const auto& p : ctx.recorded())
    if (fs::exists(p))
      outputs.push_back({{"path", fs::relative(p, ctx.out_dir()).generic_string()},
                         {"sha256", file_sha256(p)}});
  json manifest = {{"command", command},
                   {"args", args},
                   {"status", status},
                   {"config_sha256", ctx.config().hash()},
                   {"config", ctx.config().document()},
                   {"seed", ctx.config().seed()},
                   {"versions", versions()},
                   {"started_at", started},
                   {"finished_at", utc_now()},
                   {"outputs", outputs}};
  if (!error.empty()) manifest["error"] = error;
  fs::create_directories(ctx.out_dir());
  std::ofstream out(ctx.out_dir() / (command + ".run.json"), std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << "\n";
}

/// Routes spdlog to `err` for the duration of one run.
class LogScope {
 public:
  LogScope(std::ostream& err, spdlog::level::level_enum level) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    sink->set_pattern("[%l] %v");
    auto logger = std::make_shared<spdlog::logger>("slidekit", sink);
    logger->set_level(level);
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> workers;
  std::vector<std::string> sets;
  bool dry_run = false;
  bool mock_llm = false;
  std::string log_level = "info";
};

/// Flag that writes one configuration key.
void add_override(CLI::App* app, std::vector<std::string>& overrides, const std::string& flag,
                  const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&overrides, key](const std::string& v) { overrides.push_back(key + "=" + v); },
      help + " (" + key + ")");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Slide-level vision-language pipeline toolkit", "slidekit"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(kVersion));

  GlobalFlags g;
  std::vector<std::string> overrides;
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Pipeline seed (seed)");
  app.add_option("--out", g.out, "Output directory (output_dir)");
  app.add_option("--workers", g.workers, "Worker threads (workers)");
  app.add_option("--set", g.sets, "Configuration override key.path=value (repeatable)");
  app.add_flag("--dry-run", g.dry_run, "Print the effective configuration and exit");
  app.add_flag("--mock-llm", g.mock_llm,
               "Use in-process mocks for the generator, embedder, ocr and encoder endpoints");
  auto* mock_eval = app.add_option("--mock-evaluator", "Use the in-process mock evaluator, "
                                                       "optionally driven by a reply script")
                        ->expected(0, 1);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::map<std::string, std::function<void(RunContext&)>> actions;
  auto sub = [&](const std::string& name, const std::string& help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  TileArgs tile;
  auto* tile_cmd = sub("tile", "Tissue mask and patch grid for one slide image");
  tile_cmd->add_option("--image", tile.image, "Slide image")->required()->check(CLI::ExistingFile);
  tile_cmd->add_option("--slide-id", tile.slide_id, "Slide id (default: image file stem)");
  add_override(tile_cmd, overrides, "--patch-size", "tiling.patch_size", "Patch edge in pixels");
  add_override(tile_cmd, overrides, "--stride", "tiling.stride", "Grid stride, 0 = patch size");
  add_override(tile_cmd, overrides, "--min-tissue", "tiling.min_tissue_fraction",
               "Minimum tissue fraction per patch");
  actions["tile"] = [&](RunContext& c) { run_tile(c, tile); };

  EncodeArgs encode;
  auto* encode_cmd = sub("encode", "Patch embeddings for a tiled slide");
  encode_cmd->add_option("--image", encode.image, "Slide image")->required()->check(CLI::ExistingFile);
  encode_cmd->add_option("--tiles", encode.tiles, "Tile manifest (default: <out>/<slide>.tiles.json)");
  encode_cmd->add_option("--slide-id", encode.slide_id, "Slide id (default: image file stem)");
  add_override(encode_cmd, overrides, "--dim", "tiling.encoder_dim", "Embedding size");
  actions["encode"] = [&](RunContext& c) { run_encode(c, encode); };

  AggregateArgs aggregate;
  auto* aggregate_cmd = sub("aggregate", "Slide embedding and projection from patch embeddings");
  aggregate_cmd->add_option("--embeddings", aggregate.embeddings, "Patch embedding matrix (.cxpm)")
      ->required()
      ->check(CLI::ExistingFile);
  aggregate_cmd->add_option("--checkpoint", aggregate.checkpoint, "Vision tower checkpoint directory")
      ->check(CLI::ExistingDirectory);
  aggregate_cmd->add_option("--slide-id", aggregate.slide_id, "Slide id");
  actions["aggregate"] = [&](RunContext& c) { run_aggregate(c, aggregate); };

  TrainAlignArgs align;
  auto* align_cmd = sub("train-align", "Phase 1: align the vision tower with target embeddings");
  align_cmd->add_option("--pairs", align.pairs, "Alignment pairs JSON Lines (default: synthetic)")
      ->check(CLI::ExistingFile);
  align_cmd->add_option("--init-checkpoint", align.init_checkpoint, "Starting tower checkpoint")
      ->check(CLI::ExistingDirectory);
  add_override(align_cmd, overrides, "--epochs", "alignment.epochs", "Epochs");
  add_override(align_cmd, overrides, "--batch-size", "alignment.batch_size", "Micro-batch size");
  add_override(align_cmd, overrides, "--grad-accumulation", "alignment.grad_accumulation",
               "Micro-batches per step");
  add_override(align_cmd, overrides, "--lr", "alignment.peak_lr", "Peak learning rate");
  add_override(align_cmd, overrides, "--objective", "alignment.objective", "contrastive or token_ce");
  actions["train-align"] = [&](RunContext& c) { run_train_align(c, align); };

  TrainInstructArgs instruct;
  auto* instruct_cmd = sub("train-instruct", "Phase 2: LoRA instruction tuning of the toy decoder");
  instruct_cmd->add_option("--records", instruct.records, "Instruction records JSON Lines")
      ->required()
      ->check(CLI::ExistingFile);
  add_override(instruct_cmd, overrides, "--epochs", "instruction.epochs", "Epochs");
  add_override(instruct_cmd, overrides, "--batch-size", "instruction.batch_size", "Micro-batch size");
  add_override(instruct_cmd, overrides, "--grad-accumulation", "instruction.grad_accumulation",
               "Micro-batches per step");
  add_override(instruct_cmd, overrides, "--lr", "instruction.peak_lr", "Peak learning rate");
  add_override(instruct_cmd, overrides, "--lora-rank", "instruction.lora_rank", "LoRA rank");
  actions["train-instruct"] = [&](RunContext& c) { run_train_instruct(c, instruct); };

  RaiderArgs raider;
  auto add_report_flags = [&](CLI::App* s) {
    s->add_option("--reports", raider.reports,
                  "Report directory, JSON Lines file, or a count of synthetic reports")
        ->required();
    s->add_flag("--ocr", raider.ocr, "Pass every report through the OCR endpoint");
    add_override(s, overrides, "--chunk-size", "raider.chunk_size", "Chunk size in characters");
    add_override(s, overrides, "--chunk-overlap", "raider.chunk_overlap", "Chunk overlap");
  };
  auto* build_cmd = sub("raider-build", "Chunk, embed and store pathology reports");
  add_report_flags(build_cmd);
  actions["raider-build"] = [&](RunContext& c) { run_raider_build(c, raider); };

  auto* generate_cmd = sub("raider-generate", "Generate instruction records from reports");
  add_report_flags(generate_cmd);
  generate_cmd->add_option("--store", raider.store, "Vector store from raider-build")
      ->check(CLI::ExistingFile);
  generate_cmd->add_option("--questions", raider.questions, "Questions, one per line")
      ->check(CLI::ExistingFile);
  generate_cmd
      ->add_option_function<std::string>(
          "--mode", [&](const std::string& v) { overrides.push_back("raider.mode=" + v); },
          "retrieval or full_context (raider.mode)")
      ->check(CLI::IsMember({"retrieval", "full_context"}));
  add_override(generate_cmd, overrides, "--top-k", "raider.top_k", "Chunks retrieved per question");
  add_override(generate_cmd, overrides, "--samples", "raider.samples_per_question",
               "Answers per question");
  actions["raider-generate"] = [&](RunContext& c) { run_raider_generate(c, raider); };

  EvaluateArgs evaluate;
  auto* evaluate_cmd = sub("evaluate", "Best-of-N selection and accept/reject judging");
  auto* cases_opt = evaluate_cmd->add_option("--cases", evaluate.cases, "Evaluation cases JSON Lines")
                        ->check(CLI::ExistingFile);
  auto* records_opt =
      evaluate_cmd->add_option("--records", evaluate.records, "Instruction records as test pairs")
          ->check(CLI::ExistingFile);
  cases_opt->excludes(records_opt);
  evaluate_cmd->add_option("--answers", evaluate.answers, "Recorded candidate answers JSON Lines")
      ->check(CLI::ExistingFile);
  add_override(evaluate_cmd, overrides, "--candidates", "evaluation.candidates",
               "Candidates per question");
  actions["evaluate"] = [&](RunContext& c) { run_evaluate(c, evaluate); };

  ReportArgs report;
  auto* report_cmd = sub("report", "Acceptance table from decision files");
  report_cmd->add_option("--decisions", report.decisions, "Decision files (default: <out>/decisions.jsonl)")
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--label", report.labels, "Row label per decision file");
  actions["report"] = [&](RunContext& c) { run_report(c, report); };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  LogScope logs(err, spdlog::level::from_str(g.log_level));
  const std::string command = app.get_subcommands().front()->get_name();
  const std::string started = utc_now();
  std::unique_ptr<RunContext> ctx;
  try {
    PipelineConfig cfg = g.config.empty() ? PipelineConfig() : PipelineConfig::load(g.config);
    cfg.apply_environment();
    for (const auto& s : g.sets) cfg.set(s);
    for (const auto& s : overrides) cfg.set(s);
    if (g.seed) cfg.merge({{"seed", *g.seed}});
    if (!g.out.empty()) cfg.merge({{"output_dir", g.out}});
    if (g.workers) cfg.merge({{"workers", *g.workers}});
    if (g.mock_llm)
      for (const char* name : {"generator", "embedder", "ocr", "encoder"})
        cfg.merge({{"endpoints", {{name, {{"url", kMock}}}}}});
    std::string script;
    if (mock_eval->count() > 0) {
      if (!mock_eval->results().empty()) script = mock_eval->as<std::string>();
      cfg.merge({{"endpoints", {{"evaluator", {{"url", kMock}}}}}, {"evaluation", {{"mock_script", script}}}});
    } else {
      script = cfg.document().at("evaluation").at("mock_script").get<std::string>();
    }

    if (g.dry_run) {
      out << cfg.document().dump(2) << "\n";
      return kExitOk;
    }
    ctx = std::make_unique<RunContext>(std::move(cfg), out, script);
    spdlog::info("{}: config {} seed {}", command, ctx->config().hash().substr(0, 12),
                 ctx->config().seed());
    actions.at(command)(*ctx);
    write_manifest(*ctx, command, args, started, "ok", {});
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    if (ctx) {
      try {
        write_manifest(*ctx, command, args, started, "failed", e.what());
      } catch (const std::exception& inner) {
        err << "error: could not write run manifest: " << inner.what() << "\n";
      }
    }
    return kExitFailure;
  }
}

}  // namespace slidekit::cli
