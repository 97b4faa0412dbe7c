// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slidekit/cli/cli.hpp"
#include "slidekit/cli/config.hpp"
#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"
#include "slidekit/evaluator/evaluator.hpp"
#include "slidekit/raider/raider.hpp"
#include "slidekit/tiling/tiling.hpp"

namespace slidekit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  const std::string text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

/// Fresh directory per test; commands run with `--out <dir>/<name>`.
class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("slidekit_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str({});
    err_.str({});
    return run_cli(args, out_, err_);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  std::string slide_png() {
    const auto p = path("s1.png");
    tiling::save_image(tiling::synthetic_slide(640, 512, 3), p.string());
    return p.string();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(Cli, TileWritesManifestAndRunRecord) {
  const auto image = slide_png();
  const auto out = path("runs").string();
  ASSERT_EQ(run({"tile", "--image", image, "--out", out}), kExitOk) << err_.str();
  const auto manifest = tiling::load_manifest((fs::path(out) / "s1.tiles.json").string());
  EXPECT_EQ(manifest.slide_id, "s1");
  EXPECT_EQ(manifest.patch_size, 256u);

  const json run_record = json::parse(slurp(fs::path(out) / "tile.run.json"));
  EXPECT_EQ(run_record["command"], "tile");
  EXPECT_EQ(run_record["status"], "ok");
  EXPECT_EQ(run_record["seed"], 0);
  EXPECT_EQ(run_record["config_sha256"].get<std::string>().size(), 64u);
  EXPECT_TRUE(run_record["versions"].contains("slidekit"));
  ASSERT_EQ(run_record["outputs"].size(), 1u);
  EXPECT_EQ(run_record["outputs"][0]["path"], "s1.tiles.json");
  EXPECT_EQ(run_record["outputs"][0]["sha256"],
            sha256_hex(slurp(fs::path(out) / "s1.tiles.json")));
}

TEST_F(Cli, TileEncodeAggregateChain) {
  const auto image = slide_png();
  const auto out = path("runs").string();
  ASSERT_EQ(run({"tile", "--image", image, "--out", out, "--patch-size", "128"}), kExitOk)
      << err_.str();
  ASSERT_EQ(run({"encode", "--image", image, "--out", out, "--set", "tiling.patch_size=128",
                 "--dim", "16", "--mock-llm"}),
            kExitOk)
      << err_.str();
  const auto tiles = tiling::load_manifest((fs::path(out) / "s1.tiles.json").string());
  const auto emb = load_cxpm((fs::path(out) / "s1.embeddings.cxpm").string());
  EXPECT_EQ(emb.rows(), tiles.entries.size());
  EXPECT_EQ(emb.cols(), 16u);

  ASSERT_EQ(run({"aggregate", "--embeddings", (fs::path(out) / "s1.embeddings.cxpm").string(),
                 "--out", out, "--set", "tower.input=16", "--set", "tower.hidden=8", "--set",
                 "tower.attention=4", "--set", "tower.projector_model=8", "--set",
                 "tower.projector_hidden=16", "--set", "tower.output=8"}),
            kExitOk)
      << err_.str();
  const json slide = json::parse(slurp(fs::path(out) / "s1.slide.json"));
  EXPECT_EQ(slide["slide_id"], "s1");
  EXPECT_EQ(slide["attention_weights"].size(), tiles.entries.size());
  double total = 0.0;
  for (double w : slide["attention_weights"]) total += w;
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(slide["projection"].size(), 8u);
}

TEST_F(Cli, RaiderGenerateFullContextGivesFortyRecords) {
  const auto out = path("runs").string();
  ASSERT_EQ(run({"raider-generate", "--mode", "full_context", "--reports", "5", "--mock-llm",
                 "--out", out}),
            kExitOk)
      << err_.str();
  const auto records = raider::load_records((fs::path(out) / "records.jsonl").string());
  ASSERT_EQ(records.size(), 40u);
  for (const auto& r : records) {
    EXPECT_NO_THROW(r.validate());
    EXPECT_EQ(r.mode, raider::Mode::full_context);
    EXPECT_TRUE(r.context_chunk_ids.empty());
  }
}

TEST_F(Cli, RaiderBuildThenGenerateFromStore) {
  const auto out = path("runs").string();
  ASSERT_EQ(run({"raider-build", "--reports", "5", "--mock-llm", "--ocr", "--out", out}), kExitOk)
      << err_.str();
  const auto store = raider::VectorStore::load((fs::path(out) / "store.jsonl").string());
  EXPECT_GE(store.size(), 5u);
  ASSERT_EQ(run({"raider-generate", "--reports", "5", "--mock-llm", "--ocr", "--store",
                 (fs::path(out) / "store.jsonl").string(), "--out", out, "--top-k", "2"}),
            kExitOk)
      << err_.str();
  const auto records = raider::load_records((fs::path(out) / "records.jsonl").string());
  ASSERT_EQ(records.size(), 40u);
  for (const auto& r : records) {
    EXPECT_EQ(r.mode, raider::Mode::retrieval);
    EXPECT_GE(r.context_chunk_ids.size(), 1u);
    EXPECT_LE(r.context_chunk_ids.size(), 2u);
  }

  // A store from another embedder is refused.
  ASSERT_EQ(run({"raider-generate", "--reports", "5", "--mock-llm", "--store",
                 (fs::path(out) / "store.jsonl").string(), "--out", out, "--set",
                 "raider.embedding_dim=32"}),
            kExitFailure);
  EXPECT_NE(err_.str().find("error:"), std::string::npos);
}

TEST_F(Cli, RaiderGenerateIsByteReproducible) {
  for (const char* mode : {"retrieval", "full_context"}) {
    const auto a = path(std::string("a_") + mode), b = path(std::string("b_") + mode);
    for (const auto& out : {a, b})
      ASSERT_EQ(run({"raider-generate", "--mode", mode, "--reports", "5", "--mock-llm", "--ocr",
                     "--seed", "7", "--out", out.string()}),
                kExitOk)
          << err_.str();
    EXPECT_EQ(slurp(a / "records.jsonl"), slurp(b / "records.jsonl")) << mode;
    EXPECT_EQ(line_count(a / "records.jsonl"), 40u);
  }
  // Re-running into the same directory replaces the file instead of appending.
  const auto a = path("a_retrieval");
  ASSERT_EQ(run({"raider-generate", "--reports", "5", "--mock-llm", "--ocr", "--seed", "7",
                 "--out", a.string()}),
            kExitOk);
  EXPECT_EQ(line_count(a / "records.jsonl"), 40u);
}

std::string write_cases(const fs::path& p, std::size_t good, std::size_t bad) {
  std::vector<evaluator::EvalCase> cases;
  for (std::size_t i = 0; i < good + bad; ++i) {
    const bool ok = i < good;
    cases.push_back({fmt::format("case-{:03}", i), "What is the primary diagnosis?",
                     "Invasive ductal carcinoma.",
                     {ok ? "GOOD invasive ductal carcinoma" : "BAD benign tissue", "other"}});
  }
  evaluator::save_cases(p.string(), cases);
  return p.string();
}

std::string write_script(const fs::path& p) {
  std::ofstream(p) << R"({"rules": [
    {"contains": "You will compare", "replies": ["Candidate 1 is closest.\nBEST: 1"]},
    {"contains": "AI-generated Answer: GOOD", "replies": ["Matches the reference. accept"]}
  ], "default": "Wrong tissue. reject"})";
  return p.string();
}

TEST_F(Cli, EvaluateThenReportMatchesHandCount) {
  const auto cases = write_cases(path("cases.jsonl"), 7, 4);
  const auto script = write_script(path("script.json"));
  const auto out = path("runs").string();
  ASSERT_EQ(run({"evaluate", "--cases", cases, "--mock-evaluator", script, "--out", out}), kExitOk)
      << err_.str();
  ASSERT_EQ(run({"report", "--out", out, "--label", "mock"}), kExitOk) << err_.str();
  EXPECT_NE(out_.str().find("63.64%"), std::string::npos) << out_.str();  // 7 / 11

  const json summary = json::parse(slurp(fs::path(out) / "summary.json"));
  ASSERT_EQ(summary["rows"].size(), 1u);
  const auto& row = summary["rows"][0];
  EXPECT_EQ(row["label"], "mock");
  EXPECT_EQ(row["total"], 11);
  EXPECT_EQ(row["accepted"], 7);
  EXPECT_EQ(row["rejected"], 4);
  EXPECT_EQ(row["invalid"], 0);
  EXPECT_EQ(row["acceptance_rate"], "63.64%");
}

TEST_F(Cli, EvaluateIsByteReproducible) {
  const auto out1 = path("one"), out2 = path("two");
  ASSERT_EQ(run({"raider-generate", "--reports", "3", "--mock-llm", "--out", out1.string()}),
            kExitOk);
  const auto records = (out1 / "records.jsonl").string();
  for (const auto& out : {out1, out2})
    ASSERT_EQ(run({"evaluate", "--records", records, "--mock-llm", "--mock-evaluator", "--seed",
                   "3", "--workers", "4", "--candidates", "4", "--out", out.string()}),
              kExitOk)
        << err_.str();
  EXPECT_EQ(slurp(out1 / "decisions.jsonl"), slurp(out2 / "decisions.jsonl"));
  EXPECT_EQ(slurp(out1 / "report.json"), slurp(out2 / "report.json"));
  const auto report = evaluator::report_from_json(slurp(out1 / "report.json"));
  EXPECT_EQ(report.total, 24u);
  EXPECT_EQ(report.accepted + report.rejected + report.invalid, report.total);
}

TEST_F(Cli, TrainAlignSyntheticReachesHeldOutTarget) {
  const auto out = path("align");
  ASSERT_EQ(run({"train-align", "--seed", "11", "--epochs", "500", "--batch-size", "32",
                 "--grad-accumulation", "1", "--set", "tower.input=8", "--set", "tower.hidden=32",
                 "--set", "tower.attention=16", "--set", "tower.projector_model=32", "--set",
                 "tower.projector_hidden=64", "--set", "tower.output=16", "--out", out.string()}),
            kExitOk)
      << err_.str();
  const json metrics = json::parse(slurp(out / "align_metrics.json"));
  EXPECT_EQ(metrics["steps"], 500);
  EXPECT_GE(metrics["held_out_top1"].get<double>(), 0.9);
  EXPECT_EQ(line_count(out / "align_loss.csv"), 501u);
  EXPECT_TRUE(fs::exists(out / "tower" / "shapes.json"));
}

TEST_F(Cli, TrainInstructKeepsBaseWeights) {
  const auto out = path("instruct");
  ASSERT_EQ(run({"raider-generate", "--reports", "2", "--mode", "full_context", "--mock-llm",
                 "--out", out.string()}),
            kExitOk);
  ASSERT_EQ(run({"train-instruct", "--records", (out / "records.jsonl").string(), "--epochs", "5",
                 "--lr", "0.01", "--lora-rank", "8", "--out", out.string()}),
            kExitOk)
      << err_.str();
  const json metrics = json::parse(slurp(out / "instruct_metrics.json"));
  EXPECT_EQ(metrics["records"], 16);
  EXPECT_LT(metrics["last_loss"].get<double>(), metrics["first_loss"].get<double>());
  for (const char* name : {"proj.lora_down", "proj.lora_up", "head.lora_down", "head.lora_up"})
    EXPECT_TRUE(fs::exists(out / "adapters" / (std::string(name) + ".cxpm"))) << name;
  EXPECT_EQ(load_cxpm((out / "adapters" / "proj.lora_down.cxpm").string()).rows(), 8u);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"frobnicate"}), kExitUsage);
  EXPECT_EQ(run({"tile", "--image", slide_png(), "--no-such-flag"}), kExitUsage);
  EXPECT_EQ(run({"tile"}), kExitUsage);
  EXPECT_EQ(run({"raider-generate", "--reports", "5", "--mode", "sideways"}), kExitUsage);
  EXPECT_EQ(run({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("raider-generate"), std::string::npos);
}

TEST_F(Cli, ModuleFailuresExitOne) {
  const auto out = path("runs").string();
  // The generator endpoint is neither configured nor mocked.
  EXPECT_EQ(run({"raider-generate", "--reports", "2", "--out", out}), kExitFailure);
  EXPECT_NE(err_.str().find("endpoint 'generator' is not configured"), std::string::npos)
      << err_.str();
  const json failed = json::parse(slurp(fs::path(out) / "raider-generate.run.json"));
  EXPECT_EQ(failed["status"], "failed");

  std::ofstream(path("broken.png")) << "not an image";
  EXPECT_EQ(run({"tile", "--image", path("broken.png").string(), "--out", out}), kExitFailure);
  EXPECT_EQ(run({"tile", "--image", slide_png(), "--out", out, "--set", "tiling.nope=1"}),
            kExitFailure);
  EXPECT_NE(err_.str().find("unknown configuration key 'tiling.nope'"), std::string::npos);
}

TEST_F(Cli, EverySubcommandSupportsDryRun) {
  const auto image = slide_png();
  std::ofstream(path("x.jsonl")) << "";
  const auto x = path("x.jsonl").string();
  const auto out = path("dry").string();
  const std::vector<std::vector<std::string>> commands = {
      {"tile", "--image", image},
      {"encode", "--image", image},
      {"aggregate", "--embeddings", x},
      {"train-align"},
      {"train-instruct", "--records", x},
      {"raider-build", "--reports", "5"},
      {"raider-generate", "--reports", "5", "--mode", "full_context"},
      {"evaluate", "--cases", x},
      {"report"}};
  for (auto cmd : commands) {
    cmd.insert(cmd.end(), {"--dry-run", "--out", out, "--seed", "9"});
    ASSERT_EQ(run(cmd), kExitOk) << cmd[0] << ": " << err_.str();
    const json effective = json::parse(out_.str());
    EXPECT_EQ(effective["seed"], 9) << cmd[0];
    EXPECT_EQ(effective["output_dir"], out) << cmd[0];
  }
  EXPECT_FALSE(fs::exists(out));

  ASSERT_EQ(run({"raider-generate", "--reports", "5", "--mode", "full_context", "--top-k", "7",
                 "--mock-llm", "--dry-run"}),
            kExitOk);
  const json effective = json::parse(out_.str());
  EXPECT_EQ(effective["raider"]["mode"], "full_context");
  EXPECT_EQ(effective["raider"]["top_k"], 7);
  EXPECT_EQ(effective["endpoints"]["generator"]["url"], "mock");
  EXPECT_EQ(effective["endpoints"]["evaluator"]["url"], "");
}

TEST(PipelineConfig, DefaultsMirrorModuleDefaults) {
  const PipelineConfig cfg;
  EXPECT_EQ(cfg.seed(), 0u);
  EXPECT_EQ(cfg.tile_params().patch_size, tiling::TileParams{}.patch_size);
  EXPECT_EQ(cfg.tile_params().min_tissue_fraction, tiling::TileParams{}.min_tissue_fraction);
  EXPECT_EQ(cfg.chunking().chunk_size, raider::ChunkingConfig{}.chunk_size);
  EXPECT_EQ(cfg.chunking().overlap, raider::ChunkingConfig{}.overlap);
  EXPECT_EQ(cfg.generation_options().top_k, raider::GenerationOptions{}.top_k);
  EXPECT_EQ(cfg.generation().temperature, GenerationConfig{}.temperature);
  EXPECT_EQ(cfg.generation().top_p, GenerationConfig{}.top_p);
  EXPECT_EQ(cfg.harness_options().candidates, evaluator::kDefaultCandidates);
  EXPECT_EQ(cfg.harness_options().evaluator.attempts, evaluator::kEvaluatorAttempts);
  EXPECT_EQ(cfg.alignment_training().effective_batch(), 128u);
  EXPECT_EQ(cfg.alignment_training().schedule.warmup_ratio, 0.03);
  EXPECT_EQ(cfg.instruction_training().schedule.peak_lr, 2e-5);
  EXPECT_EQ(cfg.lora().rank, 64u);
  EXPECT_EQ(cfg.lora().alpha, 16.0);
  EXPECT_EQ(cfg.lora().dropout, 0.05);
  EXPECT_EQ(cfg.tower_dims().output, 4096u);
}

TEST(PipelineConfig, OverridesAreValidated) {
  PipelineConfig cfg;
  const std::string before = cfg.hash();
  cfg.set("raider.top_k=9");
  EXPECT_EQ(cfg.generation_options().top_k, 9u);
  EXPECT_NE(cfg.hash(), before);
  cfg.set("raider.mode=full_context");
  EXPECT_EQ(cfg.generation_options().mode, raider::Mode::full_context);
  cfg.set("endpoints.generator.url=http://127.0.0.1:9");
  EXPECT_EQ(cfg.endpoint("generator").url, "http://127.0.0.1:9");

  EXPECT_THROW(cfg.set("raider.top_kk=3"), ConfigError);
  EXPECT_THROW(cfg.set("raider.top_k=many"), ConfigError);
  EXPECT_THROW(cfg.set("raider.top_k"), ConfigError);
  EXPECT_THROW(cfg.set("raider=3"), ConfigError);
  EXPECT_THROW(cfg.endpoint("evaluator"), ConfigError);
  EXPECT_THROW(cfg.merge(json{{"endpoints", {{"search", {{"url", "x"}}}}}}), ConfigError);
  cfg.set("raider.top_k=-1");
  EXPECT_THROW(cfg.generation_options(), ConfigError);
}

TEST(PipelineConfig, LoadsFileAndEnvironment) {
  const auto p = fs::temp_directory_path() / "slidekit_cli_config.json";
  std::ofstream(p) << R"({"seed": 42, "endpoints": {"evaluator": {"url": "mock", "model": "judge-70b",
                         "token_env": "SLIDEKIT_TEST_JUDGE_KEY"}}})";
  auto cfg = PipelineConfig::load(p.string());
  EXPECT_EQ(cfg.seed(), 42u);
  ::setenv("SLIDEKIT_TEST_JUDGE_KEY", "secret-token", 1);
  ::setenv("SLIDEKIT_GENERATOR_URL", "http://10.0.0.1:8000", 1);
  cfg.apply_environment();
  ::unsetenv("SLIDEKIT_TEST_JUDGE_KEY");
  ::unsetenv("SLIDEKIT_GENERATOR_URL");
  const auto judge = cfg.endpoint("evaluator");
  EXPECT_TRUE(judge.is_mock());
  EXPECT_EQ(judge.model, "judge-70b");
  EXPECT_EQ(judge.token, "secret-token");
  EXPECT_EQ(cfg.endpoint("generator").url, "http://10.0.0.1:8000");
  // Secrets never reach the document that is hashed and written to manifests.
  EXPECT_EQ(cfg.document().dump().find("secret-token"), std::string::npos);

  std::ofstream(p) << R"({"seed": "zero"})";
  EXPECT_THROW(PipelineConfig::load(p.string()), ConfigError);
  std::ofstream(p) << "{not json";
  EXPECT_THROW(PipelineConfig::load(p.string()), ConfigError);
  fs::remove(p);
}

}  // namespace
}  // namespace slidekit::cli
