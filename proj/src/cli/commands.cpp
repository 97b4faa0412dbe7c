// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>

#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"
#include "slidekit/evaluator/evaluator.hpp"
#include "slidekit/prompts.hpp"
#include "slidekit/tiling/tiling.hpp"
#include "slidekit/trainer/trainer.hpp"
#include "slidekit/vision/tower.hpp"

namespace slidekit::cli {

using nlohmann::json;

RunContext::RunContext(PipelineConfig cfg, std::ostream& out, std::string evaluator_script)
    : cfg_(std::move(cfg)),
      out_(out),
      evaluator_script_(std::move(evaluator_script)),
      out_dir_(cfg_.output_dir()) {}

fs::path RunContext::output(const std::string& name) {
  fs::create_directories(out_dir_);
  return out_dir_ / name;
}

void RunContext::record(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    recorded_.insert(recorded_.end(), files.begin(), files.end());
  } else {
    recorded_.push_back(path);
  }
}

std::shared_ptr<llm::MockLlmService> RunContext::mock_services() {
  if (!mock_) {
    mock_ = llm::MockLlmService::create();
    mock_->set_text_embedding_dim(cfg_.text_embedding_dim());
    mock_->set_patch_embedding_dim(cfg_.encoder_dim());
  }
  return mock_;
}

std::shared_ptr<llm::MockLlmService> RunContext::mock_evaluator() {
  if (!mock_eval_) {
    mock_eval_ = llm::MockLlmService::create();
    if (evaluator_script_.empty()) {
      mock_eval_->set_chat_behavior(evaluator::digest_evaluator());
    } else {
      auto script = llm::ScriptedReplies::load(evaluator_script_);
      mock_eval_->script_statuses(script->statuses());
      mock_eval_->set_chat_behavior(llm::scripted(script));
    }
  }
  return mock_eval_;
}

std::shared_ptr<llm::Transport> RunContext::transport(const Endpoint& endpoint) {
  if (endpoint.is_mock()) {
    spdlog::debug("{}: using the in-process mock", endpoint.name);
    return endpoint.name == "evaluator" ? mock_evaluator()->transport()
                                        : mock_services()->transport();
  }
  return std::make_shared<llm::HttpTransport>(endpoint.url, endpoint.token);
}

llm::RetryPolicy RunContext::retry(const Endpoint& endpoint) {
  return {endpoint.max_attempts, std::chrono::milliseconds(endpoint.backoff_ms)};
}

std::unique_ptr<llm::ChatClient> RunContext::chat_client(std::string_view name) {
  const Endpoint ep = cfg_.endpoint(name);
  llm::ClientOptions options;
  options.retry = retry(ep);
  options.max_in_flight = ep.max_in_flight;
  // The mocks parse the top_k extension, so there is nothing to drop.
  options.supports_top_k = ep.supports_top_k || ep.is_mock();
  return std::make_unique<llm::ChatClient>(transport(ep), options);
}

std::unique_ptr<raider::TextEmbedder> RunContext::text_embedder() {
  if (!cfg_.has_endpoint("embedder"))
    return std::make_unique<raider::StubTextEmbedder>(cfg_.text_embedding_dim());
  const Endpoint ep = cfg_.endpoint("embedder");
  return std::make_unique<raider::RemoteTextEmbedder>(transport(ep), ep.model,
                                                      cfg_.text_embedding_dim(), retry(ep));
}

namespace {

std::string file_stem(const std::string& path, std::string_view strip_suffix = {}) {
  std::string stem = fs::path(path).filename().string();
  if (!strip_suffix.empty() && stem.size() > strip_suffix.size() &&
      stem.compare(stem.size() - strip_suffix.size(), strip_suffix.size(), strip_suffix) == 0)
    return stem.substr(0, stem.size() - strip_suffix.size());
  return fs::path(path).stem().string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

/// A number means that many synthetic reports; anything else is a path.
std::vector<raider::ReportDoc> reports_from(RunContext& ctx, const RaiderArgs& args) {
  if (args.reports.empty()) throw InputError("--reports is required");
  auto docs = all_digits(args.reports)
                  ? raider::synthetic_reports(std::stoul(args.reports), ctx.config().seed())
                  : raider::load_reports(args.reports);
  if (docs.empty()) throw InputError("no reports found in '" + args.reports + "'");
  if (args.ocr) {
    const Endpoint ep = ctx.config().endpoint("ocr");
    auto transport = ctx.transport(ep);
    for (auto& d : docs)
      d = raider::ingest_ocr(d.doc_id, d.slide_id, d.text, *transport, RunContext::retry(ep));
  }
  spdlog::info("loaded {} reports", docs.size());
  return docs;
}

raider::VectorStore build_store(const std::vector<raider::ReportDoc>& docs,
                                const raider::TextEmbedder& embedder,
                                const raider::ChunkingConfig& chunking) {
  std::vector<raider::Chunk> chunks;
  for (const auto& d : docs) {
    auto c = raider::chunk_text(d, chunking);
    chunks.insert(chunks.end(), std::make_move_iterator(c.begin()),
                  std::make_move_iterator(c.end()));
  }
  raider::VectorStore store(embedder.name(), embedder.dim());
  raider::embed_and_store(std::move(chunks), embedder, store);
  return store;
}

std::vector<std::string> load_questions(const std::string& path) {
  std::vector<std::string> questions;
  if (path.empty()) {
    questions.assign(prompts::kQuestions.begin(), prompts::kQuestions.end());
    return questions;
  }
  std::ifstream in(path);
  if (!in) throw InputError("cannot read questions '" + path + "'");
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty()) questions.push_back(line);
  }
  if (questions.empty()) throw InputError("questions file '" + path + "' is empty");
  return questions;
}

json matrix_row(const Matrix& m) { return json(std::vector<double>(m.values().begin(), m.values().end())); }

double first_loss(const std::vector<trainer::LossPoint>& trace) {
  return trace.empty() ? 0.0 : trace.front().loss;
}

double last_loss(const std::vector<trainer::LossPoint>& trace) {
  return trace.empty() ? 0.0 : trace.back().loss;
}

/// JSON Lines of {slide_id, embeddings: <cxpm path>, target: [...],
/// caption_tokens: [...]}. Relative paths resolve against the file.
std::vector<trainer::AlignmentPair> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read alignment pairs '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  std::vector<trainer::AlignmentPair> pairs;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      trainer::AlignmentPair p;
      p.slide_id = j.at("slide_id").get<std::string>();
      fs::path emb = j.at("embeddings").get<std::string>();
      if (emb.is_relative()) emb = base / emb;
      p.patch_embeddings = load_cxpm(emb.string());
      p.target_embedding = j.at("target").get<std::vector<double>>();
      p.caption_tokens = j.value("caption_tokens", std::vector<std::size_t>{});
      pairs.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw FormatError(fmt::format("{}:{}: {}", path, line_no, e.what()));
    }
  }
  return pairs;
}

}  // namespace

void run_tile(RunContext& ctx, const TileArgs& args) {
  const auto image = tiling::load_image(args.image);
  const std::string slide_id = args.slide_id.empty() ? file_stem(args.image) : args.slide_id;
  const auto mask = tiling::tissue_mask(image, ctx.config().tissue_threshold());
  const auto manifest = tiling::tile_grid(slide_id, mask, ctx.config().tile_params());
  const auto path = ctx.output(slide_id + ".tiles.json");
  tiling::save_manifest(manifest, path.string());
  ctx.record(path);
  spdlog::info("{}: {}x{}, tissue {:.3f}, {} patches", slide_id, image.width, image.height,
               mask.tissue_fraction(), manifest.entries.size());
  ctx.out() << path.string() << "\n";
}

void run_encode(RunContext& ctx, const EncodeArgs& args) {
  const auto image = tiling::load_image(args.image);
  const std::string slide_id = args.slide_id.empty() ? file_stem(args.image) : args.slide_id;
  const fs::path tiles =
      args.tiles.empty() ? ctx.out_dir() / (slide_id + ".tiles.json") : fs::path(args.tiles);
  auto manifest = tiling::load_manifest(tiles.string());
  manifest.validate(image.width, image.height);

  std::unique_ptr<tiling::PatchEncoder> encoder;
  if (ctx.config().has_endpoint("encoder")) {
    const Endpoint ep = ctx.config().endpoint("encoder");
    encoder = std::make_unique<tiling::RemoteEncoder>(ctx.transport(ep), ctx.config().encoder_dim(),
                                                      RunContext::retry(ep));
  } else {
    encoder = std::make_unique<tiling::StubEncoder>(ctx.config().encoder_dim());
  }
  const auto embeddings =
      tiling::encode_patches(manifest, image, *encoder, ctx.config().workers());
  const auto path = ctx.output(slide_id + ".embeddings.cxpm");
  save_cxpm(path.string(), embeddings.values);
  ctx.record(path);
  spdlog::info("{}: encoded {} patches into {} dims", slide_id, embeddings.values.rows(),
               embeddings.values.cols());
  ctx.out() << path.string() << "\n";
}

void run_aggregate(RunContext& ctx, const AggregateArgs& args) {
  const Matrix patches = load_cxpm(args.embeddings);
  const std::string slide_id =
      args.slide_id.empty() ? file_stem(args.embeddings, ".embeddings.cxpm") : args.slide_id;
  vision::VisionTower tower;
  if (!args.checkpoint.empty()) {
    tower = vision::load_checkpoint(args.checkpoint);
  } else {
    Rng rng(ctx.config().seed());
    tower = vision::make_tower(ctx.config().tower_dims(), rng);
  }
  if (patches.cols() != tower.dims().aggregator.input)
    throw DimensionError(fmt::format("embeddings are {}-dim but the tower expects {}",
                                     patches.cols(), tower.dims().aggregator.input));
  const auto fwd = vision::tower_forward(tower, patches);
  json doc = {{"slide_id", slide_id},
              {"patches", patches.rows()},
              {"checkpoint", args.checkpoint.empty() ? json(nullptr) : json(args.checkpoint)},
              {"attention_weights", fwd.slide.attention_weights},
              {"slide_embedding", matrix_row(fwd.slide.vector)},
              {"projection", matrix_row(fwd.projection.output)}};
  const auto path = ctx.output(slide_id + ".slide.json");
  write_text(path, doc.dump() + "\n");
  ctx.record(path);
  ctx.out() << path.string() << "\n";
}

void run_train_align(RunContext& ctx, const TrainAlignArgs& args) {
  const auto& cfg = ctx.config();
  const auto train_cfg = cfg.alignment_training();
  std::vector<trainer::AlignmentPair> train, held_out;
  if (args.pairs.empty()) {
    const auto spec = cfg.synthetic_alignment();
    train = trainer::synthetic_alignment_pairs(spec, cfg.seed());
    auto held_spec = spec;
    held_spec.pairs = cfg.synthetic_held_out();
    held_out = trainer::synthetic_alignment_pairs(held_spec, cfg.seed() + 1);
  } else {
    train = load_pairs(args.pairs);
  }

  vision::VisionTower tower;
  if (!args.init_checkpoint.empty()) {
    tower = vision::load_checkpoint(args.init_checkpoint);
  } else {
    Rng rng(cfg.seed());
    tower = vision::make_tower(cfg.tower_dims(), rng);
  }

  std::optional<trainer::LinearDecoder> decoder;
  if (train_cfg.objective == trainer::Objective::token_ce) {
    std::size_t vocab = 0;
    for (const auto& p : train)
      for (std::size_t t : p.caption_tokens) vocab = std::max(vocab, t + 1);
    if (vocab == 0) throw InputError("token_ce objective needs pairs with caption_tokens");
    Rng rng(stable_hash64(fmt::format("decoder:{}", cfg.seed())));
    decoder = trainer::make_linear_decoder(tower.dims().output, vocab, rng);
  }

  const auto result = trainer::train_alignment(train, std::move(tower), train_cfg,
                                               decoder ? &*decoder : nullptr);
  const auto tower_dir = ctx.output("tower");
  vision::save_checkpoint(tower_dir.string(), result.tower);
  ctx.record(tower_dir);
  const auto trace = ctx.output("align_loss.csv");
  trainer::save_loss_trace(trace.string(), result.trace);
  ctx.record(trace);

  json metrics = {{"pairs", train.size()},
                  {"steps", result.trace.size()},
                  {"objective", trainer::to_string(train_cfg.objective)},
                  {"first_loss", first_loss(result.trace)},
                  {"last_loss", last_loss(result.trace)},
                  {"train_top1", trainer::top1_retrieval(result.tower, train)}};
  if (!held_out.empty()) metrics["held_out_top1"] = trainer::top1_retrieval(result.tower, held_out);
  const auto metrics_path = ctx.output("align_metrics.json");
  write_text(metrics_path, metrics.dump(2) + "\n");
  ctx.record(metrics_path);
  ctx.out() << metrics.dump(2) << "\n";
}

void run_train_instruct(RunContext& ctx, const TrainInstructArgs& args) {
  const auto& cfg = ctx.config();
  if (args.records.empty()) throw InputError("--records is required");
  const auto records = raider::load_records(args.records);
  if (records.empty()) throw InputError("no instruction records in '" + args.records + "'");
  const auto vocab = trainer::records_vocabulary(records);
  const auto examples = trainer::tokenize_records(records, vocab);
  std::size_t longest = 0;
  for (const auto& e : examples) longest = std::max(longest, e.tokens.size());

  trainer::ToyDecoderDims dims;
  dims.vocab = vocab.size();
  dims.dim = cfg.toy_decoder_dim();
  dims.max_positions = std::max<std::size_t>(dims.max_positions, longest);
  Rng rng(cfg.seed());
  auto decoder = trainer::make_toy_decoder(dims, cfg.lora(), rng);
  const std::string base_hash = trainer::base_weight_hash(decoder);
  auto result = trainer::train_instruction_toy(examples, std::move(decoder),
                                               cfg.instruction_training());

  const auto adapters = ctx.output("adapters");
  fs::create_directories(adapters);
  for (auto& p : result.decoder.trainable_params())
    save_cxpm((adapters / (p.name + ".cxpm")).string(), p.value.get());
  ctx.record(adapters);
  const auto trace = ctx.output("instruct_loss.csv");
  trainer::save_loss_trace(trace.string(), result.trace);
  ctx.record(trace);
  std::string words;
  for (std::size_t i = 0; i < vocab.size(); ++i) words += vocab.word(i) + "\n";
  const auto vocab_path = ctx.output("vocabulary.txt");
  write_text(vocab_path, words);
  ctx.record(vocab_path);

  const json metrics = {{"records", records.size()},
                        {"vocabulary", vocab.size()},
                        {"steps", result.trace.size()},
                        {"first_loss", first_loss(result.trace)},
                        {"last_loss", last_loss(result.trace)},
                        {"base_weight_sha256", base_hash}};
  const auto metrics_path = ctx.output("instruct_metrics.json");
  write_text(metrics_path, metrics.dump(2) + "\n");
  ctx.record(metrics_path);
  ctx.out() << metrics.dump(2) << "\n";
}

void run_raider_build(RunContext& ctx, const RaiderArgs& args) {
  const auto docs = reports_from(ctx, args);
  const auto embedder = ctx.text_embedder();
  const auto store = build_store(docs, *embedder, ctx.config().chunking());
  const auto path = ctx.output("store.jsonl");
  store.save(path.string());
  ctx.record(path);
  ctx.record(path.string() + ".meta.json");
  spdlog::info("stored {} chunks from {} reports ({})", store.size(), docs.size(),
               store.embedder());
  ctx.out() << path.string() << "\n";
}

void run_raider_generate(RunContext& ctx, const RaiderArgs& args) {
  const auto& cfg = ctx.config();
  const auto docs = reports_from(ctx, args);
  const auto questions = load_questions(args.questions);
  auto options = cfg.generation_options();
  options.model = cfg.endpoint("generator").model;
  const auto client = ctx.chat_client("generator");

  std::unique_ptr<raider::TextEmbedder> embedder;
  std::optional<raider::VectorStore> store;
  if (options.mode == raider::Mode::retrieval) {
    embedder = ctx.text_embedder();
    if (args.store.empty()) {
      store = build_store(docs, *embedder, cfg.chunking());
    } else {
      store = raider::VectorStore::load(args.store);
      if (store->embedder() != embedder->name() || store->dim() != embedder->dim())
        throw StoreError(fmt::format("store was built with {} ({} dims), the embedder is {} ({} dims)",
                                     store->embedder(), store->dim(), embedder->name(),
                                     embedder->dim()));
    }
  }

  const auto result = raider::generate_instruction_pairs(docs, questions, *client, options,
                                                         store ? &*store : nullptr, embedder.get());
  const auto path = ctx.output("records.jsonl");
  fs::remove(path);
  raider::append_records(path.string(), result.records);
  ctx.record(path);
  spdlog::info("{} records from {} attempts, {} failures", result.records.size(), result.attempted,
               result.failures.size());
  ctx.out() << path.string() << "\n";
}

void run_evaluate(RunContext& ctx, const EvaluateArgs& args) {
  const auto& cfg = ctx.config();
  if (args.cases.empty() == args.records.empty())
    throw InputError("exactly one of --cases or --records is required");
  std::vector<evaluator::EvalCase> cases;
  if (!args.cases.empty()) {
    cases = evaluator::load_cases(args.cases);
  } else {
    const auto records = raider::load_records(args.records);
    for (std::size_t i = 0; i < records.size(); ++i)
      cases.push_back({fmt::format("{}:{:05}", records[i].slide_id, i), records[i].question,
                       records[i].answer, {}});
  }

  std::optional<evaluator::RecordedAnswerSource> recorded;
  std::unique_ptr<llm::ChatClient> generator;
  std::optional<evaluator::ChatAnswerSource> generated;
  const evaluator::AnswerSource* source = nullptr;
  const bool need_answers = std::any_of(cases.begin(), cases.end(), [](const auto& c) {
    return c.candidate_answers.empty();
  });
  if (!args.answers.empty()) {
    recorded = evaluator::RecordedAnswerSource::load(args.answers);
    source = &*recorded;
  } else if (need_answers) {
    generator = ctx.chat_client("generator");
    generated.emplace(*generator, cfg.endpoint("generator").model, cfg.seed());
    source = &*generated;
  }

  auto options = cfg.harness_options();
  options.evaluator.model = cfg.endpoint("evaluator").model;
  const auto judge = ctx.chat_client("evaluator");
  const auto decisions = evaluator::run_evaluation(cases, source, *judge, options);

  const auto decisions_path = ctx.output("decisions.jsonl");
  evaluator::save_decisions(decisions_path.string(), decisions);
  ctx.record(decisions_path);
  const auto report = evaluator::acceptance_report(decisions);
  const auto report_path = ctx.output("report.json");
  write_text(report_path, evaluator::to_json(report) + "\n");
  ctx.record(report_path);
  ctx.out() << fmt::format("accepted {} of {} ({}), rejected {}, invalid {}\n", report.accepted,
                           report.total, report.rate_percent(), report.rejected, report.invalid);
}

void run_report(RunContext& ctx, const ReportArgs& args) {
  std::vector<std::string> files = args.decisions;
  if (files.empty()) files.push_back((ctx.out_dir() / "decisions.jsonl").string());
  if (!args.labels.empty() && args.labels.size() != files.size())
    throw InputError(fmt::format("{} labels given for {} decision files", args.labels.size(),
                                 files.size()));
  std::vector<std::pair<std::string, evaluator::AcceptanceReport>> rows;
  json summary = json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string label = args.labels.empty() ? file_stem(files[i]) : args.labels[i];
    const auto report = evaluator::acceptance_report(evaluator::load_decisions(files[i]));
    summary.push_back({{"label", label},
                       {"decisions", files[i]},
                       {"total", report.total},
                       {"accepted", report.accepted},
                       {"rejected", report.rejected},
                       {"invalid", report.invalid},
                       {"acceptance_rate", report.rate_percent()}});
    rows.emplace_back(label, report);
  }
  const auto path = ctx.output("summary.json");
  write_text(path, json{{"rows", summary}}.dump(2) + "\n");
  ctx.record(path);
  ctx.out() << evaluator::format_table(rows);
}

}  // namespace slidekit::cli
