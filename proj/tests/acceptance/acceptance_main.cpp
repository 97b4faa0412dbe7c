// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "slidekit/cli/cli.hpp"
#include "slidekit/error.hpp"
#include "slidekit/evaluator/evaluator.hpp"
#include "slidekit/llm/mock.hpp"
#include "slidekit/numerics/layers.hpp"
#include "slidekit/numerics/lora.hpp"
#include "slidekit/numerics/losses.hpp"
#include "slidekit/numerics/optim.hpp"
#include "slidekit/numerics/sampling.hpp"
#include "slidekit/raider/raider.hpp"
#include "slidekit/trainer/trainer.hpp"
#include "slidekit/vision/tower.hpp"

namespace slidekit::acceptance {
namespace {

namespace fs = std::filesystem;
using testing::kGradTolerance;
using testing::numeric_gradient;
using testing::relative_error;
using testing::weighted_sum;

/// Collects failed expectations for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  /// Records a gradient comparison under `op`.
  void grad(const std::string& op, const Matrix& analytic, const Matrix& numeric) {
    const double err = relative_error(analytic, numeric);
    worst_ = std::max(worst_, err);
    expect(err < kGradTolerance, fmt::format("{}: relative error {:.3e}", op, err));
  }
  void note(std::string text) { notes_.push_back(std::move(text)); }

  bool passed() const { return failed_ == 0 && checks_ > 0; }
  double worst() const { return worst_; }
  std::string summary() const {
    std::string s = fmt::format("{} checks", checks_);
    for (const auto& n : notes_) s += "; " + n;
    for (const auto& f : failures_) s += "; FAILED " + f;
    if (failed_ > failures_.size()) s += fmt::format("; ... {} failures in total", failed_);
    return s;
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failed_ = 0;
  double worst_ = 0.0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_params(Check& c, const std::string& op, ParamList params, ParamList grads,
                  const std::function<double()>& loss) {
  c.expect(params.size() == grads.size(), op + ": parameter count");
  for (std::size_t i = 0; i < params.size() && i < grads.size(); ++i)
    c.grad(op + "." + params[i].name, grads[i].value, numeric_gradient(params[i].value, loss));
}

// 1. Finite differences for every differentiable operation, 20 seeds each.
Check gradient_suite() {
  Check c;
  constexpr int kSeeds = 20;
  const auto t0 = std::chrono::steady_clock::now();
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(10'000 + static_cast<std::uint64_t>(seed));

    LayerNorm ln = make_layer_norm(5);
    ln.gain = Matrix::normal(1, 5, 1.0, rng);
    ln.shift = Matrix::normal(1, 5, 1.0, rng);
    const std::vector<std::pair<std::string, Layer>> layers = {
        {"linear", make_linear(5, 4, rng)}, {"tanh", Tanh{}},     {"sigmoid", Sigmoid{}},
        {"gelu", Gelu{}},                   {"layer_norm", ln},   {"softmax", Softmax{}}};
    for (const auto& [name, proto] : layers) {
      Layer layer = proto;
      Matrix x = Matrix::normal(3, 5, 1.5, rng);
      const Matrix shape = apply_layer(layer, x);
      const Matrix up = Matrix::normal(shape.rows(), shape.cols(), 1.0, rng);
      auto loss = [&] { return weighted_sum(apply_layer(layer, x), up); };
      const auto g = layer_gradient(layer, x, up);
      c.grad(name + ".input", g.input, numeric_gradient(x, loss));
      if (auto* lin = std::get_if<Linear>(&layer)) {
        const auto& pg = std::get<Linear>(g.params);
        c.grad("linear.weight", pg.weight, numeric_gradient(lin->weight, loss));
        c.grad("linear.bias", pg.bias, numeric_gradient(lin->bias, loss));
      }
      if (auto* norm = std::get_if<LayerNorm>(&layer)) {
        const auto& pg = std::get<LayerNorm>(g.params);
        c.grad("layer_norm.gain", pg.gain, numeric_gradient(norm->gain, loss));
        c.grad("layer_norm.shift", pg.shift, numeric_gradient(norm->shift, loss));
      }
    }

    {
      Matrix logits = Matrix::normal(4, 6, 2.0, rng);
      std::vector<std::size_t> t(4);
      for (auto& v : t) v = rng() % 6;
      c.grad("cross_entropy", cross_entropy(logits, t).grad,
             numeric_gradient(logits, [&] { return cross_entropy(logits, t).loss; }));
    }
    {
      Matrix img = Matrix::normal(5, 7, 1.0, rng);
      Matrix txt = Matrix::normal(5, 7, 1.0, rng);
      const auto r = info_nce(img, txt, 0.3);
      auto loss = [&] { return info_nce(img, txt, 0.3).loss; };
      c.grad("info_nce.image", r.grad_image, numeric_gradient(img, loss));
      c.grad("info_nce.text", r.grad_text, numeric_gradient(txt, loss));
    }
    {
      LoraLinear l = make_lora(make_linear(6, 5, rng), {2, 8.0, 0.3}, rng);
      l.up = Matrix::normal(5, 2, 1.0, rng);
      Matrix x = Matrix::normal(3, 6, 1.0, rng);
      const Matrix mask = dropout_mask(3, 6, 0.3, rng);
      const Matrix up = Matrix::normal(3, 5, 1.0, rng);
      auto loss = [&] { return weighted_sum(lora_forward(l, x, &mask), up); };
      const auto g = lora_backward(l, x, up, &mask);
      c.grad("lora.input", g.input, numeric_gradient(x, loss));
      c.grad("lora.down", g.down, numeric_gradient(l.down, loss));
      c.grad("lora.up", g.up, numeric_gradient(l.up, loss));
    }
    {
      auto net = vision::make_gated_attention({6, 5, 4}, rng);
      Matrix x = Matrix::normal(2 + seed % 4, 6, 1.0, rng);
      const Matrix dv = Matrix::normal(1, 5, 1.0, rng);
      const Matrix dw = Matrix::normal(1, x.rows(), 1.0, rng);
      auto loss = [&] {
        const auto s = vision::cbpa_forward(net, x);
        return weighted_sum(s.vector, dv) + dot(s.attention_weights, dw.values());
      };
      auto g = vision::cbpa_backward(net, x, dv, dw.values());
      c.grad("cbpa.patches", g.patches, numeric_gradient(x, loss));
      check_params(c, "cbpa", net.params(), g.params.params(), loss);
    }
    {
      auto p = vision::make_projector({5, 4, 6, 3}, rng);
      Matrix x = Matrix::normal(1 + seed % 3, 5, 1.0, rng);
      const Matrix up = Matrix::normal(1, 3, 1.0, rng);
      auto loss = [&] { return weighted_sum(vision::project(p, x).output, up); };
      auto g = vision::project_backward(p, x, up);
      c.grad("project.tokens", g.tokens, numeric_gradient(x, loss));
      check_params(c, "project", p.params(), g.params.params(), loss);
    }
    {
      auto tower = vision::make_tower({{6, 5, 4}, 4, 7, 3}, rng);
      Matrix x = Matrix::normal(5, 6, 1.0, rng);
      const Matrix up = Matrix::normal(1, 3, 1.0, rng);
      auto loss = [&] { return weighted_sum(vision::tower_forward(tower, x).projection.output, up); };
      auto g = vision::tower_backward(tower, x, up);
      c.grad("tower.patches", g.patches, numeric_gradient(x, loss));
      check_params(c, "tower", tower.params(), g.params.params(), loss);
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, fmt::format("runtime {:.1f} s", secs));
  c.note(fmt::format("{} seeds, worst relative error {:.2e}, {:.2f} s", kSeeds, c.worst(), secs));
  return c;
}

// 2. Attention weights form a distribution and the bag is a set.
Check mil_invariants() {
  Check c;
  double worst_sum = 0.0, worst_perm = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    Rng rng(20'000 + static_cast<std::uint64_t>(draw));
    const std::size_t in = 3 + rng() % 6, hidden = 2 + rng() % 6, att = 2 + rng() % 5;
    const auto net = vision::make_gated_attention({in, hidden, att}, rng);
    const std::size_t n = 1 + rng() % 40;
    const Matrix x = Matrix::normal(n, in, 0.5 + static_cast<double>(rng() % 4), rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = vision::cbpa_forward(net, x);
    const auto b = vision::cbpa_forward(net, select_rows(x, perm));
    const double sum = std::accumulate(a.attention_weights.begin(), a.attention_weights.end(), 0.0);
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    c.expect(std::abs(sum - 1.0) <= 1e-6, fmt::format("draw {}: weights sum to {}", draw, sum));
    for (double w : a.attention_weights) c.expect(w >= 0.0, "negative attention weight");
    for (std::size_t j = 0; j < a.vector.cols(); ++j) {
      const double d = std::abs(a.vector(0, j) - b.vector(0, j));
      worst_perm = std::max(worst_perm, d);
      c.expect(d <= 1e-9, fmt::format("draw {}: permutation changed embedding by {}", draw, d));
    }
    const auto single = vision::cbpa_forward(net, Matrix::normal(1, in, 3.0, rng));
    c.expect(single.attention_weights.size() == 1 && single.attention_weights[0] == 1.0,
             "single patch weight is not exactly 1");
  }
  c.note(fmt::format("100 draws, max |sum-1| {:.1e}, max permutation delta {:.1e}", worst_sum,
                     worst_perm));
  return c;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

// 3. Zero adapters are invisible, merging is exact, training never touches
// the frozen weights.
Check lora_identity() {
  Check c;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(30'000 + static_cast<std::uint64_t>(seed));
    const LoraLinear l = make_lora(make_linear(9, 7, rng), {3, 16.0, 0.05}, rng);
    const Matrix x = Matrix::normal(4, 9, 1.0, rng);
    c.expect(bitwise_equal(lora_forward(l, x), forward(l.base, x)), "B=0 layer differs from base");
    LoraLinear trained = l;
    trained.up = Matrix::normal(7, 3, 1.0, rng);
    const Matrix a = lora_forward(trained, x), b = forward(lora_merge(trained), x);
    for (std::size_t i = 0; i < a.size(); ++i)
      c.expect(std::abs(a.values()[i] - b.values()[i]) <= 1e-12, "merged layer differs");
  }

  const std::vector<trainer::TokenizedExample> examples = {
      {{2, 3, 4, 5, 6, 1}, 3}, {{2, 7, 8, 9, 1}, 3}, {{3, 4, 10, 11, 12, 1}, 4}};
  Rng rng(31'000);
  const auto decoder = trainer::make_toy_decoder({13, 16, 32}, {4, 16.0, 0.05}, rng);
  for (const auto& e : examples)
    c.expect(bitwise_equal(trainer::toy_logits(decoder, e.tokens),
                           trainer::toy_base_logits(decoder, e.tokens)),
             "fresh decoder differs from base");
  const std::string before = trainer::base_weight_hash(decoder);
  trainer::TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.grad_accumulation = 1;
  cfg.epochs = 30;
  cfg.schedule.peak_lr = 1e-2;
  const auto result = trainer::train_instruction_toy(examples, decoder, cfg);
  c.expect(trainer::base_weight_hash(result.decoder) == before, "base weights changed in training");
  const auto merged = trainer::merge_adapters(result.decoder);
  double worst = 0.0;
  bool moved = false;
  for (const auto& e : examples) {
    const Matrix a = trainer::toy_logits(result.decoder, e.tokens);
    const Matrix b = trainer::toy_logits(merged, e.tokens);
    const Matrix base = trainer::toy_base_logits(result.decoder, e.tokens);
    moved = moved || !bitwise_equal(a, base);
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  c.expect(moved, "training left the adapters at zero");
  c.expect(worst <= 1e-12, fmt::format("trained decoder merged vs unmerged {:.2e}", worst));
  c.note(fmt::format("merged vs unmerged {:.1e}; base hash {}", worst, before.substr(0, 12)));
  return c;
}

// 4. Schedule boundaries and the sampling filter.
Check scheduler_sampler() {
  Check c;
  for (std::size_t total : {100u, 1000u, 4000u}) {
    const ScheduleConfig s{2e-3, total, 0.03};
    const std::size_t w = s.warmup_steps();
    c.expect(w == static_cast<std::size_t>(std::ceil(0.03 * static_cast<double>(total))),
             "warmup steps");
    c.expect(cosine_warmup_lr(0, s) == 0.0, "lr at step 0");
    c.expect(std::abs(cosine_warmup_lr(w, s) - 2e-3) <= 1e-12, "peak at warmup step");
    c.expect(std::abs(cosine_warmup_lr(total, s)) <= 1e-12, "zero at the end");
    if ((total - w) % 2 == 0)
      c.expect(std::abs(cosine_warmup_lr(w + (total - w) / 2, s) - 1e-3) <= 1e-12,
               fmt::format("half peak at the cosine midpoint (total {})", total));
  }

  const std::vector<double> logits{std::log(0.5), std::log(0.3), std::log(0.2)};
  const auto p = sample_filter(logits, {1.0, 50, 0.7, 128});
  c.expect(std::abs(p[0] - 0.625) <= 1e-15 && std::abs(p[1] - 0.375) <= 1e-15 && p[2] == 0.0,
           fmt::format("top-p example gave ({}, {}, {})", p[0], p[1], p[2]));

  std::mt19937_64 rng(40'000);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> l(2 + rng() % 60);
    for (double& v : l) v = normal(rng);
    GenerationConfig g;
    g.temperature = 0.1 + static_cast<double>(rng() % 200) / 100.0;
    g.top_k = 1 + rng() % 80;
    g.top_p = 0.05 + static_cast<double>(rng() % 96) / 100.0;
    const auto q = sample_filter(l, g);
    double sum = 0.0;
    std::size_t kept = 0;
    for (double v : q) {
      c.expect(v >= 0.0 && std::isfinite(v), "entry outside [0, inf)");
      sum += v;
      kept += v > 0.0 ? 1 : 0;
    }
    c.expect(std::abs(sum - 1.0) <= 1e-12, fmt::format("trial {} sums to {}", trial, sum));
    c.expect(kept >= 1 && kept <= g.top_k, fmt::format("trial {} keeps {} entries", trial, kept));
  }
  c.note("1000 random logit vectors are distributions");
  return c;
}

// 5. Exact top-k against an independent scan.
Check retrieval_oracle() {
  Check c;
  std::mt19937_64 rng(50'000);
  std::vector<raider::Chunk> chunks;
  raider::VectorStore store("oracle", 8);
  for (std::size_t i = 0; i < 1000; ++i) {
    raider::Chunk ch{fmt::format("doc{:02}#{:04}", (i * 7919) % 50, i), "d", 0, 1, "t", {}};
    if (i % 5 == 4) {
      ch.embedding = chunks[rng() % chunks.size()].embedding;  // exact ties
    } else {
      for (int d = 0; d < 8; ++d) ch.embedding.push_back(static_cast<double>(rng() % 5) - 2.0);
    }
    chunks.push_back(ch);
    store.add(ch);
  }
  auto scan = [&](const std::vector<double>& q, std::size_t k) {
    std::vector<std::pair<std::string, double>> all;
    double nq = 0.0;
    for (double v : q) nq += v * v;
    nq = std::sqrt(nq);
    for (const auto& ch : chunks) {
      double d = 0.0, nc = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        d += q[i] * ch.embedding[i];
        nc += ch.embedding[i] * ch.embedding[i];
      }
      nc = std::sqrt(nc);
      all.emplace_back(ch.chunk_id, nq == 0.0 || nc == 0.0 ? 0.0 : d / (nq * nc));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    all.resize(std::min(k, all.size()));
    return all;
  };
  const auto t0 = std::chrono::steady_clock::now();
  for (int qi = 0; qi < 50; ++qi) {
    std::vector<double> q;
    for (int d = 0; d < 8; ++d) q.push_back(static_cast<double>(rng() % 5) - 2.0);
    for (std::size_t k : {1u, 5u, 10u}) {
      const auto want = scan(q, k);
      const auto got = raider::retrieve(store, q, k);
      c.expect(got.size() == want.size(), "result size");
      for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i)
        c.expect(got[i].chunk->chunk_id == want[i].first &&
                     std::abs(got[i].similarity - want[i].second) <= 1e-12,
                 fmt::format("query {} k {} rank {}", qi, k, i));
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, fmt::format("runtime {:.2f} s", secs));
  c.note(fmt::format("1000 chunks, 50 queries, k in {{1, 5, 10}}, {:.2f} s", secs));
  return c;
}

// 6. The synthetic alignment run learns a transferable map.
Check alignment_signal() {
  Check c;
  const trainer::SyntheticAlignmentSpec spec;
  const auto train = trainer::synthetic_alignment_pairs(spec, 11);
  const auto held_out = trainer::synthetic_alignment_pairs(spec, 12);
  Rng rng(1);
  const auto tower = vision::make_tower({{8, 32, 16}, 32, 64, 16}, rng);
  trainer::TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.grad_accumulation = 1;
  cfg.epochs = 500;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = trainer::train_alignment(train, tower, cfg);
  const double secs = seconds_since(t0);
  const double before = trainer::top1_retrieval(tower, held_out);
  const double after = trainer::top1_retrieval(r.tower, held_out);
  c.expect(r.trace.size() <= 500, fmt::format("{} steps", r.trace.size()));
  c.expect(after >= 0.9, fmt::format("held-out top-1 {:.3f}", after));
  c.expect(secs < 120.0, fmt::format("runtime {:.1f} s", secs));

  trainer::TrainConfig single = cfg;
  single.epochs = 25;
  const auto one = trainer::train_alignment({train.front()}, tower, single);
  for (const auto& p : one.trace)
    c.expect(p.loss == 0.0, fmt::format("single-pair loss {} at step {}", p.loss, p.step));
  c.note(fmt::format("held-out top-1 {:.3f} (untrained {:.3f}) after {} steps in {:.1f} s", after,
                     before, r.trace.size(), secs));
  return c;
}

// 7. RAIDER with mock OCR, embedder and generator.
Check raider_end_to_end() {
  Check c;
  const std::vector<std::string> questions = {
      "What is a major diagnosis?",
      "What is the crucial diagnosis?",
      "What is the key diagnosis?",
      "What is the primary diagnosis?",
      "What is the key histopathological feature observed?",
      "What is the main diagnosis?",
      "What is the major diagnosis?",
      "What is the most likely diagnosis?"};
  const llm::RetryPolicy fast{3, std::chrono::milliseconds(0)};

  auto run = [&](raider::Mode mode, std::string& system_prompt) {
    auto svc = llm::MockLlmService::create();
    const llm::ChatClient client(svc->transport(), {fast, 4, false});
    const raider::RemoteTextEmbedder embedder(svc->transport(), "mock-embedder", 64, fast);
    std::vector<raider::ReportDoc> reports;
    auto ocr = svc->transport();
    for (const auto& r : raider::synthetic_reports(5, 7))
      reports.push_back(raider::ingest_ocr(r.doc_id, r.slide_id, r.text, *ocr, fast));
    raider::VectorStore store(embedder.name(), embedder.dim());
    for (const auto& r : reports) raider::embed_and_store(raider::chunk_text(r), embedder, store);
    raider::GenerationOptions o;
    o.mode = mode;
    o.model = "mock-generator";
    o.seed = 11;
    const auto result =
        raider::generate_instruction_pairs(reports, questions, client, o, &store, &embedder);
    system_prompt = svc->chat_requests().at(0).messages.at(0).content;
    c.expect(svc->call_count("/ocr") == 5, "OCR calls");
    std::string bytes;
    for (const auto& rec : result.records) bytes += raider::to_json_line(rec) + "\n";
    return std::make_pair(result.records, bytes);
  };

  for (auto mode : {raider::Mode::retrieval, raider::Mode::full_context}) {
    std::string prompt_a, prompt_b;
    const auto [records, bytes] = run(mode, prompt_a);
    const auto again = run(mode, prompt_b);
    const std::string name(raider::to_string(mode));
    c.expect(records.size() == 40, fmt::format("{}: {} records", name, records.size()));
    for (const auto& rec : records) {
      bool valid = true;
      try {
        rec.validate();
        valid = raider::record_from_json(raider::to_json_line(rec)) == rec && rec.mode == mode;
      } catch (const Error&) {
        valid = false;
      }
      c.expect(valid, name + ": schema-invalid record");
    }
    c.expect(bytes == again.second, name + ": runs differ");
    for (const char* phrase :
         {"You are a pathology lab assistant", "Extract a detailed summary of the diagnosis"})
      c.expect(prompt_a.find(phrase) != std::string::npos, name + ": prompt lacks " + phrase);
  }
  c.note("40 records per mode, byte-identical reruns");
  return c;
}

// 8. Acceptance arithmetic on 1134 cases.
Check evaluator_arithmetic() {
  Check c;
  const llm::RetryPolicy fast{3, std::chrono::milliseconds(0)};
  struct Row {
    std::size_t accepted;
    std::size_t invalid;
    const char* rate;
  };
  const Row rows[] = {{617, 0, "54.41%"}, {486, 25, "42.86%"}, {713, 3, "62.87%"}};
  for (const auto& row : rows) {
    std::vector<evaluator::EvalCase> cases;
    for (std::size_t i = 0; i < 1134; ++i) {
      const char* tag = i < row.accepted                ? "ALPHA"
                        : i < row.accepted + row.invalid ? "GAMMA"
                                                         : "BETA";
      cases.push_back({fmt::format("case-{:04}", i), "What is the primary diagnosis?",
                       "Adenocarcinoma.", {fmt::format("{} answer {}", tag, i), "runner-up"}});
    }
    auto script = llm::ScriptedReplies::from_json(R"({"rules": [
        {"contains": "You will compare", "replies": ["First is closer.\nBEST: 1"]},
        {"contains": "AI-generated Answer: ALPHA", "replies": ["Consistent with the reference. accept"]},
        {"contains": "AI-generated Answer: GAMMA", "replies": ["I cannot decide."]}
      ], "default": "Different diagnosis. reject"})");
    auto svc = llm::MockLlmService::create();
    svc->set_chat_behavior(llm::scripted(script));
    const llm::ChatClient client(svc->transport(), {fast, 8, false});
    evaluator::HarnessOptions options;
    options.workers = 4;
    const auto decisions = evaluator::run_evaluation(cases, nullptr, client, options);
    const auto report = evaluator::acceptance_report(decisions);
    c.expect(report.total == 1134, "total");
    c.expect(report.accepted == row.accepted,
             fmt::format("accepted {} != {}", report.accepted, row.accepted));
    c.expect(report.invalid == row.invalid, fmt::format("invalid {}", report.invalid));
    c.expect(report.accepted + report.rejected + report.invalid == report.total, "counts sum");
    c.expect(report.rate_percent() == row.rate,
             fmt::format("{} / 1134 -> {} (want {})", row.accepted, report.rate_percent(), row.rate));
    c.note(fmt::format("{}/1134 = {}", report.accepted, report.rate_percent()));
  }
  const std::string judge = evaluator::build_judge_prompt("q", "ref", "ans");
  for (const char* heading : {"1. Accuracy:", "2. Relevance:", "3. Completeness:", "4. Clarity:",
                              "5. Appropriateness:", "6. Consistency:", "7. Presentation:"})
    c.expect(judge.find(heading) != std::string::npos,
             fmt::format("judge prompt lacks {}", heading));
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 9. CLI runs under mocks are byte-reproducible.
Check cli_determinism() {
  Check c;
  const fs::path root = fs::temp_directory_path() / "slidekit_acceptance_cli";
  fs::remove_all(root);
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) {
    const int code = cli::run_cli(args, out, err);
    c.expect(code == 0, fmt::format("{} exited {}: {}", args[0], code, err.str()));
  };
  for (const char* name : {"a", "b"}) {
    const std::string dir = (root / name).string();
    run({"raider-generate", "--reports", "5", "--mock-llm", "--ocr", "--seed", "17", "--out", dir,
         "--log-level", "warn"});
    run({"evaluate", "--records", dir + "/records.jsonl", "--mock-llm", "--mock-evaluator",
         "--seed", "17", "--workers", "4", "--out", dir, "--log-level", "warn"});
  }
  for (const char* file : {"records.jsonl", "decisions.jsonl", "report.json"}) {
    const std::string a = slurp(root / "a" / file), b = slurp(root / "b" / file);
    c.expect(!a.empty() && a == b, fmt::format("{} differs between runs", file));
  }
  c.note(fmt::format("records.jsonl, decisions.jsonl and report.json identical ({} bytes)",
                     slurp(root / "a" / "records.jsonl").size()));
  fs::remove_all(root);
  return c;
}

}  // namespace
}  // namespace slidekit::acceptance

int main() {
  using namespace slidekit::acceptance;
  const std::vector<std::pair<const char*, Check (*)()>> criteria = {
      {"gradient suite", gradient_suite},
      {"MIL invariants", mil_invariants},
      {"LoRA identity", lora_identity},
      {"scheduler and sampler", scheduler_sampler},
      {"retrieval oracle", retrieval_oracle},
      {"alignment learning signal", alignment_signal},
      {"RAIDER end-to-end", raider_end_to_end},
      {"evaluator arithmetic", evaluator_arithmetic},
      {"CLI determinism", cli_determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check result;
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result.expect(false, std::string("exception: ") + e.what());
    }
    failed += result.passed() ? 0 : 1;
    fmt::print("{} [{}] {}: {}\n", result.passed() ? "PASS" : "FAIL", i + 1, criteria[i].first,
               result.summary());
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
             criteria.size());
  return failed == 0 ? 0 : 1;
}
