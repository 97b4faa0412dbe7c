// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "slidekit/cli/cli.hpp"
#include "slidekit/error.hpp"
#include "slidekit/evaluator/evaluator.hpp"
#include "slidekit/numerics/losses.hpp"
#include "slidekit/numerics/optim.hpp"
#include "slidekit/numerics/sampling.hpp"
#include "slidekit/prompts.hpp"
#include "slidekit/raider/raider.hpp"
#include "slidekit/tiling/tiling.hpp"
#include "slidekit/vision/tower.hpp"

namespace py = pybind11;
using namespace slidekit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.values().begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), a.mutable_data());
  return a;
}

tiling::RasterImage to_image(
    const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionError("expected an H×W or H×W×C image");
  const std::size_t channels = a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1;
  tiling::RasterImage img(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)),
                          channels);
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

/// Pipeline for the tissue mask and grid of one in-memory image.
py::list tile_image(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& image,
                    std::size_t patch_size, std::size_t stride, double min_tissue, int threshold) {
  const auto img = to_image(image);
  tiling::TileParams p;
  p.patch_size = patch_size;
  p.stride = stride;
  p.min_tissue_fraction = min_tissue;
  const auto manifest = tiling::tile_grid("image", tiling::tissue_mask(img, threshold), p);
  py::list out;
  for (const auto& [x, y] : manifest.entries) out.append(py::make_tuple(x, y));
  return out;
}

class Tower {
 public:
  Tower(std::size_t input, std::size_t hidden, std::size_t attention, std::size_t projector_model,
        std::size_t projector_hidden, std::size_t output, std::uint64_t seed) {
    Rng rng(seed);
    tower_ = vision::make_tower({{input, hidden, attention}, projector_model, projector_hidden, output},
                                rng);
  }
  explicit Tower(vision::VisionTower t) : tower_(std::move(t)) {}

  static Tower load(const std::string& dir) { return Tower(vision::load_checkpoint(dir)); }
  void save(const std::string& dir) const { vision::save_checkpoint(dir, tower_); }

  py::dict forward(const Array& patches) const {
    const auto out = vision::tower_forward(tower_, to_matrix(patches));
    py::dict d;
    d["slide_embedding"] = to_array(out.slide.vector);
    d["attention_weights"] = out.slide.attention_weights;
    d["projection"] = to_array(out.projection.output);
    return d;
  }

  py::dict dims() const {
    const auto d = tower_.dims();
    py::dict r;
    r["input"] = d.aggregator.input;
    r["hidden"] = d.aggregator.hidden;
    r["attention"] = d.aggregator.attention;
    r["projector_model"] = d.projector_model;
    r["projector_hidden"] = d.projector_hidden;
    r["output"] = d.output;
    return r;
  }

 private:
  vision::VisionTower tower_;
};

/// Chunk store over the hashed stub embedder.
class TextStore {
 public:
  explicit TextStore(std::size_t dim) : embedder_(dim), store_(embedder_.name(), dim) {}

  std::size_t add_document(const std::string& doc_id, const std::string& text,
                           std::size_t chunk_size, std::size_t overlap) {
    const auto doc = raider::ingest_text(doc_id, doc_id, text);
    auto chunks = raider::chunk_text(doc, {chunk_size, overlap});
    const std::size_t n = chunks.size();
    raider::embed_and_store(std::move(chunks), embedder_, store_);
    return n;
  }

  py::list search(const std::string& query, std::size_t k) const {
    const auto q = embedder_.embed({query}).front();
    py::list out;
    for (const auto& hit : raider::retrieve(store_, q, k))
      out.append(py::make_tuple(hit.chunk->chunk_id, hit.chunk->text, hit.similarity));
    return out;
  }

  std::size_t size() const { return store_.size(); }

 private:
  raider::StubTextEmbedder embedder_;
  raider::VectorStore store_;
};

}  // namespace

PYBIND11_MODULE(_slidekit, m) {
  m.doc() = "Native core of the slidekit pathology pipeline";
  m.attr("__version__") = std::string(cli::kVersion);
  py::register_exception<Error>(m, "SlidekitError", PyExc_RuntimeError);

  m.def(
      "sample_filter",
      [](const std::vector<double>& logits, double temperature, std::size_t top_k, double top_p) {
        return sample_filter(logits, {temperature, top_k, top_p, 128});
      },
      py::arg("logits"), py::arg("temperature") = 0.7, py::arg("top_k") = 50,
      py::arg("top_p") = 0.95, "Filtered next-token distribution.");
  m.def(
      "cosine_warmup_lr",
      [](std::size_t step, double peak_lr, std::size_t total_steps, double warmup_ratio) {
        return cosine_warmup_lr(step, {peak_lr, total_steps, warmup_ratio});
      },
      py::arg("step"), py::arg("peak_lr"), py::arg("total_steps"), py::arg("warmup_ratio") = 0.03);
  m.def(
      "info_nce",
      [](const Array& image, const Array& text, double temperature) {
        const auto r = info_nce(to_matrix(image), to_matrix(text), temperature);
        return py::make_tuple(r.loss, to_array(r.grad_image), to_array(r.grad_text));
      },
      py::arg("image"), py::arg("text"), py::arg("temperature") = 0.07,
      "Symmetric contrastive loss and its gradients.");

  m.def("tile_image", &tile_image, py::arg("image"), py::arg("patch_size") = 256,
        py::arg("stride") = 0, py::arg("min_tissue") = 0.25,
        py::arg("threshold") = tiling::kDefaultLuminanceThreshold,
        "Top-left corners of patches with enough tissue, sorted by (y, x).");

  py::class_<Tower>(m, "Tower")
      .def(py::init<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t, std::size_t,
                    std::uint64_t>(),
           py::arg("input") = 512, py::arg("hidden") = 512, py::arg("attention") = 256,
           py::arg("projector_model") = 512, py::arg("projector_hidden") = 4096,
           py::arg("output") = 4096, py::arg("seed") = 0)
      .def_static("load", &Tower::load, py::arg("directory"))
      .def("save", &Tower::save, py::arg("directory"))
      .def("forward", &Tower::forward, py::arg("patches"))
      .def_property_readonly("dims", &Tower::dims);

  m.def("normalize_text", &raider::normalize_text, py::arg("text"));
  m.def(
      "chunk_text",
      [](const std::string& text, std::size_t chunk_size, std::size_t overlap) {
        py::list out;
        const auto doc = raider::ingest_text("doc", "doc", text);
        for (const auto& c : raider::chunk_text(doc, {chunk_size, overlap}))
          out.append(py::make_tuple(c.start, c.end, c.text));
        return out;
      },
      py::arg("text"), py::arg("chunk_size") = 1000, py::arg("overlap") = 200,
      "(start, end, text) per chunk of the normalized text, offsets in code points.");
  py::class_<TextStore>(m, "TextStore")
      .def(py::init<std::size_t>(), py::arg("dim") = 64)
      .def("add_document", &TextStore::add_document, py::arg("doc_id"), py::arg("text"),
           py::arg("chunk_size") = 1000, py::arg("overlap") = 200)
      .def("search", &TextStore::search, py::arg("query"), py::arg("k") = 4)
      .def("__len__", &TextStore::size);
  m.def(
      "generation_prompt",
      [](const std::vector<std::string>& context, const std::string& question) {
        const auto p = raider::build_generation_prompt(context, question);
        return py::make_tuple(p.system, p.user);
      },
      py::arg("context"), py::arg("question"));
  m.attr("QUESTIONS") = std::vector<std::string>(prompts::kQuestions.begin(), prompts::kQuestions.end());

  m.def("judge_prompt", &evaluator::build_judge_prompt, py::arg("question"), py::arg("reference"),
        py::arg("answer"));
  m.def(
      "parse_decision",
      [](std::string_view reply) -> std::optional<std::string> {
        const auto d = evaluator::parse_decision(reply);
        if (!d) return std::nullopt;
        return std::string(evaluator::to_string(*d));
      },
      py::arg("reply"));
  m.def("parse_best", &evaluator::parse_best, py::arg("reply"));
  m.def(
      "acceptance_rate",
      [](std::size_t accepted, std::size_t rejected, std::size_t invalid) {
        evaluator::AcceptanceReport r{accepted + rejected + invalid, accepted, rejected, invalid};
        return r.rate_percent();
      },
      py::arg("accepted"), py::arg("rejected") = 0, py::arg("invalid") = 0,
      "Acceptance rate as a two-decimal percentage string.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a slidekit subcommand; returns (exit_code, stdout, stderr).");
}
