// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "slidekit/error.hpp"
#include "slidekit/vision/tower.hpp"

namespace slidekit::vision {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kFormat = "slidekit-tower/1";

json dims_to_json(const TowerDims& d) {
  return {{"aggregator_input", d.aggregator.input},
          {"aggregator_hidden", d.aggregator.hidden},
          {"aggregator_attention", d.aggregator.attention},
          {"projector_model", d.projector_model},
          {"projector_hidden", d.projector_hidden},
          {"output", d.output}};
}

TowerDims dims_from_json(const json& j) {
  TowerDims d;
  d.aggregator.input = j.at("aggregator_input").get<std::size_t>();
  d.aggregator.hidden = j.at("aggregator_hidden").get<std::size_t>();
  d.aggregator.attention = j.at("aggregator_attention").get<std::size_t>();
  d.projector_model = j.at("projector_model").get<std::size_t>();
  d.projector_hidden = j.at("projector_hidden").get<std::size_t>();
  d.output = j.at("output").get<std::size_t>();
  return d;
}

}  // namespace

void save_checkpoint(const std::string& dir, VisionTower tower) {
  fs::create_directories(dir);
  json tensors = json::object();
  for (const auto& p : tower.params()) {
    const Matrix& m = p.value.get();
    save_cxpm((fs::path(dir) / (p.name + ".cxpm")).string(), m);
    tensors[p.name] = {m.rows(), m.cols()};
  }
  const json descriptor = {{"format", kFormat}, {"dims", dims_to_json(tower.dims())},
                           {"tensors", tensors}};
  std::ofstream out(fs::path(dir) / "shapes.json");
  out << descriptor.dump(2) << '\n';
  if (!out) throw FormatError("checkpoint: failed writing " + dir + "/shapes.json");
}

VisionTower load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "shapes.json");
  if (!in) throw FormatError("checkpoint: missing " + dir + "/shapes.json");
  json descriptor;
  try {
    descriptor = json::parse(in);
    if (descriptor.at("format") != kFormat)
      throw FormatError("checkpoint: unsupported format " + descriptor.at("format").dump());
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad shapes.json: ") + e.what());
  }

  TowerDims dims;
  try {
    dims = dims_from_json(descriptor.at("dims"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad dims: ") + e.what());
  }
  Rng unused(0);
  VisionTower tower = zeros_like(make_tower(dims, unused));

  const json& tensors = descriptor.at("tensors");
  std::set<std::string> expected;
  for (auto& p : tower.params()) {
    expected.insert(p.name);
    Matrix& slot = p.value.get();
    if (!tensors.contains(p.name)) throw FormatError("checkpoint: missing tensor " + p.name);
    Matrix loaded = load_cxpm((fs::path(dir) / (p.name + ".cxpm")).string());
    if (loaded.rows() != slot.rows() || loaded.cols() != slot.cols() ||
        tensors[p.name] != json{slot.rows(), slot.cols()})
      throw FormatError("checkpoint: tensor " + p.name + " has shape " + loaded.shape_string() +
                        ", expected " + slot.shape_string());
    slot = std::move(loaded);
  }
  for (const auto& [name, _] : tensors.items())
    if (!expected.count(name)) throw FormatError("checkpoint: unexpected tensor " + name);
  return tower;
}

}  // namespace slidekit::vision
