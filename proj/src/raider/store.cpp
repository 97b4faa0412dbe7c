// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slidekit/error.hpp"
#include "slidekit/raider/raider.hpp"
#include "slidekit/stub_embedding.hpp"

namespace slidekit::raider {
namespace {

using nlohmann::json;

double norm_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot_of(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine_from(double dot, double na, double nb) {
  return na == 0.0 || nb == 0.0 ? 0.0 : dot / (na * nb);
}

}  // namespace

StubTextEmbedder::StubTextEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("embedder dim must be >= 1");
}

std::string StubTextEmbedder::name() const { return fmt::format("stub-hash/{}", dim_); }

std::vector<std::vector<double>> StubTextEmbedder::embed(
    const std::vector<std::string>& texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hashed_text_embedding(t, dim_));
  return out;
}

RemoteTextEmbedder::RemoteTextEmbedder(std::shared_ptr<llm::Transport> transport,
                                       std::string model, std::size_t dim,
                                       llm::RetryPolicy retry, std::size_t batch_size)
    : client_(std::move(transport), std::move(model), retry), dim_(dim), batch_size_(batch_size) {
  if (dim == 0) throw ConfigError("embedder dim must be >= 1");
  if (batch_size == 0) throw ConfigError("embedding batch size must be >= 1");
}

std::vector<std::vector<double>> RemoteTextEmbedder::embed(
    const std::vector<std::string>& texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); i += batch_size_) {
    const std::vector<std::string> batch(
        texts.begin() + static_cast<std::ptrdiff_t>(i),
        texts.begin() + static_cast<std::ptrdiff_t>(std::min(i + batch_size_, texts.size())));
    for (auto& v : client_.embed(batch)) {
      if (v.size() != dim_)
        throw StoreError(fmt::format("embedder '{}' returned {} values, expected {}", name(),
                                     v.size(), dim_));
      out.push_back(std::move(v));
    }
  }
  return out;
}

void VectorStore::add(Chunk chunk) {
  if (chunk.embedding.empty()) throw StoreError("chunk '" + chunk.chunk_id + "' has no embedding");
  if (dim_ == 0 && chunks_.empty()) dim_ = chunk.embedding.size();
  if (chunk.embedding.size() != dim_)
    throw StoreError(fmt::format("chunk '{}' has a {}-dim embedding, store holds {}",
                                 chunk.chunk_id, chunk.embedding.size(), dim_));
  if (!std::all_of(chunk.embedding.begin(), chunk.embedding.end(),
                   [](double v) { return std::isfinite(v); }))
    throw StoreError("chunk '" + chunk.chunk_id + "' has a non-finite embedding");
  if (index_.count(chunk.chunk_id)) throw StoreError("duplicate chunk id '" + chunk.chunk_id + "'");
  index_.emplace(chunk.chunk_id, chunks_.size());
  norms_.push_back(norm_of(chunk.embedding));
  chunks_.push_back(std::move(chunk));
}

const Chunk* VectorStore::find(std::string_view chunk_id) const {
  const auto it = index_.find(std::string(chunk_id));
  return it == index_.end() ? nullptr : &chunks_[it->second];
}

void VectorStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write store '" + path + "'");
  for (const auto& c : chunks_) {
    out << json{{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id},       {"start", c.start},
                {"end", c.end},           {"text", c.text},           {"embedding", c.embedding}}
               .dump()
        << '\n';
  }
  std::ofstream meta(path + ".meta.json", std::ios::binary | std::ios::trunc);
  if (!meta) throw StoreError("cannot write store metadata for '" + path + "'");
  meta << json{{"embedder", embedder_}, {"dim", dim_}, {"count", chunks_.size()}}.dump(2) << '\n';
}

VectorStore VectorStore::load(const std::string& path) {
  std::ifstream meta_in(path + ".meta.json", std::ios::binary);
  if (!meta_in) throw StoreError("store metadata '" + path + ".meta.json' not found");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot read store '" + path + "'");
  try {
    const json meta = json::parse(meta_in);
    VectorStore store(meta.at("embedder").get<std::string>(), meta.at("dim").get<std::size_t>());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      store.add({j.at("chunk_id").get<std::string>(), j.at("doc_id").get<std::string>(),
                 j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>(),
                 j.at("text").get<std::string>(), j.at("embedding").get<std::vector<double>>()});
    }
    if (store.size() != meta.value("count", store.size()))
      throw StoreError(fmt::format("store '{}' holds {} chunks, metadata says {}", path,
                                   store.size(), meta.at("count").get<std::size_t>()));
    return store;
  } catch (const json::exception& e) {
    throw StoreError("store '" + path + "': " + e.what());
  }
}

void embed_and_store(std::vector<Chunk> chunks, const TextEmbedder& embedder, VectorStore& store) {
  if (chunks.empty()) return;
  if (!store.empty() && store.dim() != embedder.dim())
    throw StoreError(fmt::format("embedder '{}' has dim {}, store holds {}", embedder.name(),
                                 embedder.dim(), store.dim()));
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  auto vectors = embedder.embed(texts);
  if (vectors.size() != chunks.size())
    throw StoreError(fmt::format("embedder returned {} vectors for {} chunks", vectors.size(),
                                 chunks.size()));
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    chunks[i].embedding = std::move(vectors[i]);
    store.add(std::move(chunks[i]));
  }
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError(fmt::format("cosine of sizes {} and {}", a.size(), b.size()));
  return cosine_from(dot_of(a, b), norm_of(a), norm_of(b));
}

std::vector<Hit> retrieve(const VectorStore& store, std::span<const double> query, std::size_t k,
                          std::optional<std::string_view> doc_id) {
  if (k == 0) throw RangeError("retrieval k must be >= 1");
  if (store.empty()) throw RetrievalError("retrieval from an empty store");
  if (query.size() != store.dim())
    throw DimensionError(fmt::format("query has {} values, store dim is {}", query.size(),
                                     store.dim()));
  const double qn = norm_of(query);
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Chunk& c = store[i];
    if (doc_id && c.doc_id != *doc_id) continue;
    hits.push_back({&c, cosine_from(dot_of(query, c.embedding), qn, store.norm(i))});
  }
  if (hits.empty())
    throw RetrievalError("no chunks stored for document '" + std::string(doc_id.value_or("")) + "'");
  const auto by_rank = [](const Hit& a, const Hit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.chunk->chunk_id < b.chunk->chunk_id;
  };
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                    by_rank);
  hits.resize(n);
  return hits;
}

}  // namespace slidekit::raider
