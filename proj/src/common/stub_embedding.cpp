// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/stub_embedding.hpp"

#include <cctype>
#include <cmath>
#include <random>
#include <string>

#include "slidekit/digest.hpp"

namespace slidekit {

std::vector<double> seeded_unit_vector(std::string_view key, std::size_t dim) {
  std::mt19937_64 rng(stable_hash64(key));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = gauss(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::string patch_embedding_key(std::string_view slide_id, long x, long y, std::uint64_t seed) {
  return "patch:" + std::string(slide_id) + ":" + std::to_string(x) + ":" + std::to_string(y) +
         ":" + std::to_string(seed);
}

std::vector<double> hashed_text_embedding(std::string_view text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  if (dim == 0) return v;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    const auto h = stable_hash64("word:" + word);
    v[h % dim] += (h >> 63) ? 1.0 : -1.0;
    word.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80)
      word.push_back(static_cast<char>(std::tolower(u)));
    else
      flush();
  }
  flush();
  return v;
}

}  // namespace slidekit
