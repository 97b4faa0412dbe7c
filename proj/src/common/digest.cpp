// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/digest.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <array>
#include <fmt/format.h>

#include "slidekit/error.hpp"

namespace slidekit {
namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> sha256(const void* data, std::size_t len) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
  SHA256(static_cast<const unsigned char*>(data), len, out.data());
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  const auto d = sha256(bytes.data(), bytes.size());
  std::string hex;
  hex.reserve(2 * d.size());
  for (unsigned char b : d) hex += fmt::format("{:02x}", b);
  return hex;
}

std::string sha256_hex(std::span<const double> values) {
  return sha256_hex(std::string_view(reinterpret_cast<const char*>(values.data()),
                                     values.size() * sizeof(double)));
}

std::uint64_t stable_hash64(std::string_view bytes) {
  const auto d = sha256(bytes.data(), bytes.size());
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(d[i]) << (8 * i);
  return v;
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("base64: length not a multiple of 4");
  std::string out(3 * text.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw FormatError("base64: malformed input");
  // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace slidekit
