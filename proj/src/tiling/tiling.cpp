// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/tiling/tiling.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <random>
#include <sstream>

#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"
#include "slidekit/parallel.hpp"
#include "slidekit/stub_embedding.hpp"

namespace slidekit::tiling {
namespace {

using nlohmann::json;

cv::Mat to_bgr_mat(const RasterImage& image) {
  const int type = image.channels == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat m(static_cast<int>(image.height), static_cast<int>(image.width), type);
  std::copy(image.pixels.begin(), image.pixels.end(), m.data);
  if (image.channels == 3) {
    for (int y = 0; y < m.rows; ++y)
      for (int x = 0; x < m.cols; ++x) std::swap(m.at<cv::Vec3b>(y, x)[0], m.at<cv::Vec3b>(y, x)[2]);
  }
  return m;
}

// Uniform double in [0, 1) from the raw engine output; portable across
// standard libraries, unlike std::uniform_real_distribution.
double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

RasterImage::RasterImage(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill)
    : width(w), height(h), channels(c), pixels(w * h * c, fill) {
  if (c != 1 && c != 3) throw InputError(fmt::format("unsupported channel count {}", c));
}

RasterImage RasterImage::crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const {
  if (x + w > width || y + h > height)
    throw RangeError(fmt::format("crop {}x{} at ({}, {}) leaves {}x{} image", w, h, x, y, width,
                                 height));
  RasterImage out(w, h, channels);
  const std::size_t row_bytes = w * channels;
  for (std::size_t r = 0; r < h; ++r) {
    const auto src = pixels.begin() + static_cast<std::ptrdiff_t>(((y + r) * width + x) * channels);
    std::copy(src, src + static_cast<std::ptrdiff_t>(row_bytes),
              out.pixels.begin() + static_cast<std::ptrdiff_t>(r * row_bytes));
  }
  return out;
}

RasterImage load_image(const std::string& path) {
  const cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw InputError("cannot read image '" + path + "'");
  if (raw.depth() != CV_8U) throw InputError("image '" + path + "' is not 8-bit");
  const int ch = raw.channels();
  if (ch != 1 && ch != 3 && ch != 4)
    throw InputError(fmt::format("image '{}' has {} channels", path, ch));

  RasterImage out(static_cast<std::size_t>(raw.cols), static_cast<std::size_t>(raw.rows),
                  ch == 1 ? 1 : 3);
  for (int y = 0; y < raw.rows; ++y) {
    const std::uint8_t* row = raw.ptr<std::uint8_t>(y);
    for (int x = 0; x < raw.cols; ++x) {
      const std::uint8_t* px = row + x * ch;
      if (ch == 1) {
        out.at(x, y) = px[0];
      } else {
        out.at(x, y, 0) = px[2];
        out.at(x, y, 1) = px[1];
        out.at(x, y, 2) = px[0];
      }
    }
  }
  return out;
}

void save_image(const RasterImage& image, const std::string& path) {
  if (image.empty()) throw InputError("refusing to write an empty image");
  if (!cv::imwrite(path, to_bgr_mat(image))) throw InputError("cannot write image '" + path + "'");
}

std::string encode_png(const RasterImage& image) {
  if (image.empty()) throw InputError("cannot encode an empty image");
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_bgr_mat(image), buf)) throw InputError("PNG encoding failed");
  return {buf.begin(), buf.end()};
}

RasterImage synthetic_slide(std::size_t width, std::size_t height, std::uint64_t seed) {
  RasterImage img(width, height, 3, 255);
  if (img.empty()) return img;
  Rng rng(seed);
  struct Blob {
    double cx, cy, rx, ry;
  };
  std::vector<Blob> blobs;
  const double scale = static_cast<double>(std::min(width, height));
  const std::size_t count = 3 + rng() % 4;
  for (std::size_t i = 0; i < count; ++i)
    blobs.push_back({unit(rng) * width, unit(rng) * height, (0.1 + 0.2 * unit(rng)) * scale,
                     (0.1 + 0.2 * unit(rng)) * scale});

  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      bool inside = false;
      for (const auto& b : blobs) {
        const double dx = (static_cast<double>(x) - b.cx) / b.rx;
        const double dy = (static_cast<double>(y) - b.cy) / b.ry;
        inside = inside || dx * dx + dy * dy <= 1.0;
      }
      if (!inside) continue;
      const auto jitter = static_cast<int>(rng() % 41) - 20;
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(200 + jitter, 0, 255));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(110 + jitter, 0, 255));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(170 + jitter, 0, 255));
    }
  }
  return img;
}

double TissueMask::tissue_fraction() const {
  if (bits.empty()) return 0.0;
  const auto on = std::count(bits.begin(), bits.end(), std::uint8_t{1});
  return static_cast<double>(on) / static_cast<double>(bits.size());
}

TissueMask tissue_mask(const RasterImage& image, int threshold) {
  if (image.empty()) throw InputError("tissue mask of an empty image");
  if (threshold < 0 || threshold > 255)
    throw RangeError(fmt::format("luminance threshold {} outside 0..255", threshold));
  if (image.pixels.size() != image.width * image.height * image.channels)
    throw InputError("image buffer does not match its dimensions");

  TissueMask mask{image.width, image.height, std::vector<std::uint8_t>(image.width * image.height)};
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const double lum = image.channels == 1
                             ? image.at(x, y)
                             : 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
                                   0.114 * image.at(x, y, 2);
      mask.bits[y * image.width + x] = lum < threshold ? 1 : 0;
    }
  }
  return mask;
}

void TileManifest::validate(std::size_t width, std::size_t height) const {
  if (patch_size == 0) throw InputError("manifest patch_size must be >= 1");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto [x, y] = entries[i];
    if (x + patch_size > width || y + patch_size > height)
      throw InputError(fmt::format("manifest entry ({}, {}) leaves the {}x{} image", x, y, width,
                                   height));
    if (i > 0) {
      const auto [px, py] = entries[i - 1];
      if (std::pair(py, px) >= std::pair(y, x))
        throw InputError(fmt::format("manifest entries not unique and row-major at ({}, {})", x, y));
    }
  }
}

std::string to_json(const TileManifest& m) {
  json entries = json::array();
  for (const auto& [x, y] : m.entries) entries.push_back({x, y});
  return json{{"slide_id", m.slide_id},
              {"patch_size", m.patch_size},
              {"mpp", m.mpp},
              {"entries", std::move(entries)}}
      .dump(2);
}

TileManifest manifest_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    TileManifest m;
    m.slide_id = j.at("slide_id").get<std::string>();
    m.patch_size = j.at("patch_size").get<std::size_t>();
    m.mpp = j.value("mpp", m.mpp);
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 2) throw FormatError("manifest entry must be [x, y]");
      m.entries.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

void save_manifest(const TileManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write manifest '" + path + "'");
  out << to_json(manifest) << '\n';
}

TileManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read manifest '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

TileManifest tile_grid(std::string slide_id, const TissueMask& mask, const TileParams& params) {
  if (params.patch_size == 0) throw ConfigError("patch_size must be >= 1");
  if (!(params.min_tissue_fraction >= 0.0 && params.min_tissue_fraction <= 1.0))
    throw RangeError(fmt::format("min_tissue_fraction {} outside [0, 1]", params.min_tissue_fraction));
  if (mask.bits.size() != mask.width * mask.height)
    throw DimensionError("tissue mask buffer does not match its dimensions");

  TileManifest out{std::move(slide_id), params.patch_size, params.mpp, {}};
  const std::size_t p = params.patch_size;
  const std::size_t stride = params.effective_stride();
  if (p > mask.width || p > mask.height) return out;

  // Summed-area table, (w+1) x (h+1).
  const std::size_t w1 = mask.width + 1;
  std::vector<std::size_t> sat(w1 * (mask.height + 1), 0);
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x)
      sat[(y + 1) * w1 + x + 1] =
          mask.bits[y * mask.width + x] + sat[y * w1 + x + 1] + sat[(y + 1) * w1 + x] - sat[y * w1 + x];

  const double area = static_cast<double>(p) * static_cast<double>(p);
  for (std::size_t y = 0; y + p <= mask.height; y += stride) {
    for (std::size_t x = 0; x + p <= mask.width; x += stride) {
      const std::size_t count =
          sat[(y + p) * w1 + x + p] + sat[y * w1 + x] - sat[y * w1 + x + p] - sat[(y + p) * w1 + x];
      if (static_cast<double>(count) / area >= params.min_tissue_fraction)
        out.entries.emplace_back(x, y);
    }
  }
  return out;
}

StubEncoder::StubEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw ConfigError("encoder dim must be >= 1");
}

std::vector<double> StubEncoder::encode(const PatchRef& patch) const {
  return seeded_unit_vector(patch_embedding_key(patch.slide_id, static_cast<long>(patch.x),
                                                static_cast<long>(patch.y), seed_),
                            dim_);
}

RemoteEncoder::RemoteEncoder(std::shared_ptr<llm::Transport> transport, std::size_t dim,
                             llm::RetryPolicy retry)
    : transport_(std::move(transport)), dim_(dim), retry_(retry) {
  if (!transport_) throw ConfigError("remote encoder: no transport");
  if (dim == 0) throw ConfigError("encoder dim must be >= 1");
}

std::vector<double> RemoteEncoder::encode(const PatchRef& patch) const {
  const auto where = fmt::format("patch ({}, {}) of slide '{}'", patch.x, patch.y, patch.slide_id);
  try {
    const std::string png = encode_png(patch.image.crop(patch.x, patch.y, patch.size, patch.size));
    const json request = {{"slide_id", patch.slide_id},
                          {"x", patch.x},
                          {"y", patch.y},
                          {"patch", base64_encode(png)}};
    const auto r = llm::post_with_retry(*transport_, "/embed", request.dump(), "application/json",
                                        retry_);
    auto v = json::parse(r.body).at("embedding").get<std::vector<double>>();
    if (v.size() != dim_)
      throw EncodingError(fmt::format("{}: service returned {} values, expected {}", where,
                                      v.size(), dim_));
    return v;
  } catch (const EncodingError&) {
    throw;
  } catch (const std::exception& e) {
    throw EncodingError(where + ": " + e.what());
  }
}

EmbeddingMatrix encode_patches(const TileManifest& manifest, const RasterImage& image,
                               const PatchEncoder& encoder, std::size_t workers) {
  manifest.validate(image.width, image.height);
  const std::size_t dim = encoder.dim();
  EmbeddingMatrix out{manifest.slide_id, Matrix(manifest.entries.size(), dim)};
  parallel_for(manifest.entries.size(), workers, [&](std::size_t i) {
    const auto [x, y] = manifest.entries[i];
    const auto v = encoder.encode({manifest.slide_id, x, y, manifest.patch_size, image});
    if (v.size() != dim)
      throw EncodingError(fmt::format("patch ({}, {}) of slide '{}': {} values, expected {}", x, y,
                                      manifest.slide_id, v.size(), dim));
    if (!std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); }))
      throw EncodingError(fmt::format("patch ({}, {}) of slide '{}': non-finite embedding", x, y,
                                      manifest.slide_id));
    std::copy(v.begin(), v.end(), out.values.row(i).begin());
  });
  return out;
}

}  // namespace slidekit::tiling
