// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "slidekit/llm/transport.hpp"
#include "slidekit/numerics/matrix.hpp"

namespace slidekit::tiling {

/// 8-bit raster, row-major, channels interleaved (1 = gray, 3 = RGB).
struct RasterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  RasterImage() = default;
  RasterImage(std::size_t width, std::size_t height, std::size_t channels, std::uint8_t fill = 0);

  bool empty() const noexcept { return width == 0 || height == 0; }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  /// Copy of the rectangle [x, x+w) × [y, y+h); throws RangeError if it
  /// leaves the image.
  RasterImage crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const;
};

/// PNG, TIFF or anything else imgcodecs reads. Alpha is dropped, colour is
/// returned as RGB. Throws InputError when unreadable or not 8-bit.
RasterImage load_image(const std::string& path);
void save_image(const RasterImage& image, const std::string& path);
std::string encode_png(const RasterImage& image);

/// Pink tissue blobs on a white background, deterministic in `seed`.
RasterImage synthetic_slide(std::size_t width, std::size_t height, std::uint64_t seed);

struct TissueMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;

  bool at(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
  double tissue_fraction() const;
};

inline constexpr int kDefaultLuminanceThreshold = 220;

/// Tissue iff Rec. 601 luminance < threshold. Throws InputError on an empty
/// image, RangeError for a threshold outside 0..255.
TissueMask tissue_mask(const RasterImage& image, int threshold = kDefaultLuminanceThreshold);

struct TileManifest {
  std::string slide_id;
  std::size_t patch_size = 256;
  double mpp = 0.5;
  std::vector<std::pair<std::size_t, std::size_t>> entries;

  /// Throws InputError unless every patch fits inside width × height and
  /// entries are unique and sorted by (y, x).
  void validate(std::size_t width, std::size_t height) const;
  friend bool operator==(const TileManifest&, const TileManifest&) = default;
};

std::string to_json(const TileManifest& manifest);
TileManifest manifest_from_json(std::string_view text);
void save_manifest(const TileManifest& manifest, const std::string& path);
TileManifest load_manifest(const std::string& path);

struct TileParams {
  std::size_t patch_size = 256;
  /// 0 means "same as patch_size".
  std::size_t stride = 0;
  double min_tissue_fraction = 0.25;
  double mpp = 0.5;

  std::size_t effective_stride() const noexcept { return stride == 0 ? patch_size : stride; }
};

/// Fully-inside grid positions whose tissue fraction reaches the minimum,
/// sorted by y then x. A patch larger than the mask yields no entries.
TileManifest tile_grid(std::string slide_id, const TissueMask& mask, const TileParams& params);

struct PatchRef {
  const std::string& slide_id;
  std::size_t x;
  std::size_t y;
  std::size_t size;
  const RasterImage& image;
};

class PatchEncoder {
 public:
  virtual ~PatchEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> encode(const PatchRef& patch) const = 0;
};

inline constexpr std::size_t kPatchEmbeddingDim = 512;

/// Unit vector seeded by (slide_id, x, y, seed). Stateless.
class StubEncoder final : public PatchEncoder {
 public:
  explicit StubEncoder(std::size_t dim = kPatchEmbeddingDim, std::uint64_t seed = 0);
  std::size_t dim() const override { return dim_; }
  std::vector<double> encode(const PatchRef& patch) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// POST /embed {slide_id, x, y, patch: base64 PNG} -> {embedding: [...]}.
class RemoteEncoder final : public PatchEncoder {
 public:
  RemoteEncoder(std::shared_ptr<llm::Transport> transport, std::size_t dim = kPatchEmbeddingDim,
                llm::RetryPolicy retry = {});
  std::size_t dim() const override { return dim_; }
  /// Throws EncodingError naming the slide and coordinates.
  std::vector<double> encode(const PatchRef& patch) const override;

 private:
  std::shared_ptr<llm::Transport> transport_;
  std::size_t dim_;
  llm::RetryPolicy retry_;
};

struct EmbeddingMatrix {
  std::string slide_id;
  Matrix values;
};

/// Row i is the encoding of manifest entry i, regardless of `workers`.
EmbeddingMatrix encode_patches(const TileManifest& manifest, const RasterImage& image,
                               const PatchEncoder& encoder, std::size_t workers = 1);

}  // namespace slidekit::tiling
