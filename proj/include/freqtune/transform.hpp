#pragma once

// Orthogonal 8x8 type-II block DCT and the image <-> band-major layout
// conversions used by the frequency-domain attacks.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "freqtune/common.hpp"

namespace freqtune {

inline constexpr std::size_t kBlock = 8;
inline constexpr std::size_t kBands = kBlock * kBlock;

/// Normalization factor c~(k): sqrt(1/N) for the DC index, sqrt(2/N) otherwise.
inline double dct_norm(std::size_t k) {
  return k == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
}

/// Basis table c(n, k) = c~(k) cos(pi (2n+1) k / 2N), indexed [n][k].
inline const std::array<std::array<double, kBlock>, kBlock>& dct_basis() {
  static const auto table = [] {
    std::array<std::array<double, kBlock>, kBlock> t{};
    for (std::size_t n = 0; n < kBlock; ++n)
      for (std::size_t k = 0; k < kBlock; ++k)
        t[n][k] = dct_norm(k) *
                  std::cos(std::numbers::pi * static_cast<double>(2 * n + 1) *
                           static_cast<double>(k) / (2.0 * kBlock));
    return t;
  }();
  return table;
}

/// Band index k = 8*k1 + k2.
inline constexpr std::size_t band_index(std::size_t k1, std::size_t k2) {
  return k1 * kBlock + k2;
}

/// An 8x8 block of values, row-major. Used both for spatial blocks and for
/// DCT coefficients.
struct DctBlock {
  std::array<double, kBands> coeffs{};

  double& at(std::size_t r, std::size_t c) { return coeffs[r * kBlock + c]; }
  double at(std::size_t r, std::size_t c) const {
    return coeffs[r * kBlock + c];
  }
  friend bool operator==(const DctBlock&, const DctBlock&) = default;
};

namespace detail {

inline void require_finite(const DctBlock& b, const char* what) {
  for (double v : b.coeffs)
    if (!std::isfinite(v))
      throw DomainError(std::string(what) + ": non-finite entry in 8x8 block");
}

// out(a, b) = sum_{i,j} in(i, j) * basis[i][a] * basis[j][b] when forward,
// out(i, j) = sum_{a,b} in(a, b) * basis[i][a] * basis[j][b] otherwise.
inline DctBlock separable_pass(const DctBlock& in, bool forward) {
  const auto& c = dct_basis();
  DctBlock tmp, out;
  for (std::size_t r = 0; r < kBlock; ++r)
    for (std::size_t k = 0; k < kBlock; ++k) {
      double s = 0.0;
      for (std::size_t n = 0; n < kBlock; ++n)
        s += in.at(r, n) * (forward ? c[n][k] : c[k][n]);
      tmp.at(r, k) = s;
    }
  for (std::size_t k = 0; k < kBlock; ++k)
    for (std::size_t col = 0; col < kBlock; ++col) {
      double s = 0.0;
      for (std::size_t n = 0; n < kBlock; ++n)
        s += tmp.at(n, col) * (forward ? c[n][k] : c[k][n]);
      out.at(k, col) = s;
    }
  return out;
}

}  // namespace detail

/// Forward orthonormal 2-D DCT of one spatial block.
inline DctBlock dct_forward(const DctBlock& block) {
  detail::require_finite(block, "dct_forward");
  return detail::separable_pass(block, true);
}

/// Inverse of dct_forward.
inline DctBlock dct_inverse(const DctBlock& coeffs) {
  detail::require_finite(coeffs, "dct_inverse");
  return detail::separable_pass(coeffs, false);
}

/// The spatial 8x8 pattern of band (k1, k2): c(n1,k1) c(n2,k2).
inline DctBlock basis_image(std::size_t k1, std::size_t k2) {
  const auto& c = dct_basis();
  DctBlock b;
  for (std::size_t n1 = 0; n1 < kBlock; ++n1)
    for (std::size_t n2 = 0; n2 < kBlock; ++n2)
      b.at(n1, n2) = c[n1][k1] * c[n2][k2];
  return b;
}

/// Per-block DCT coefficients of an image, laid out channel x band x
/// block-row x block-col.
struct BandTensor {
  std::size_t channels = 0;
  std::size_t block_rows = 0;
  std::size_t block_cols = 0;
  std::vector<double> data;

  BandTensor() = default;
  BandTensor(std::size_t c, std::size_t bh, std::size_t bw)
      : channels(c), block_rows(bh), block_cols(bw), data(c * kBands * bh * bw) {}

  std::size_t height() const { return block_rows * kBlock; }
  std::size_t width() const { return block_cols * kBlock; }
  std::size_t blocks() const { return block_rows * block_cols; }

  double& at(std::size_t c, std::size_t k, std::size_t i, std::size_t j) {
    return data[((c * kBands + k) * block_rows + i) * block_cols + j];
  }
  double at(std::size_t c, std::size_t k, std::size_t i, std::size_t j) const {
    return data[((c * kBands + k) * block_rows + i) * block_cols + j];
  }

  /// All coefficients of band k in channel c (block_rows * block_cols values).
  std::span<double> band(std::size_t c, std::size_t k) {
    return {data.data() + (c * kBands + k) * blocks(), blocks()};
  }
  std::span<const double> band(std::size_t c, std::size_t k) const {
    return {data.data() + (c * kBands + k) * blocks(), blocks()};
  }

  bool valid() const {
    return data.size() == channels * kBands * block_rows * block_cols;
  }

  friend bool operator==(const BandTensor&, const BandTensor&) = default;
};

/// Block DCT of every 8x8 block in every channel.
inline BandTensor image_to_bands(const ImageBuffer& img) {
  if (img.height % kBlock != 0 || img.width % kBlock != 0 || img.height == 0 ||
      img.width == 0 || img.size() != img.channels * img.plane())
    throw ShapeError("image_to_bands: image " + img.dims() +
                     " must have non-zero H and W that are multiples of 8");
  BandTensor bt(img.channels, img.height / kBlock, img.width / kBlock);
  DctBlock block;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t i = 0; i < bt.block_rows; ++i)
      for (std::size_t j = 0; j < bt.block_cols; ++j) {
        for (std::size_t y = 0; y < kBlock; ++y)
          for (std::size_t x = 0; x < kBlock; ++x)
            block.at(y, x) = img.at(c, i * kBlock + y, j * kBlock + x);
        DctBlock coeffs = dct_forward(block);
        for (std::size_t k = 0; k < kBands; ++k)
          bt.at(c, k, i, j) = coeffs.coeffs[k];
      }
  return bt;
}

/// Inverse block DCT. The result is not clipped.
inline ImageBuffer bands_to_image(const BandTensor& bt) {
  if (!bt.valid() || bt.channels == 0 || bt.block_rows == 0 ||
      bt.block_cols == 0)
    throw ShapeError("bands_to_image: band tensor data does not match " +
                     std::to_string(bt.channels) + "x64x" +
                     std::to_string(bt.block_rows) + "x" +
                     std::to_string(bt.block_cols));
  ImageBuffer img(bt.channels, bt.height(), bt.width());
  DctBlock coeffs;
  for (std::size_t c = 0; c < bt.channels; ++c)
    for (std::size_t i = 0; i < bt.block_rows; ++i)
      for (std::size_t j = 0; j < bt.block_cols; ++j) {
        for (std::size_t k = 0; k < kBands; ++k)
          coeffs.coeffs[k] = bt.at(c, k, i, j);
        DctBlock block = dct_inverse(coeffs);
        for (std::size_t y = 0; y < kBlock; ++y)
          for (std::size_t x = 0; x < kBlock; ++x)
            img.at(c, i * kBlock + y, j * kBlock + x) = block.at(y, x);
      }
  return img;
}

}  // namespace freqtune
