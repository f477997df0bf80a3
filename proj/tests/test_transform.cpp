#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "freqtune/transform.hpp"

using namespace freqtune;

namespace {

DctBlock random_block(std::mt19937_64& rng, double lo = 0.0, double hi = 255.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DctBlock b;
  for (double& v : b.coeffs) v = u(rng);
  return b;
}

double energy(const DctBlock& b) {
  double s = 0.0;
  for (double v : b.coeffs) s += v * v;
  return s;
}

}  // namespace

TEST(Dct, NormalizationConstants) {
  EXPECT_DOUBLE_EQ(dct_norm(0), std::sqrt(1.0 / 8.0));
  for (std::size_t k = 1; k < 8; ++k) EXPECT_DOUBLE_EQ(dct_norm(k), 0.5);
}

TEST(Dct, BasisIsOrthonormal) {
  const auto& c = dct_basis();
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b) {
      double s = 0.0;
      for (std::size_t n = 0; n < 8; ++n) s += c[n][a] * c[n][b];
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-14);
    }
}

TEST(Dct, BasisEntryMatchesCosineFormula) {
  const auto& c = dct_basis();
  // c(n=2, k=3) = 0.5 cos(5*3*pi/16)
  EXPECT_NEAR(c[2][3], 0.5 * std::cos(15.0 * M_PI / 16.0), 1e-15);
}

TEST(Dct, ConstantBlockHasOnlyDc) {
  DctBlock b;
  b.coeffs.fill(100.0);
  const DctBlock d = dct_forward(b);
  EXPECT_NEAR(d.at(0, 0), 800.0, 1e-10);
  for (std::size_t k = 1; k < kBands; ++k) EXPECT_NEAR(d.coeffs[k], 0.0, 1e-10);
}

TEST(Dct, BasisImageTransformsToOneHot) {
  for (std::size_t k1 = 0; k1 < 8; ++k1)
    for (std::size_t k2 = 0; k2 < 8; ++k2) {
      const DctBlock d = dct_forward(basis_image(k1, k2));
      for (std::size_t k = 0; k < kBands; ++k)
        EXPECT_NEAR(d.coeffs[k], k == band_index(k1, k2) ? 1.0 : 0.0, 1e-13);
    }
}

TEST(Dct, RowIndexIsVerticalFrequency) {
  // Rows alternate, columns constant: only vertical frequency 7 plus lower
  // odd harmonics, and no horizontal frequency at all.
  DctBlock b;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) b.at(r, c) = r % 2 ? 1.0 : -1.0;
  const DctBlock d = dct_forward(b);
  for (std::size_t k1 = 0; k1 < 8; ++k1)
    for (std::size_t k2 = 1; k2 < 8; ++k2) EXPECT_NEAR(d.at(k1, k2), 0.0, 1e-12);
  EXPECT_GT(std::abs(d.at(7, 0)), std::abs(d.at(1, 0)));
}

TEST(Dct, RoundTripAndParseval) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const DctBlock b = random_block(rng, -300.0, 300.0);
    const DctBlock d = dct_forward(b);
    const DctBlock r = dct_inverse(d);
    for (std::size_t k = 0; k < kBands; ++k) EXPECT_NEAR(r.coeffs[k], b.coeffs[k], 1e-10);
    EXPECT_NEAR(energy(d), energy(b), 1e-8 * energy(b));
  }
}

TEST(Dct, RejectsNonFinite) {
  DctBlock b;
  b.coeffs[5] = std::nan("");
  EXPECT_THROW(dct_forward(b), DomainError);
  b.coeffs[5] = INFINITY;
  EXPECT_THROW(dct_inverse(b), DomainError);
}

TEST(BandTensor, LayoutPlacesBlockCoefficients) {
  // Image whose block (1, 2) of channel 1 is basis (3, 4), everything else 0.
  ImageBuffer img(2, 16, 24);
  const DctBlock b = basis_image(3, 4);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) img.at(1, 8 + y, 16 + x) = 5.0 * b.at(y, x);
  const BandTensor bt = image_to_bands(img);
  EXPECT_EQ(bt.channels, 2u);
  EXPECT_EQ(bt.block_rows, 2u);
  EXPECT_EQ(bt.block_cols, 3u);
  EXPECT_NEAR(bt.at(1, band_index(3, 4), 1, 2), 5.0, 1e-12);
  double rest = 0.0;
  for (double v : bt.data) rest += std::abs(v);
  EXPECT_NEAR(rest, 5.0, 1e-10);
  const auto band = bt.band(1, band_index(3, 4));
  ASSERT_EQ(band.size(), 6u);
  EXPECT_NEAR(band[1 * 3 + 2], 5.0, 1e-12);
}

TEST(BandTensor, ImageRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  ImageBuffer img(3, 64, 40);
  for (double& v : img.pixels) v = u(rng);
  const ImageBuffer back = bands_to_image(image_to_bands(img));
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i)
    EXPECT_NEAR(back.pixels[i], img.pixels[i], 1e-9);
}

TEST(BandTensor, RejectsSizesNotMultipleOfEight) {
  EXPECT_THROW(image_to_bands(ImageBuffer(3, 60, 64)), ShapeError);
  EXPECT_THROW(image_to_bands(ImageBuffer(1, 64, 12)), ShapeError);
  EXPECT_THROW(image_to_bands(ImageBuffer(1, 0, 8)), ShapeError);
  BandTensor bad(1, 2, 2);
  bad.data.pop_back();
  EXPECT_THROW(bands_to_image(bad), ShapeError);
}

TEST(BandTensor, InverseIsNotClipped) {
  BandTensor bt(1, 1, 1);
  bt.at(0, 0, 0, 0) = -80.0;  // DC of -80 gives -10 everywhere
  const ImageBuffer img = bands_to_image(bt);
  for (double v : img.pixels) EXPECT_NEAR(v, -10.0, 1e-12);
}
