#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "freqtune/image_io.hpp"

using namespace freqtune;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("freqtune_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ImageBuffer byte_image(std::size_t c, std::size_t h, std::size_t w, unsigned seed) {
  std::mt19937 rng(seed);
  ImageBuffer img(c, h, w);
  for (double& v : img.pixels) v = static_cast<double>(rng() % 256);
  return img;
}

}  // namespace

TEST(Crop, CentersOnMultiplesOfEight) {
  ImageBuffer img(1, 13, 18);
  for (std::size_t y = 0; y < 13; ++y)
    for (std::size_t x = 0; x < 18; ++x) img.at(0, y, x) = static_cast<double>(100 * y + x);
  const ImageBuffer out = center_crop8(img);
  EXPECT_EQ(out.height, 8u);
  EXPECT_EQ(out.width, 16u);
  EXPECT_EQ(out.at(0, 0, 0), 201.0);  // y0 = 2, x0 = 1
  EXPECT_THROW(center_crop8(ImageBuffer(1, 7, 16)), ShapeError);
}

TEST(Pnm, RoundTripRgbAndGray) {
  const fs::path dir = scratch("pnm");
  for (std::size_t c : {1u, 3u}) {
    const ImageBuffer img = byte_image(c, 8, 16, static_cast<unsigned>(c));
    const fs::path p = dir / (c == 3 ? "a.ppm" : "a.pgm");
    write_pnm(p, img);
    EXPECT_EQ(read_pnm(p), img);
  }
}

TEST(Pnm, WritesRoundedClippedBytes) {
  const fs::path p = scratch("pnm_clip") / "c.pgm";
  ImageBuffer img(1, 1, 3);
  img.pixels = {-4.0, 12.6, 300.0};
  write_pnm(p, img);
  EXPECT_EQ(read_pnm(p).pixels, (std::vector<double>{0.0, 13.0, 255.0}));
}

TEST(Pnm, HeaderCommentsAndErrors) {
  const fs::path dir = scratch("pnm_err");
  {
    std::ofstream os(dir / "c.pgm", std::ios::binary);
    os << "P5\n# made by hand\n2 1\n255\n" << '\x05' << '\x07';
  }
  EXPECT_EQ(read_pnm(dir / "c.pgm").pixels, (std::vector<double>{5.0, 7.0}));
  {
    std::ofstream os(dir / "t.pgm", std::ios::binary);
    os << "P5 4 4 255\n" << "abc";
  }
  EXPECT_THROW(read_pnm(dir / "t.pgm"), FormatError);
  {
    std::ofstream os(dir / "a.ppm", std::ios::binary);
    os << "P3 1 1 255\n1 2 3";
  }
  EXPECT_THROW(read_pnm(dir / "a.ppm"), FormatError);
  {
    std::ofstream os(dir / "d.pgm", std::ios::binary);
    os << "P5 1 1 65535\n" << "ab";
  }
  EXPECT_THROW(read_pnm(dir / "d.pgm"), FormatError);
  EXPECT_THROW(read_pnm(dir / "missing.pgm"), FormatError);
}

TEST(Png, RoundTripAndCropOnLoad) {
  const fs::path dir = scratch("png");
  const ImageBuffer img = byte_image(3, 10, 17, 4);
  save_image(dir / "x.png", img);
  EXPECT_EQ(read_png(dir / "x.png"), img);
  const ImageBuffer loaded = load_image(dir / "x.png");
  EXPECT_EQ(loaded, center_crop8(img));
  const ImageBuffer gray = byte_image(1, 8, 8, 5);
  save_image(dir / "g.png", gray);
  EXPECT_EQ(load_image(dir / "g.png"), gray);
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(read_png(dir / "bad.png"), FormatError);
}

TEST(Dataset, SaveLoadWithManifest) {
  const fs::path dir = scratch("ds");
  SynthSpec s;
  s.num_classes = 3;
  s.images_per_class = 10;
  s.image_size = 16;
  s.seed = 2;
  const LabeledSet set = synth_dataset(s);
  const auto roles = split_roles(set, 4, 0.2, 0.2);
  save_dataset(dir, set, &roles);
  EXPECT_TRUE(fs::exists(dir / kSplitManifest));

  const LabeledSet all = load_dataset(dir);
  EXPECT_EQ(all.images, set.images);
  EXPECT_EQ(all.labels, set.labels);
  EXPECT_EQ(all.class_names[0], "00_" + set.class_names[0]);

  for (SplitRole r : {SplitRole::kTrain, SplitRole::kAttack, SplitRole::kTest}) {
    const LabeledSet part = load_dataset_split(dir, r);
    EXPECT_EQ(part.images, select_split(set, roles, r).images) << to_string(r);
  }
}

TEST(Dataset, WithoutManifestSplitIsWholeSet) {
  const fs::path dir = scratch("ds_plain");
  LabeledSet set;
  set.class_names = {"a", "b"};
  set.images = {byte_image(1, 8, 8, 1), byte_image(1, 8, 8, 2)};
  set.labels = {0, 1};
  save_dataset(dir, set);
  EXPECT_EQ(load_dataset_split(dir, SplitRole::kTest).size(), 2u);
}

TEST(Dataset, Errors) {
  EXPECT_THROW(load_dataset(scratch("ds_empty")), FormatError);
  EXPECT_THROW(load_dataset("/nonexistent/freqtune"), FormatError);
  const fs::path dir = scratch("ds_mixed");
  fs::create_directories(dir / "a");
  write_pnm(dir / "a" / "1.pgm", ImageBuffer(1, 8, 8));
  write_pnm(dir / "a" / "2.pgm", ImageBuffer(1, 16, 8));
  EXPECT_THROW(load_dataset(dir), ShapeError);
  fs::remove(dir / "a" / "2.pgm");
  std::ofstream(dir / kSplitManifest) << "path,split\nother/1.pgm,test\n";
  EXPECT_THROW(load_dataset_split(dir, SplitRole::kTest), FormatError);
  std::ofstream(dir / kSplitManifest) << "path,split\na/1.pgm,train\n";
  EXPECT_THROW(load_dataset_split(dir, SplitRole::kTest), DomainError);
}
