#pragma once

// Procedural texture data sets, splits and the flip+crop augmentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "freqtune/common.hpp"
#include "freqtune/texclass.hpp"

namespace freqtune {

struct SynthSpec {
  std::size_t num_classes = 4;
  std::size_t images_per_class = 100;
  std::size_t image_size = 64;
  double noise_level = 10.0;  // std-dev in code values
  std::uint64_t seed = 0;
  std::size_t channels = 3;
  double contrast = 1.0;  // texture amplitude multiplier

  void validate() const {
    if (image_size == 0 || image_size % 8 != 0)
      throw ShapeError("synth: image size " + std::to_string(image_size) +
                       " must be a positive multiple of 8");
    if (!(noise_level >= 0.0) || !std::isfinite(noise_level))
      throw DomainError("synth: noise level must be >= 0");
    if (num_classes == 0) throw DomainError("synth: need at least one class");
    if (channels != 1 && channels != 3)
      throw DomainError("synth: channels must be 1 or 3");
  }
};

/// Texture family of class c. Classes cycle through gratings,
/// checkerboards and low-pass noise; each further cycle changes the scale
/// (and for gratings the orientation) so every class has its own frequency
/// signature.
enum class TextureFamily { kGrating, kChecker, kLowpass };

struct ClassRecipe {
  TextureFamily family;
  double scale;        // grating period, checker cell or blur sigma (pixels)
  double orientation;  // gratings only, radians
  std::string name;
};

inline ClassRecipe class_recipe(std::size_t c) {
  const double v = static_cast<double>(c / 3);
  char buf[64];
  switch (c % 3) {
    case 0: {
      const double period = 3.0 + v;
      const double angle = std::fmod(45.0 + 90.0 * v, 180.0);
      std::snprintf(buf, sizeof buf, "grating_p%.1f_a%.0f", period, angle);
      return {TextureFamily::kGrating, period, angle * std::numbers::pi / 180.0,
              buf};
    }
    case 1: {
      const double cell = 2.0 + v;
      std::snprintf(buf, sizeof buf, "checker_c%.0f", cell);
      return {TextureFamily::kChecker, cell, 0.0, buf};
    }
    default: {
      const double sigma = 1.5 + v;
      std::snprintf(buf, sizeof buf, "lowpass_s%.1f", sigma);
      return {TextureFamily::kLowpass, sigma, 0.0, buf};
    }
  }
}

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i)
    s += k[static_cast<std::size_t>(i + radius)] =
        std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= s;
  return k;
}

// Separable Gaussian blur with periodic boundaries.
inline std::vector<double> blur_periodic(const std::vector<double>& in,
                                         std::size_t n, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int ni = static_cast<int>(n);
  std::vector<double> tmp(n * n), out(n * n);
  for (int y = 0; y < ni; ++y)
    for (int x = 0; x < ni; ++x) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t)
        s += k[static_cast<std::size_t>(t + r)] *
             in[static_cast<std::size_t>(y * ni + ((x + t) % ni + ni) % ni)];
      tmp[static_cast<std::size_t>(y * ni + x)] = s;
    }
  for (int y = 0; y < ni; ++y)
    for (int x = 0; x < ni; ++x) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t)
        s += k[static_cast<std::size_t>(t + r)] *
             tmp[static_cast<std::size_t>(((y + t) % ni + ni) % ni * ni + x)];
      out[static_cast<std::size_t>(y * ni + x)] = s;
    }
  return out;
}

inline std::vector<double> render_texture(const ClassRecipe& rc, std::size_t n,
                                          double contrast,
                                          std::mt19937_64& rng) {
  std::vector<double> tex(n * n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (rc.family) {
    case TextureFamily::kGrating: {
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      const double cx = std::cos(rc.orientation), sy = std::sin(rc.orientation);
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
          tex[y * n + x] =
              128.0 + 70.0 * contrast * std::sin(2.0 * std::numbers::pi *
                                          (static_cast<double>(x) * cx +
                                           static_cast<double>(y) * sy) /
                                          rc.scale +
                                      phase);
      break;
    }
    case TextureFamily::kChecker: {
      const auto cell = static_cast<std::size_t>(rc.scale);
      const auto ox = static_cast<std::size_t>(unit(rng) * 2.0 * rc.scale);
      const auto oy = static_cast<std::size_t>(unit(rng) * 2.0 * rc.scale);
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
          tex[y * n + x] =
              (((x + ox) / cell + (y + oy) / cell) % 2 == 0) ? 128.0 - 60.0 * contrast
                                                        : 128.0 + 60.0 * contrast;
      break;
    }
    case TextureFamily::kLowpass: {
      std::normal_distribution<double> g(0.0, 1.0);
      std::vector<double> white(n * n);
      for (double& v : white) v = g(rng);
      auto field = blur_periodic(white, n, rc.scale);
      double mean = 0.0, var = 0.0;
      for (double v : field) mean += v;
      mean /= static_cast<double>(field.size());
      for (double v : field) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(field.size()));
      for (std::size_t i = 0; i < field.size(); ++i)
        tex[i] = 128.0 + 45.0 * contrast * (field[i] - mean) / (sd > 0 ? sd : 1.0);
      break;
    }
  }
  return tex;
}

}  // namespace detail

/// Deterministic procedural data set: images_per_class images of each
/// class, ordered class by class. Pixel values are integers in [0, 255], so
/// the set survives an 8-bit round trip unchanged.
inline LabeledSet synth_dataset(const SynthSpec& spec) {
  spec.validate();
  LabeledSet set;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < spec.num_classes; ++c)
    set.class_names.push_back(class_recipe(c).name);
  const std::size_t n = spec.image_size;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const ClassRecipe rc = class_recipe(c);
    for (std::size_t j = 0; j < spec.images_per_class; ++j) {
      const auto tex = detail::render_texture(rc, n, spec.contrast, rng);
      ImageBuffer img(spec.channels, n, n);
      for (std::size_t ch = 0; ch < spec.channels; ++ch)
        for (std::size_t p = 0; p < n * n; ++p) {
          double v = tex[p];
          if (spec.noise_level > 0.0) v += spec.noise_level * noise(rng);
          img.pixels[ch * n * n + p] = std::clamp(std::round(v), 0.0, 255.0);
        }
      set.images.push_back(std::move(img));
      set.labels.push_back(c);
    }
  }
  return set;
}

struct DatasetSplit {
  LabeledSet train;
  LabeledSet attack;
  LabeledSet test;
};

enum class SplitRole { kTrain = 0, kAttack = 1, kTest = 2 };

inline const char* to_string(SplitRole r) {
  switch (r) {
    case SplitRole::kTrain: return "train";
    case SplitRole::kAttack: return "attack";
    case SplitRole::kTest: return "test";
  }
  return "?";
}

/// Stratified seeded assignment of every image to a split. Within each class
/// the shuffled indices are cut into train / attack / test by the given
/// fractions (test gets the rest).
inline std::vector<SplitRole> split_roles(const LabeledSet& set,
                                          std::uint64_t seed,
                                          double attack_fraction = 0.15,
                                          double test_fraction = 0.15) {
  set.validate();
  if (attack_fraction < 0 || test_fraction < 0 ||
      attack_fraction + test_fraction > 1.0)
    throw DomainError("split_dataset: invalid fractions");
  std::mt19937_64 rng(seed);
  std::vector<SplitRole> role(set.size(), SplitRole::kTrain);
  for (std::size_t c = 0; c < set.num_classes(); ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < set.size(); ++i)
      if (set.labels[i] == c) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    const auto n_attack = static_cast<std::size_t>(std::round(n * attack_fraction));
    const auto n_test = static_cast<std::size_t>(std::round(n * test_fraction));
    const std::size_t n_train = idx.size() - std::min(idx.size(), n_attack + n_test);
    for (std::size_t r = 0; r < idx.size(); ++r)
      role[idx[r]] = r < n_train ? SplitRole::kTrain
                                 : (r < n_train + n_attack ? SplitRole::kAttack
                                                           : SplitRole::kTest);
  }
  return role;
}

inline LabeledSet select_split(const LabeledSet& set,
                               const std::vector<SplitRole>& roles,
                               SplitRole which) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < roles.size(); ++i)
    if (roles[i] == which) idx.push_back(i);
  return set.subset(idx);
}

/// split_roles followed by selection; each split keeps the original order.
inline DatasetSplit split_dataset(const LabeledSet& set, std::uint64_t seed,
                                  double attack_fraction = 0.15,
                                  double test_fraction = 0.15) {
  const auto roles = split_roles(set, seed, attack_fraction, test_fraction);
  return {select_split(set, roles, SplitRole::kTrain),
          select_split(set, roles, SplitRole::kAttack),
          select_split(set, roles, SplitRole::kTest)};
}

/// Seeded stratified subsample of round(fraction * n) images, in original
/// order. Images are taken round-robin over the classes (in a seeded class
/// order), each class contributing in its own shuffled order.
inline LabeledSet subsample(const LabeledSet& set, double fraction,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(set.num_classes());
  for (std::size_t i = 0; i < set.size(); ++i) by_class[set.labels[i]].push_back(i);
  for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng);
  std::vector<std::size_t> classes(by_class.size());
  std::iota(classes.begin(), classes.end(), 0);
  std::shuffle(classes.begin(), classes.end(), rng);
  const auto keep = std::min(
      set.size(),
      static_cast<std::size_t>(std::round(fraction * static_cast<double>(set.size()))));
  std::vector<std::size_t> idx;
  for (std::size_t round = 0; idx.size() < keep; ++round)
    for (std::size_t c : classes)
      if (round < by_class[c].size() && idx.size() < keep) idx.push_back(by_class[c][round]);
  std::sort(idx.begin(), idx.end());
  return set.subset(idx);
}

/// Random horizontal flip followed by a random crop of the image padded by
/// `pad` pixels of edge reflection; output size equals input size.
inline ImageBuffer augment_flip_crop(const ImageBuffer& img,
                                     std::mt19937_64& rng, std::size_t pad = 4) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> shift(-static_cast<int>(pad),
                                           static_cast<int>(pad));
  const bool flip = coin(rng) == 1;
  const int dy = shift(rng), dx = shift(rng);
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  auto reflect = [](int v, int n) {
    if (n == 1) return 0;
    while (v < 0 || v >= n) v = v < 0 ? -v - 1 : 2 * n - v - 1;
    return v;
  };
  ImageBuffer out(img.channels, img.height, img.width);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int sx = reflect(x + dx, w);
        if (flip) sx = w - 1 - sx;
        const int sy = reflect(y + dy, h);
        out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            img.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      }
  return out;
}

}  // namespace freqtune
