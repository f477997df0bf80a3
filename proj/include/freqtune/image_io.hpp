#pragma once

// PPM/PGM and PNG files, class-per-directory data sets. Loaded images are
// center-cropped so both sides are multiples of 8.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "freqtune/common.hpp"
#include "freqtune/synth.hpp"
#include "freqtune/texclass.hpp"

namespace freqtune {

namespace fs = std::filesystem;

/// Largest centered window whose sides are multiples of 8.
inline ImageBuffer center_crop8(const ImageBuffer& img) {
  const std::size_t h = img.height / 8 * 8, w = img.width / 8 * 8;
  if (h == 0 || w == 0)
    throw ShapeError("image " + img.dims() + " is smaller than one 8x8 block");
  if (h == img.height && w == img.width) return img;
  const std::size_t y0 = (img.height - h) / 2, x0 = (img.width - w) / 2;
  ImageBuffer out(img.channels, h, w);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

namespace detail {

inline unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::clamp(std::round(v), 0.0, 255.0));
}

// Interleaved 8-bit samples to planar doubles.
inline ImageBuffer from_interleaved(const unsigned char* data, std::size_t c,
                                    std::size_t h, std::size_t w) {
  ImageBuffer img(c, h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        img.at(ch, y, x) = data[(y * w + x) * c + ch];
  return img;
}

inline std::vector<unsigned char> to_interleaved(const ImageBuffer& img) {
  std::vector<unsigned char> out(img.size());
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t ch = 0; ch < img.channels; ++ch)
        out[(y * img.width + x) * img.channels + ch] = to_byte(img.at(ch, y, x));
  return out;
}

inline std::size_t read_pnm_number(std::istream& is, const std::string& path,
                                   const char* field) {
  int ch = is.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = is.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = is.get();
  }
  if (ch == EOF || !std::isdigit(ch))
    throw FormatError(path + ": bad PNM header field " + field);
  std::size_t v = 0;
  while (ch != EOF && std::isdigit(ch)) {
    v = v * 10 + static_cast<std::size_t>(ch - '0');
    if (v > (1u << 24)) throw FormatError(path + ": PNM " + field + " too large");
    ch = is.get();
  }
  return v;  // the single whitespace after the number has been consumed
}

}  // namespace detail

/// Binary PPM (P6) or PGM (P5) with maxval 255.
inline ImageBuffer read_pnm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path.string() + ": cannot open");
  char magic[2] = {};
  is.read(magic, 2);
  if (!is || magic[0] != 'P' || (magic[1] != '6' && magic[1] != '5'))
    throw FormatError(path.string() + ": not a binary PPM/PGM (P6/P5)");
  const std::size_t c = magic[1] == '6' ? 3 : 1;
  const std::string p = path.string();
  const std::size_t w = detail::read_pnm_number(is, p, "width");
  const std::size_t h = detail::read_pnm_number(is, p, "height");
  const std::size_t maxval = detail::read_pnm_number(is, p, "maxval");
  if (maxval != 255) throw FormatError(p + ": only 8-bit PNM (maxval 255) is supported");
  if (w == 0 || h == 0) throw FormatError(p + ": empty image");
  std::vector<unsigned char> data(c * h * w);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (!is) throw FormatError(p + ": truncated pixel data");
  return detail::from_interleaved(data.data(), c, h, w);
}

/// P6 for 3 channels, P5 for 1. Values are rounded and clipped to [0, 255].
inline void write_pnm(const fs::path& path, const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ShapeError("write_pnm: " + img.dims() + " needs 1 or 3 channels");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(path.string() + ": cannot open for writing");
  os << (img.channels == 3 ? "P6" : "P5") << '\n'
     << img.width << ' ' << img.height << "\n255\n";
  const auto data = detail::to_interleaved(img);
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size()));
  if (!os) throw FormatError(path.string() + ": write failed");
}

/// Any PNG libpng understands. Gray (with or without alpha) becomes one
/// channel, everything else RGB; alpha is dropped and 16-bit samples are
/// reduced to 8 bits.
inline ImageBuffer read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  const std::string p = path.string();
  if (!png_image_begin_read_from_file(&image, p.c_str()))
    throw FormatError(p + ": " + image.message);
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<unsigned char> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(p + ": " + msg);
  }
  return detail::from_interleaved(data.data(), gray ? 1 : 3, image.height,
                                  image.width);
}

inline void write_png(const fs::path& path, const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ShapeError("write_png: " + img.dims() + " needs 1 or 3 channels");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto data = detail::to_interleaved(img);
  const std::string p = path.string();
  if (!png_image_write_to_file(&image, p.c_str(), 0, data.data(), 0, nullptr))
    throw FormatError(p + ": " + image.message);
}

inline bool is_image_path(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".ppm" || ext == ".pgm" || ext == ".png";
}

/// Reads by extension (.png, otherwise PNM) and center-crops to multiples of 8.
inline ImageBuffer load_image(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  ImageBuffer img = ext == ".png" ? read_png(path) : read_pnm(path);
  try {
    return center_crop8(img);
  } catch (const ShapeError& e) {
    throw ShapeError(path.string() + ": " + e.what());
  }
}

inline void save_image(const fs::path& path, const ImageBuffer& img) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png")
    write_png(path, img);
  else
    write_pnm(path, img);
}

inline constexpr const char* kSplitManifest = "splits.csv";

/// One subdirectory per class; classes and files are taken in lexicographic
/// order. Every image must end up with the same shape after cropping.
/// `relative_paths`, when given, receives "class_dir/file" for every image.
inline LabeledSet load_dataset(const fs::path& root,
                               std::vector<std::string>* relative_paths = nullptr) {
  if (!fs::is_directory(root))
    throw FormatError(root.string() + ": not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty())
    throw FormatError(root.string() + ": no class subdirectories");
  LabeledSet set;
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    set.class_names.push_back(class_dirs[c].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[c]))
      if (e.is_regular_file() && is_image_path(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ImageBuffer img = load_image(f);
      if (!set.images.empty() && !img.same_shape(set.images.front()))
        throw ShapeError(f.string() + ": shape " + img.dims() + " differs from " +
                         set.images.front().dims());
      set.images.push_back(std::move(img));
      set.labels.push_back(c);
      if (relative_paths)
        relative_paths->push_back(class_dirs[c].filename().string() + "/" +
                                  f.filename().string());
    }
  }
  if (set.empty()) throw FormatError(root.string() + ": no images found");
  return set;
}

/// The images of one split as recorded in <root>/splits.csv. Without a
/// manifest the whole directory is returned.
inline LabeledSet load_dataset_split(const fs::path& root, SplitRole role) {
  std::vector<std::string> paths;
  LabeledSet all = load_dataset(root, &paths);
  const fs::path manifest = root / kSplitManifest;
  if (!fs::exists(manifest)) return all;
  std::ifstream is(manifest);
  std::string line;
  std::map<std::string, std::string> split_of;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    const auto comma = line.rfind(',');
    if (comma == std::string::npos)
      throw FormatError(manifest.string() + ":" + std::to_string(lineno) +
                        ": expected path,split");
    split_of[line.substr(0, comma)] = line.substr(comma + 1);
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto it = split_of.find(paths[i]);
    if (it == split_of.end())
      throw FormatError(manifest.string() + ": no entry for " + paths[i]);
    if (it->second == to_string(role)) idx.push_back(i);
  }
  if (idx.empty())
    throw DomainError(root.string() + ": split '" + to_string(role) + "' is empty");
  return all.subset(idx);
}

/// Writes <root>/<NN>_<class name>/<index>.ppm; the numeric prefix keeps the
/// class order stable when the directory is read back. With roles, also
/// writes the split manifest.
inline void save_dataset(const fs::path& root, const LabeledSet& set,
                         const std::vector<SplitRole>* roles = nullptr) {
  set.validate();
  if (roles && roles->size() != set.size())
    throw ShapeError("save_dataset: one split role per image required");
  fs::create_directories(root);
  std::vector<std::string> dirs;
  for (std::size_t c = 0; c < set.num_classes(); ++c) {
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%02zu_", c);
    dirs.push_back(prefix + set.class_names[c]);
    fs::create_directories(root / dirs.back());
  }
  std::ofstream manifest;
  if (roles) {
    manifest.open(root / kSplitManifest);
    manifest << "path,split\n";
  }
  std::vector<std::size_t> counter(set.num_classes(), 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.ppm", counter[set.labels[i]]++);
    const std::string rel = dirs[set.labels[i]] + "/" + name;
    write_pnm(root / rel, set.images[i]);
    if (roles) manifest << rel << ',' << to_string((*roles)[i]) << '\n';
  }
  if (roles && !manifest)
    throw FormatError((root / kSplitManifest).string() + ": write failed");
}

}  // namespace freqtune
