#include "mgvton/image_io.hpp"

#include <algorithm>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

namespace mgvton {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t quantize(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

}  // namespace

void write_png(const std::filesystem::path& path, const Raster8& raster) {
  if (raster.channels != 1 && raster.channels != 3) throw std::invalid_argument("PNG raster must have 1 or 3 channels");
  if (raster.pixels.size() != static_cast<std::size_t>(raster.height) * raster.width * raster.channels) {
    throw std::invalid_argument("PNG raster buffer size mismatch");
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, raster.width, raster.height, 8,
               raster.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(raster.width) * raster.channels;
  for (int y = 0; y < raster.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(raster.pixels.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Raster8 read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  Raster8 raster;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  raster.width = static_cast<int>(png_get_image_width(png, info));
  raster.height = static_cast<int>(png_get_image_height(png, info));
  raster.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raster.pixels.resize(stride * raster.height);
  std::vector<png_bytep> rows(raster.height);
  for (int y = 0; y < raster.height; ++y) rows[y] = raster.pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raster;
}

Raster8 to_raster(const Image& image) {
  Raster8 r{image.height(), image.width(), 3, {}};
  r.pixels.reserve(image.data().size());
  for (float v : image.data()) r.pixels.push_back(quantize(v));
  return r;
}

Image from_raster(const Raster8& raster) {
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(raster.height) * raster.width * 3);
  const std::size_t n = static_cast<std::size_t>(raster.height) * raster.width;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const auto byte = raster.channels == 3 ? raster.pixels[i * 3 + c] : raster.pixels[i];
      values.push_back(static_cast<float>(byte) / 255.0f);
    }
  }
  return Image(raster.height, raster.width, std::move(values));
}

void write_image_png(const std::filesystem::path& path, const Image& image) { write_png(path, to_raster(image)); }

Image read_image_png(const std::filesystem::path& path) { return from_raster(read_png(path)); }

void write_parsing_png(const std::filesystem::path& path, const ParsingMap& parsing) {
  Raster8 r{parsing.height(), parsing.width(), 1, {parsing.data().begin(), parsing.data().end()}};
  write_png(path, r);
}

ParsingMap read_parsing_png(const std::filesystem::path& path) {
  auto r = read_png(path);
  if (r.channels != 1) throw std::runtime_error(path.string() + ": parsing PNG must be single-channel");
  return ParsingMap(r.height, r.width, std::move(r.pixels));
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  Raster8 r{mask.height(), mask.width(), 1, {}};
  r.pixels.reserve(mask.data().size());
  for (float v : mask.data()) r.pixels.push_back(quantize(v));
  write_png(path, r);
}

Mask read_mask_png(const std::filesystem::path& path) {
  auto r = read_png(path);
  if (r.channels != 1) throw std::runtime_error(path.string() + ": mask PNG must be single-channel");
  std::vector<float> values(r.pixels.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(r.pixels[i]) / 255.0f;
  return Mask(r.height, r.width, std::move(values));
}

void write_keypoints(const std::filesystem::path& path, const KeypointSet& keypoints) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const auto& kp = keypoints.points[k];
    if (kp.visible) {
      out << k << ' ' << kp.x << ' ' << kp.y << " 1\n";
    } else {
      out << k << " -1 -1 0\n";
    }
  }
}

KeypointSet read_keypoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  KeypointSet set;
  std::array<bool, kNumKeypoints> seen{};
  std::string line;
  int count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int index = -1;
    double x = 0;
    double y = 0;
    int visible = -1;
    if (!(row >> index >> x >> y >> visible) || index < 0 || index >= kNumKeypoints || (visible != 0 && visible != 1) ||
        seen[index]) {
      throw std::runtime_error(path.string() + ": malformed keypoint row '" + line + "'");
    }
    seen[index] = true;
    set.points[index] = visible ? Keypoint{x, y, true} : Keypoint{-1.0, -1.0, false};
    ++count;
  }
  if (count != kNumKeypoints) throw std::runtime_error(path.string() + ": expected 18 keypoint rows");
  return set;
}

}  // namespace mgvton
