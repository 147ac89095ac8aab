#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mgvton/data_model.hpp"

namespace mgvton {

// 8-bit raster as stored in a PNG file.
struct Raster8 {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
};

void write_png(const std::filesystem::path& path, const Raster8& raster);
Raster8 read_png(const std::filesystem::path& path);

// RGB PNG <-> Image, 8-bit quantisation (value = byte / 255).
void write_image_png(const std::filesystem::path& path, const Image& image);
Image read_image_png(const std::filesystem::path& path);

// Grayscale PNG whose byte is the label index.
void write_parsing_png(const std::filesystem::path& path, const ParsingMap& parsing);
ParsingMap read_parsing_png(const std::filesystem::path& path);

// Grayscale PNG, mask value * 255 rounded.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path);

// 18 lines of `index x y visible`; invisible rows carry x = y = -1.
void write_keypoints(const std::filesystem::path& path, const KeypointSet& keypoints);
KeypointSet read_keypoints(const std::filesystem::path& path);

Raster8 to_raster(const Image& image);
Image from_raster(const Raster8& raster);

}  // namespace mgvton
