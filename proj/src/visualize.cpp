#include "mgvton/visualize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace mgvton {

namespace {

// Rows top to bottom, bit 4 = leftmost column.
const std::map<char, std::array<std::uint8_t, 7>>& font() {
  static const std::map<char, std::array<std::uint8_t, 7>> f = {
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
  };
  return f;
}

constexpr int kGap = 2;
constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;

}  // namespace

const std::array<std::array<float, 3>, kNumLabels>& parsing_palette() {
  static const std::array<std::array<float, 3>, kNumLabels> p = {{
      {1.00f, 1.00f, 1.00f}, {0.33f, 0.20f, 0.10f}, {1.00f, 0.80f, 0.65f}, {0.85f, 0.10f, 0.10f},
      {0.15f, 0.25f, 0.80f}, {1.00f, 0.55f, 0.00f}, {0.95f, 0.85f, 0.10f}, {0.10f, 0.65f, 0.20f},
      {0.00f, 0.60f, 0.60f}, {0.95f, 0.55f, 0.70f}, {0.20f, 0.20f, 0.20f}, {0.35f, 0.35f, 0.35f},
      {0.50f, 0.50f, 0.50f}, {0.65f, 0.65f, 0.65f}, {0.80f, 0.80f, 0.80f}, {0.40f, 0.10f, 0.50f},
      {0.55f, 0.25f, 0.70f}, {0.70f, 0.45f, 0.85f}, {0.30f, 0.00f, 0.30f}, {0.85f, 0.70f, 0.95f},
  }};
  return p;
}

Image colorize_parsing(const ParsingMap& parsing) {
  Image out(parsing.height(), parsing.width());
  const auto& pal = parsing_palette();
  for (int y = 0; y < parsing.height(); ++y) {
    for (int x = 0; x < parsing.width(); ++x) out.set_pixel(y, x, pal[std::min<int>(parsing.at(y, x), kNumLabels - 1)]);
  }
  return out;
}

Image overlay_keypoints(const Image& image, const KeypointSet& keypoints, int radius) {
  Image out = image;
  for (const auto& k : keypoints.points) {
    if (!k.visible) continue;
    const int cx = static_cast<int>(std::lround(k.x));
    const int cy = static_cast<int>(std::lround(k.y));
    for (int y = cy - radius; y <= cy + radius; ++y) {
      for (int x = cx - radius; x <= cx + radius; ++x) {
        if (y >= 0 && x >= 0 && y < out.height() && x < out.width()) out.set_pixel(y, x, {0.0f, 0.0f, 0.0f});
      }
    }
  }
  return out;
}

Image mask_to_image(const Mask& mask) {
  Image out(mask.height(), mask.width());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const float v = std::clamp(mask.at(y, x), 0.0f, 1.0f);
      out.set_pixel(y, x, {v, v, v});
    }
  }
  return out;
}

void draw_text(Image& image, int x0, int y0, const std::string& text, int scale, const std::array<float, 3>& rgb) {
  int cursor = x0;
  for (char ch : text) {
    const auto it = font().find(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    if (it != font().end()) {
      for (int r = 0; r < kGlyphH; ++r) {
        for (int c = 0; c < kGlyphW; ++c) {
          if (!(it->second[r] & (0x10 >> c))) continue;
          for (int dy = 0; dy < scale; ++dy) {
            for (int dx = 0; dx < scale; ++dx) {
              const int y = y0 + r * scale + dy;
              const int x = cursor + c * scale + dx;
              if (y >= 0 && x >= 0 && y < image.height() && x < image.width()) image.set_pixel(y, x, rgb);
            }
          }
        }
      }
    }
    cursor += (kGlyphW + 1) * scale;
  }
}

Image make_panel_row(const std::vector<Panel>& panels) {
  if (panels.empty()) throw std::invalid_argument("no panels");
  const int h = panels.front().image.height();
  const int w = panels.front().image.width();
  for (const auto& p : panels) {
    if (p.image.height() != h || p.image.width() != w) throw std::invalid_argument("panels differ in size");
  }
  const int scale = std::max(1, w / 48);
  const int label_h = (kGlyphH + 2) * scale;
  const int n = static_cast<int>(panels.size());
  Image out(label_h + h + 2 * kGap, n * w + (n + 1) * kGap, 0.85f);
  for (int i = 0; i < n; ++i) {
    const int x0 = kGap + i * (w + kGap);
    draw_text(out, x0, kGap, panels[i].label, scale, {0.0f, 0.0f, 0.0f});
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto& img = panels[i].image;
        out.set_pixel(kGap + label_h + y, x0 + x, {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
      }
    }
  }
  return out;
}

std::vector<Panel> try_on_panels(const TryOnRequest& request, const TryOnResult& result) {
  return {{"PERSON", request.person.image},
          {"CLOTHES", request.clothes},
          {"PARSING", overlay_keypoints(colorize_parsing(result.parsing), request.target_pose)},
          {"WARPED", result.warped_clothes},
          {"COARSE", result.coarse},
          {"MASK", mask_to_image(result.mask)},
          {"RESULT", result.final_image}};
}

}  // namespace mgvton
