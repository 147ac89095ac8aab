#pragma once

// Inspection images: colourised parsing maps and labelled panel strips.

#include <array>
#include <string>
#include <vector>

#include "mgvton/data_model.hpp"
#include "mgvton/pipeline.hpp"

namespace mgvton {

// Fixed 20-colour palette indexed by parsing label:
//   0 background white, 1 hair dark brown, 2 face peach, 3 upper clothes red,
//   4 lower clothes blue, 5/6 left/right arm orange/yellow, 7/8 left/right leg
//   green/teal, 9 torso skin pink, 10-19 distinct greys/purples (unused labels).
const std::array<std::array<float, 3>, kNumLabels>& parsing_palette();

Image colorize_parsing(const ParsingMap& parsing);
// Black dots of the given radius at visible keypoints.
Image overlay_keypoints(const Image& image, const KeypointSet& keypoints, int radius = 1);
Image mask_to_image(const Mask& mask);

// Upper-case 5x7 bitmap text; unsupported characters draw as blanks.
void draw_text(Image& image, int x, int y, const std::string& text, int scale, const std::array<float, 3>& rgb);

struct Panel {
  std::string label;
  Image image;
};

// One row of equally sized panels, each captioned above the image.
Image make_panel_row(const std::vector<Panel>& panels);

// PERSON, CLOTHES, PARSING (with target pose), WARPED, COARSE, MASK, RESULT.
std::vector<Panel> try_on_panels(const TryOnRequest& request, const TryOnResult& result);

}  // namespace mgvton
