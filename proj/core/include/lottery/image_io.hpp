#pragma once

#include <string>

#include "lottery/grid.hpp"

namespace lottery {

// 8-bit RGB PNG or binary PPM (P6, maxval 255), detected by content on
// read and by extension on write. Values map to [0,1] via /255; writing
// rounds half away from zero.
PixelGrid read_image(const std::string& path);
void write_image(const PixelGrid& image, const std::string& path);

}  // namespace lottery
