#pragma once

#include <string>
#include <vector>

#include "mvlab/core/view_stack.hpp"

namespace mvlab {

// 8-bit PNG of a 1- or 3-channel image; values are clamped to [0, 1].
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Portable float map ("PF" for 3 channels, "Pf" for 1), little-endian, bottom row first.
void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

// Views of a stack side by side, using the first three channels (or one).
Image contact_sheet(const ViewStack& views);

}  // namespace mvlab
