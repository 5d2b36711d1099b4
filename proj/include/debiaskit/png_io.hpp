#pragma once

#include <string>

#include "debiaskit/canvas.hpp"

namespace debiaskit {

// Lossless 8-bit RGB PNG. Writing uses fixed encoder settings and no
// ancillary chunks, so a given canvas always produces the same bytes.
void write_png(const Canvas& canvas, const std::string& path);

// Reads an 8-bit RGB PNG (grayscale/palette/alpha inputs are expanded or
// stripped to RGB).
Canvas read_png(const std::string& path);

}  // namespace debiaskit
