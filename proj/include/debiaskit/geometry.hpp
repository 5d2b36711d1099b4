#pragma once

#include <algorithm>
#include <cmath>

namespace debiaskit {

// Axis-aligned box in pixel coordinates, corner form, x1 < x2 and y1 < y2.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool valid_within(double w, double h) const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 >= 0.0 && y1 >= 0.0 && x1 < x2 &&
           y1 < y2 && x2 <= w && y2 <= h;
  }

  // Intersect with [0,w]x[0,h]. May produce an empty (invalid) box; callers
  // decide whether to drop it.
  BBox clamped(double w, double h) const {
    BBox b;
    b.x1 = std::clamp(x1, 0.0, w);
    b.y1 = std::clamp(y1, 0.0, h);
    b.x2 = std::clamp(x2, 0.0, w);
    b.y2 = std::clamp(y2, 0.0, h);
    return b;
  }

  bool operator==(const BBox& o) const {
    return x1 == o.x1 && y1 == o.y1 && x2 == o.x2 && y2 == o.y2;
  }
};

}  // namespace debiaskit
