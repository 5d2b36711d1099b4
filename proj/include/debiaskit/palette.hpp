#pragma once

#include <string>
#include <vector>

#include "debiaskit/canvas.hpp"

namespace debiaskit {

// Class colors: evenly spaced hues on the HSV circle at full saturation and
// value; repeated instances of one class step the value down by alpha_step
// until value_min.
struct Palette {
  int num_classes = 0;
  double hue_step = 0.0;     // 360 / num_classes
  double saturation = 1.0;   // S0
  double value = 1.0;        // V0
  double alpha_step = 0.1;   // per-instance value decrement
  double value_min = 0.5;

  double hue_of(int class_id) const { return class_id * hue_step; }
  std::string digest() const;
};

// Standard HSV->RGB, 8-bit channels rounded half-up.
Rgb hsv_to_rgb(double hue_degrees, double saturation, double value);

Palette build_palette(int num_classes, double alpha_step = 0.1,
                      double value_min = 0.5);

// Color of the k-th same-class instance (k is 0-based and counted in
// layout-entry order).
Rgb instance_color(const Palette& palette, int class_id, int instance_index);

}  // namespace debiaskit
