#include "debiaskit/palette.hpp"

#include <cmath>
#include <sstream>

#include "debiaskit/digest.hpp"
#include "debiaskit/errors.hpp"

namespace debiaskit {

namespace {

std::uint8_t round_half_up(double x) {
  return static_cast<std::uint8_t>(std::floor(x + 0.5));
}

}  // namespace

Rgb hsv_to_rgb(double hue_degrees, double saturation, double value) {
  double h = std::fmod(hue_degrees, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = value * saturation;
  const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = value - c;

  double r = 0.0, g = 0.0, b = 0.0;
  if (h < 60.0) {
    r = c; g = x;
  } else if (h < 120.0) {
    r = x; g = c;
  } else if (h < 180.0) {
    g = c; b = x;
  } else if (h < 240.0) {
    g = x; b = c;
  } else if (h < 300.0) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  return {round_half_up(255.0 * (r + m)), round_half_up(255.0 * (g + m)),
          round_half_up(255.0 * (b + m))};
}

Palette build_palette(int num_classes, double alpha_step, double value_min) {
  if (num_classes < 1) {
    throw data_error("palette: num_classes must be >= 1");
  }
  if (!(alpha_step >= 0.0) || !(value_min >= 0.0) || !(value_min <= 1.0)) {
    throw data_error("palette: invalid alpha_step or value_min");
  }
  Palette p;
  p.num_classes = num_classes;
  p.hue_step = 360.0 / num_classes;
  p.alpha_step = alpha_step;
  p.value_min = value_min;
  return p;
}

Rgb instance_color(const Palette& palette, int class_id, int instance_index) {
  const double v = std::max(palette.value - instance_index * palette.alpha_step,
                            palette.value_min);
  return hsv_to_rgb(palette.hue_of(class_id), palette.saturation, v);
}

std::string Palette::digest() const {
  std::ostringstream os;
  os.precision(17);
  os << num_classes << ',' << hue_step << ',' << saturation << ',' << value
     << ',' << alpha_step << ',' << value_min;
  return digest_hex(os.str());
}

}  // namespace debiaskit
