#pragma once

#include <vector>

#include "debiaskit/canvas.hpp"
#include "debiaskit/palette.hpp"
#include "debiaskit/recalibration.hpp"

namespace debiaskit {

// Rasterize a layout onto a black canvas. Boxes paint in descending order
// of area (ties keep layout-entry order) so small objects stay visible on
// top of large ones; each fill composites with fill_alpha so covered paint
// bleeds through where boxes overlap. Same-class instances take value-
// stepped colors keyed by their layout-entry order. All color math rounds
// half-up, making the output pixels a pure function of the inputs.
Canvas render_blueprint(const Layout& layout, const Palette& palette,
                        double fill_alpha = 0.8);

struct DecodedBox {
  int class_id = 0;
  int instance_index = 0;  // k-th same-class instance
  // Recovered pixel rectangle in corner form (x2/y2 exclusive).
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

// Test oracle for render fidelity. Only canvases rendered with
// fill_alpha = 1 from pairwise-disjoint boxes are supported; anything else
// (off-palette pixels, non-rectangular color patches) throws.
// max_instances_per_class bounds the per-class color table to search.
std::vector<DecodedBox> decode_blueprint(const Canvas& canvas,
                                         const Palette& palette,
                                         int max_instances_per_class);

}  // namespace debiaskit
