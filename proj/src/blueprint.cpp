#include "debiaskit/blueprint.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "debiaskit/errors.hpp"

namespace debiaskit {

namespace {

std::uint8_t composite_channel(double alpha, std::uint8_t paint,
                               std::uint8_t base) {
  return static_cast<std::uint8_t>(
      std::floor(alpha * paint + (1.0 - alpha) * base + 0.5));
}

// Pixels whose centers fall inside [lo, hi).
std::pair<int, int> pixel_span(double lo, double hi, int limit) {
  int first = static_cast<int>(std::ceil(lo - 0.5));
  int last = static_cast<int>(std::ceil(hi - 0.5));
  return {std::max(first, 0), std::min(last, limit)};
}

}  // namespace

Canvas render_blueprint(const Layout& layout, const Palette& palette,
                        double fill_alpha) {
  if (!(fill_alpha > 0.0) || !(fill_alpha <= 1.0)) {
    throw data_error("render: fill_alpha must be in (0, 1]");
  }
  const int width = static_cast<int>(std::lround(layout.width));
  const int height = static_cast<int>(std::lround(layout.height));
  if (width <= 0 || height <= 0) {
    throw data_error("render: layout dimensions must be positive");
  }
  for (const auto& e : layout.entries) {
    if (e.class_id < 0 || e.class_id >= palette.num_classes) {
      throw data_error("render: class " + std::to_string(e.class_id) +
                       " outside palette of " +
                       std::to_string(palette.num_classes));
    }
    if (!e.bbox.valid_within(layout.width, layout.height)) {
      throw data_error("render: box outside layout dimensions");
    }
  }

  // Same-class instance indices follow layout-entry order, not paint order.
  std::vector<Rgb> colors(layout.entries.size());
  std::map<int, int> seen_per_class;
  for (size_t i = 0; i < layout.entries.size(); ++i) {
    const int k = seen_per_class[layout.entries[i].class_id]++;
    colors[i] = instance_color(palette, layout.entries[i].class_id, k);
  }

  // Large first; stable keeps entry order on equal areas.
  std::vector<size_t> order(layout.entries.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return layout.entries[a].bbox.area() > layout.entries[b].bbox.area();
  });

  Canvas canvas(width, height);
  for (size_t idx : order) {
    const BBox& box = layout.entries[idx].bbox;
    const Rgb& color = colors[idx];
    const auto [x0, x1] = pixel_span(box.x1, box.x2, width);
    const auto [y0, y1] = pixel_span(box.y1, box.y2, height);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        std::uint8_t* p = canvas.at(x, y);
        p[0] = composite_channel(fill_alpha, color[0], p[0]);
        p[1] = composite_channel(fill_alpha, color[1], p[1]);
        p[2] = composite_channel(fill_alpha, color[2], p[2]);
      }
    }
  }
  return canvas;
}

std::vector<DecodedBox> decode_blueprint(const Canvas& canvas,
                                         const Palette& palette,
                                         int max_instances_per_class) {
  struct Extent {
    int min_x, min_y, max_x, max_y;
    std::int64_t count = 0;
  };

  std::map<Rgb, std::pair<int, int>> color_table;
  for (int c = 0; c < palette.num_classes; ++c) {
    for (int k = 0; k < max_instances_per_class; ++k) {
      const Rgb rgb = instance_color(palette, c, k);
      if (rgb == Rgb{0, 0, 0}) {
        throw data_error("decode: palette color collides with background");
      }
      auto [it, inserted] = color_table.emplace(rgb, std::make_pair(c, k));
      if (!inserted) {
        throw data_error("decode: palette colors not unique for requested "
                         "instance range");
      }
    }
  }

  std::map<std::pair<int, int>, Extent> found;
  for (int y = 0; y < canvas.height; ++y) {
    for (int x = 0; x < canvas.width; ++x) {
      const Rgb pix = canvas.get(x, y);
      if (pix == Rgb{0, 0, 0}) continue;
      auto it = color_table.find(pix);
      if (it == color_table.end()) {
        throw data_error("decode: off-palette pixel at (" + std::to_string(x) +
                         ", " + std::to_string(y) +
                         "); only opaque disjoint layouts are supported");
      }
      auto [entry_it, inserted] =
          found.emplace(it->second, Extent{x, y, x, y});
      Extent& e = entry_it->second;
      e.min_x = std::min(e.min_x, x);
      e.min_y = std::min(e.min_y, y);
      e.max_x = std::max(e.max_x, x);
      e.max_y = std::max(e.max_y, y);
      ++e.count;
    }
  }

  std::vector<DecodedBox> boxes;
  for (const auto& [key, e] : found) {
    const std::int64_t w = e.max_x - e.min_x + 1;
    const std::int64_t h = e.max_y - e.min_y + 1;
    if (e.count != w * h) {
      throw data_error("decode: non-rectangular patch for class " +
                       std::to_string(key.first) +
                       "; overlapping layouts are not supported");
    }
    DecodedBox box;
    box.class_id = key.first;
    box.instance_index = key.second;
    box.x1 = e.min_x;
    box.y1 = e.min_y;
    box.x2 = e.max_x + 1;
    box.y2 = e.max_y + 1;
    boxes.push_back(box);
  }
  return boxes;
}

}  // namespace debiaskit
