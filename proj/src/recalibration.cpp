#include "debiaskit/recalibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "debiaskit/errors.hpp"

namespace debiaskit {

using nlohmann::json;

void RecalibConfig::validate() const {
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw data_error("recalib: tau must be finite and >= 0");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw data_error("recalib: epsilon must be finite and > 0");
  }
  if (!(kappa >= 1.0) || !std::isfinite(kappa)) {
    throw data_error("recalib: kappa must be finite and >= 1");
  }
  if (sigma_y && (!(*sigma_y >= 0.0) || !std::isfinite(*sigma_y))) {
    throw data_error("recalib: sigma_y must be finite and >= 0");
  }
  if (max_new_instances < 0) {
    throw data_error("recalib: max_new_instances must be >= 0");
  }
  if (!(recalib_fraction >= 0.0) || !(recalib_fraction <= 1.0)) {
    throw data_error("recalib: recalib_fraction must be in [0, 1]");
  }
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::seed: return "seed";
    case Provenance::moved: return "moved";
    case Provenance::injected: return "injected";
  }
  return "?";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "seed") return Provenance::seed;
  if (s == "moved") return Provenance::moved;
  if (s == "injected") return Provenance::injected;
  throw data_error("layout: unknown provenance '" + s + "'");
}

ClassPlacementStats ClassPlacementStats::from_dataset(const Dataset& ds) {
  ClassPlacementStats stats;
  stats.aspect_ratios.resize(static_cast<size_t>(ds.num_classes()));
  stats.v_centers_norm.resize(static_cast<size_t>(ds.num_classes()));
  for (const auto& img : ds.images) {
    for (const auto& inst : img.instances) {
      const auto c = static_cast<size_t>(inst.class_id);
      stats.aspect_ratios[c].push_back(inst.bbox.width() / inst.bbox.height());
      stats.v_centers_norm[c].push_back(inst.bbox.cy() / img.height);
    }
  }
  return stats;
}

namespace {

// (base + eps)^-tau for each weight input, rescaled by the max so large tau
// stays in range. Rescaling divides every weight by the same constant and
// leaves the normalized distribution untouched.
std::vector<double> inverse_rs_weights(const std::vector<double>& base,
                                       double epsilon, double tau) {
  std::vector<double> logs(base.size());
  for (size_t i = 0; i < base.size(); ++i) {
    logs[i] = -tau * std::log(base[i] + epsilon);
  }
  const double peak = *std::max_element(logs.begin(), logs.end());
  std::vector<double> w(base.size());
  for (size_t i = 0; i < base.size(); ++i) w[i] = std::exp(logs[i] - peak);
  return w;
}

std::vector<double> normalized(std::vector<double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

std::vector<double> size_position_probs(int class_id, const RsTable& table,
                                        const RecalibConfig& cfg) {
  std::vector<double> rs;
  rs.reserve(static_cast<size_t>(table.bins_per_class()));
  for (int s = 0; s < table.binning.s_bins; ++s) {
    for (int u = 0; u < table.binning.u_bins; ++u) {
      rs.push_back(table.at({class_id, s, u}).rs);
    }
  }
  return normalized(inverse_rs_weights(rs, cfg.epsilon, cfg.tau));
}

std::pair<int, int> sample_size_position(int class_id, const RsTable& table,
                                         const RecalibConfig& cfg, Rng& rng) {
  std::vector<double> rs;
  rs.reserve(static_cast<size_t>(table.bins_per_class()));
  for (int s = 0; s < table.binning.s_bins; ++s) {
    for (int u = 0; u < table.binning.u_bins; ++u) {
      rs.push_back(table.at({class_id, s, u}).rs);
    }
  }
  const auto w = inverse_rs_weights(rs, cfg.epsilon, cfg.tau);
  const auto idx = rng.categorical(w);
  const int u_bins = table.binning.u_bins;
  return {static_cast<int>(idx) / u_bins, static_cast<int>(idx) % u_bins};
}

std::vector<double> new_class_probs(const std::set<int>& present,
                                    const RsTable& table,
                                    const RecalibConfig& cfg) {
  auto w = inverse_rs_weights(table.class_mean_rs, cfg.epsilon, cfg.tau);
  for (int c = 0; c < table.num_classes(); ++c) {
    if (present.count(c)) w[static_cast<size_t>(c)] *= cfg.kappa;
  }
  return normalized(std::move(w));
}

int sample_new_class(const std::set<int>& present, const RsTable& table,
                     const RecalibConfig& cfg, Rng& rng) {
  auto w = inverse_rs_weights(table.class_mean_rs, cfg.epsilon, cfg.tau);
  for (int c = 0; c < table.num_classes(); ++c) {
    if (present.count(c)) w[static_cast<size_t>(c)] *= cfg.kappa;
  }
  return static_cast<int>(rng.categorical(w));
}

double jitter_vertical(double v, double sigma_y, Rng& rng, double height,
                       double half_extent) {
  const double jittered = sigma_y > 0.0 ? rng.normal(v, sigma_y) : v;
  const double lo = half_extent;
  const double hi = height - half_extent;
  if (lo > hi) return 0.5 * height;
  return std::clamp(jittered, lo, hi);
}

std::optional<BBox> materialize_bbox(int class_id, int size_bin, int pos_bin,
                                     double v_center,
                                     const ClassPlacementStats& stats,
                                     const BinningConfig& binning, Rng& rng,
                                     double canvas_w, double canvas_h) {
  // Area range of the requested bin; the bottom edge never drops below
  // 1 px^2 and the top bin is capped at 0.9 * canvas area.
  double area_lo = 1.0;
  double area_hi = 0.9 * canvas_w * canvas_h;
  if (size_bin > 0) area_lo = binning.size_thresholds[static_cast<size_t>(size_bin - 1)];
  if (size_bin < binning.s_bins - 1) {
    area_hi = std::min(area_hi, binning.size_thresholds[static_cast<size_t>(size_bin)]);
  }
  if (!(area_lo < area_hi)) return std::nullopt;

  const auto& ratios = stats.aspect_ratios.empty()
                           ? std::vector<double>{}
                           : stats.aspect_ratios[static_cast<size_t>(class_id)];

  const double band_w = canvas_w / binning.u_bins;
  const double band_lo = band_w * pos_bin;

  auto in_bins = [&](const BBox& box) {
    return box.area() > 0.0 &&
           size_bin_of_area(box.area(), binning) == size_bin &&
           pos_bin_of_center(box.cx(), canvas_w, binning) == pos_bin;
  };

  for (int attempt = 0; attempt < 8; ++attempt) {
    const double area =
        std::exp(rng.uniform(std::log(area_lo), std::log(area_hi)));
    const double aspect =
        ratios.empty() ? 1.0 : ratios[rng.uniform_index(ratios.size())];
    const double cx = band_lo + band_w * rng.uniform();
    const double cy = std::clamp(v_center, 0.0, canvas_h);

    const double w = std::sqrt(area * aspect);
    const double h = std::sqrt(area / aspect);

    BBox raw{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    BBox cut = raw.clamped(canvas_w, canvas_h);
    if (in_bins(cut)) return cut;

    // Clamping broke a bin; shrink about the center until the whole box
    // fits, then re-check. Centers on the canvas edge cannot shrink.
    const double max_hw = std::min(cx, canvas_w - cx);
    const double max_hh = std::min(cy, canvas_h - cy);
    const double scale = std::min({1.0, 2.0 * max_hw / w, 2.0 * max_hh / h});
    if (!(scale > 0.0)) continue;
    BBox fit{cx - 0.5 * w * scale, cy - 0.5 * h * scale,
             cx + 0.5 * w * scale, cy + 0.5 * h * scale};
    fit = fit.clamped(canvas_w, canvas_h);
    if (in_bins(fit)) return fit;
  }
  return std::nullopt;
}

Layout seed_layout_from_image(const ImageRecord& img) {
  Layout layout;
  layout.image_id = img.image_id;
  layout.width = img.width;
  layout.height = img.height;
  for (const auto& inst : img.instances) {
    LayoutEntry e;
    e.class_id = inst.class_id;
    e.bbox = inst.bbox;
    e.provenance = Provenance::seed;
    e.source_instance_id = inst.instance_id;
    layout.entries.push_back(e);
  }
  return layout;
}

RecalibResult recalibrate_layout(const Layout& seed,
                                 const ClassPlacementStats& stats,
                                 const RsTable& table,
                                 const RecalibConfig& cfg, Rng& rng) {
  const auto n = seed.entries.size();
  const auto n_move = static_cast<size_t>(
      std::ceil(cfg.recalib_fraction * static_cast<double>(n)));
  const double sigma_y = cfg.effective_sigma_y(seed.height);

  // Uniform selection without replacement, then ascending order so the rng
  // consumption sequence is independent of the shuffle outcome layout.
  std::vector<size_t> indices(n);
  std::iota(indices.begin(), indices.end(), size_t{0});
  for (size_t i = 0; i < n_move && n > 0; ++i) {
    const size_t j = i + static_cast<size_t>(rng.uniform_index(n - i));
    std::swap(indices[i], indices[j]);
  }
  std::vector<bool> selected(n, false);
  for (size_t i = 0; i < n_move; ++i) selected[indices[i]] = true;

  RecalibResult result;
  result.layout.image_id = seed.image_id;
  result.layout.width = seed.width;
  result.layout.height = seed.height;

  for (size_t i = 0; i < n; ++i) {
    const LayoutEntry& entry = seed.entries[i];
    if (!selected[i]) {
      result.layout.entries.push_back(entry);
      continue;
    }
    const auto [s, u] = sample_size_position(entry.class_id, table, cfg, rng);
    const double v =
        jitter_vertical(entry.bbox.cy(), sigma_y, rng, seed.height);
    auto box = materialize_bbox(entry.class_id, s, u, v, stats, table.binning,
                                rng, seed.width, seed.height);
    if (!box) {
      ++result.placement_errors;
      continue;
    }
    LayoutEntry moved = entry;
    moved.bbox = *box;
    moved.provenance = Provenance::moved;
    result.layout.entries.push_back(moved);
    ++result.moved;
  }

  const int n_new =
      cfg.max_new_instances > 0
          ? static_cast<int>(rng.uniform_index(
                static_cast<std::uint64_t>(cfg.max_new_instances) + 1))
          : 0;
  for (int k = 0; k < n_new; ++k) {
    std::set<int> present;
    for (const auto& e : result.layout.entries) present.insert(e.class_id);
    const int c = sample_new_class(present, table, cfg, rng);
    const auto [s, u] = sample_size_position(c, table, cfg, rng);

    const auto& v_dist = stats.v_centers_norm.empty()
                             ? std::vector<double>{}
                             : stats.v_centers_norm[static_cast<size_t>(c)];
    const double v =
        v_dist.empty()
            ? rng.uniform(0.25 * seed.height, 0.75 * seed.height)
            : v_dist[rng.uniform_index(v_dist.size())] * seed.height;

    auto box = materialize_bbox(c, s, u, v, stats, table.binning, rng,
                                seed.width, seed.height);
    if (!box) {
      ++result.placement_errors;
      continue;
    }
    LayoutEntry e;
    e.class_id = c;
    e.bbox = *box;
    e.provenance = Provenance::injected;
    result.layout.entries.push_back(e);
    ++result.injected;
  }

  if (!seed.entries.empty() && result.layout.entries.empty()) {
    throw data_error("recalibration left layout " +
                     std::to_string(seed.image_id) + " with no entries");
  }
  return result;
}

namespace {

json layout_to_json_obj(const Layout& layout) {
  json entries = json::array();
  for (const auto& e : layout.entries) {
    json obj{{"class_id", e.class_id},
             {"bbox", {e.bbox.x1, e.bbox.y1, e.bbox.x2, e.bbox.y2}},
             {"provenance", to_string(e.provenance)}};
    if (e.source_instance_id) obj["source_instance_id"] = *e.source_instance_id;
    entries.push_back(obj);
  }
  return json{{"image_id", layout.image_id},
              {"width", layout.width},
              {"height", layout.height},
              {"entries", entries}};
}

Layout layout_from_json_obj(const json& obj) {
  Layout layout;
  try {
    layout.image_id = obj.at("image_id").get<std::int64_t>();
    layout.width = obj.at("width").get<double>();
    layout.height = obj.at("height").get<double>();
    for (const auto& e : obj.at("entries")) {
      LayoutEntry entry;
      entry.class_id = e.at("class_id").get<int>();
      const auto& b = e.at("bbox");
      if (!b.is_array() || b.size() != 4) {
        throw data_error("layout: bbox must be [x1,y1,x2,y2]");
      }
      entry.bbox = BBox{b[0].get<double>(), b[1].get<double>(),
                        b[2].get<double>(), b[3].get<double>()};
      entry.provenance =
          provenance_from_string(e.at("provenance").get<std::string>());
      if (e.contains("source_instance_id")) {
        entry.source_instance_id = e["source_instance_id"].get<std::int64_t>();
      }
      layout.entries.push_back(entry);
    }
  } catch (const json::exception& e) {
    throw data_error(std::string("layout: malformed document: ") + e.what());
  }
  for (const auto& e : layout.entries) {
    if (!e.bbox.valid_within(layout.width, layout.height)) {
      throw data_error("layout " + std::to_string(layout.image_id) +
                       ": box outside canvas or degenerate");
    }
  }
  return layout;
}

}  // namespace

std::string layout_to_json(const Layout& layout) {
  return layout_to_json_obj(layout).dump();
}

Layout layout_from_json(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw data_error(std::string("layout: parse error: ") + e.what());
  }
  return layout_from_json_obj(obj);
}

void write_layouts_jsonl(const std::vector<Layout>& layouts,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  for (const auto& layout : layouts) {
    out << layout_to_json(layout) << '\n';
  }
  if (!out) throw io_error("failed writing: " + path);
}

std::vector<Layout> read_layouts_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open layouts file: " + path);
  std::vector<Layout> layouts;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      layouts.push_back(layout_from_json(line));
    } catch (const Error& e) {
      throw Error(e.kind(), path + " line " + std::to_string(line_no) + ": " +
                                e.what());
    }
  }
  return layouts;
}

}  // namespace debiaskit
