#include "debiaskit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "debiaskit/digest.hpp"
#include "debiaskit/errors.hpp"

namespace debiaskit {

using nlohmann::json;

void BinningConfig::validate() const {
  if (s_bins < 1 || u_bins < 1) {
    throw data_error("binning: s_bins and u_bins must be >= 1");
  }
  if (static_cast<int>(size_thresholds.size()) != s_bins - 1) {
    throw data_error("binning: need exactly s_bins-1 size thresholds");
  }
  for (size_t i = 0; i + 1 < size_thresholds.size(); ++i) {
    if (!(size_thresholds[i] < size_thresholds[i + 1])) {
      throw data_error("binning: size thresholds must be strictly increasing");
    }
  }
  for (double t : size_thresholds) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw data_error("binning: size thresholds must be positive and finite");
    }
  }
}

const char* to_string(PositionRegion r) {
  switch (r) {
    case PositionRegion::center: return "center";
    case PositionRegion::middle: return "middle";
    case PositionRegion::outer: return "outer";
  }
  return "?";
}

const char* to_string(FrequencyBand b) {
  switch (b) {
    case FrequencyBand::frequent: return "frequent";
    case FrequencyBand::common: return "common";
    case FrequencyBand::rare: return "rare";
  }
  return "?";
}

namespace {

double require_number(const json& obj, const char* field,
                      const std::string& ctx) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_number()) {
    throw data_error("annotation file: missing numeric field '" +
                     std::string(field) + "' in " + ctx);
  }
  return it->get<double>();
}

std::string dataset_digest(const Dataset& ds) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& name : ds.classes) os << name << ';';
  os << '|';
  for (const auto& img : ds.images) {
    os << img.image_id << ',' << img.width << ',' << img.height << ':';
    for (const auto& inst : img.instances) {
      os << inst.instance_id << ',' << inst.class_id << ',' << inst.bbox.x1
         << ',' << inst.bbox.y1 << ',' << inst.bbox.x2 << ',' << inst.bbox.y2
         << ';';
    }
  }
  return digest_hex(os.str());
}

}  // namespace

Dataset parse_annotations(const std::string& json_text,
                          const BinningConfig& config,
                          const std::string& origin) {
  config.validate();

  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw data_error("annotation file " + origin + ": parse error at byte " +
                     std::to_string(e.byte) + ": " + e.what());
  }
  if (!root.is_object()) {
    throw data_error("annotation file " + origin + ": top level must be an object");
  }

  // categories[] -> contiguous class ids ordered by COCO category id.
  std::vector<std::pair<std::int64_t, std::string>> cats;
  for (const auto& c : root.value("categories", json::array())) {
    cats.emplace_back(static_cast<std::int64_t>(require_number(c, "id", "category")),
                      c.value("name", std::string{}));
  }
  std::sort(cats.begin(), cats.end());
  std::map<std::int64_t, int> cat_to_class;
  Dataset ds;
  for (const auto& [coco_id, name] : cats) {
    if (cat_to_class.count(coco_id)) {
      throw data_error("annotation file: duplicate category id " +
                       std::to_string(coco_id));
    }
    cat_to_class[coco_id] = static_cast<int>(ds.classes.size());
    ds.classes.push_back(name);
  }

  std::map<std::int64_t, size_t> image_index;
  for (const auto& im : root.value("images", json::array())) {
    ImageRecord rec;
    rec.image_id = static_cast<std::int64_t>(require_number(im, "id", "image"));
    rec.width = require_number(im, "width", "image");
    rec.height = require_number(im, "height", "image");
    if (!(rec.width > 0.0) || !(rec.height > 0.0)) {
      throw data_error("annotation file: image " + std::to_string(rec.image_id) +
                       " has non-positive dimensions");
    }
    if (image_index.count(rec.image_id)) {
      throw data_error("annotation file: duplicate image id " +
                       std::to_string(rec.image_id));
    }
    image_index[rec.image_id] = ds.images.size();
    ds.images.push_back(std::move(rec));
  }

  std::vector<std::int64_t> bad_image_refs, bad_category_refs;
  std::set<std::int64_t> seen_instance_ids;
  for (const auto& an : root.value("annotations", json::array())) {
    const auto ann_id =
        static_cast<std::int64_t>(require_number(an, "id", "annotation"));
    const auto image_id =
        static_cast<std::int64_t>(require_number(an, "image_id", "annotation"));
    const auto category_id = static_cast<std::int64_t>(
        require_number(an, "category_id", "annotation"));

    auto img_it = image_index.find(image_id);
    if (img_it == image_index.end()) {
      bad_image_refs.push_back(ann_id);
      continue;
    }
    auto cat_it = cat_to_class.find(category_id);
    if (cat_it == cat_to_class.end()) {
      bad_category_refs.push_back(ann_id);
      continue;
    }

    auto bbox_it = an.find("bbox");
    if (bbox_it == an.end() || !bbox_it->is_array() || bbox_it->size() != 4) {
      throw data_error("annotation " + std::to_string(ann_id) +
                       ": bbox must be [x, y, w, h]");
    }
    double x = (*bbox_it)[0].get<double>();
    double y = (*bbox_it)[1].get<double>();
    double w = (*bbox_it)[2].get<double>();
    double h = (*bbox_it)[3].get<double>();
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) ||
        !std::isfinite(h)) {
      throw data_error("annotation " + std::to_string(ann_id) +
                       ": non-finite bbox");
    }
    if (!seen_instance_ids.insert(ann_id).second) {
      throw data_error("annotation file: duplicate annotation id " +
                       std::to_string(ann_id));
    }

    ImageRecord& img = ds.images[img_it->second];
    BBox box{x, y, x + w, y + h};
    box = box.clamped(img.width, img.height);
    if (!(box.area() > 0.0)) {
      ++ds.dropped_boxes;
      continue;
    }

    Instance inst;
    inst.instance_id = ann_id;
    inst.image_id = image_id;
    inst.class_id = cat_it->second;
    inst.bbox = box;
    img.instances.push_back(inst);
  }

  if (!bad_image_refs.empty() || !bad_category_refs.empty()) {
    std::ostringstream os;
    os << "annotation file: dangling references;";
    if (!bad_image_refs.empty()) {
      os << " unknown image for annotation ids:";
      for (auto id : bad_image_refs) os << ' ' << id;
      os << ';';
    }
    if (!bad_category_refs.empty()) {
      os << " unknown category for annotation ids:";
      for (auto id : bad_category_refs) os << ' ' << id;
    }
    throw data_error(os.str());
  }

  std::sort(ds.images.begin(), ds.images.end(),
            [](const ImageRecord& a, const ImageRecord& b) {
              return a.image_id < b.image_id;
            });
  for (auto& img : ds.images) {
    std::sort(img.instances.begin(), img.instances.end(),
              [](const Instance& a, const Instance& b) {
                return a.instance_id < b.instance_id;
              });
    for (const auto& inst : img.instances) img.class_set.insert(inst.class_id);
    ds.total_instances += static_cast<std::int64_t>(img.instances.size());
  }
  ds.digest = dataset_digest(ds);
  return ds;
}

Dataset load_annotations(const std::string& path, const BinningConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open annotation file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_annotations(buf.str(), config, path);
}

int size_bin_of_area(double area, const BinningConfig& config) {
  const int s = config.s_bins;
  if (s == 1) return 0;
  const auto& t = config.size_thresholds;
  // Boundary convention from the COCO size names: an area equal to the top
  // threshold is not "larger than" it, an area equal to the bottom
  // threshold is not "smaller than" it.
  if (area > t.back()) return s - 1;
  int below_or_equal = 0;
  for (double th : t) {
    if (th <= area) ++below_or_equal;
  }
  return std::min(below_or_equal, s - 2);
}

int pos_bin_of_center(double cx, double image_width,
                      const BinningConfig& config) {
  int bin = static_cast<int>(std::floor(config.u_bins * cx / image_width));
  return std::clamp(bin, 0, config.u_bins - 1);
}

GroupKey assign_group(const Instance& inst, const ImageRecord& img,
                      const BinningConfig& config) {
  GroupKey key;
  key.class_id = inst.class_id;
  key.size_bin = size_bin_of_area(inst.bbox.area(), config);
  key.pos_bin = pos_bin_of_center(inst.bbox.cx(), img.width, config);
  return key;
}

PositionRegion partition_position_point(double cx, double cy, double width,
                                        double height) {
  const double inner = std::sqrt(1.0 / 3.0);
  const double outer = std::sqrt(2.0 / 3.0);
  const double dx = std::abs(cx - 0.5 * width);
  const double dy = std::abs(cy - 0.5 * height);
  if (dx <= 0.5 * width * inner && dy <= 0.5 * height * inner) {
    return PositionRegion::center;
  }
  if (dx <= 0.5 * width * outer && dy <= 0.5 * height * outer) {
    return PositionRegion::middle;
  }
  return PositionRegion::outer;
}

PositionRegion partition_position(const Instance& inst,
                                  const ImageRecord& img) {
  return partition_position_point(inst.bbox.cx(), inst.bbox.cy(), img.width,
                                  img.height);
}

std::map<int, FrequencyBand> partition_frequency(const Dataset& ds) {
  if (ds.images.empty() || ds.classes.empty()) {
    throw data_error("frequency partition: empty dataset");
  }
  const int n = ds.num_classes();
  std::vector<std::int64_t> counts(static_cast<size_t>(n), 0);
  for (const auto& img : ds.images) {
    for (const auto& inst : img.instances) {
      ++counts[static_cast<size_t>(inst.class_id)];
    }
  }
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[static_cast<size_t>(a)] != counts[static_cast<size_t>(b)]) {
      return counts[static_cast<size_t>(a)] > counts[static_cast<size_t>(b)];
    }
    return a < b;
  });

  const int k = static_cast<int>(std::ceil(0.3 * n));
  std::map<int, FrequencyBand> bands;
  for (int i = 0; i < n; ++i) bands[order[static_cast<size_t>(i)]] = FrequencyBand::common;
  // Rare first, then frequent, so frequent wins where the ranges overlap.
  for (int i = n - k; i < n; ++i) {
    bands[order[static_cast<size_t>(i)]] = FrequencyBand::rare;
  }
  for (int i = 0; i < k; ++i) {
    bands[order[static_cast<size_t>(i)]] = FrequencyBand::frequent;
  }
  return bands;
}

void write_group_report(const Dataset& ds, const BinningConfig& config,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  for (const auto& img : ds.images) {
    for (const auto& inst : img.instances) {
      GroupKey key = assign_group(inst, img, config);
      json rec{{"instance_id", inst.instance_id},
               {"image_id", inst.image_id},
               {"class_id", inst.class_id},
               {"size_bin", key.size_bin},
               {"pos_bin", key.pos_bin},
               {"region", to_string(partition_position(inst, img))}};
      out << rec.dump() << '\n';
    }
  }
  if (!out) throw io_error("failed writing: " + path);
}

}  // namespace debiaskit
