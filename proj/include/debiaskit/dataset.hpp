#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "debiaskit/geometry.hpp"

namespace debiaskit {

// Bin axes for a data group: object class, box-size bin, horizontal
// position bin of the box center.
struct GroupKey {
  int class_id = 0;
  int size_bin = 0;
  int pos_bin = 0;

  auto operator<=>(const GroupKey&) const = default;
};

struct BinningConfig {
  int s_bins = 3;
  // Area thresholds in px^2 between consecutive size bins; strictly
  // increasing, exactly s_bins - 1 entries. Defaults follow the COCO
  // small/normal/large convention.
  std::vector<double> size_thresholds = {32.0 * 32.0, 96.0 * 96.0};
  int u_bins = 3;

  void validate() const;
};

struct Instance {
  std::int64_t instance_id = 0;
  std::int64_t image_id = 0;
  int class_id = 0;
  BBox bbox;
  std::optional<std::int64_t> embedding_id;
};

struct ImageRecord {
  std::int64_t image_id = 0;
  double width = 0.0;
  double height = 0.0;
  std::vector<Instance> instances;
  std::set<int> class_set;
};

struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<std::string> classes;
  std::int64_t total_instances = 0;
  std::int64_t dropped_boxes = 0;  // zero-area after clamping, not ingested
  std::string digest;              // canonical-content digest, provenance key

  int num_classes() const { return static_cast<int>(classes.size()); }
};

enum class PositionRegion { center, middle, outer };

enum class FrequencyBand { frequent, common, rare };

const char* to_string(PositionRegion r);
const char* to_string(FrequencyBand b);

// Parse a COCO-style annotation JSON (images[], annotations[], categories[]).
// Boxes arrive as [x, y, w, h], are converted to corner form and clamped to
// image bounds; boxes with zero area after clamping are dropped and counted.
// Category ids are remapped to contiguous class ids ordered by COCO id.
Dataset load_annotations(const std::string& path, const BinningConfig& config);

// Same parser over an in-memory JSON string; `origin` names the source in
// error messages.
Dataset parse_annotations(const std::string& json_text,
                          const BinningConfig& config,
                          const std::string& origin = "<memory>");

int size_bin_of_area(double area, const BinningConfig& config);
int pos_bin_of_center(double cx, double image_width,
                      const BinningConfig& config);

GroupKey assign_group(const Instance& inst, const ImageRecord& img,
                      const BinningConfig& config);

// Appendix-style evaluation region: box center tested against two
// concentric centered rectangles of area W*H/3 and 2*W*H/3 (side scales
// sqrt(1/3) and sqrt(2/3)). Boundary points belong to the inner-most
// qualifying region.
PositionRegion partition_position(const Instance& inst, const ImageRecord& img);
PositionRegion partition_position_point(double cx, double cy, double width,
                                        double height);

// Rank classes by instance count descending (ties by class_id ascending);
// top ceil(0.3*|C|) are frequent, bottom ceil(0.3*|C|) rare, rest common.
// Frequent takes precedence when the two ranges overlap.
std::map<int, FrequencyBand> partition_frequency(const Dataset& ds);

// Per-instance group-assignment report, one JSON object per line:
// {instance_id, image_id, class_id, size_bin, pos_bin, region}.
void write_group_report(const Dataset& ds, const BinningConfig& config,
                        const std::string& path);

}  // namespace debiaskit
