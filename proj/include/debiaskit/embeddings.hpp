#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "debiaskit/canvas.hpp"
#include "debiaskit/geometry.hpp"

namespace debiaskit {

struct Dataset;

// Per-instance feature vectors, unit-normalized on insert. All vectors in a
// store share one dimension.
class EmbeddingStore {
 public:
  void insert(std::int64_t instance_id, std::vector<double> vec);
  bool contains(std::int64_t instance_id) const;
  const std::vector<double>& get(std::int64_t instance_id) const;
  int dimension() const { return dim_; }
  size_t size() const { return vectors_.size(); }

  // JSON Lines, one record per instance: {instance_id, embedding: [f64; d]}.
  static EmbeddingStore load_jsonl(const std::string& path);

 private:
  int dim_ = -1;
  std::map<std::int64_t, std::vector<double>> vectors_;
};

inline constexpr int kFallbackDescriptorDim = 192;  // 8*8 per channel * 3

// Deterministic stand-in for learned ROI features: crop the box, area-resize
// each channel to 8x8, map intensities to [-1, 1], concatenate, L2-normalize.
// The signed mapping keeps dark and bright solid crops apart; a vector that
// area-averages to zero falls back to the uniform direction.
std::vector<double> fallback_descriptor(const Canvas& image, const BBox& box);

// Build a store for every instance in the dataset from images on disk,
// expected at <images_dir>/<image_id>.png.
EmbeddingStore build_store_from_images(const Dataset& ds,
                                       const std::string& images_dir);

}  // namespace debiaskit
