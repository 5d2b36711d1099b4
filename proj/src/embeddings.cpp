#include "debiaskit/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "debiaskit/dataset.hpp"
#include "debiaskit/errors.hpp"
#include "debiaskit/png_io.hpp"

namespace debiaskit {

using nlohmann::json;

namespace {

void l2_normalize(std::vector<double>& v) {
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  if (norm_sq < 1e-24) {
    // Degenerate input; use the uniform unit direction so the norm
    // contract holds for every crop.
    const double u = 1.0 / std::sqrt(static_cast<double>(v.size()));
    std::fill(v.begin(), v.end(), u);
    return;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
}

}  // namespace

void EmbeddingStore::insert(std::int64_t instance_id, std::vector<double> vec) {
  if (vec.empty()) {
    throw data_error("embedding for instance " + std::to_string(instance_id) +
                     " is empty");
  }
  for (double x : vec) {
    if (!std::isfinite(x)) {
      throw data_error("embedding for instance " +
                       std::to_string(instance_id) + " has non-finite values");
    }
  }
  if (dim_ < 0) {
    dim_ = static_cast<int>(vec.size());
  } else if (dim_ != static_cast<int>(vec.size())) {
    throw data_error("embedding for instance " + std::to_string(instance_id) +
                     " has dimension " + std::to_string(vec.size()) +
                     ", store expects " + std::to_string(dim_));
  }
  l2_normalize(vec);
  vectors_[instance_id] = std::move(vec);
}

bool EmbeddingStore::contains(std::int64_t instance_id) const {
  return vectors_.count(instance_id) > 0;
}

const std::vector<double>& EmbeddingStore::get(std::int64_t instance_id) const {
  auto it = vectors_.find(instance_id);
  if (it == vectors_.end()) {
    throw data_error("missing embedding for instance " +
                     std::to_string(instance_id));
  }
  return it->second;
}

EmbeddingStore EmbeddingStore::load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open embeddings file: " + path);
  EmbeddingStore store;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw data_error("embeddings file " + path + " line " +
                       std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.contains("instance_id") || !rec.contains("embedding") ||
        !rec["embedding"].is_array()) {
      throw data_error("embeddings file " + path + " line " +
                       std::to_string(line_no) +
                       ": expected {instance_id, embedding: [...]}");
    }
    store.insert(rec["instance_id"].get<std::int64_t>(),
                 rec["embedding"].get<std::vector<double>>());
  }
  return store;
}

std::vector<double> fallback_descriptor(const Canvas& image, const BBox& box) {
  if (image.width <= 0 || image.height <= 0) {
    throw data_error("fallback descriptor: empty image");
  }
  BBox b = box.clamped(static_cast<double>(image.width),
                       static_cast<double>(image.height));
  if (!(b.area() > 0.0)) {
    throw data_error("fallback descriptor: box has zero area inside image");
  }

  constexpr int kGrid = 8;
  std::vector<double> desc(kFallbackDescriptorDim, 0.0);

  // Exact area average of each kGrid x kGrid cell over the crop rectangle.
  for (int gy = 0; gy < kGrid; ++gy) {
    const double cy0 = b.y1 + (b.y2 - b.y1) * gy / kGrid;
    const double cy1 = b.y1 + (b.y2 - b.y1) * (gy + 1) / kGrid;
    for (int gx = 0; gx < kGrid; ++gx) {
      const double cx0 = b.x1 + (b.x2 - b.x1) * gx / kGrid;
      const double cx1 = b.x1 + (b.x2 - b.x1) * (gx + 1) / kGrid;

      double sum[3] = {0.0, 0.0, 0.0};
      double total_w = 0.0;
      const int px0 = static_cast<int>(std::floor(cx0));
      const int px1 = static_cast<int>(std::ceil(cx1));
      const int py0 = static_cast<int>(std::floor(cy0));
      const int py1 = static_cast<int>(std::ceil(cy1));
      for (int py = py0; py < py1; ++py) {
        if (py < 0 || py >= image.height) continue;
        const double hy = std::min(cy1, static_cast<double>(py + 1)) -
                          std::max(cy0, static_cast<double>(py));
        if (hy <= 0.0) continue;
        for (int px = px0; px < px1; ++px) {
          if (px < 0 || px >= image.width) continue;
          const double hx = std::min(cx1, static_cast<double>(px + 1)) -
                            std::max(cx0, static_cast<double>(px));
          if (hx <= 0.0) continue;
          const double w = hx * hy;
          const std::uint8_t* p = image.at(px, py);
          sum[0] += w * p[0];
          sum[1] += w * p[1];
          sum[2] += w * p[2];
          total_w += w;
        }
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double mean = total_w > 0.0 ? sum[ch] / total_w : 0.0;
        desc[static_cast<size_t>(ch * kGrid * kGrid + gy * kGrid + gx)] =
            mean / 127.5 - 1.0;
      }
    }
  }
  l2_normalize(desc);
  return desc;
}

EmbeddingStore build_store_from_images(const Dataset& ds,
                                       const std::string& images_dir) {
  EmbeddingStore store;
  for (const auto& img : ds.images) {
    if (img.instances.empty()) continue;
    const std::string path =
        images_dir + "/" + std::to_string(img.image_id) + ".png";
    Canvas pixels = read_png(path);
    for (const auto& inst : img.instances) {
      store.insert(inst.instance_id, fallback_descriptor(pixels, inst.bbox));
    }
  }
  return store;
}

}  // namespace debiaskit
