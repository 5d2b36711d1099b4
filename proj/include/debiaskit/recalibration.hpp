#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "debiaskit/dataset.hpp"
#include "debiaskit/rng.hpp"
#include "debiaskit/scoring.hpp"

namespace debiaskit {

struct RecalibConfig {
  double tau = 1.0;       // debias strength; 0 = uniform over bins
  double epsilon = 0.01;  // smoothing; keeps weights finite at rs = 0
  double kappa = 2.0;     // preference for classes already in the scene
  // Vertical jitter std in pixels; unset means 0.05 * layout height.
  std::optional<double> sigma_y;
  int max_new_instances = 2;
  double recalib_fraction = 0.5;  // share of seed entries resampled
  std::uint64_t rng_seed = 0;

  double effective_sigma_y(double layout_height) const {
    return sigma_y ? *sigma_y : 0.05 * layout_height;
  }

  void validate() const;
};

enum class Provenance { seed, moved, injected };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct LayoutEntry {
  int class_id = 0;
  BBox bbox;
  Provenance provenance = Provenance::seed;
  std::optional<std::int64_t> source_instance_id;
};

struct Layout {
  std::int64_t image_id = 0;
  double width = 0.0;
  double height = 0.0;
  std::vector<LayoutEntry> entries;
};

// Empirical per-class placement statistics gathered from a dataset; used to
// realize bins as concrete boxes.
struct ClassPlacementStats {
  // One entry per class: observed w/h ratios and normalized vertical
  // centers (cy / H). Either may be empty for unseen classes.
  std::vector<std::vector<double>> aspect_ratios;
  std::vector<std::vector<double>> v_centers_norm;

  static ClassPlacementStats from_dataset(const Dataset& ds);
};

// Exact Eq.-style selection probabilities, weight (rs + eps)^-tau
// normalized over the S x U grid of one class. Bin index = s * U + u.
std::vector<double> size_position_probs(int class_id, const RsTable& table,
                                        const RecalibConfig& cfg);

std::pair<int, int> sample_size_position(int class_id, const RsTable& table,
                                         const RecalibConfig& cfg, Rng& rng);

// Weight (kappa if present else 1) * (mean_rs + eps)^-tau per class.
std::vector<double> new_class_probs(const std::set<int>& present,
                                    const RsTable& table,
                                    const RecalibConfig& cfg);

int sample_new_class(const std::set<int>& present, const RsTable& table,
                     const RecalibConfig& cfg, Rng& rng);

// v + Normal(0, sigma^2), clamped to [half_extent, height - half_extent].
double jitter_vertical(double v, double sigma_y, Rng& rng, double height,
                       double half_extent = 0.0);

// Realize a (size_bin, pos_bin) pair as a concrete box: area log-uniform in
// the bin's range (top bin capped at 0.9*W*H), aspect from the class's
// empirical distribution (fallback 1.0), horizontal center uniform in the
// bin's band, vertical center as given. Up to 8 attempts; an attempt whose
// box cannot keep its size bin after fitting to the canvas is re-drawn.
std::optional<BBox> materialize_bbox(int class_id, int size_bin, int pos_bin,
                                     double v_center,
                                     const ClassPlacementStats& stats,
                                     const BinningConfig& binning, Rng& rng,
                                     double canvas_w, double canvas_h);

struct RecalibResult {
  Layout layout;
  int placement_errors = 0;
  int moved = 0;
  int injected = 0;
};

Layout seed_layout_from_image(const ImageRecord& img);

// Seed entries: ceil(fraction * N) are re-binned via inverse-RS sampling
// (class kept, vertical center jittered), the rest pass through; then up to
// max_new_instances instances of sampled classes are injected.
RecalibResult recalibrate_layout(const Layout& seed,
                                 const ClassPlacementStats& stats,
                                 const RsTable& table,
                                 const RecalibConfig& cfg, Rng& rng);

// Layout JSON: {image_id, width, height, entries: [{class_id, bbox:
// [x1,y1,x2,y2], provenance, source_instance_id?}]}.
std::string layout_to_json(const Layout& layout);
Layout layout_from_json(const std::string& text);

void write_layouts_jsonl(const std::vector<Layout>& layouts,
                         const std::string& path);
std::vector<Layout> read_layouts_jsonl(const std::string& path);

}  // namespace debiaskit
