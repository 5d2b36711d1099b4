#include "debiaskit/report.hpp"

#include <algorithm>
#include <cmath>

#include "debiaskit/errors.hpp"
#include "debiaskit/png_io.hpp"

namespace debiaskit {

using nlohmann::json;

json build_bias_report(const Dataset& ds, const RsTable& table,
                       const ReportOptions& opts) {
  const auto& binning = table.binning;

  std::vector<std::int64_t> class_counts(static_cast<size_t>(ds.num_classes()), 0);
  std::vector<std::int64_t> size_counts(static_cast<size_t>(binning.s_bins), 0);
  std::vector<std::int64_t> pos_counts(static_cast<size_t>(binning.u_bins), 0);
  std::int64_t region_counts[3] = {0, 0, 0};

  for (const auto& img : ds.images) {
    for (const auto& inst : img.instances) {
      ++class_counts[static_cast<size_t>(inst.class_id)];
      const GroupKey key = assign_group(inst, img, binning);
      ++size_counts[static_cast<size_t>(key.size_bin)];
      ++pos_counts[static_cast<size_t>(key.pos_bin)];
      ++region_counts[static_cast<int>(partition_position(inst, img))];
    }
  }

  std::vector<const GroupStats*> ranked;
  ranked.reserve(table.groups.size());
  for (const auto& [key, stats] : table.groups) ranked.push_back(&stats);
  std::sort(ranked.begin(), ranked.end(),
            [](const GroupStats* a, const GroupStats* b) {
              if (a->rs != b->rs) return a->rs < b->rs;
              return a->key < b->key;
            });
  json lowest = json::array();
  const size_t n_low =
      std::min(ranked.size(), static_cast<size_t>(std::max(opts.lowest_rs_count, 0)));
  for (size_t i = 0; i < n_low; ++i) {
    const GroupStats* g = ranked[i];
    lowest.push_back(json{{"class_id", g->key.class_id},
                          {"size_bin", g->key.size_bin},
                          {"pos_bin", g->key.pos_bin},
                          {"count", g->count},
                          {"rs", g->rs}});
  }

  json freq_partition{{"frequent", json::array()},
                      {"common", json::array()},
                      {"rare", json::array()}};
  for (const auto& [class_id, band] : partition_frequency(ds)) {
    freq_partition[to_string(band)].push_back(class_id);
  }

  return json{
      {"dataset_digest", ds.digest},
      {"totals",
       {{"images", ds.images.size()},
        {"instances", ds.total_instances},
        {"dropped_boxes", ds.dropped_boxes},
        {"classes", ds.num_classes()}}},
      {"histograms",
       {{"class_counts", class_counts},
        {"size_bin_counts", size_counts},
        {"pos_bin_counts", pos_counts},
        {"region_counts",
         {{"center", region_counts[0]},
          {"middle", region_counts[1]},
          {"outer", region_counts[2]}}}}},
      {"lowest_rs_groups", lowest},
      {"frequency_partition", freq_partition}};
}

void write_histogram_plot(const std::vector<std::int64_t>& counts,
                          const std::string& path) {
  const int n = static_cast<int>(counts.size());
  if (n == 0) throw data_error("histogram plot: no bars");
  const std::int64_t peak =
      std::max<std::int64_t>(1, *std::max_element(counts.begin(), counts.end()));

  const int bar_w = 24, gap = 6, plot_h = 200, margin = 10;
  Canvas canvas(margin * 2 + n * bar_w + (n - 1) * gap, plot_h + 2 * margin,
                {255, 255, 255});
  for (int i = 0; i < n; ++i) {
    const int h = static_cast<int>(
        std::lround(static_cast<double>(counts[static_cast<size_t>(i)]) /
                    static_cast<double>(peak) * plot_h));
    const int x0 = margin + i * (bar_w + gap);
    for (int y = plot_h + margin - h; y < plot_h + margin; ++y) {
      for (int x = x0; x < x0 + bar_w; ++x) {
        canvas.set(x, y, {70, 110, 180});
      }
    }
  }
  write_png(canvas, path);
}

}  // namespace debiaskit
