// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "debiaskit/blueprint.hpp"
#include "debiaskit/commands.hpp"
#include "debiaskit/digest.hpp"
#include "debiaskit/dynamics.hpp"
#include "debiaskit/errors.hpp"
#include "debiaskit/png_io.hpp"
#include "debiaskit/recalibration.hpp"
#include "debiaskit/scoring.hpp"
#include "test_support.hpp"

using namespace debiaskit;
using testsupport::CocoFixture;
using testsupport::TempDir;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Result = std::pair<bool, std::string>;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

RsTable grid_table(int num_classes, int s_bins, int u_bins,
                   const std::function<double(int, int, int)>& rs_of) {
  RsTable table;
  table.binning.s_bins = s_bins;
  table.binning.u_bins = u_bins;
  table.binning.size_thresholds.clear();
  for (int i = 1; i < s_bins; ++i) {
    table.binning.size_thresholds.push_back(1024.0 * i * i);
  }
  table.dataset_digest = "acceptance";
  for (int c = 0; c < num_classes; ++c) {
    table.classes.push_back("class_" + std::to_string(c));
    for (int s = 0; s < s_bins; ++s) {
      for (int u = 0; u < u_bins; ++u) {
        GroupStats stats;
        stats.key = {c, s, u};
        stats.rs = rs_of(c, s, u);
        table.groups.emplace(stats.key, stats);
      }
    }
  }
  for (int c = 0; c < num_classes; ++c) {
    table.class_mean_rs.push_back(table.recompute_class_mean(c));
  }
  return table;
}

// --- criterion 1: inverse-RS size/position sampling fidelity ---------------

Result criterion_eq3_sampling() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> rs = {0.40, 0.05, 0.22, 0.00, 0.31, 0.13,
                                  0.08, 0.55, 0.02};
  const RsTable table = grid_table(
      1, 3, 3, [&](int, int s, int u) { return rs[static_cast<size_t>(s * 3 + u)]; });
  RecalibConfig cfg;
  cfg.epsilon = 0.01;
  cfg.tau = 1.0;

  // Brute-force normalization of the target distribution.
  std::vector<double> probs(9);
  double total = 0.0;
  for (size_t i = 0; i < 9; ++i) {
    probs[i] = std::pow(rs[i] + cfg.epsilon, -cfg.tau);
    total += probs[i];
  }
  for (auto& p : probs) p /= total;

  const int draws = 100000;
  std::vector<std::int64_t> counts(9, 0);
  Rng rng(20240901);
  for (int i = 0; i < draws; ++i) {
    const auto [s, u] = sample_size_position(0, table, cfg, rng);
    ++counts[static_cast<size_t>(s * 3 + u)];
  }
  const double tv = testsupport::total_variation(counts, probs, draws);
  const double elapsed = seconds_since(t0);
  std::ostringstream detail;
  detail << "TV=" << tv << ", " << elapsed << "s";
  return {tv < 0.01 && elapsed < 5.0, detail.str()};
}

// --- criterion 2: class-injection sampling fidelity ------------------------

Result criterion_eq5_sampling() {
  const std::vector<double> mean_rs = {0.31, 0.07, 0.55, 0.02, 0.18,
                                       0.44, 0.09, 0.26, 0.01, 0.38};
  const RsTable table = grid_table(
      10, 1, 1, [&](int c, int, int) { return mean_rs[static_cast<size_t>(c)]; });
  RecalibConfig cfg;
  cfg.kappa = 2.0;
  cfg.tau = 1.0;
  cfg.epsilon = 0.01;
  const std::set<int> present = {1, 4, 7};

  std::vector<double> probs(10);
  double total = 0.0;
  for (int c = 0; c < 10; ++c) {
    const double context = present.count(c) ? cfg.kappa : 1.0;
    probs[static_cast<size_t>(c)] =
        context * std::pow(mean_rs[static_cast<size_t>(c)] + cfg.epsilon, -cfg.tau);
    total += probs[static_cast<size_t>(c)];
  }
  for (auto& p : probs) p /= total;

  const int draws = 100000;
  std::vector<std::int64_t> counts(10, 0);
  Rng rng(555001);
  for (int i = 0; i < draws; ++i) {
    ++counts[static_cast<size_t>(sample_new_class(present, table, cfg, rng))];
  }
  const double tv = testsupport::total_variation(counts, probs, draws);
  return {tv < 0.01, "TV=" + std::to_string(tv)};
}

// --- criterion 3: tau = 0 uniformity for both samplers ---------------------

Result criterion_tau_zero_uniformity() {
  const int draws = 100000;

  const RsTable bins = grid_table(1, 3, 3, [](int, int s, int u) {
    return 0.1 * (s + 1) + 0.03 * u;  // arbitrary non-uniform scores
  });
  RecalibConfig cfg;
  cfg.tau = 0.0;
  std::vector<std::int64_t> bin_counts(9, 0);
  Rng rng1(88100);
  for (int i = 0; i < draws; ++i) {
    const auto [s, u] = sample_size_position(0, bins, cfg, rng1);
    ++bin_counts[static_cast<size_t>(s * 3 + u)];
  }
  const double chi_bins = testsupport::chi_square_stat(
      bin_counts, std::vector<double>(9, 1.0 / 9.0), draws);
  const double p_bins = testsupport::chi_square_p(chi_bins, 8);

  const RsTable classes = grid_table(10, 1, 1, [](int c, int, int) {
    return 0.05 * (c + 1);
  });
  RecalibConfig ccfg;
  ccfg.tau = 0.0;
  ccfg.kappa = 1.0;
  std::vector<std::int64_t> class_counts(10, 0);
  Rng rng2(88200);
  for (int i = 0; i < draws; ++i) {
    ++class_counts[static_cast<size_t>(sample_new_class({2, 3}, classes, ccfg, rng2))];
  }
  const double chi_classes = testsupport::chi_square_stat(
      class_counts, std::vector<double>(10, 0.1), draws);
  const double p_classes = testsupport::chi_square_p(chi_classes, 9);

  std::ostringstream detail;
  detail << "p_bins=" << p_bins << ", p_classes=" << p_classes;
  return {p_bins > 0.01 && p_classes > 0.01, detail.str()};
}

// --- criterion 4: EMA dynamics closed form and the mu = 1 static limit -----

Result criterion_ema_dynamics() {
  if (DynamicsConfig{}.mu != 0.99) return {false, "default mu is not 0.99"};

  RsTable table = grid_table(2, 2, 2, [](int c, int s, int u) {
    return 0.1 * c + 0.05 * s + 0.01 * u + 0.2;
  });
  const GroupKey key{1, 0, 1};
  const double rs0 = table.at(key).rs;
  const double loss = 3.14159;
  DynamicsConfig cfg;  // mu = 0.99
  double worst = 0.0;
  int applied = 0;
  for (const int k : {1, 10, 100, 1000, 10000}) {
    while (applied < k) {
      apply_error_record(table, {key, loss, applied}, cfg);
      ++applied;
    }
    const double closed =
        std::pow(cfg.mu, k) * rs0 + (1.0 - std::pow(cfg.mu, k)) * loss;
    worst = std::max(worst, std::abs(table.at(key).rs - closed));
  }

  RsTable frozen = grid_table(2, 2, 2, [](int c, int s, int u) {
    return 0.3 * c + 0.07 * s + 0.02 * u;
  });
  const std::string before = serialize_rs_table(frozen);
  DynamicsConfig static_cfg;
  static_cfg.mu = 1.0;
  std::vector<ErrorRecord> records;
  for (int i = 0; i < 100; ++i) {
    records.push_back({{i % 2, i % 2, (i / 2) % 2}, 10.0 + i, i});
  }
  run_update_stream(frozen, records, static_cfg);
  const bool frozen_ok = serialize_rs_table(frozen) == before;

  std::ostringstream detail;
  detail << "max closed-form error=" << worst
         << (frozen_ok ? ", mu=1 byte-identical" : ", mu=1 CHANGED THE TABLE");
  return {worst < 1e-12 && frozen_ok, detail.str()};
}

// --- criterion 5: Eq. 1-2 oracle equivalence --------------------------------

Result criterion_scoring_oracle() {
  std::mt19937_64 gen(31415);
  auto urand = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
  };

  CocoFixture fx(4);
  std::vector<std::int64_t> ids;
  for (int i = 0; i < 12; ++i) {
    const auto img = fx.add_image(640, 480);
    const int n = 1 + static_cast<int>(gen() % 5);
    for (int b = 0; b < n; ++b) {
      const double w = urand(4, 280);
      const double h = urand(4, 220);
      ids.push_back(fx.add_box(img, static_cast<int>(gen() % 4),
                               urand(0, 640 - w), urand(0, 480 - h), w, h));
    }
  }
  const BinningConfig binning;
  const Dataset ds = parse_annotations(fx.json(), binning);

  TempDir tmp("acc_oracle");
  testsupport::write_file(tmp.file("emb.jsonl"),
                          testsupport::random_embeddings_jsonl(ids, 12, 777));
  const EmbeddingStore store = EmbeddingStore::load_jsonl(tmp.file("emb.jsonl"));

  const double beta = 0.5;
  const RsTable table = compute_rs_table(ds, store, beta, binning);

  std::map<GroupKey, std::vector<std::int64_t>> members;
  for (const auto& img : ds.images) {
    for (const auto& inst : img.instances) {
      members[assign_group(inst, img, binning)].push_back(inst.instance_id);
    }
  }

  double worst_vis = 0.0;
  bool rs_exact = true;
  int checked = 0;
  for (const auto& [key, stats] : table.groups) {
    auto it = members.find(key);
    const auto group_ids =
        it == members.end() ? std::vector<std::int64_t>{} : it->second;
    if (group_ids.size() > 20) continue;
    ++checked;

    // Explicit ordered-pair double sum, diagonal included, divided by 4.
    double oracle = 0.0;
    if (group_ids.size() > 1) {
      for (auto a : group_ids) {
        for (auto b : group_ids) {
          const auto& va = store.get(a);
          const auto& vb = store.get(b);
          double d2 = 0.0;
          for (size_t k = 0; k < va.size(); ++k) {
            d2 += (va[k] - vb[k]) * (va[k] - vb[k]);
          }
          oracle += d2;
        }
      }
      oracle /= 4.0 * static_cast<double>(group_ids.size()) *
                static_cast<double>(group_ids.size());
    }
    worst_vis = std::max(worst_vis, std::abs(stats.d_vis - oracle));
    if (stats.rs != stats.d_freq * (stats.d_vis + beta * stats.d_ctx)) {
      rs_exact = false;
    }
  }

  std::ostringstream detail;
  detail << checked << " groups, max |d_vis - oracle|=" << worst_vis
         << (rs_exact ? ", rs identity exact" : ", rs identity BROKEN");
  return {worst_vis < 1e-9 && rs_exact && checked > 0, detail.str()};
}

// --- criterion 6: blueprint determinism and fidelity ------------------------

Result criterion_blueprint() {
  // (a) PNG digests identical across repeated renders and worker counts.
  TempDir tmp("acc_blueprint");
  CocoFixture fx(6);
  std::mt19937_64 gen(9090);
  auto urand = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
  };
  std::vector<std::int64_t> ids;
  for (int i = 0; i < 8; ++i) {
    const auto img = fx.add_image(320, 240);
    for (int b = 0; b < 4; ++b) {
      const double w = urand(6, 140);
      const double h = urand(6, 110);
      ids.push_back(fx.add_box(img, static_cast<int>(gen() % 6),
                               urand(0, 320 - w), urand(0, 240 - h), w, h));
    }
  }
  testsupport::write_file(tmp.file("annotations.json"), fx.json());
  testsupport::write_file(tmp.file("emb.jsonl"),
                          testsupport::random_embeddings_jsonl(ids, 8, 11));

  PipelineConfig cfg;
  cfg.annotations = tmp.file("annotations.json");
  cfg.embeddings = tmp.file("emb.jsonl");
  cfg.out_dir = tmp.file("r1");
  cfg.rng_seed = 31337;
  cmd_stats(cfg);
  cmd_recalibrate(cfg);
  cmd_render(cfg);

  bool digests_ok = true;
  for (int workers : {1, 4}) {
    PipelineConfig other = cfg;
    other.out_dir = tmp.file("r_w" + std::to_string(workers));
    other.workers = workers;
    other.table_path = tmp.file("r1/rs_table.json");
    other.layouts_path = tmp.file("r1/layouts.jsonl");
    cmd_render(other);
    for (const auto& entry : fs::directory_iterator(tmp.file("r1/blueprints"))) {
      const auto twin =
          fs::path(other.out_dir) / "blueprints" / entry.path().filename();
      if (!fs::exists(twin) ||
          testsupport::read_file(entry.path().string()) !=
              testsupport::read_file(twin.string())) {
        digests_ok = false;
      }
    }
  }

  // (b) render -> decode roundtrip on 1000 random disjoint layouts.
  const Palette palette = build_palette(7);
  int roundtrips_ok = 0;
  std::mt19937_64 rg(2222);
  for (int trial = 0; trial < 1000; ++trial) {
    const int W = 128, H = 96;
    Layout layout;
    layout.image_id = trial;
    layout.width = W;
    layout.height = H;
    std::map<int, int> k_next;
    std::vector<std::pair<int, int>> expected;
    for (int tries = 0; tries < 50 && layout.entries.size() < 6; ++tries) {
      const int w = 2 + static_cast<int>(rg() % 28);
      const int h = 2 + static_cast<int>(rg() % 22);
      const int x = static_cast<int>(rg() % static_cast<std::uint64_t>(W - w));
      const int y = static_cast<int>(rg() % static_cast<std::uint64_t>(H - h));
      const BBox cand{static_cast<double>(x), static_cast<double>(y),
                      static_cast<double>(x + w), static_cast<double>(y + h)};
      bool overlaps = false;
      for (const auto& e : layout.entries) {
        if (cand.x1 < e.bbox.x2 && e.bbox.x1 < cand.x2 &&
            cand.y1 < e.bbox.y2 && e.bbox.y1 < cand.y2) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) continue;
      const int cls = static_cast<int>(rg() % 7);
      if (k_next[cls] >= 5) continue;
      LayoutEntry e;
      e.class_id = cls;
      e.bbox = cand;
      layout.entries.push_back(e);
      expected.emplace_back(cls, k_next[cls]++);
    }
    try {
      const Canvas canvas = render_blueprint(layout, palette, 1.0);
      const auto decoded = decode_blueprint(canvas, palette, 5);
      std::set<std::tuple<int, int, int, int, int, int>> got, want;
      for (const auto& d : decoded) {
        got.insert({d.class_id, d.instance_index, d.x1, d.y1, d.x2, d.y2});
      }
      for (size_t i = 0; i < layout.entries.size(); ++i) {
        const auto& b = layout.entries[i].bbox;
        want.insert({expected[i].first, expected[i].second,
                     static_cast<int>(b.x1), static_cast<int>(b.y1),
                     static_cast<int>(b.x2), static_cast<int>(b.y2)});
      }
      if (got == want) ++roundtrips_ok;
    } catch (const Error&) {
      // counted as a failed roundtrip
    }
  }

  // (c) paint-order property on 1000 overlapping pairs.
  int paint_ok = 0;
  std::mt19937_64 pg(3333);
  for (int trial = 0; trial < 1000; ++trial) {
    const int W = 100, H = 80;
    const int aw = 30 + static_cast<int>(pg() % 40);
    const int ah = 30 + static_cast<int>(pg() % 30);
    const int ax = static_cast<int>(pg() % static_cast<std::uint64_t>(W - aw));
    const int ay = static_cast<int>(pg() % static_cast<std::uint64_t>(H - ah));
    const int bw = 4 + static_cast<int>(pg() % 10);
    const int bh = 4 + static_cast<int>(pg() % 10);
    const int bx =
        ax + 2 + static_cast<int>(pg() % static_cast<std::uint64_t>(aw - bw - 3));
    const int by =
        ay + 2 + static_cast<int>(pg() % static_cast<std::uint64_t>(ah - bh - 3));
    const int ca = static_cast<int>(pg() % 6);
    const int cb = (ca + 1 + static_cast<int>(pg() % 5)) % 6;
    const double alpha =
        0.6 + 0.4 * (static_cast<double>(pg() >> 11) * 0x1.0p-53);

    const Palette small_palette = build_palette(6);
    Layout layout;
    layout.image_id = trial;
    layout.width = W;
    layout.height = H;
    LayoutEntry big;
    big.class_id = ca;
    big.bbox = BBox{static_cast<double>(ax), static_cast<double>(ay),
                    static_cast<double>(ax + aw), static_cast<double>(ay + ah)};
    LayoutEntry small;
    small.class_id = cb;
    small.bbox = BBox{static_cast<double>(bx), static_cast<double>(by),
                      static_cast<double>(bx + bw), static_cast<double>(by + bh)};
    layout.entries = {big, small};

    const Canvas canvas = render_blueprint(layout, small_palette, alpha);
    const Rgb pix = canvas.get(bx + bw / 2, by + bh / 2);
    double best = 1e18;
    int nearest = -1;
    for (int c = 0; c < 6; ++c) {
      const Rgb cand = instance_color(small_palette, c, 0);
      double d2 = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        const double d = static_cast<double>(pix[ch]) - static_cast<double>(cand[ch]);
        d2 += d * d;
      }
      if (d2 < best) {
        best = d2;
        nearest = c;
      }
    }
    if (nearest == cb) ++paint_ok;
  }

  std::ostringstream detail;
  detail << (digests_ok ? "digests stable" : "DIGESTS DIFFER") << ", roundtrip "
         << roundtrips_ok << "/1000, paint-order " << paint_ok << "/1000";
  return {digests_ok && roundtrips_ok == 1000 && paint_ok == 1000, detail.str()};
}

// --- criterion 7: palette contract at 80 classes ----------------------------

Result criterion_palette() {
  const auto t0 = std::chrono::steady_clock::now();
  const Palette p = build_palette(80, 0.1, 0.5);

  double min_dist = 360.0;
  for (int i = 0; i < 80; ++i) {
    for (int j = i + 1; j < 80; ++j) {
      const double d = std::abs(p.hue_of(i) - p.hue_of(j));
      min_dist = std::min(min_dist, std::min(d, 360.0 - d));
    }
  }

  std::set<Rgb> colors;
  bool distinct = true;
  for (int c = 0; c < 80 && distinct; ++c) {
    for (int k = 0; k <= 4; ++k) {
      if (!colors.insert(instance_color(p, c, k)).second) {
        distinct = false;
        break;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream detail;
  detail << "min hue distance=" << min_dist << " deg, "
         << (distinct ? "400 colors distinct" : "COLOR COLLISION") << ", "
         << elapsed << "s";
  return {std::abs(min_dist - 4.5) < 1e-9 && distinct && elapsed < 1.0,
          detail.str()};
}

// --- criterion 8: appendix partitions ----------------------------------------

Result criterion_partitions() {
  // Pixel census of a 1000x1000 image, each pixel sampled on a 4x4 subgrid
  // through the position classifier.
  const int N = 1000, sub = 4;
  double counts[3] = {0.0, 0.0, 0.0};
  const double weight = 1.0 / (sub * sub);
  for (int y = 0; y < N; ++y) {
    for (int x = 0; x < N; ++x) {
      for (int sy = 0; sy < sub; ++sy) {
        for (int sx = 0; sx < sub; ++sx) {
          const double px = x + (sx + 0.5) / sub;
          const double py = y + (sy + 0.5) / sub;
          counts[static_cast<int>(partition_position_point(px, py, N, N))] +=
              weight;
        }
      }
    }
  }
  const double total = static_cast<double>(N) * N;
  bool regions_ok = true;
  std::ostringstream detail;
  detail.precision(5);
  for (int r = 0; r < 3; ++r) {
    const double pct = 100.0 * counts[r] / total;
    detail << (r ? ", " : "") << pct << "%";
    if (std::abs(pct - 100.0 / 3.0) > 0.1) regions_ok = false;
  }

  // Frequency partition on a 10-class fixture with counts 10..1.
  CocoFixture fx(10);
  const auto img = fx.add_image(2000, 2000);
  for (int c = 0; c < 10; ++c) {
    for (int k = 0; k < 10 - c; ++k) {
      fx.add_box(img, c, 20.0 * k + c, 15.0 * c, 10, 10);
    }
  }
  const Dataset ds = parse_annotations(fx.json(), BinningConfig{});
  const auto bands = partition_frequency(ds);
  const bool freq_ok =
      bands.at(0) == FrequencyBand::frequent &&
      bands.at(1) == FrequencyBand::frequent &&
      bands.at(2) == FrequencyBand::frequent &&
      bands.at(3) == FrequencyBand::common && bands.at(4) == FrequencyBand::common &&
      bands.at(5) == FrequencyBand::common && bands.at(6) == FrequencyBand::common &&
      bands.at(7) == FrequencyBand::rare && bands.at(8) == FrequencyBand::rare &&
      bands.at(9) == FrequencyBand::rare;

  const BinningConfig binning;
  const bool size_ok = size_bin_of_area(32.0 * 32.0, binning) == 1 &&
                       size_bin_of_area(96.0 * 96.0, binning) == 1 &&
                       size_bin_of_area(31.0 * 31.0, binning) == 0 &&
                       size_bin_of_area(97.0 * 97.0, binning) == 2 &&
                       size_bin_of_area(20.0 * 20.0, binning) == 0 &&
                       size_bin_of_area(100.0 * 100.0, binning) == 2;

  detail << (freq_ok ? ", frequency bands match" : ", FREQUENCY MISMATCH")
         << (size_ok ? ", size boundaries match" : ", SIZE MISMATCH");
  return {regions_ok && freq_ok && size_ok, detail.str()};
}

// --- criterion 9: end-to-end fixture -----------------------------------------

Result criterion_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir tmp("acc_e2e");

  CocoFixture fx(10);
  std::mt19937_64 gen(515151);
  auto urand = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
  };
  std::vector<std::int64_t> ids;
  for (int i = 0; i < 20; ++i) {
    const auto img = fx.add_image(640, 480);
    const int n = 2 + static_cast<int>(gen() % 6);
    for (int b = 0; b < n; ++b) {
      const double w = urand(6, 260);
      const double h = urand(6, 200);
      ids.push_back(fx.add_box(img, static_cast<int>(gen() % 10),
                               urand(0, 640 - w), urand(0, 480 - h), w, h));
    }
  }
  testsupport::write_file(tmp.file("annotations.json"), fx.json());
  testsupport::write_file(tmp.file("emb.jsonl"),
                          testsupport::random_embeddings_jsonl(ids, 16, 99));
  std::string errors;
  for (int i = 0; i < 50; ++i) {
    errors += json{{"class_id", i % 10}, {"size_bin", i % 3}, {"pos_bin", (i / 3) % 3},
                   {"loss", 0.25 + 0.01 * i}, {"step", i}}.dump() + "\n";
  }
  testsupport::write_file(tmp.file("errors.jsonl"), errors);

  PipelineConfig cfg;
  cfg.annotations = tmp.file("annotations.json");
  cfg.embeddings = tmp.file("emb.jsonl");
  cfg.errors = tmp.file("errors.jsonl");
  cfg.out_dir = tmp.file("out");
  cfg.rng_seed = 606060;
  cfg.workers = 2;

  const auto run1 = cmd_pipeline(cfg);
  if (run1.status != "complete" || run1.stages.size() != 4) {
    return {false, "first run incomplete"};
  }
  const auto manifest =
      json::parse(testsupport::read_file(tmp.file("out/manifest.json")));
  if (manifest["status"] != "complete" || manifest["stages"].size() != 4 ||
      manifest["config_digest"] != cfg.digest()) {
    return {false, "manifest lacks provenance"};
  }
  // Every listed output exists with its recorded digest.
  for (const auto& stage : manifest["stages"]) {
    for (const auto& output : stage["outputs"]) {
      if (file_digest(output["path"]) != output["digest"]) {
        return {false, "digest drift in " + output["path"].get<std::string>()};
      }
    }
  }

  std::vector<std::map<std::string, std::string>> digests1;
  for (const auto& s : run1.stages) {
    std::map<std::string, std::string> m;
    for (const auto& o : s.outputs) m[fs::path(o.path).filename().string()] = o.digest;
    digests1.push_back(m);
  }

  fs::remove_all(tmp.file("out"));
  const auto run2 = cmd_pipeline(cfg);
  for (size_t i = 0; i < run1.stages.size(); ++i) {
    std::map<std::string, std::string> m;
    for (const auto& o : run2.stages[i].outputs) {
      m[fs::path(o.path).filename().string()] = o.digest;
    }
    if (m != digests1[i]) return {false, "rerun digests differ in " + run1.stages[i].name};
  }

  const double elapsed = seconds_since(t0);
  std::ostringstream detail;
  detail << "two full runs, digest-identical, " << elapsed << "s";
  return {elapsed < 30.0, detail.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
      {"inverse-RS size/position sampling matches exact distribution",
       criterion_eq3_sampling},
      {"class-injection sampling matches exact distribution",
       criterion_eq5_sampling},
      {"tau=0 gives uniform draws for both samplers",
       criterion_tau_zero_uniformity},
      {"EMA updates match the closed form; mu=1 freezes the table",
       criterion_ema_dynamics},
      {"group scores match the brute-force pairwise oracle",
       criterion_scoring_oracle},
      {"blueprint rendering is deterministic and decodable",
       criterion_blueprint},
      {"80-class palette keeps hue spacing and distinct colors",
       criterion_palette},
      {"position, frequency, and size partitions match their definitions",
       criterion_partitions},
      {"20-image pipeline completes reproducibly under 30 s",
       criterion_end_to_end},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Result result{false, "exception"};
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result = {false, std::string("exception: ") + e.what()};
    }
    if (!result.first) ++failures;
    std::cout << (result.first ? "PASS" : "FAIL") << " criterion " << (i + 1)
              << ": " << criteria[i].first << " (" << result.second << ")\n";
  }
  if (failures) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all " << criteria.size() << " criteria passed\n";
  return 0;
}
