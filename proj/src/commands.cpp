#include "debiaskit/commands.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "debiaskit/blueprint.hpp"
#include "debiaskit/digest.hpp"
#include "debiaskit/errors.hpp"
#include "debiaskit/png_io.hpp"

namespace debiaskit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json config_to_json(const PipelineConfig& cfg) {
  json root{
      {"annotations", cfg.annotations},
      {"out", cfg.out_dir},
      {"seed", cfg.rng_seed},
      {"beta", cfg.beta},
      {"binning",
       {{"s_bins", cfg.binning.s_bins},
        {"size_thresholds", cfg.binning.size_thresholds},
        {"u_bins", cfg.binning.u_bins}}},
      {"recalib",
       {{"tau", cfg.recalib.tau},
        {"epsilon", cfg.recalib.epsilon},
        {"kappa", cfg.recalib.kappa},
        {"max_new_instances", cfg.recalib.max_new_instances},
        {"recalib_fraction", cfg.recalib.recalib_fraction}}},
      {"dynamics",
       {{"mu", cfg.dynamics.mu}, {"loss_divisor", cfg.dynamics.loss_divisor}}},
      {"blueprint",
       {{"fill_alpha", cfg.blueprint.fill_alpha},
        {"alpha_step", cfg.blueprint.alpha_step},
        {"value_min", cfg.blueprint.value_min}}},
      {"report",
       {{"lowest_rs_count", cfg.report.lowest_rs_count},
        {"plots", cfg.report.plots}}},
      {"render_variant", cfg.render_variant}};
  if (cfg.recalib.sigma_y) root["recalib"]["sigma_y"] = *cfg.recalib.sigma_y;
  if (cfg.embeddings) root["embeddings"] = *cfg.embeddings;
  if (cfg.images_dir) root["images_dir"] = *cfg.images_dir;
  if (cfg.errors) root["errors"] = *cfg.errors;
  if (cfg.table_path) root["table"] = *cfg.table_path;
  if (cfg.layouts_path) root["layouts"] = *cfg.layouts_path;
  return root;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw io_error("failed writing: " + path);
}

void ensure_out_dir(const PipelineConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw io_error("cannot create output dir " + cfg.out_dir + ": " +
                         ec.message());
}

EmbeddingStore load_embeddings(const PipelineConfig& cfg, const Dataset& ds) {
  if (cfg.embeddings) return EmbeddingStore::load_jsonl(*cfg.embeddings);
  if (cfg.images_dir) return build_store_from_images(ds, *cfg.images_dir);
  throw usage_error(
      "no embedding source: provide --embeddings JSONL or --images for the "
      "pixel-descriptor fallback");
}

// Index-sharded parallel loop; the per-item work draws nothing from shared
// mutable state, so the result is invariant to the worker count.
void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
  const int k = std::max(1, workers);
  if (k == 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int t = 0; t < k; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

RsTable load_input_table(const PipelineConfig& cfg,
                         const std::string& default_name) {
  const std::string path =
      cfg.table_path ? *cfg.table_path
                     : (fs::path(cfg.out_dir) / default_name).string();
  return load_rs_table(path);
}

}  // namespace

std::string PipelineConfig::digest() const {
  return digest_hex(config_to_json(*this).dump());
}

void merge_config_json(PipelineConfig& cfg, const json& root,
                       const std::string& origin) {
  if (!root.is_object()) {
    throw data_error("config " + origin + ": top level must be an object");
  }
  try {
    if (root.contains("annotations")) cfg.annotations = root["annotations"];
    if (root.contains("embeddings")) cfg.embeddings = root["embeddings"];
    if (root.contains("images_dir")) cfg.images_dir = root["images_dir"];
    if (root.contains("errors")) cfg.errors = root["errors"];
    if (root.contains("out")) cfg.out_dir = root["out"];
    if (root.contains("table")) cfg.table_path = root["table"];
    if (root.contains("layouts")) cfg.layouts_path = root["layouts"];
    if (root.contains("render_variant")) cfg.render_variant = root["render_variant"];
    if (root.contains("seed")) cfg.rng_seed = root["seed"];
    if (root.contains("workers")) cfg.workers = root["workers"];
    if (root.contains("beta")) cfg.beta = root["beta"];
    if (root.contains("binning")) {
      const auto& b = root["binning"];
      if (b.contains("s_bins")) cfg.binning.s_bins = b["s_bins"];
      if (b.contains("size_thresholds")) {
        cfg.binning.size_thresholds =
            b["size_thresholds"].get<std::vector<double>>();
      }
      if (b.contains("u_bins")) cfg.binning.u_bins = b["u_bins"];
    }
    if (root.contains("recalib")) {
      const auto& r = root["recalib"];
      if (r.contains("tau")) cfg.recalib.tau = r["tau"];
      if (r.contains("epsilon")) cfg.recalib.epsilon = r["epsilon"];
      if (r.contains("kappa")) cfg.recalib.kappa = r["kappa"];
      if (r.contains("sigma_y") && !r["sigma_y"].is_null()) {
        cfg.recalib.sigma_y = r["sigma_y"].get<double>();
      }
      if (r.contains("max_new_instances")) {
        cfg.recalib.max_new_instances = r["max_new_instances"];
      }
      if (r.contains("recalib_fraction")) {
        cfg.recalib.recalib_fraction = r["recalib_fraction"];
      }
    }
    if (root.contains("dynamics")) {
      const auto& d = root["dynamics"];
      if (d.contains("mu")) cfg.dynamics.mu = d["mu"];
      if (d.contains("loss_divisor")) cfg.dynamics.loss_divisor = d["loss_divisor"];
    }
    if (root.contains("blueprint")) {
      const auto& b = root["blueprint"];
      if (b.contains("fill_alpha")) cfg.blueprint.fill_alpha = b["fill_alpha"];
      if (b.contains("alpha_step")) cfg.blueprint.alpha_step = b["alpha_step"];
      if (b.contains("value_min")) cfg.blueprint.value_min = b["value_min"];
    }
    if (root.contains("report")) {
      const auto& r = root["report"];
      if (r.contains("lowest_rs_count")) cfg.report.lowest_rs_count = r["lowest_rs_count"];
      if (r.contains("plots")) cfg.report.plots = r["plots"];
    }
  } catch (const json::exception& e) {
    throw data_error("config " + origin + ": " + e.what());
  }
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  json root;
  try {
    root = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw data_error("config " + path + ": parse error: " + e.what());
  }
  PipelineConfig cfg;
  merge_config_json(cfg, root, path);
  return cfg;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for digest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return digest_hex(buf.str());
}

StageRecord cmd_stats(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  const Dataset ds = load_annotations(cfg.annotations, cfg.binning);
  if (ds.total_instances == 0) {
    throw data_error("stats: dataset has no instances");
  }
  const EmbeddingStore store = load_embeddings(cfg, ds);
  const RsTable table = compute_rs_table(ds, store, cfg.beta, cfg.binning);

  const std::string table_path =
      (fs::path(cfg.out_dir) / "rs_table.json").string();
  save_rs_table(table, table_path);

  const std::string assignments_path =
      (fs::path(cfg.out_dir) / "group_assignments.jsonl").string();
  write_group_report(ds, cfg.binning, assignments_path);

  json report = build_bias_report(ds, table, cfg.report);
  report["config_digest"] = cfg.digest();
  report["outputs"] = json{{"rs_table", file_digest(table_path)},
                           {"group_assignments", file_digest(assignments_path)}};
  const std::string report_path =
      (fs::path(cfg.out_dir) / "bias_report.json").string();
  write_text(report_path, report.dump(2) + "\n");

  StageRecord stage{"stats",
                    {{table_path, file_digest(table_path)},
                     {report_path, file_digest(report_path)},
                     {assignments_path, file_digest(assignments_path)}}};

  if (cfg.report.plots) {
    const auto& hist = report["histograms"];
    const std::vector<std::pair<std::string, std::string>> plots = {
        {"class_counts", "plot_class_counts.png"},
        {"size_bin_counts", "plot_size_bins.png"},
        {"pos_bin_counts", "plot_pos_bins.png"}};
    for (const auto& [field, name] : plots) {
      const std::string path = (fs::path(cfg.out_dir) / name).string();
      write_histogram_plot(hist[field].get<std::vector<std::int64_t>>(), path);
      stage.outputs.push_back({path, file_digest(path)});
    }
  }
  return stage;
}

RecalibrateSummary cmd_recalibrate(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  cfg.recalib.validate();
  const Dataset ds = load_annotations(cfg.annotations, cfg.binning);
  const RsTable table = load_input_table(cfg, "rs_table.json");
  if (table.dataset_digest != ds.digest) {
    throw data_error("recalibrate: rs table was built from a different "
                     "dataset (digest mismatch)");
  }
  const ClassPlacementStats stats = ClassPlacementStats::from_dataset(ds);

  RecalibConfig rcfg = cfg.recalib;
  rcfg.rng_seed = cfg.rng_seed;

  std::vector<RecalibResult> results(ds.images.size());
  parallel_for(ds.images.size(), cfg.workers, [&](size_t i) {
    const Layout seed = seed_layout_from_image(ds.images[i]);
    Rng rng(derive_seed(rcfg.rng_seed,
                        static_cast<std::uint64_t>(seed.image_id)));
    results[i] = recalibrate_layout(seed, stats, table, rcfg, rng);
  });

  RecalibrateSummary summary;
  std::vector<Layout> layouts;
  layouts.reserve(results.size());
  for (const auto& r : results) {
    layouts.push_back(r.layout);
    summary.placement_errors += r.placement_errors;
    summary.moved += r.moved;
    summary.injected += r.injected;
  }

  const std::string layouts_path =
      (fs::path(cfg.out_dir) / "layouts.jsonl").string();
  write_layouts_jsonl(layouts, layouts_path);

  json meta{{"config_digest", cfg.digest()},
            {"config", config_to_json(cfg)},
            {"rs_table_digest", digest_hex(serialize_rs_table(table))},
            {"dataset_digest", ds.digest},
            {"layouts", file_digest(layouts_path)},
            {"layout_count", layouts.size()},
            {"placement_errors", summary.placement_errors},
            {"moved", summary.moved},
            {"injected", summary.injected}};
  const std::string meta_path =
      (fs::path(cfg.out_dir) / "layouts_meta.json").string();
  write_text(meta_path, meta.dump(2) + "\n");

  summary.stage = StageRecord{"recalibrate",
                              {{layouts_path, file_digest(layouts_path)},
                               {meta_path, file_digest(meta_path)}}};
  return summary;
}

RenderSummary cmd_render(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  const std::string layouts_path =
      cfg.layouts_path ? *cfg.layouts_path
                       : (fs::path(cfg.out_dir) / "layouts.jsonl").string();
  const std::vector<Layout> layouts = read_layouts_jsonl(layouts_path);

  const RsTable table = load_input_table(cfg, "rs_table.json");
  const Palette palette =
      build_palette(std::max(table.num_classes(), 1),
                    cfg.blueprint.alpha_step, cfg.blueprint.value_min);

  const fs::path png_dir = fs::path(cfg.out_dir) / "blueprints";
  std::error_code ec;
  fs::create_directories(png_dir, ec);
  if (ec) throw io_error("cannot create " + png_dir.string());

  struct Row {
    bool ok = false;
    std::string file;
    std::string error;
    std::string layout_digest;
  };
  std::vector<Row> rows(layouts.size());
  parallel_for(layouts.size(), cfg.workers, [&](size_t i) {
    Row& row = rows[i];
    row.layout_digest = digest_hex(layout_to_json(layouts[i]));
    const std::string name = std::to_string(layouts[i].image_id) + "_" +
                             cfg.render_variant + ".png";
    try {
      const Canvas canvas =
          render_blueprint(layouts[i], palette, cfg.blueprint.fill_alpha);
      const std::string path = (png_dir / name).string();
      write_png(canvas, path);
      row.ok = true;
      row.file = path;
    } catch (const Error& e) {
      row.error = e.what();
    }
  });

  RenderSummary summary;
  const std::string index_path =
      (fs::path(cfg.out_dir) / "blueprints_index.jsonl").string();
  {
    std::ofstream out(index_path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + index_path);
    const std::string config_digest = cfg.digest();
    for (size_t i = 0; i < layouts.size(); ++i) {
      json rec{{"image_id", layouts[i].image_id},
               {"layout_digest", rows[i].layout_digest},
               {"palette_digest", palette.digest()},
               {"config_digest", config_digest}};
      if (rows[i].ok) {
        rec["file"] = fs::path(rows[i].file).filename().string();
        ++summary.rendered;
      } else {
        rec["error"] = rows[i].error;
        ++summary.failures;
      }
      out << rec.dump() << '\n';
    }
    if (!out) throw io_error("failed writing: " + index_path);
  }

  summary.stage = StageRecord{"render", {{index_path, file_digest(index_path)}}};
  for (const auto& row : rows) {
    if (row.ok) summary.stage.outputs.push_back({row.file, file_digest(row.file)});
  }
  return summary;
}

UpdateSummary cmd_update(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  if (!cfg.errors) {
    throw usage_error("update: an --errors stream is required");
  }
  RsTable table = load_input_table(cfg, "rs_table.json");
  const auto records = read_error_stream(*cfg.errors);

  UpdateSummary summary;
  summary.report = run_update_stream(table, records, cfg.dynamics);

  const std::string table_path =
      (fs::path(cfg.out_dir) / "rs_table_updated.json").string();
  snapshot(table, cfg.dynamics, summary.report.applied, table_path);

  json per_group = json::array();
  for (const auto& [key, count] : summary.report.per_group) {
    per_group.push_back(json{{"class_id", key.class_id},
                             {"size_bin", key.size_bin},
                             {"pos_bin", key.pos_bin},
                             {"applied", count}});
  }
  json report{{"config_digest", cfg.digest()},
              {"applied", summary.report.applied},
              {"rejected", summary.report.rejected},
              {"per_group", per_group},
              {"min_rs_before", summary.report.min_rs_before},
              {"max_rs_before", summary.report.max_rs_before},
              {"min_rs_after", summary.report.min_rs_after},
              {"max_rs_after", summary.report.max_rs_after},
              {"updated_table", file_digest(table_path)}};
  const std::string report_path =
      (fs::path(cfg.out_dir) / "update_report.json").string();
  write_text(report_path, report.dump(2) + "\n");

  summary.stage = StageRecord{"update",
                              {{table_path, file_digest(table_path)},
                               {report_path, file_digest(report_path)}}};
  return summary;
}

namespace {

json manifest_json(const PipelineConfig& cfg,
                   const std::vector<StageRecord>& stages,
                   const std::string& status) {
  json stage_list = json::array();
  for (const auto& s : stages) {
    json outputs = json::array();
    for (const auto& o : s.outputs) {
      outputs.push_back(json{{"path", o.path}, {"digest", o.digest}});
    }
    stage_list.push_back(json{{"name", s.name}, {"outputs", outputs}});
  }
  return json{{"config_digest", cfg.digest()},
              {"config", config_to_json(cfg)},
              {"rng_seed", cfg.rng_seed},
              {"status", status},
              {"stages", stage_list}};
}

}  // namespace

PipelineSummary cmd_pipeline(const PipelineConfig& cfg) {
  PipelineSummary summary;
  summary.manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();

  std::vector<std::string> plan = {"stats", "recalibrate", "render"};
  if (cfg.errors) plan.push_back("update");

  if (cfg.dry_run) {
    std::cout << "pipeline plan (dry run, nothing written):\n";
    for (const auto& name : plan) {
      std::cout << "  " << name << " -> " << cfg.out_dir << "\n";
    }
    summary.status = "dry-run";
    return summary;
  }

  ensure_out_dir(cfg);
  auto flush_manifest = [&](const std::string& status) {
    write_text(summary.manifest_path,
               manifest_json(cfg, summary.stages, status).dump(2) + "\n");
  };

  try {
    summary.stages.push_back(cmd_stats(cfg));
    flush_manifest("partial");
    summary.stages.push_back(cmd_recalibrate(cfg).stage);
    flush_manifest("partial");
    summary.stages.push_back(cmd_render(cfg).stage);
    if (cfg.errors) {
      flush_manifest("partial");
      summary.stages.push_back(cmd_update(cfg).stage);
    }
  } catch (...) {
    flush_manifest("partial");
    throw;
  }

  summary.status = "complete";
  flush_manifest(summary.status);
  return summary;
}

}  // namespace debiaskit
