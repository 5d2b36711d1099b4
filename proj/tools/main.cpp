#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "debiaskit/commands.hpp"
#include "debiaskit/errors.hpp"

namespace {

using debiaskit::PipelineConfig;

struct FlagValues {
  std::optional<std::string> config_path;
  std::optional<std::string> annotations, embeddings, images_dir, errors;
  std::optional<std::string> out_dir, table, layouts, variant;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<double> beta;
  std::optional<int> s_bins, u_bins;
  std::optional<std::vector<double>> size_thresholds;
  std::optional<double> tau, epsilon, kappa, sigma_y, recalib_fraction;
  std::optional<int> max_new_instances;
  std::optional<double> mu, loss_divisor;
  std::optional<double> fill_alpha, alpha_step, value_min;
  std::optional<int> lowest_rs_count;
  bool plots = false;
  bool dry_run = false;
};

void add_shared_flags(CLI::App* cmd, FlagValues& v) {
  cmd->add_option("--config", v.config_path, "JSON config file; flags win");
  cmd->add_option("--seed", v.seed, "top-level RNG seed");
  cmd->add_option("--workers", v.workers, "parallel workers");
  cmd->add_option("--out", v.out_dir, "output directory");
  cmd->add_flag("--dry-run", v.dry_run, "print the plan, write nothing");
}

void add_data_flags(CLI::App* cmd, FlagValues& v) {
  cmd->add_option("--annotations", v.annotations, "COCO annotation JSON");
  cmd->add_option("--embeddings", v.embeddings,
                  "per-instance embeddings JSONL");
  cmd->add_option("--images", v.images_dir,
                  "image dir for the pixel-descriptor fallback");
  cmd->add_option("--beta", v.beta, "context-diversity weight");
  cmd->add_option("--s-bins", v.s_bins, "number of size bins");
  cmd->add_option("--u-bins", v.u_bins, "number of horizontal position bins");
  cmd->add_option("--size-thresholds", v.size_thresholds,
                  "area thresholds between size bins (px^2)")
      ->delimiter(',');
}

void add_recalib_flags(CLI::App* cmd, FlagValues& v) {
  cmd->add_option("--tau", v.tau, "debias strength");
  cmd->add_option("--epsilon", v.epsilon, "inverse-RS smoothing");
  cmd->add_option("--kappa", v.kappa, "in-scene class preference");
  cmd->add_option("--sigma-y", v.sigma_y,
                  "vertical jitter std in px (default 0.05 * height)");
  cmd->add_option("--max-new-instances", v.max_new_instances,
                  "injection cap per layout");
  cmd->add_option("--recalib-fraction", v.recalib_fraction,
                  "fraction of seed entries resampled");
}

void add_blueprint_flags(CLI::App* cmd, FlagValues& v) {
  cmd->add_option("--fill-alpha", v.fill_alpha, "fill opacity");
  cmd->add_option("--alpha-step", v.alpha_step,
                  "per-instance HSV value decrement");
  cmd->add_option("--value-min", v.value_min, "HSV value floor");
  cmd->add_option("--variant", v.variant, "blueprint filename variant tag");
}

PipelineConfig resolve(const FlagValues& v) {
  PipelineConfig cfg;
  if (v.config_path) cfg = debiaskit::load_pipeline_config(*v.config_path);

  if (v.annotations) cfg.annotations = *v.annotations;
  if (v.embeddings) cfg.embeddings = v.embeddings;
  if (v.images_dir) cfg.images_dir = v.images_dir;
  if (v.errors) cfg.errors = v.errors;
  if (v.out_dir) cfg.out_dir = *v.out_dir;
  if (v.table) cfg.table_path = v.table;
  if (v.layouts) cfg.layouts_path = v.layouts;
  if (v.variant) cfg.render_variant = *v.variant;
  if (v.seed) cfg.rng_seed = *v.seed;
  if (v.workers) cfg.workers = *v.workers;
  if (v.beta) cfg.beta = *v.beta;
  if (v.s_bins) cfg.binning.s_bins = *v.s_bins;
  if (v.u_bins) cfg.binning.u_bins = *v.u_bins;
  if (v.size_thresholds) cfg.binning.size_thresholds = *v.size_thresholds;
  if (v.tau) cfg.recalib.tau = *v.tau;
  if (v.epsilon) cfg.recalib.epsilon = *v.epsilon;
  if (v.kappa) cfg.recalib.kappa = *v.kappa;
  if (v.sigma_y) cfg.recalib.sigma_y = *v.sigma_y;
  if (v.max_new_instances) cfg.recalib.max_new_instances = *v.max_new_instances;
  if (v.recalib_fraction) cfg.recalib.recalib_fraction = *v.recalib_fraction;
  if (v.mu) cfg.dynamics.mu = *v.mu;
  if (v.loss_divisor) cfg.dynamics.loss_divisor = *v.loss_divisor;
  if (v.fill_alpha) cfg.blueprint.fill_alpha = *v.fill_alpha;
  if (v.alpha_step) cfg.blueprint.alpha_step = *v.alpha_step;
  if (v.value_min) cfg.blueprint.value_min = *v.value_min;
  if (v.lowest_rs_count) cfg.report.lowest_rs_count = *v.lowest_rs_count;
  if (v.plots) cfg.report.plots = true;
  if (v.dry_run) cfg.dry_run = true;

  cfg.binning.validate();
  cfg.recalib.validate();
  cfg.dynamics.validate();
  return cfg;
}

void require_annotations(const PipelineConfig& cfg) {
  if (cfg.annotations.empty()) {
    throw debiaskit::usage_error("--annotations (or a config file) is required");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dataset bias diagnosis and debiased-layout generation"};
  app.require_subcommand(1);

  FlagValues v;

  CLI::App* stats = app.add_subcommand(
      "stats", "score every data group and write the bias report");
  add_shared_flags(stats, v);
  add_data_flags(stats, v);
  stats->add_option("--lowest-rs-count", v.lowest_rs_count,
                    "how many lowest-RS groups to report");
  stats->add_flag("--plots", v.plots, "emit histogram plot PNGs");

  CLI::App* recalibrate = app.add_subcommand(
      "recalibrate", "resample seed layouts against the score table");
  add_shared_flags(recalibrate, v);
  add_data_flags(recalibrate, v);
  add_recalib_flags(recalibrate, v);
  recalibrate->add_option("--table", v.table, "rs table JSON");

  CLI::App* render = app.add_subcommand(
      "render", "rasterize layouts into blueprint PNGs");
  add_shared_flags(render, v);
  add_blueprint_flags(render, v);
  render->add_option("--table", v.table, "rs table JSON (palette size)");
  render->add_option("--layouts", v.layouts, "layouts JSONL to render");

  CLI::App* update = app.add_subcommand(
      "update", "fold detection-error records into the score table");
  add_shared_flags(update, v);
  update->add_option("--table", v.table, "rs table JSON");
  update->add_option("--errors", v.errors, "error-record JSONL stream");
  update->add_option("--mu", v.mu, "EMA momentum");
  update->add_option("--loss-divisor", v.loss_divisor,
                     "scale divisor applied to losses");

  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "stats, recalibrate, render and optional update");
  add_shared_flags(pipeline, v);
  add_data_flags(pipeline, v);
  add_recalib_flags(pipeline, v);
  add_blueprint_flags(pipeline, v);
  pipeline->add_option("--errors", v.errors,
                       "error stream; adds the update stage");
  pipeline->add_option("--mu", v.mu, "EMA momentum");
  pipeline->add_option("--loss-divisor", v.loss_divisor,
                       "scale divisor applied to losses");
  pipeline->add_option("--lowest-rs-count", v.lowest_rs_count,
                       "how many lowest-RS groups to report");
  pipeline->add_flag("--plots", v.plots, "emit histogram plot PNGs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const PipelineConfig cfg = resolve(v);
    if (stats->parsed()) {
      require_annotations(cfg);
      if (cfg.dry_run) {
        std::cout << "stats plan (dry run): " << cfg.annotations << " -> "
                  << cfg.out_dir << "\n";
        return 0;
      }
      auto stage = debiaskit::cmd_stats(cfg);
      for (const auto& o : stage.outputs) {
        std::cout << o.path << " " << o.digest << "\n";
      }
    } else if (recalibrate->parsed()) {
      require_annotations(cfg);
      if (cfg.dry_run) {
        std::cout << "recalibrate plan (dry run): " << cfg.annotations
                  << " -> " << cfg.out_dir << "\n";
        return 0;
      }
      auto summary = debiaskit::cmd_recalibrate(cfg);
      std::cout << "layouts: " << summary.stage.outputs[0].path
                << "\nmoved: " << summary.moved
                << "\ninjected: " << summary.injected
                << "\nplacement_errors: " << summary.placement_errors << "\n";
    } else if (render->parsed()) {
      if (cfg.dry_run) {
        std::cout << "render plan (dry run) -> " << cfg.out_dir << "\n";
        return 0;
      }
      auto summary = debiaskit::cmd_render(cfg);
      std::cout << "rendered: " << summary.rendered
                << "\nfailures: " << summary.failures << "\n";
    } else if (update->parsed()) {
      if (cfg.dry_run) {
        std::cout << "update plan (dry run) -> " << cfg.out_dir << "\n";
        return 0;
      }
      auto summary = debiaskit::cmd_update(cfg);
      std::cout << "applied: " << summary.report.applied
                << "\nrejected: " << summary.report.rejected << "\n";
    } else if (pipeline->parsed()) {
      require_annotations(cfg);
      auto summary = debiaskit::cmd_pipeline(cfg);
      if (summary.status != "dry-run") {
        std::cout << "manifest: " << summary.manifest_path << " ("
                  << summary.status << ")\n";
      }
    }
  } catch (const debiaskit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
