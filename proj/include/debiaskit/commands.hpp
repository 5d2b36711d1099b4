#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "debiaskit/dataset.hpp"
#include "debiaskit/dynamics.hpp"
#include "debiaskit/recalibration.hpp"
#include "debiaskit/report.hpp"
#include "debiaskit/scoring.hpp"

namespace debiaskit {

struct BlueprintOptions {
  double fill_alpha = 0.8;
  double alpha_step = 0.1;
  double value_min = 0.5;
};

// Fully resolved run configuration; one JSON file plus flag overrides.
struct PipelineConfig {
  std::string annotations;
  std::optional<std::string> embeddings;
  std::optional<std::string> images_dir;
  std::optional<std::string> errors;  // error-record stream for update
  std::string out_dir = ".";

  std::optional<std::string> table_path;    // input table for standalone runs
  std::optional<std::string> layouts_path;  // input layouts for render
  std::string render_variant = "recalib";

  BinningConfig binning;
  double beta = 0.5;
  RecalibConfig recalib;
  DynamicsConfig dynamics;
  BlueprintOptions blueprint;
  ReportOptions report;

  std::uint64_t rng_seed = 0;
  int workers = 1;
  bool dry_run = false;

  // Canonical digest over every behavior-affecting field.
  std::string digest() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
void merge_config_json(PipelineConfig& cfg, const nlohmann::json& root,
                       const std::string& origin);

struct StageOutput {
  std::string path;
  std::string digest;
};

struct StageRecord {
  std::string name;
  std::vector<StageOutput> outputs;
};

std::string file_digest(const std::string& path);

// stats: rs_table.json + bias_report.json + group_assignments.jsonl.
StageRecord cmd_stats(const PipelineConfig& cfg);

// recalibrate: layouts.jsonl (one layout per seed image) + layouts_meta.json.
struct RecalibrateSummary {
  StageRecord stage;
  int placement_errors = 0;
  int moved = 0;
  int injected = 0;
};
RecalibrateSummary cmd_recalibrate(const PipelineConfig& cfg);

// render: blueprints/<image_id>_<variant>.png + blueprints_index.jsonl.
struct RenderSummary {
  StageRecord stage;
  int rendered = 0;
  int failures = 0;
};
RenderSummary cmd_render(const PipelineConfig& cfg);

// update: rs_table_updated.json + update_report.json.
struct UpdateSummary {
  StageRecord stage;
  UpdateReport report;
};
UpdateSummary cmd_update(const PipelineConfig& cfg);

// stats -> recalibrate -> render (-> update when an error stream is given),
// tied together by manifest.json. A failing stage leaves earlier outputs in
// place and marks the manifest partial before the error propagates.
struct PipelineSummary {
  std::string manifest_path;
  std::string status;  // complete | partial | dry-run
  std::vector<StageRecord> stages;
};
PipelineSummary cmd_pipeline(const PipelineConfig& cfg);

}  // namespace debiaskit
