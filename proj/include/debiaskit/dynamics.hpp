#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "debiaskit/scoring.hpp"

namespace debiaskit {

struct ErrorRecord {
  GroupKey group;
  double loss = 0.0;  // detection error for one instance, >= 0
  std::int64_t step = 0;
};

struct DynamicsConfig {
  double mu = 0.99;  // EMA momentum; 1 freezes the table, 0 is memoryless
  // Scale divisor applied to incoming losses before the update; recorded in
  // snapshot metadata. The printed update rule mixes a normalized score
  // with a raw loss, so callers may need to bring the two onto one scale.
  double loss_divisor = 1.0;

  void validate() const;
};

struct UpdateReport {
  std::int64_t applied = 0;
  std::int64_t rejected = 0;
  std::map<GroupKey, std::int64_t> per_group;
  double min_rs_before = 0.0;
  double max_rs_before = 0.0;
  double min_rs_after = 0.0;
  double max_rs_after = 0.0;
};

// rs <- mu * rs + (1 - mu) * (loss / divisor); the touched class's mean rs
// is maintained incrementally. Non-finite or negative losses throw.
void apply_error_record(RsTable& table, const ErrorRecord& rec,
                        const DynamicsConfig& cfg);

// Applies records in order; steps must be non-decreasing. Invalid-loss
// records are counted as rejected rather than aborting the stream.
UpdateReport run_update_stream(RsTable& table,
                               const std::vector<ErrorRecord>& records,
                               const DynamicsConfig& cfg);

// Error stream JSONL: {class_id, size_bin, pos_bin, loss, step}.
std::vector<ErrorRecord> read_error_stream(const std::string& path);

// Snapshot = RsTable JSON plus a dynamics block {mu, loss_divisor,
// records_applied}. Restore verifies the dataset digest when the caller
// supplies one.
void snapshot(const RsTable& table, const DynamicsConfig& cfg,
              std::int64_t records_applied, const std::string& path);
RsTable restore(const std::string& path,
                const std::optional<std::string>& expect_dataset_digest = {},
                DynamicsConfig* cfg_out = nullptr,
                std::int64_t* records_applied_out = nullptr);

}  // namespace debiaskit
