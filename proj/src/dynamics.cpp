#include "debiaskit/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "debiaskit/errors.hpp"

namespace debiaskit {

using nlohmann::json;

void DynamicsConfig::validate() const {
  if (!(mu >= 0.0) || !(mu <= 1.0)) {
    throw data_error("dynamics: mu must be in [0, 1]");
  }
  if (!(loss_divisor > 0.0) || !std::isfinite(loss_divisor)) {
    throw data_error("dynamics: loss_divisor must be finite and > 0");
  }
}

void apply_error_record(RsTable& table, const ErrorRecord& rec,
                        const DynamicsConfig& cfg) {
  if (!std::isfinite(rec.loss) || rec.loss < 0.0) {
    throw data_error("dynamics: loss must be finite and >= 0 (group class " +
                     std::to_string(rec.group.class_id) + ", step " +
                     std::to_string(rec.step) + ")");
  }
  GroupStats& stats = table.at(rec.group);
  const double old_rs = stats.rs;
  stats.rs = cfg.mu * stats.rs + (1.0 - cfg.mu) * (rec.loss / cfg.loss_divisor);
  table.class_mean_rs[static_cast<size_t>(rec.group.class_id)] +=
      (stats.rs - old_rs) / table.bins_per_class();
}

namespace {

std::pair<double, double> rs_range(const RsTable& table) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [key, stats] : table.groups) {
    lo = std::min(lo, stats.rs);
    hi = std::max(hi, stats.rs);
  }
  if (table.groups.empty()) return {0.0, 0.0};
  return {lo, hi};
}

}  // namespace

UpdateReport run_update_stream(RsTable& table,
                               const std::vector<ErrorRecord>& records,
                               const DynamicsConfig& cfg) {
  cfg.validate();
  UpdateReport report;
  std::tie(report.min_rs_before, report.max_rs_before) = rs_range(table);

  std::int64_t last_step = std::numeric_limits<std::int64_t>::min();
  for (const auto& rec : records) {
    if (rec.step < last_step) {
      throw data_error("dynamics: out-of-order step " +
                       std::to_string(rec.step) + " after " +
                       std::to_string(last_step));
    }
    last_step = rec.step;
    if (!std::isfinite(rec.loss) || rec.loss < 0.0) {
      ++report.rejected;
      continue;
    }
    apply_error_record(table, rec, cfg);  // unknown group propagates
    ++report.applied;
    ++report.per_group[rec.group];
  }

  std::tie(report.min_rs_after, report.max_rs_after) = rs_range(table);
  return report;
}

std::vector<ErrorRecord> read_error_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open error stream: " + path);
  std::vector<ErrorRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw data_error("error stream " + path + " line " +
                       std::to_string(line_no) + ": " + e.what());
    }
    try {
      ErrorRecord r;
      r.group = GroupKey{rec.at("class_id").get<int>(),
                         rec.at("size_bin").get<int>(),
                         rec.at("pos_bin").get<int>()};
      r.loss = rec.at("loss").get<double>();
      r.step = rec.at("step").get<std::int64_t>();
      records.push_back(r);
    } catch (const json::exception& e) {
      throw data_error("error stream " + path + " line " +
                       std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void snapshot(const RsTable& table, const DynamicsConfig& cfg,
              std::int64_t records_applied, const std::string& path) {
  json root = json::parse(serialize_rs_table(table));
  root["dynamics"] = json{{"mu", cfg.mu},
                          {"loss_divisor", cfg.loss_divisor},
                          {"records_applied", records_applied}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << root.dump() << '\n';
  if (!out) throw io_error("failed writing: " + path);
}

RsTable restore(const std::string& path,
                const std::optional<std::string>& expect_dataset_digest,
                DynamicsConfig* cfg_out, std::int64_t* records_applied_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open snapshot: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();

  json root;
  try {
    root = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw data_error("snapshot " + path + ": parse error: " + e.what());
  }
  RsTable table = parse_rs_table(buf.str());

  if (expect_dataset_digest && table.dataset_digest != *expect_dataset_digest) {
    throw data_error("snapshot " + path + ": dataset digest " +
                     table.dataset_digest + " does not match expected " +
                     *expect_dataset_digest);
  }
  if (root.contains("dynamics")) {
    const auto& dyn = root["dynamics"];
    if (cfg_out) {
      cfg_out->mu = dyn.value("mu", 0.99);
      cfg_out->loss_divisor = dyn.value("loss_divisor", 1.0);
    }
    if (records_applied_out) {
      *records_applied_out = dyn.value("records_applied", std::int64_t{0});
    }
  }
  return table;
}

}  // namespace debiaskit
