#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "debiaskit/dataset.hpp"
#include "debiaskit/scoring.hpp"

namespace debiaskit {

struct ReportOptions {
  int lowest_rs_count = 20;
  bool plots = false;
};

// Machine-readable bias report: per-axis histograms, the lowest-RS groups,
// and the frequency partition.
nlohmann::json build_bias_report(const Dataset& ds, const RsTable& table,
                                 const ReportOptions& opts);

// Simple bar-chart PNG for one histogram; used by the optional --plots flag.
void write_histogram_plot(const std::vector<std::int64_t>& counts,
                          const std::string& path);

}  // namespace debiaskit
