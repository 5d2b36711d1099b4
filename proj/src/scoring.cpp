#include "debiaskit/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "debiaskit/errors.hpp"

namespace debiaskit {

using nlohmann::json;

const GroupStats& RsTable::at(const GroupKey& key) const {
  auto it = groups.find(key);
  if (it == groups.end()) {
    throw data_error("rs table: unknown group (class " +
                     std::to_string(key.class_id) + ", size " +
                     std::to_string(key.size_bin) + ", pos " +
                     std::to_string(key.pos_bin) + ")");
  }
  return it->second;
}

GroupStats& RsTable::at(const GroupKey& key) {
  return const_cast<GroupStats&>(
      static_cast<const RsTable*>(this)->at(key));
}

double RsTable::recompute_class_mean(int class_id) const {
  double sum = 0.0;
  for (int s = 0; s < binning.s_bins; ++s) {
    for (int u = 0; u < binning.u_bins; ++u) {
      sum += at({class_id, s, u}).rs;
    }
  }
  return sum / bins_per_class();
}

double compute_freq(const Dataset& ds, std::int64_t group_count) {
  if (ds.total_instances <= 0) {
    throw data_error("sample frequency: empty dataset");
  }
  return static_cast<double>(group_count) /
         static_cast<double>(ds.total_instances);
}

double compute_vis(const std::vector<std::int64_t>& instance_ids,
                   const EmbeddingStore& store) {
  const size_t n = instance_ids.size();
  if (n <= 1) return 0.0;

  // sum_ij |o_i - o_j|^2 = 2n * sum_i |o_i|^2 - 2 |sum_i o_i|^2, which
  // avoids the quadratic pair loop. The unit tests hold this equal to the
  // explicit double sum.
  const int d = store.dimension();
  std::vector<double> acc(static_cast<size_t>(d), 0.0);
  double sq_norms = 0.0;
  for (std::int64_t id : instance_ids) {
    const auto& v = store.get(id);  // throws naming the instance when absent
    for (int k = 0; k < d; ++k) acc[static_cast<size_t>(k)] += v[static_cast<size_t>(k)];
    double s = 0.0;
    for (double x : v) s += x * x;
    sq_norms += s;
  }
  double acc_sq = 0.0;
  for (double x : acc) acc_sq += x * x;

  const double nn = static_cast<double>(n);
  const double pair_sum = 2.0 * nn * sq_norms - 2.0 * acc_sq;
  const double mean = pair_sum / (nn * nn);
  // Unit vectors bound the squared distance by 4; clamp FP residue.
  return std::clamp(mean / 4.0, 0.0, 1.0);
}

double compute_ctx(const Dataset& ds, int class_id) {
  if (class_id < 0 || class_id >= ds.num_classes()) {
    throw data_error("context diversity: unknown class " +
                     std::to_string(class_id));
  }
  std::int64_t images_with_class = 0;
  std::int64_t class_set_sum = 0;
  for (const auto& img : ds.images) {
    if (img.class_set.count(class_id)) {
      ++images_with_class;
      class_set_sum += static_cast<std::int64_t>(img.class_set.size());
    }
  }
  if (images_with_class == 0) return 0.0;
  return static_cast<double>(class_set_sum) /
         (static_cast<double>(images_with_class) *
          static_cast<double>(ds.num_classes()));
}

RsTable compute_rs_table(const Dataset& ds, const EmbeddingStore& store,
                         double beta, const BinningConfig& config) {
  config.validate();
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw data_error("rs table: beta must be finite and >= 0");
  }
  if (ds.total_instances <= 0) {
    throw data_error("rs table: empty dataset");
  }

  RsTable table;
  table.beta = beta;
  table.dataset_digest = ds.digest;
  table.binning = config;
  table.classes = ds.classes;

  std::map<GroupKey, std::vector<std::int64_t>> members;
  for (const auto& img : ds.images) {
    for (const auto& inst : img.instances) {
      members[assign_group(inst, img, config)].push_back(inst.instance_id);
    }
  }

  std::vector<double> ctx_by_class(static_cast<size_t>(ds.num_classes()));
  for (int c = 0; c < ds.num_classes(); ++c) {
    ctx_by_class[static_cast<size_t>(c)] = compute_ctx(ds, c);
  }

  for (int c = 0; c < ds.num_classes(); ++c) {
    for (int s = 0; s < config.s_bins; ++s) {
      for (int u = 0; u < config.u_bins; ++u) {
        GroupKey key{c, s, u};
        GroupStats stats;
        stats.key = key;
        stats.d_ctx = ctx_by_class[static_cast<size_t>(c)];
        auto it = members.find(key);
        if (it != members.end()) {
          stats.count = static_cast<std::int64_t>(it->second.size());
          stats.d_freq = compute_freq(ds, stats.count);
          stats.d_vis = compute_vis(it->second, store);
        }
        stats.rs = stats.d_freq * (stats.d_vis + beta * stats.d_ctx);
        table.groups.emplace(key, stats);
      }
    }
  }

  table.class_mean_rs.resize(static_cast<size_t>(ds.num_classes()));
  for (int c = 0; c < ds.num_classes(); ++c) {
    table.class_mean_rs[static_cast<size_t>(c)] = table.recompute_class_mean(c);
  }
  return table;
}

std::string serialize_rs_table(const RsTable& table) {
  json groups = json::array();
  for (const auto& [key, stats] : table.groups) {
    groups.push_back(json{{"class_id", key.class_id},
                          {"size_bin", key.size_bin},
                          {"pos_bin", key.pos_bin},
                          {"count", stats.count},
                          {"d_freq", stats.d_freq},
                          {"d_vis", stats.d_vis},
                          {"d_ctx", stats.d_ctx},
                          {"rs", stats.rs}});
  }
  json root{{"beta", table.beta},
            {"dataset_digest", table.dataset_digest},
            {"binning",
             {{"s_bins", table.binning.s_bins},
              {"size_thresholds", table.binning.size_thresholds},
              {"u_bins", table.binning.u_bins}}},
            {"classes", table.classes},
            {"groups", groups},
            {"class_mean_rs", table.class_mean_rs}};
  return root.dump();
}

RsTable parse_rs_table(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw data_error(std::string("rs table: parse error: ") + e.what());
  }
  RsTable table;
  try {
    table.beta = root.at("beta").get<double>();
    table.dataset_digest = root.at("dataset_digest").get<std::string>();
    const auto& binning = root.at("binning");
    table.binning.s_bins = binning.at("s_bins").get<int>();
    table.binning.size_thresholds =
        binning.at("size_thresholds").get<std::vector<double>>();
    table.binning.u_bins = binning.at("u_bins").get<int>();
    table.classes = root.at("classes").get<std::vector<std::string>>();
    for (const auto& g : root.at("groups")) {
      GroupStats stats;
      stats.key = GroupKey{g.at("class_id").get<int>(),
                           g.at("size_bin").get<int>(),
                           g.at("pos_bin").get<int>()};
      stats.count = g.at("count").get<std::int64_t>();
      stats.d_freq = g.at("d_freq").get<double>();
      stats.d_vis = g.at("d_vis").get<double>();
      stats.d_ctx = g.at("d_ctx").get<double>();
      stats.rs = g.at("rs").get<double>();
      table.groups.emplace(stats.key, stats);
    }
    table.class_mean_rs = root.at("class_mean_rs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw data_error(std::string("rs table: malformed document: ") + e.what());
  }
  table.binning.validate();

  const size_t expected = static_cast<size_t>(table.num_classes()) *
                          static_cast<size_t>(table.bins_per_class());
  if (table.groups.size() != expected ||
      table.class_mean_rs.size() != table.classes.size()) {
    throw data_error("rs table: group grid does not match classes/binning");
  }
  return table;
}

void save_rs_table(const RsTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << serialize_rs_table(table) << '\n';
  if (!out) throw io_error("failed writing: " + path);
}

RsTable load_rs_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open rs table: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rs_table(buf.str());
}

}  // namespace debiaskit
