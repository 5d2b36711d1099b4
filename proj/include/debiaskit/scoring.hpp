#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "debiaskit/dataset.hpp"
#include "debiaskit/embeddings.hpp"

namespace debiaskit {

struct GroupStats {
  GroupKey key;
  std::int64_t count = 0;
  double d_freq = 0.0;  // N(group) / N_all
  double d_vis = 0.0;   // mean pairwise squared feature distance, in [0,1]
  double d_ctx = 0.0;   // normalized class co-occurrence, in [0,1]
  double rs = 0.0;      // d_freq * (d_vis + beta * d_ctx)
};

// Full score table over the |C| x S x U group grid. Empty groups are
// materialized with rs = 0 so inverse-RS sampling can target them.
struct RsTable {
  double beta = 0.5;
  std::string dataset_digest;
  BinningConfig binning;
  std::vector<std::string> classes;
  std::map<GroupKey, GroupStats> groups;
  std::vector<double> class_mean_rs;  // indexed by class_id

  int num_classes() const { return static_cast<int>(classes.size()); }
  int bins_per_class() const { return binning.s_bins * binning.u_bins; }

  const GroupStats& at(const GroupKey& key) const;
  GroupStats& at(const GroupKey& key);

  // Mean rs over every (s,u) bin of one class; empty bins count as zero.
  double recompute_class_mean(int class_id) const;
};

// N(group)/N_all over the whole dataset. Errors when the dataset is empty.
double compute_freq(const Dataset& ds, std::int64_t group_count);

// Mean squared distance over all ordered embedding pairs of a group
// (diagonal included), divided by 4 so unit vectors land in [0,1].
// Groups of size <= 1 score 0.
double compute_vis(const std::vector<std::int64_t>& instance_ids,
                   const EmbeddingStore& store);

// Co-occurrence diversity of a class: mean |class set| over images
// containing it, normalized by |C|. Depends only on the class, so every
// (s,u) bin of one class shares the value.
double compute_ctx(const Dataset& ds, int class_id);

RsTable compute_rs_table(const Dataset& ds, const EmbeddingStore& store,
                         double beta, const BinningConfig& config);

// Canonical JSON form; serialize(parse(x)) is byte-identical.
std::string serialize_rs_table(const RsTable& table);
RsTable parse_rs_table(const std::string& json_text);
void save_rs_table(const RsTable& table, const std::string& path);
RsTable load_rs_table(const std::string& path);

}  // namespace debiaskit
