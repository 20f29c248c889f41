#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ctpir/nn.hpp"
#include "ctpir/tensor.hpp"
#include "ctpir/tkg.hpp"

namespace ctpir {

// Entities of a TemporalKG prefix mapped to dense row indices. Every
// snapshot is laid out on the same rows; entities that do not exist yet
// have zero features and no edges.
struct SnapshotGraph {
  int year = 0;
  std::vector<bool> alive;
  // Per relation: undirected neighbor lists (one entry per incident edge).
  std::vector<std::vector<std::vector<std::size_t>>> adjacency;
  // Per relation: neighbor mean (normalized) and plain sum as row mixes.
  std::vector<RowMix> mean_mix;
  std::vector<RowMix> sum_mix;
  // Per relation: targets of (node, relation, ·) edges ordered by position.
  std::vector<std::vector<std::vector<std::size_t>>> ordered_out;
};

class GraphIndex {
 public:
  // Indexes the first `num_snapshots` snapshots (all when 0).
  static std::shared_ptr<const GraphIndex> build(const TemporalKG& tkg, std::size_t num_snapshots = 0);

  std::size_t num_nodes() const { return ids_.size(); }
  std::size_t num_snapshots() const { return graphs_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const EntityRef& entity(std::size_t row) const { return entities_[row]; }
  std::size_t row(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  // Snapshot position where the entity first exists.
  std::size_t first_snapshot(std::size_t row) const { return first_[row]; }
  const SnapshotGraph& graph(std::size_t s) const { return graphs_[s]; }
  std::size_t snapshot_of_year(int year) const;

  // Input features H^0 of snapshot s as an (n × embedding_dim) constant.
  const Tensor& features(std::size_t s) const { return features_[s]; }

 private:
  std::vector<std::string> relations_;
  std::vector<std::string> ids_;
  std::vector<EntityRef> entities_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> first_;
  std::vector<SnapshotGraph> graphs_;
  std::vector<Tensor> features_;
};

struct RgcnConfig {
  // {input, hidden..., output}: 128 -> 64 -> 128 is a two-layer model.
  std::vector<std::size_t> layer_dims{128, 64, 128};
  // Divide each relation's neighbor sum by the neighbor count.
  bool normalize = true;
  Activation hidden_activation = Activation::relu;
};

struct RgcnLayerWeights {
  Tensor self;                  // W_0: d_in × d_out
  std::vector<Tensor> relation; // W_r: d_in × d_out, one per relation
  Tensor temporal;              // W_t: d_out × d_out, applied after W_0 / W_r
};

struct RgcnWeights {
  RgcnConfig config;
  std::vector<std::string> relations;
  std::vector<RgcnLayerWeights> layers;

  // Uniform(-1/sqrt(d_in), 1/sqrt(d_in)) init.
  static RgcnWeights init(const std::vector<std::string>& relations, const RgcnConfig& config, Rng& rng);
  void add_to(ParameterSet& params, bool include_temporal = true) const;
};

// sum_r A_r H W_r + H W_0 for one snapshot (the plain R-GCN pre-activation).
Tensor static_preactivation(const SnapshotGraph& g, const Tensor& h, const RgcnLayerWeights& w, bool normalize);

struct LayerOutput {
  Tensor output;
  // Static pre-activation of the current snapshot; it is exactly the
  // temporal input this layer needs when processing the next snapshot.
  Tensor static_pre;
};

// One difference-preserved layer. `prev_static_pre` is the previous
// snapshot's static pre-activation at this layer (null at the first year).
LayerOutput rgcn_diff_layer_step(const SnapshotGraph& curr, const Tensor& h_curr, const Tensor* prev_static_pre,
                                 const RgcnLayerWeights& w, const RgcnConfig& config, bool final_layer);

// h' = act( S(curr, H_curr) + S(prev, H_prev) W_t ); the temporal term is
// dropped when prev is null. The final layer is linear.
Tensor rgcn_diff_layer(const SnapshotGraph& curr, const SnapshotGraph* prev, const Tensor& h_curr,
                       const Tensor* h_prev, const RgcnWeights& weights, std::size_t layer);

// Final-layer embeddings V^t for every indexed snapshot.
class EmbeddingTable {
 public:
  EmbeddingTable(std::shared_ptr<const GraphIndex> index, std::vector<Tensor> outputs)
      : index_(std::move(index)), outputs_(std::move(outputs)) {}

  std::size_t num_snapshots() const { return outputs_.size(); }
  std::size_t dim() const { return outputs_.front().cols(); }
  const Tensor& snapshot(std::size_t s) const { return outputs_[s]; }
  const GraphIndex& index() const { return *index_; }
  bool covers(const std::string& id, int year) const;
  // Throws LookupError when the entity does not exist in that year.
  std::vector<double> vector(const std::string& id, int year) const;
  nlohmann::json to_json() const;

 private:
  std::shared_ptr<const GraphIndex> index_;
  std::vector<Tensor> outputs_;
};

EmbeddingTable embed_sequence(std::shared_ptr<const GraphIndex> index, const RgcnWeights& weights);
EmbeddingTable embed_sequence(const TemporalKG& tkg, const RgcnWeights& weights);

}  // namespace ctpir
