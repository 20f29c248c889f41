#include "ctpir/embedding.hpp"

#include <algorithm>
#include <cmath>

namespace ctpir {

std::shared_ptr<const GraphIndex> GraphIndex::build(const TemporalKG& tkg, std::size_t num_snapshots) {
  if (num_snapshots == 0) num_snapshots = tkg.snapshots.size();
  if (num_snapshots > tkg.snapshots.size()) {
    throw RangeError("requested " + std::to_string(num_snapshots) + " snapshots, graph has " +
                     std::to_string(tkg.snapshots.size()));
  }
  auto gi = std::make_shared<GraphIndex>();
  gi->relations_ = tkg.relations;
  std::unordered_map<std::string, std::size_t> rel_index;
  for (std::size_t r = 0; r < tkg.relations.size(); ++r) rel_index[tkg.relations[r]] = r;

  for (std::size_t s = 0; s < num_snapshots; ++s) {
    for (const auto& e : tkg.snapshots[s].entities) {
      if (gi->index_.emplace(e.id, gi->ids_.size()).second) {
        gi->ids_.push_back(e.id);
        gi->entities_.push_back(e);
        gi->first_.push_back(s);
      }
    }
  }
  const std::size_t n = gi->ids_.size();
  const std::size_t nr = tkg.relations.size();
  const std::size_t dim = tkg.embedding_dim;

  for (std::size_t s = 0; s < num_snapshots; ++s) {
    const auto& snap = tkg.snapshots[s];
    SnapshotGraph g;
    g.year = snap.year;
    g.alive.assign(n, false);
    for (const auto& e : snap.entities) g.alive[gi->index_.at(e.id)] = true;
    g.adjacency.assign(nr, std::vector<std::vector<std::size_t>>(n));
    std::vector<std::vector<std::vector<std::pair<std::size_t, std::size_t>>>> out(
        nr, std::vector<std::vector<std::pair<std::size_t, std::size_t>>>(n));
    for (const auto& e : snap.edges) {
      const auto rit = rel_index.find(e.rel);
      if (rit == rel_index.end()) throw ValidationError("edge with undeclared relation " + e.rel);
      const std::size_t r = rit->second, a = gi->index_.at(e.src), b = gi->index_.at(e.dst);
      g.adjacency[r][a].push_back(b);
      g.adjacency[r][b].push_back(a);
      out[r][a].emplace_back(e.pos, b);
    }
    g.ordered_out.assign(nr, std::vector<std::vector<std::size_t>>(n));
    for (std::size_t r = 0; r < nr; ++r) {
      RowMix mean_mix, sum_mix;
      for (std::size_t i = 0; i < n; ++i) {
        auto& nb = g.adjacency[r][i];
        // Sorted neighbor lists make the layer independent of edge storage order.
        std::sort(nb.begin(), nb.end());
        const double inv = nb.empty() ? 0.0 : 1.0 / static_cast<double>(nb.size());
        mean_mix.add_row_uniform(nb, inv);
        sum_mix.add_row_uniform(nb, 1.0);
        auto& o = out[r][i];
        std::sort(o.begin(), o.end());
        for (const auto& [pos, dst] : o) g.ordered_out[r][i].push_back(dst);
      }
      g.mean_mix.push_back(std::move(mean_mix));
      g.sum_mix.push_back(std::move(sum_mix));
    }
    gi->graphs_.push_back(std::move(g));

    std::vector<double> feats(n * dim, 0.0);
    for (const auto& [id, v] : snap.features) {
      const auto it = gi->index_.find(id);
      if (it == gi->index_.end()) continue;
      if (v.size() != dim) throw DimensionError("feature vector of " + id + " has wrong dimension");
      std::copy(v.begin(), v.end(), feats.begin() + static_cast<std::ptrdiff_t>(it->second * dim));
    }
    gi->features_.push_back(Tensor::matrix(n, dim, std::move(feats)));
  }
  return gi;
}

std::size_t GraphIndex::row(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw LookupError("unknown entity '" + id + "'");
  return it->second;
}

std::size_t GraphIndex::snapshot_of_year(int year) const {
  for (std::size_t s = 0; s < graphs_.size(); ++s) {
    if (graphs_[s].year == year) return s;
  }
  throw LookupError("year " + std::to_string(year) + " is not indexed");
}

RgcnWeights RgcnWeights::init(const std::vector<std::string>& relations, const RgcnConfig& config, Rng& rng) {
  if (config.layer_dims.size() < 2) throw ConfigError("layer_dims needs at least input and output sizes");
  RgcnWeights w;
  w.config = config;
  w.relations = relations;
  for (std::size_t l = 0; l + 1 < config.layer_dims.size(); ++l) {
    const auto din = config.layer_dims[l], dout = config.layer_dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(din));
    RgcnLayerWeights lw;
    lw.self = uniform_parameter({din, dout}, bound, rng);
    for (std::size_t r = 0; r < relations.size(); ++r) lw.relation.push_back(uniform_parameter({din, dout}, bound, rng));
    lw.temporal = uniform_parameter({dout, dout}, 1.0 / std::sqrt(static_cast<double>(dout)), rng);
    w.layers.push_back(std::move(lw));
  }
  return w;
}

void RgcnWeights::add_to(ParameterSet& params, bool include_temporal) const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "rgcn." + std::to_string(l);
    params.add(p + ".self", layers[l].self);
    for (std::size_t r = 0; r < relations.size(); ++r) params.add(p + ".rel." + relations[r], layers[l].relation[r]);
    if (include_temporal) params.add(p + ".temporal", layers[l].temporal);
  }
}

Tensor static_preactivation(const SnapshotGraph& g, const Tensor& h, const RgcnLayerWeights& w, bool normalize) {
  if (h.rank() != 2 || h.rows() != g.alive.size() || h.cols() != w.self.shape()[0]) {
    throw ContractError("rgcn layer: features " + shape_str(h.shape()) + " do not match " +
                        std::to_string(g.alive.size()) + " nodes × " + std::to_string(w.self.shape()[0]));
  }
  if (w.relation.size() != g.adjacency.size()) throw ContractError("rgcn layer: relation count mismatch");
  Tensor acc = matmul(h, w.self);
  for (std::size_t r = 0; r < w.relation.size(); ++r) {
    const auto& mix = normalize ? g.mean_mix[r] : g.sum_mix[r];
    acc = add(acc, matmul(mix_rows(h, mix), w.relation[r]));
  }
  return acc;
}

LayerOutput rgcn_diff_layer_step(const SnapshotGraph& curr, const Tensor& h_curr, const Tensor* prev_static_pre,
                                 const RgcnLayerWeights& w, const RgcnConfig& config, bool final_layer) {
  LayerOutput out;
  out.static_pre = static_preactivation(curr, h_curr, w, config.normalize);
  Tensor pre = out.static_pre;
  if (prev_static_pre) {
    if (prev_static_pre->shape() != pre.shape()) {
      throw ContractError("rgcn layer: previous snapshot pre-activation " + shape_str(prev_static_pre->shape()) +
                          " does not match " + shape_str(pre.shape()));
    }
    pre = add(pre, matmul(*prev_static_pre, w.temporal));
  }
  out.output = final_layer ? pre : activate(config.hidden_activation, pre);
  return out;
}

Tensor rgcn_diff_layer(const SnapshotGraph& curr, const SnapshotGraph* prev, const Tensor& h_curr, const Tensor* h_prev,
                       const RgcnWeights& weights, std::size_t layer) {
  if ((prev == nullptr) != (h_prev == nullptr)) {
    throw ContractError("rgcn layer: previous features must be given exactly when a previous snapshot is");
  }
  if (layer >= weights.layers.size()) throw ContractError("rgcn layer index out of range");
  const auto& w = weights.layers[layer];
  const bool final_layer = layer + 1 == weights.layers.size();
  if (!prev) return rgcn_diff_layer_step(curr, h_curr, nullptr, w, weights.config, final_layer).output;
  const Tensor prev_pre = static_preactivation(*prev, *h_prev, w, weights.config.normalize);
  return rgcn_diff_layer_step(curr, h_curr, &prev_pre, w, weights.config, final_layer).output;
}

EmbeddingTable embed_sequence(std::shared_ptr<const GraphIndex> index, const RgcnWeights& weights) {
  if (weights.relations != index->relations()) throw ContractError("embedding weights do not match graph relations");
  if (weights.config.layer_dims.front() != index->features(0).cols()) {
    throw ContractError("embedding input size " + std::to_string(weights.config.layer_dims.front()) +
                        " != feature dimension " + std::to_string(index->features(0).cols()));
  }
  const std::size_t layers = weights.layers.size();
  std::vector<Tensor> outputs;
  std::vector<Tensor> prev_pre(layers);
  for (std::size_t s = 0; s < index->num_snapshots(); ++s) {
    Tensor h = index->features(s);
    std::vector<Tensor> pre(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      auto out = rgcn_diff_layer_step(index->graph(s), h, s == 0 ? nullptr : &prev_pre[l], weights.layers[l],
                                      weights.config, l + 1 == layers);
      h = std::move(out.output);
      pre[l] = std::move(out.static_pre);
    }
    prev_pre = std::move(pre);
    outputs.push_back(std::move(h));
  }
  return EmbeddingTable(std::move(index), std::move(outputs));
}

EmbeddingTable embed_sequence(const TemporalKG& tkg, const RgcnWeights& weights) {
  return embed_sequence(GraphIndex::build(tkg), weights);
}

bool EmbeddingTable::covers(const std::string& id, int year) const {
  if (!index_->contains(id)) return false;
  for (std::size_t s = 0; s < index_->num_snapshots(); ++s) {
    if (index_->graph(s).year == year) return index_->graph(s).alive[index_->row(id)];
  }
  return false;
}

std::vector<double> EmbeddingTable::vector(const std::string& id, int year) const {
  if (!covers(id, year)) throw LookupError("no embedding for '" + id + "' in year " + std::to_string(year));
  const auto& t = outputs_[index_->snapshot_of_year(year)];
  const auto r = index_->row(id);
  const auto row = t.data().subspan(r * t.cols(), t.cols());
  return {row.begin(), row.end()};
}

nlohmann::json EmbeddingTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  j["dim"] = dim();
  auto& years = j["years"] = nlohmann::json::array();
  for (std::size_t s = 0; s < outputs_.size(); ++s) {
    const auto& g = index_->graph(s);
    nlohmann::json vecs = nlohmann::json::object();
    for (std::size_t r = 0; r < index_->num_nodes(); ++r) {
      if (!g.alive[r]) continue;
      const auto row = outputs_[s].data().subspan(r * dim(), dim());
      vecs[index_->ids()[r]] = std::vector<double>(row.begin(), row.end());
    }
    years.push_back({{"year", g.year}, {"vectors", std::move(vecs)}});
  }
  return j;
}

}  // namespace ctpir
