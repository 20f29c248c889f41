#pragma once

#include <span>
#include <string>
#include <vector>

#include "ctpir/embedding.hpp"
#include "ctpir/nn.hpp"
#include "ctpir/tensor.hpp"

namespace ctpir {

// Gate layout along the 4h columns: input, forget, cell candidate, output.
struct LstmParams {
  Tensor input_weight;   // in × 4h
  Tensor hidden_weight;  // h × 4h
  Tensor bias;           // 1 × 4h

  static LstmParams init(std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t input_size() const { return input_weight.shape()[0]; }
  std::size_t hidden_size() const { return hidden_weight.shape()[0]; }
};

struct LstmState {
  Tensor h;
  Tensor c;
};

// One step for a batch of rows: x (B × in), state (B × h).
LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmParams& params);

struct RelationEncoder {
  LstmParams forward;
  LstmParams backward;
  Linear fc;  // 2h × out
};

struct AggregationWeights {
  std::vector<Tensor> relation;  // one scalar per relation
  Tensor high;                   // position-0 attribute weight
  Tensor low;                    // weight of every later position
};

struct InfluenceConfig {
  std::size_t input_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t output_dim = 128;
  // Weight every attribute by (high + low), the literal reading of the
  // aggregation formula, instead of high for position 0 and low otherwise.
  bool literal_high_low = false;
};

struct InfluenceParams {
  InfluenceConfig config;
  std::vector<std::string> relations;
  std::vector<RelationEncoder> encoders;
  AggregationWeights aggregation;

  static InfluenceParams init(const std::vector<std::string>& relations, const InfluenceConfig& config, Rng& rng);
  void add_to(ParameterSet& params) const;
};

// FC_r(last forward state || last backward state) over a batch of equally
// long sequences; seq[t] is (B × in). Returns (B × out).
Tensor attribute_influence(std::span<const Tensor> seq, const RelationEncoder& encoder);

struct PublicationInfluence {
  Tensor vector;      // 1 × out
  bool cold = false;  // no attributes: the vector is zero
};

// Weighted sum over relations of the publication's attribute influences.
// per_relation[r] holds (1 × out) rows in edge-position order.
PublicationInfluence publication_influence(const std::vector<std::vector<Tensor>>& per_relation,
                                           const AggregationWeights& weights, std::size_t output_dim,
                                           bool literal_high_low = false);

// Convenience form: looks up the publication's attributes in snapshot `year`
// of the table and encodes each history from its first appearance.
PublicationInfluence publication_influence(const std::string& publication, int year, const EmbeddingTable& table,
                                           const InfluenceParams& params);

// Batched influence for many publications at the table's snapshot `s`:
// each distinct (attribute, relation) history is encoded once. Row i of
// the result belongs to publications[i]; `cold` flags attribute-less rows.
Tensor batch_publication_influence(std::span<const std::size_t> publication_rows, std::size_t s,
                                   const EmbeddingTable& table, const InfluenceParams& params,
                                   std::vector<bool>* cold = nullptr);

// Ablation: mean of the publication's attributes' embeddings at snapshot s.
Tensor mean_attribute_embedding(std::span<const std::size_t> publication_rows, std::size_t s,
                                const EmbeddingTable& table);

}  // namespace ctpir
