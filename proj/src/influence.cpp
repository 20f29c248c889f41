#include "ctpir/influence.hpp"

#include <cmath>
#include <map>
#include <unordered_map>

namespace ctpir {

LstmParams LstmParams::init(std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmParams p;
  p.input_weight = uniform_parameter({in, 4 * hidden}, bound, rng);
  p.hidden_weight = uniform_parameter({hidden, 4 * hidden}, bound, rng);
  p.bias = uniform_parameter({1, 4 * hidden}, bound, rng);
  return p;
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmParams& params) {
  const std::size_t h = params.hidden_size();
  if (x.rank() != 2 || x.cols() != params.input_size()) {
    throw ContractError("lstm_cell: input " + shape_str(x.shape()) + " does not match input size " +
                        std::to_string(params.input_size()));
  }
  const Shape state_shape{x.rows(), h};
  if (state.h.shape() != state_shape || state.c.shape() != state_shape) {
    throw ContractError("lstm_cell: state shapes " + shape_str(state.h.shape()) + ", " + shape_str(state.c.shape()) +
                        " expected " + shape_str(state_shape));
  }
  const Tensor gates = add_row(add(matmul(x, params.input_weight), matmul(state.h, params.hidden_weight)), params.bias);
  const Tensor i = sigmoid(slice_cols(gates, 0, h));
  const Tensor f = sigmoid(slice_cols(gates, h, 2 * h));
  const Tensor g = tanh(slice_cols(gates, 2 * h, 3 * h));
  const Tensor o = sigmoid(slice_cols(gates, 3 * h, 4 * h));
  LstmState next;
  next.c = add(mul(f, state.c), mul(i, g));
  next.h = mul(o, tanh(next.c));
  return next;
}

InfluenceParams InfluenceParams::init(const std::vector<std::string>& relations, const InfluenceConfig& config,
                                      Rng& rng) {
  InfluenceParams p;
  p.config = config;
  p.relations = relations;
  for (std::size_t r = 0; r < relations.size(); ++r) {
    RelationEncoder enc;
    enc.forward = LstmParams::init(config.input_dim, config.hidden_dim, rng);
    enc.backward = LstmParams::init(config.input_dim, config.hidden_dim, rng);
    enc.fc = Linear::init(2 * config.hidden_dim, config.output_dim, rng);
    p.encoders.push_back(std::move(enc));
    p.aggregation.relation.push_back(Tensor::scalar(1.0, true));
  }
  p.aggregation.high = Tensor::scalar(1.0, true);
  p.aggregation.low = Tensor::scalar(0.5, true);
  return p;
}

void InfluenceParams::add_to(ParameterSet& params) const {
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const std::string p = "influence." + relations[r];
    const auto& enc = encoders[r];
    params.add(p + ".fwd.input_weight", enc.forward.input_weight);
    params.add(p + ".fwd.hidden_weight", enc.forward.hidden_weight);
    params.add(p + ".fwd.bias", enc.forward.bias);
    params.add(p + ".bwd.input_weight", enc.backward.input_weight);
    params.add(p + ".bwd.hidden_weight", enc.backward.hidden_weight);
    params.add(p + ".bwd.bias", enc.backward.bias);
    params.add(p + ".fc", enc.fc);
    params.add("aggregation.relation." + relations[r], aggregation.relation[r]);
  }
  params.add("aggregation.high", aggregation.high);
  params.add("aggregation.low", aggregation.low);
}

Tensor attribute_influence(std::span<const Tensor> seq, const RelationEncoder& encoder) {
  if (seq.empty()) throw ContractError("attribute_influence: empty sequence");
  const std::size_t batch = seq.front().rows();
  for (const auto& x : seq) {
    if (x.rows() != batch) throw ContractError("attribute_influence: ragged batch");
  }
  auto run = [&](const LstmParams& p, bool reversed) {
    const std::size_t h = p.hidden_size();
    LstmState st{Tensor::zeros({batch, h}), Tensor::zeros({batch, h})};
    for (std::size_t k = 0; k < seq.size(); ++k) {
      st = lstm_cell(seq[reversed ? seq.size() - 1 - k : k], st, p);
    }
    return st.h;
  };
  const Tensor fwd = run(encoder.forward, false);
  const Tensor bwd = run(encoder.backward, true);
  return encoder.fc.forward(concat(fwd, bwd, 1));
}

PublicationInfluence publication_influence(const std::vector<std::vector<Tensor>>& per_relation,
                                           const AggregationWeights& weights, std::size_t output_dim,
                                           bool literal_high_low) {
  if (per_relation.size() != weights.relation.size()) {
    throw ContractError("publication_influence: " + std::to_string(per_relation.size()) + " relation groups but " +
                        std::to_string(weights.relation.size()) + " relation weights");
  }
  Tensor total;
  for (std::size_t r = 0; r < per_relation.size(); ++r) {
    const auto& items = per_relation[r];
    if (items.empty()) continue;
    Tensor rel_sum;
    for (std::size_t k = 0; k < items.size(); ++k) {
      Tensor term = literal_high_low ? add(scale(items[k], weights.high), scale(items[k], weights.low))
                                     : scale(items[k], k == 0 ? weights.high : weights.low);
      rel_sum = rel_sum.defined() ? add(rel_sum, term) : term;
    }
    Tensor weighted = scale(rel_sum, weights.relation[r]);
    total = total.defined() ? add(total, weighted) : weighted;
  }
  if (!total.defined()) return {Tensor::zeros({1, output_dim}), true};
  return {total, false};
}

PublicationInfluence publication_influence(const std::string& publication, int year, const EmbeddingTable& table,
                                           const InfluenceParams& params) {
  const auto& index = table.index();
  const std::size_t s = index.snapshot_of_year(year);
  const std::size_t prow = index.row(publication);
  const auto& g = index.graph(s);
  if (!g.alive[prow]) throw LookupError("publication '" + publication + "' does not exist in " + std::to_string(year));
  std::vector<std::vector<Tensor>> per_relation(params.relations.size());
  for (std::size_t r = 0; r < params.relations.size(); ++r) {
    for (const std::size_t a : g.ordered_out[r][prow]) {
      std::vector<Tensor> seq;
      for (std::size_t t = index.first_snapshot(a); t <= s; ++t) {
        const std::size_t rows[] = {a};
        seq.push_back(gather_rows(table.snapshot(t), rows));
      }
      per_relation[r].push_back(attribute_influence(seq, params.encoders[r]));
    }
  }
  return publication_influence(per_relation, params.aggregation, params.config.output_dim,
                               params.config.literal_high_low);
}

Tensor batch_publication_influence(std::span<const std::size_t> publication_rows, std::size_t s,
                                   const EmbeddingTable& table, const InfluenceParams& params,
                                   std::vector<bool>* cold) {
  const auto& index = table.index();
  const auto& g = index.graph(s);
  const std::size_t P = publication_rows.size();
  if (P == 0) throw ContractError("batch_publication_influence: no publications");
  std::vector<bool> has_attr(P, false);
  Tensor total;

  for (std::size_t r = 0; r < params.relations.size(); ++r) {
    // Distinct attributes grouped by the snapshot where their history starts.
    std::map<std::size_t, std::vector<std::size_t>> by_start;
    std::unordered_map<std::size_t, bool> seen;
    for (const std::size_t p : publication_rows) {
      for (const std::size_t a : g.ordered_out[r][p]) {
        if (seen.emplace(a, true).second) by_start[index.first_snapshot(a)].push_back(a);
      }
    }
    if (by_start.empty()) continue;

    std::unordered_map<std::size_t, std::size_t> row_of;
    Tensor encoded;
    for (const auto& [start, attrs] : by_start) {
      std::vector<Tensor> seq;
      for (std::size_t t = start; t <= s; ++t) seq.push_back(gather_rows(table.snapshot(t), attrs));
      Tensor block = attribute_influence(seq, params.encoders[r]);
      for (const std::size_t a : attrs) row_of.emplace(a, row_of.size());
      encoded = encoded.defined() ? concat(encoded, block, 0) : block;
    }

    RowMix first, rest, all;
    for (std::size_t i = 0; i < P; ++i) {
      const auto& attrs = g.ordered_out[r][publication_rows[i]];
      std::vector<std::size_t> rows;
      for (const std::size_t a : attrs) rows.push_back(row_of.at(a));
      if (!rows.empty()) has_attr[i] = true;
      all.add_row_uniform(rows, 1.0);
      first.add_row_uniform(std::span<const std::size_t>(rows.data(), rows.empty() ? 0 : 1), 1.0);
      rest.add_row_uniform(std::span<const std::size_t>(rows.data() + (rows.empty() ? 0 : 1),
                                                        rows.empty() ? 0 : rows.size() - 1),
                           1.0);
    }
    const auto& w = params.aggregation;
    Tensor term;
    if (params.config.literal_high_low) {
      const Tensor summed = mix_rows(encoded, all);
      term = add(scale(summed, w.high), scale(summed, w.low));
    } else {
      term = add(scale(mix_rows(encoded, first), w.high), scale(mix_rows(encoded, rest), w.low));
    }
    term = scale(term, w.relation[r]);
    total = total.defined() ? add(total, term) : term;
  }
  if (cold) {
    cold->assign(P, false);
    for (std::size_t i = 0; i < P; ++i) (*cold)[i] = !has_attr[i];
  }
  if (!total.defined()) return Tensor::zeros({P, params.config.output_dim});
  return total;
}

Tensor mean_attribute_embedding(std::span<const std::size_t> publication_rows, std::size_t s,
                                const EmbeddingTable& table) {
  const auto& g = table.index().graph(s);
  RowMix mix;
  for (const std::size_t p : publication_rows) {
    std::vector<std::size_t> attrs;
    for (const auto& per_rel : g.ordered_out) attrs.insert(attrs.end(), per_rel[p].begin(), per_rel[p].end());
    mix.add_row_uniform(attrs, attrs.empty() ? 0.0 : 1.0 / static_cast<double>(attrs.size()));
  }
  return mix_rows(table.snapshot(s), mix);
}

}  // namespace ctpir
