#include "ctpir/gradsuite.hpp"

#include <functional>

#include "ctpir/gradcheck.hpp"
#include "ctpir/model.hpp"
#include "ctpir/rng.hpp"
#include "ctpir/synthgen.hpp"

namespace ctpir {

namespace {

Tensor random_leaf(Shape shape, double lo, double hi, Rng& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Values bounded away from zero so relu/abs kinks stay out of reach of eps.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t = random_leaf(std::move(shape), 0.2, 1.5, rng);
  for (auto& v : t.mutable_data()) {
    if (rng.uniform() < 0.5) v = -v;
  }
  return t;
}

// Weighted sum so that every output coordinate gets a distinct adjoint.
Tensor weighted_sum(const Tensor& y, Rng& rng) {
  std::vector<double> w(y.size());
  for (auto& v : w) v = rng.uniform(0.5, 1.5);
  return sum(mul(y, Tensor::from(y.shape(), std::move(w))));
}

TemporalKG tiny_graph(std::uint64_t seed) {
  SynthConfig c;
  c.num_publications = 6;
  c.num_attributes_per_class = 2;
  c.attribute_classes = {"keyword", "applicant"};
  c.years = 4;
  c.max_attributes_per_class = 2;
  c.mean_references = 2.0;
  c.embedding_dim = 5;
  c.feature_signal = 0.5;
  c.seed = seed;
  auto tkg = generate(c);
  // Larger input features keep every gradient well above the error floor.
  for (auto& snap : tkg.snapshots) {
    for (auto& [id, f] : snap.features) {
      Rng frng(mix_seed(seed, fnv1a(id)));
      for (auto& v : f) v = frng.uniform(-1.0, 1.0);
    }
  }
  return tkg;
}

struct Suite {
  std::vector<GradCheckResult>* out;
  std::uint64_t seed;

  void params(const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> ps) {
    out->push_back({name, seed, grad_check_params(f, ps)});
  }
  void unary(const std::string& name, const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
    out->push_back({name, seed, grad_check(f, x)});
  }
};

void op_checks(Suite& s, Rng& rng) {
  const std::uint64_t wseed = rng.bits();
  // Re-seeding inside each closure keeps the adjoint weights fixed across
  // the finite-difference evaluations.
  auto fixed = [wseed](const Tensor& y) {
    Rng r(wseed);
    return weighted_sum(y, r);
  };

  {
    Tensor a = random_leaf({3, 4}, -1, 1, rng), b = random_leaf({4, 2}, -1, 1, rng);
    s.params("matmul", [=] { return fixed(matmul(a, b)); }, {a, b});
  }
  {
    Tensor a = random_leaf({2, 3}, -1, 1, rng), b = random_leaf({2, 5}, -1, 1, rng);
    s.params("concat_axis1", [=] { return fixed(concat(a, b, 1)); }, {a, b});
    Tensor c = random_leaf({3, 3}, -1, 1, rng);
    s.params("concat_axis0", [=] { return fixed(concat(a, c, 0)); }, {a, c});
  }
  {
    Tensor x = random_leaf({3, 6}, -1, 1, rng);
    s.params("slice_cols", [=] { return fixed(slice_cols(x, 1, 4)); }, {x});
    s.params("transpose", [=] { return fixed(transpose(x)); }, {x});
  }
  {
    Tensor a = random_leaf({3, 4}, -1, 1, rng), b = random_leaf({3, 4}, -1, 1, rng);
    s.params("add", [=] { return fixed(add(a, b)); }, {a, b});
    s.params("sub", [=] { return fixed(sub(a, b)); }, {a, b});
    s.params("mul", [=] { return fixed(mul(a, b)); }, {a, b});
    std::vector<Tensor> in{a, b};
    s.params("elementwise_add", [=] { return fixed(elementwise(Elementwise::add, in)); }, {a, b});
    s.params("elementwise_mul", [=] { return fixed(elementwise(Elementwise::mul, in)); }, {a, b});
  }
  {
    Tensor x = random_leaf({3, 4}, -1, 1, rng), b = random_leaf({1, 4}, -1, 1, rng);
    Tensor c = random_leaf({1}, 0.5, 2.0, rng);
    s.params("add_row", [=] { return fixed(add_row(x, b)); }, {x, b});
    s.params("scale_tensor", [=] { return fixed(scale(x, c)); }, {x, c});
    s.params("scale_double", [=] { return fixed(scale(x, 1.7)); }, {x});
    s.params("add_scalar", [=] { return fixed(add_scalar(x, -0.3)); }, {x});
  }
  const Tensor gen = random_leaf({3, 4}, -2, 2, rng);
  const Tensor pos = random_leaf({3, 4}, 0.2, 3, rng);
  const Tensor kinked = away_from_zero({3, 4}, rng);
  s.unary("sigmoid", [=](const Tensor& x) { return fixed(sigmoid(x)); }, gen);
  s.unary("tanh", [=](const Tensor& x) { return fixed(tanh(x)); }, gen);
  s.unary("relu", [=](const Tensor& x) { return fixed(relu(x)); }, kinked);
  s.unary("softplus", [=](const Tensor& x) { return fixed(softplus(x)); }, gen);
  s.unary("exp", [=](const Tensor& x) { return fixed(exp(x)); }, gen);
  s.unary("log", [=](const Tensor& x) { return fixed(log(x)); }, pos);
  s.unary("log1p", [=](const Tensor& x) { return fixed(log1p(x)); }, pos);
  s.unary("abs", [=](const Tensor& x) { return fixed(abs(x)); }, kinked);
  s.unary("square", [=](const Tensor& x) { return fixed(square(x)); }, gen);
  s.unary("sqrt", [=](const Tensor& x) { return fixed(sqrt(x)); }, pos);
  s.unary("sum", [=](const Tensor& x) { return scale(sum(x), 1.3); }, gen);
  s.unary("mean", [=](const Tensor& x) { return scale(mean(x), 1.3); }, gen);
  for (auto [kind, name] : {std::pair{Elementwise::sigmoid, "elementwise_sigmoid"},
                            std::pair{Elementwise::tanh, "elementwise_tanh"},
                            std::pair{Elementwise::softplus, "elementwise_softplus"},
                            std::pair{Elementwise::exp, "elementwise_exp"}}) {
    s.unary(name, [=](const Tensor& x) { return fixed(elementwise(kind, std::span<const Tensor>(&x, 1))); }, gen);
  }
  s.unary("elementwise_relu",
          [=](const Tensor& x) { return fixed(elementwise(Elementwise::relu, std::span<const Tensor>(&x, 1))); },
          kinked);
  s.unary("elementwise_log",
          [=](const Tensor& x) { return fixed(elementwise(Elementwise::log, std::span<const Tensor>(&x, 1))); }, pos);
  {
    Tensor x = random_leaf({5, 3}, -1, 1, rng);
    RowMix mix;
    mix.out_rows = 0;
    const std::size_t r0[] = {0, 2, 2};
    const double c0[] = {0.5, 1.0, -0.25};
    mix.add_row(r0, c0);
    mix.add_row({}, {});
    const std::size_t r2[] = {4, 1};
    mix.add_row_uniform(r2, 0.5);
    s.params("mix_rows", [=] { return fixed(mix_rows(x, mix)); }, {x});
    const std::vector<std::size_t> rows{3, 0, 3, 4};
    s.params("gather_rows", [=] { return fixed(gather_rows(x, rows)); }, {x});
  }
  {
    TrajectoryTensors p{random_leaf({3, 1}, 2, 20, rng), random_leaf({3, 1}, 0.3, 1.5, rng),
                        random_leaf({3, 1}, -1, 4, rng), random_leaf({3, 1}, 0.2, 2, rng)};
    const std::vector<double> t{1, 2, 3, 4, 5};
    s.params("richards_curve", [=] { return fixed(richards_curve(p, t)); }, {p.theta1, p.theta2, p.theta3, p.xi});
    LognormalTensors q{random_leaf({3, 1}, 2, 20, rng), random_leaf({3, 1}, -0.5, 1.5, rng),
                       random_leaf({3, 1}, 0.3, 1.5, rng)};
    s.params("lognormal_curve", [=] { return fixed(lognormal_curve(q, t)); }, {q.scale, q.mu, q.sigma});
  }
  {
    Tensor pred = random_leaf({4, 3}, 0.5, 20, rng);
    std::vector<double> o(12);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = pred.data()[i] + (i % 2 ? 1.5 : -0.4);
    const Tensor obs = Tensor::matrix(4, 3, o);
    s.params("male_loss", [=] { return male_loss(pred, obs); }, {pred});
    s.params("rmsle_loss", [=] { return rmsle_loss(pred, obs); }, {pred});
  }
}

void module_checks(Suite& s, Rng& rng) {
  const std::uint64_t wseed = rng.bits();
  auto fixed = [wseed](const Tensor& y) {
    Rng r(wseed);
    return weighted_sum(y, r);
  };

  // Bi-LSTM of length 4 through the relation projection.
  {
    Rng prng(rng.bits());
    RelationEncoder enc{LstmParams::init(3, 4, prng), LstmParams::init(3, 4, prng), Linear::init(8, 3, prng)};
    std::vector<Tensor> seq;
    for (int t = 0; t < 4; ++t) seq.push_back(random_leaf({2, 3}, -1, 1, rng));
    std::vector<Tensor> ps{enc.forward.input_weight, enc.forward.hidden_weight, enc.forward.bias,
                           enc.backward.input_weight, enc.backward.hidden_weight, enc.backward.bias,
                           enc.fc.weight, enc.fc.bias};
    ps.insert(ps.end(), seq.begin(), seq.end());
    s.params("bilstm_unroll4", [=] { return fixed(attribute_influence(seq, enc)); }, ps);
  }
  // Aggregation over relations and positions.
  {
    AggregationWeights w{{random_leaf({1}, 0.5, 1.5, rng), random_leaf({1}, 0.5, 1.5, rng)},
                         random_leaf({1}, 0.5, 1.5, rng), random_leaf({1}, 0.2, 0.8, rng)};
    std::vector<std::vector<Tensor>> per{{random_leaf({1, 3}, -1, 1, rng), random_leaf({1, 3}, -1, 1, rng)},
                                         {random_leaf({1, 3}, -1, 1, rng)}};
    std::vector<Tensor> ps{w.relation[0], w.relation[1], w.high, w.low, per[0][0], per[0][1], per[1][0]};
    s.params("influence_aggregation", [=] { return fixed(publication_influence(per, w, 3).vector); }, ps);
  }
  // Parameter heads into the Richards curve.
  {
    Rng prng(rng.bits());
    ParamHeads heads = ParamHeads::init(4, {5, 3}, prng);
    Tensor m = random_leaf({3, 4}, -1, 1, rng);
    ParameterSet set;
    heads.add_to(set);
    std::vector<Tensor> ps{m};
    for (auto& [n, t] : set.items()) ps.push_back(t);
    const std::vector<double> t{1, 2, 3};
    s.params("param_heads", [=] { return fixed(richards_curve(logistic_params(m, heads), t)); }, ps);
  }

  const TemporalKG tkg = tiny_graph(rng.bits());
  const auto index = GraphIndex::build(tkg);

  // Two consecutive difference-preserved layer steps, both modes.
  for (bool normalize : {true, false}) {
    Rng prng(rng.bits());
    RgcnConfig cfg;
    cfg.layer_dims = {tkg.embedding_dim, 4};
    cfg.normalize = normalize;
    const auto w = RgcnWeights::init(tkg.relations, cfg, prng);
    ParameterSet set;
    w.add_to(set, true);
    std::vector<Tensor> ps;
    for (auto& [n, t] : set.items()) ps.push_back(t);
    const std::size_t s1 = index->num_snapshots() - 1;
    auto f = [=] {
      const auto first = rgcn_diff_layer_step(index->graph(s1 - 1), index->features(s1 - 1), nullptr, w.layers[0],
                                              cfg, true);
      const auto second = rgcn_diff_layer_step(index->graph(s1), index->features(s1), &first.static_pre,
                                               w.layers[0], cfg, true);
      return fixed(second.output);
    };
    s.params(normalize ? "rgcn_layer_normalized" : "rgcn_layer_sum", f, ps);
  }

  // End-to-end training loss through every component.
  {
    HyperParams hp;
    hp.seed = rng.bits();
    hp.embed_years = 2;
    hp.horizon = 2;
    hp.rgcn.layer_dims = {tkg.embedding_dim, 4, 3};
    hp.lstm_hidden = 3;
    hp.influence_dim = 3;
    hp.head_hidden = {4};
    const Model model = Model::init(tkg.relations, hp);
    const int T = tkg.snapshots[hp.embed_years - 1].year;
    const auto ctx = PipelineContext::make(tkg, T);
    std::vector<std::string> ids;
    for (const auto& e : tkg.at_year(T).entities) {
      if (e.kind == EntityKind::publication) ids.push_back(e.id);
    }
    const auto rows = ctx.publication_rows(ids);
    const auto truth = ground_truth_all(tkg, ids, T, hp.horizon);
    std::vector<double> o;
    for (const auto& id : ids) {
      for (double v : truth.at(id).values) o.push_back(v + 0.5);
    }
    const Tensor obs = Tensor::matrix(ids.size(), hp.horizon, o);
    auto params = model.trainable();
    std::vector<Tensor> ps;
    for (auto& [n, t] : params.items()) ps.push_back(t);
    const auto f = [=] { return male_loss(forward_predictions(model, ctx, rows, hp.horizon), obs); };
    s.out->push_back({"end_to_end_loss", s.seed, grad_check_directions(f, ps, rng.bits())});
  }
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::span<const std::uint64_t> seeds) {
  std::vector<GradCheckResult> out;
  for (auto seed : seeds) {
    Suite s{&out, seed};
    Rng rng(seed);
    op_checks(s, rng);
    module_checks(s, rng);
  }
  return out;
}

}  // namespace ctpir
