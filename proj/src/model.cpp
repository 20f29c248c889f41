#include "ctpir/model.hpp"

#include <fstream>
#include <sstream>

#include "ctpir/config_json.hpp"

using nlohmann::json;

namespace ctpir {

Ablation ablation_from_string(const std::string& s) {
  if (s == "none") return Ablation::none;
  if (s == "no_diff") return Ablation::no_diff;
  if (s == "no_influence") return Ablation::no_influence;
  if (s == "lognormal") return Ablation::lognormal;
  throw ConfigError("unknown ablation '" + s + "'");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_diff: return "no_diff";
    case Ablation::no_influence: return "no_influence";
    case Ablation::lognormal: return "lognormal";
  }
  return "none";
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

std::string to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "adam"; }

LrSchedule lr_schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  throw ConfigError("unknown learning-rate schedule '" + s + "'");
}

std::string to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

void HyperParams::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (embed_years == 0) throw ConfigError("embed_years must be positive");
  if (horizon == 0) throw ConfigError("horizon must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must be in (0, 1]");
  if (rgcn.layer_dims.size() < 2) throw ConfigError("layer_dims needs at least two entries");
  for (auto d : rgcn.layer_dims) {
    if (d == 0) throw ConfigError("layer_dims entries must be positive");
  }
  if (lstm_hidden == 0 || influence_dim == 0) throw ConfigError("influence sizes must be positive");
}

json to_json(const HyperParams& hp) {
  return {{"batch_size", hp.batch_size},
          {"learning_rate", hp.learning_rate},
          {"epochs", hp.epochs},
          {"optimizer", to_string(hp.optimizer)},
          {"lr_schedule", to_string(hp.lr_schedule)},
          {"seed", hp.seed},
          {"embed_years", hp.embed_years},
          {"horizon", hp.horizon},
          {"ablation", to_string(hp.ablation)},
          {"train_fraction", hp.train_fraction},
          {"layer_dims", hp.rgcn.layer_dims},
          {"normalize", hp.rgcn.normalize},
          {"hidden_activation", to_string(hp.rgcn.hidden_activation)},
          {"lstm_hidden", hp.lstm_hidden},
          {"influence_dim", hp.influence_dim},
          {"literal_high_low", hp.literal_high_low},
          {"head_hidden", hp.head_hidden}};
}

HyperParams hyperparams_from_json(const json& j) {
  HyperParams hp;
  auto get = [&](const char* key, auto& field) { detail::read_field(j, key, field); };
  try {
    detail::reject_unknown_keys(j, to_json(HyperParams{}), "hyperparameter");
    get("batch_size", hp.batch_size);
    get("learning_rate", hp.learning_rate);
    get("epochs", hp.epochs);
    if (j.contains("optimizer")) hp.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    if (j.contains("lr_schedule")) hp.lr_schedule = lr_schedule_from_string(j.at("lr_schedule").get<std::string>());
    get("seed", hp.seed);
    get("embed_years", hp.embed_years);
    get("horizon", hp.horizon);
    if (j.contains("ablation")) hp.ablation = ablation_from_string(j.at("ablation").get<std::string>());
    get("train_fraction", hp.train_fraction);
    get("layer_dims", hp.rgcn.layer_dims);
    get("normalize", hp.rgcn.normalize);
    if (j.contains("hidden_activation")) {
      hp.rgcn.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
    }
    get("lstm_hidden", hp.lstm_hidden);
    get("influence_dim", hp.influence_dim);
    get("literal_high_low", hp.literal_high_low);
    get("head_hidden", hp.head_hidden);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("hyperparameters: ") + e.what());
  }
  hp.validate();
  return hp;
}

// ---- Model ----------------------------------------------------------------

Model Model::init(const std::vector<std::string>& relations, const HyperParams& hp) {
  hp.validate();
  Model m;
  m.hp = hp;
  m.relations = relations;
  Rng rng(hp.seed);
  m.rgcn = RgcnWeights::init(relations, hp.rgcn, rng);
  InfluenceConfig ic;
  ic.input_dim = hp.rgcn.layer_dims.back();
  ic.hidden_dim = hp.lstm_hidden;
  ic.output_dim = hp.influence_dim;
  ic.literal_high_low = hp.literal_high_low;
  m.influence = InfluenceParams::init(relations, ic, rng);
  const std::size_t head_in = hp.ablation == Ablation::no_influence ? hp.rgcn.layer_dims.back() : hp.influence_dim;
  m.heads = ParamHeads::init(head_in, hp.head_hidden, rng);
  if (hp.ablation == Ablation::no_diff) {
    for (auto& layer : m.rgcn.layers) {
      for (auto& v : layer.temporal.mutable_data()) v = 0.0;
    }
  }
  return m;
}

ParameterSet Model::trainable() const {
  ParameterSet p;
  rgcn.add_to(p, hp.ablation != Ablation::no_diff);
  if (hp.ablation != Ablation::no_influence) influence.add_to(p);
  heads.add_to(p);
  return p;
}

ParameterSet Model::all_parameters() const {
  ParameterSet p;
  rgcn.add_to(p, true);
  influence.add_to(p);
  heads.add_to(p);
  return p;
}

json Model::to_json() const {
  json j;
  j["format"] = "ctpir-model/1";
  j["hyperparams"] = ctpir::to_json(hp);
  j["relations"] = relations;
  json params = json::object();
  const auto all = all_parameters();
  for (const auto& [name, t] : all.items()) params[name] = tensor_to_json(t);
  j["parameters"] = std::move(params);
  auto metrics = [](const EpochMetrics& m) { return json{{"epoch", m.epoch}, {"male", m.male}, {"rmsle", m.rmsle}}; };
  j["initial"] = metrics(initial);
  json hist = json::array();
  for (const auto& h : history) hist.push_back(metrics(h));
  j["history"] = std::move(hist);
  j["train_ids"] = train_ids;
  j["test_ids"] = test_ids;
  return j;
}

Model Model::from_json(const json& j) {
  try {
    const auto hp = hyperparams_from_json(j.at("hyperparams"));
    Model m = Model::init(j.at("relations").get<std::vector<std::string>>(), hp);
    const auto& params = j.at("parameters");
    auto all = m.all_parameters();
    for (auto& [name, t] : all.items()) {
      if (!params.contains(name)) throw ParseError("model: missing parameter '" + name + "'");
      tensor_assign_json(t, params.at(name), name);
    }
    auto metrics = [](const json& e) {
      return EpochMetrics{e.at("epoch").get<std::size_t>(), e.at("male").get<double>(), e.at("rmsle").get<double>()};
    };
    m.initial = metrics(j.at("initial"));
    for (const auto& e : j.at("history")) m.history.push_back(metrics(e));
    m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

void Model::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot write model");
  out << to_json().dump() << '\n';
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open model");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

Model Model::clone() const { return from_json(to_json()); }

// ---- pipeline -------------------------------------------------------------

PipelineContext PipelineContext::make(const TemporalKG& tkg, int T) {
  PipelineContext ctx;
  const std::size_t s = tkg.index_of_year(T);
  ctx.index = GraphIndex::build(tkg, s + 1);
  ctx.snapshot = s;
  ctx.year = T;
  return ctx;
}

std::vector<std::size_t> PipelineContext::publication_rows(std::span<const std::string> ids) const {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  const auto& g = index->graph(snapshot);
  for (const auto& id : ids) {
    if (!index->contains(id)) throw LookupError("unknown publication '" + id + "'");
    const std::size_t r = index->row(id);
    if (!g.alive[r] || index->entity(r).kind != EntityKind::publication) {
      throw LookupError("publication '" + id + "' does not exist in year " + std::to_string(year));
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> horizon_times(std::size_t N) {
  std::vector<double> t(N);
  for (std::size_t i = 0; i < N; ++i) t[i] = static_cast<double>(i + 1);
  return t;
}

Tensor momentum(const Model& model, const EmbeddingTable& table, const PipelineContext& ctx,
                std::span<const std::size_t> rows, std::vector<bool>* cold) {
  if (model.hp.ablation == Ablation::no_influence) {
    if (cold) cold->assign(rows.size(), false);
    return mean_attribute_embedding(rows, ctx.snapshot, table);
  }
  return batch_publication_influence(rows, ctx.snapshot, table, model.influence, cold);
}

Tensor forward_predictions(const Model& model, const PipelineContext& ctx, std::span<const std::size_t> rows,
                           std::size_t N, std::vector<bool>* cold) {
  if (model.relations != ctx.index->relations()) throw ContractError("model relations do not match the graph");
  const auto table = embed_sequence(ctx.index, model.rgcn);
  const Tensor m = momentum(model, table, ctx, rows, cold);
  const auto times = horizon_times(N);
  if (model.hp.ablation == Ablation::lognormal) return lognormal_curve(lognormal_params(m, model.heads), times);
  return richards_curve(logistic_params(m, model.heads), times);
}

}  // namespace ctpir
