#include "ctpir/train.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "ctpir/synthgen.hpp"

using nlohmann::json;

namespace ctpir {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::uint64_t kEpochStream = 0x65706f6368ULL;

std::unique_ptr<Optimizer> make_optimizer(const HyperParams& hp) {
  if (hp.optimizer == OptimizerKind::adam) return std::make_unique<Adam>(hp.learning_rate);
  return std::make_unique<Sgd>(hp.learning_rate);
}

Tensor observed_matrix(std::span<const std::string> ids, const std::map<std::string, CitationSeries>& targets,
                       std::size_t N) {
  std::vector<double> v;
  v.reserve(ids.size() * N);
  for (const auto& id : ids) {
    const auto& s = targets.at(id).values;
    v.insert(v.end(), s.begin(), s.end());
  }
  return Tensor::matrix(ids.size(), N, std::move(v));
}

std::vector<CitationSeries> to_series(const Tensor& pred, int T) {
  const std::size_t P = pred.rows(), N = pred.cols();
  std::vector<CitationSeries> out(P);
  for (std::size_t i = 0; i < P; ++i) {
    out[i].start_year = T;
    out[i].values.assign(pred.data().begin() + static_cast<std::ptrdiff_t>(i * N),
                         pred.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * N));
  }
  return out;
}

EpochMetrics set_metrics(const Model& model, const PipelineContext& ctx, std::span<const std::string> ids,
                         const std::map<std::string, CitationSeries>& targets, std::size_t N, std::size_t epoch) {
  NoGradGuard guard;
  const auto rows = ctx.publication_rows(ids);
  const auto pred = to_series(forward_predictions(model, ctx, rows, N), ctx.year);
  std::vector<CitationSeries> obs;
  for (const auto& id : ids) obs.push_back(targets.at(id));
  return {epoch, male(pred, obs), rmsle(pred, obs)};
}

}  // namespace

int cutoff_year(const TemporalKG& tkg, const HyperParams& hp) {
  hp.validate();
  if (hp.embed_years + hp.horizon > tkg.snapshots.size()) {
    throw ConfigError("embed_years + horizon = " + std::to_string(hp.embed_years + hp.horizon) + " exceeds the " +
                      std::to_string(tkg.snapshots.size()) + " available snapshots");
  }
  return tkg.snapshots[hp.embed_years - 1].year;
}

Model train(const TemporalKG& tkg, const std::map<std::string, CitationSeries>& targets, const HyperParams& hp) {
  if (targets.empty()) throw ContractError("train: no target publications");
  const int T = cutoff_year(tkg, hp);
  const std::size_t N = hp.horizon;
  for (const auto& [id, s] : targets) {
    if (s.start_year != T || s.values.size() != N) {
      throw ContractError("train: target '" + id + "' must cover years " + std::to_string(T + 1) + ".." +
                          std::to_string(T + static_cast<int>(N)));
    }
  }

  const auto ctx = PipelineContext::make(tkg, T);
  std::vector<std::string> ids;
  for (const auto& [id, s] : targets) ids.push_back(id);
  ctx.publication_rows(ids);

  Rng split_rng(mix_seed(hp.seed, kSplitStream));
  split_rng.shuffle(ids);
  std::size_t n_train = static_cast<std::size_t>(std::llround(hp.train_fraction * static_cast<double>(ids.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size());

  Model model = Model::init(tkg.relations, hp);
  model.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  model.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(model.train_ids.begin(), model.train_ids.end());
  std::sort(model.test_ids.begin(), model.test_ids.end());

  auto params = model.trainable();
  auto optimizer = make_optimizer(hp);
  try {
    model.initial = set_metrics(model, ctx, model.train_ids, targets, N, 0);
  } catch (const NumericError& e) {
    throw NumericError(std::string("initial evaluation diverged: ") + e.what());
  }

  std::vector<std::string> order = model.train_ids;
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    if (hp.lr_schedule == LrSchedule::cosine) {
      const double progress = static_cast<double>(epoch - 1) / static_cast<double>(hp.epochs);
      optimizer->set_learning_rate(hp.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    }
    try {
      Rng epoch_rng(mix_seed(hp.seed, kEpochStream + epoch));
      epoch_rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
        const std::size_t end = std::min(order.size(), start + hp.batch_size);
        const std::span<const std::string> batch(order.data() + start, end - start);
        params.zero_grad();
        const auto rows = ctx.publication_rows(batch);
        const Tensor pred = forward_predictions(model, ctx, rows, N);
        const Tensor loss = male_loss(pred, observed_matrix(batch, targets, N));
        if (!std::isfinite(loss.item())) throw NumericError("loss is not finite");
        backward(loss);
        optimizer->step(params);
      }
      model.history.push_back(set_metrics(model, ctx, model.train_ids, targets, N, epoch));
    } catch (const NumericError& e) {
      throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }
  return model;
}

std::map<std::string, CitationSeries> predict(const Model& model, const TemporalKG& tkg,
                                              std::span<const std::string> ids, int T, std::size_t N) {
  if (N == 0) throw RangeError("predict: horizon must be positive");
  for (const auto& id : ids) {
    const auto* e = tkg.at_year(T).find(id);
    if (!e || e->kind != EntityKind::publication) {
      throw LookupError("publication '" + id + "' does not exist in year " + std::to_string(T));
    }
  }
  std::map<std::string, CitationSeries> out;
  if (ids.empty()) return out;
  NoGradGuard guard;
  const auto ctx = PipelineContext::make(tkg, T);
  const auto rows = ctx.publication_rows(ids);
  const auto series = to_series(forward_predictions(model, ctx, rows, N), T);
  for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = series[i];
  return out;
}

Subtask subtask_from_string(const std::string& s) {
  if (s == "mix") return Subtask::mix;
  if (s == "newborn") return Subtask::newborn;
  if (s == "grown") return Subtask::grown;
  throw ConfigError("unknown subtask '" + s + "'");
}

std::string to_string(Subtask s) {
  switch (s) {
    case Subtask::mix: return "mix";
    case Subtask::newborn: return "newborn";
    case Subtask::grown: return "grown";
  }
  return "mix";
}

bool SubtaskSpec::selects(double count_at_T) const {
  switch (name) {
    case Subtask::mix: return true;
    case Subtask::newborn: return count_at_T < threshold;
    case Subtask::grown: return count_at_T > threshold;
  }
  return true;
}

DatasetProfile DatasetProfile::named(const std::string& name) {
  if (name == "aipatent") return aipatent();
  if (name == "aps") return aps();
  throw ConfigError("unknown dataset profile '" + name + "'");
}

SubtaskSpec DatasetProfile::spec(Subtask s) const {
  switch (s) {
    case Subtask::mix: return {Subtask::mix, 0.0};
    case Subtask::newborn: return {Subtask::newborn, newborn_threshold};
    case Subtask::grown: return {Subtask::grown, grown_threshold};
  }
  return {};
}

json to_json(const EvalResult& r) {
  json j;
  j["male"] = r.male ? json(*r.male) : json(nullptr);
  j["rmsle"] = r.rmsle ? json(*r.rmsle) : json(nullptr);
  j["n_selected"] = r.n_selected;
  return j;
}

std::vector<std::string> select_subtask(const TemporalKG& tkg, std::span<const std::string> ids,
                                        const SubtaskSpec& spec, int T) {
  const auto& snap = tkg.at_year(T);
  std::vector<std::string> out;
  for (const auto& id : ids) {
    if (spec.selects(static_cast<double>(citation_count(snap, id)))) out.push_back(id);
  }
  return out;
}

EvalResult evaluate(const Model& model, const TemporalKG& tkg, std::span<const std::string> ids,
                    const SubtaskSpec& spec, int T, std::size_t N) {
  const auto selected = select_subtask(tkg, ids, spec, T);
  EvalResult r;
  r.n_selected = selected.size();
  if (selected.empty()) return r;
  const auto pred = predict(model, tkg, selected, T, N);
  const auto obs = ground_truth_all(tkg, selected, T, N);
  std::vector<CitationSeries> p, o;
  for (const auto& id : selected) {
    p.push_back(pred.at(id));
    o.push_back(obs.at(id));
  }
  r.male = male(p, o);
  r.rmsle = rmsle(p, o);
  return r;
}

std::vector<EvalResult> time_distance_eval(const Model& model, const TemporalKG& tkg,
                                           std::span<const std::string> ids, int T, std::size_t N_max) {
  if (N_max == 0) throw RangeError("time_distance_eval: N_max must be positive");
  std::vector<EvalResult> out(N_max);
  if (ids.empty()) return out;
  const auto pred = predict(model, tkg, ids, T, N_max);
  const auto obs = ground_truth_all(tkg, ids, T, N_max);
  for (std::size_t k = 0; k < N_max; ++k) {
    std::vector<CitationSeries> p, o;
    for (const auto& id : ids) {
      p.push_back({T + static_cast<int>(k), {pred.at(id).values[k]}});
      o.push_back({T + static_cast<int>(k), {obs.at(id).values[k]}});
    }
    out[k] = {male(p, o), rmsle(p, o), ids.size()};
  }
  return out;
}

std::vector<std::string> publications_at(const TemporalKG& tkg, int T) {
  std::vector<std::string> out;
  for (const auto& e : tkg.at_year(T).entities) {
    if (e.kind == EntityKind::publication) out.push_back(e.id);
  }
  return out;
}

}  // namespace ctpir
