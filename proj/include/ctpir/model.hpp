#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctpir/embedding.hpp"
#include "ctpir/influence.hpp"
#include "ctpir/nn.hpp"
#include "ctpir/trajectory.hpp"

namespace ctpir {

enum class Ablation { none, no_diff, no_influence, lognormal };
enum class OptimizerKind { sgd, adam };
enum class LrSchedule { constant, cosine };

Ablation ablation_from_string(const std::string& s);
std::string to_string(Ablation a);
OptimizerKind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerKind o);
LrSchedule lr_schedule_from_string(const std::string& s);
std::string to_string(LrSchedule s);

struct HyperParams {
  std::size_t batch_size = 512;
  double learning_rate = 0.05;
  std::size_t epochs = 20;
  OptimizerKind optimizer = OptimizerKind::sgd;
  // cosine: epoch e (1-based) uses lr * (1 + cos(pi (e-1) / epochs)) / 2.
  LrSchedule lr_schedule = LrSchedule::constant;
  std::uint64_t seed = 0;
  // Snapshots used for embedding (T is the year of the last one) and the
  // number of following years to predict.
  std::size_t embed_years = 5;
  std::size_t horizon = 5;
  Ablation ablation = Ablation::none;
  double train_fraction = 2.0 / 3.0;

  RgcnConfig rgcn;
  std::size_t lstm_hidden = 128;
  std::size_t influence_dim = 128;
  bool literal_high_low = false;
  std::vector<std::size_t> head_hidden{64, 32};

  void validate() const;
};

nlohmann::json to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const nlohmann::json& j);

struct EpochMetrics {
  std::size_t epoch = 0;
  double male = 0.0;
  double rmsle = 0.0;
};

struct Model {
  HyperParams hp;
  std::vector<std::string> relations;
  RgcnWeights rgcn;
  InfluenceParams influence;
  ParamHeads heads;

  EpochMetrics initial;
  std::vector<EpochMetrics> history;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;

  // Seeded initialization; no_diff zeroes the temporal transforms.
  static Model init(const std::vector<std::string>& relations, const HyperParams& hp);

  // Parameters the optimizer updates under the configured ablation.
  ParameterSet trainable() const;
  ParameterSet all_parameters() const;

  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);
  // Deep copy (Tensor copies share storage).
  Model clone() const;
};

// Snapshots up to and including year T, indexed once.
struct PipelineContext {
  std::shared_ptr<const GraphIndex> index;
  std::size_t snapshot = 0;
  int year = 0;

  static PipelineContext make(const TemporalKG& tkg, int T);
  std::vector<std::size_t> publication_rows(std::span<const std::string> ids) const;
};

// Momentum M for the given publication rows at the context year.
Tensor momentum(const Model& model, const EmbeddingTable& table, const PipelineContext& ctx,
                std::span<const std::size_t> rows, std::vector<bool>* cold = nullptr);

// Predicted cumulative counts (P × N) for years T+1..T+N.
Tensor forward_predictions(const Model& model, const PipelineContext& ctx, std::span<const std::size_t> rows,
                           std::size_t N, std::vector<bool>* cold = nullptr);

std::vector<double> horizon_times(std::size_t N);

}  // namespace ctpir
