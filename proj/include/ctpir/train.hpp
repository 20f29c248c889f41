#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctpir/model.hpp"
#include "ctpir/series.hpp"
#include "ctpir/tkg.hpp"

namespace ctpir {

// The cutoff year T implied by hp.embed_years, checked against the horizon.
int cutoff_year(const TemporalKG& tkg, const HyperParams& hp);

// Trains on a seeded split of `targets`; every series must start at the
// cutoff year and cover hp.horizon years.
Model train(const TemporalKG& tkg, const std::map<std::string, CitationSeries>& targets, const HyperParams& hp);

std::map<std::string, CitationSeries> predict(const Model& model, const TemporalKG& tkg,
                                              std::span<const std::string> ids, int T, std::size_t N);

enum class Subtask { mix, newborn, grown };

Subtask subtask_from_string(const std::string& s);
std::string to_string(Subtask s);

// newborn keeps count < threshold, grown keeps count > threshold.
struct SubtaskSpec {
  Subtask name = Subtask::mix;
  double threshold = 0.0;

  bool selects(double count_at_T) const;
};

struct DatasetProfile {
  double newborn_threshold = 5.0;
  double grown_threshold = 12.0;

  static DatasetProfile aipatent() { return {5.0, 12.0}; }
  static DatasetProfile aps() { return {2.0, 30.0}; }
  static DatasetProfile named(const std::string& name);
  SubtaskSpec spec(Subtask s) const;
};

struct EvalResult {
  std::optional<double> male;
  std::optional<double> rmsle;
  std::size_t n_selected = 0;
};

nlohmann::json to_json(const EvalResult& r);

// Publications whose citation count at year T passes the filter.
std::vector<std::string> select_subtask(const TemporalKG& tkg, std::span<const std::string> ids,
                                        const SubtaskSpec& spec, int T);

EvalResult evaluate(const Model& model, const TemporalKG& tkg, std::span<const std::string> ids,
                    const SubtaskSpec& spec, int T, std::size_t N);

// Element k: metrics over year T+k+1 only.
std::vector<EvalResult> time_distance_eval(const Model& model, const TemporalKG& tkg,
                                           std::span<const std::string> ids, int T, std::size_t N_max);

// Publications that exist at year T.
std::vector<std::string> publications_at(const TemporalKG& tkg, int T);

}  // namespace ctpir
