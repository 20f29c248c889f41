#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctpir/rng.hpp"
#include "ctpir/series.hpp"
#include "ctpir/tkg.hpp"

namespace ctpir {

struct SynthConfig {
  std::size_t num_publications = 200;
  std::size_t num_attributes_per_class = 20;
  std::vector<std::string> attribute_classes{"applicant", "classification", "keyword"};
  std::size_t years = 10;
  double pref_attachment_exponent = 1.0;
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 128;

  int start_year = 2000;
  // New publications per year grow by this factor.
  double growth_rate = 0.2;
  double mean_references = 3.0;
  // Each publication links 1..max attributes of every class.
  std::size_t max_attributes_per_class = 3;
  // Citation weight multiplier exp(fitness_strength * fitness(p, year)), where
  // fitness is the position-weighted mean quality of p's attributes.
  double fitness_strength = 1.0;
  // Citation weight multiplier exp(-aging_rate * age).
  double aging_rate = 0.3;
  // Per-year drift of attribute quality ~ N(0, quality_drift^2).
  double quality_drift = 0.3;
  // Amplitude of attribute quality in attribute feature vectors.
  double feature_signal = 0.05;

  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& c);

// Relation linking a publication to attributes of `attribute_class`.
std::string relation_for_class(const std::string& attribute_class);

// Unnormalized probability that an existing publication receives the next
// citation.
double attachment_weight(std::size_t citations, double exponent, double fitness, double fitness_strength,
                         int age, double aging_rate);

// Draws an index with probability proportional to `weights`.
std::size_t sample_weighted(std::span<const double> weights, Rng& rng);

TemporalKG generate(const SynthConfig& config);

// Citation counts of `publication` in years T+1..T+N.
CitationSeries ground_truth(const TemporalKG& tkg, const std::string& publication, int T, std::size_t N);

// Batched ground_truth over many publications.
std::map<std::string, CitationSeries> ground_truth_all(const TemporalKG& tkg, std::span<const std::string> ids,
                                                       int T, std::size_t N);

}  // namespace ctpir
