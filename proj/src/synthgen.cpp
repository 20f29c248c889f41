#include "ctpir/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "ctpir/config_json.hpp"

using nlohmann::json;

namespace ctpir {

void SynthConfig::validate() const {
  if (num_publications == 0) throw ConfigError("num_publications must be positive");
  if (num_attributes_per_class == 0) throw ConfigError("num_attributes_per_class must be positive");
  if (attribute_classes.empty()) throw ConfigError("attribute_classes must not be empty");
  if (years < 2) throw ConfigError("years must be at least 2");
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
  if (max_attributes_per_class == 0) throw ConfigError("max_attributes_per_class must be positive");
  if (!(mean_references >= 1.0)) throw ConfigError("mean_references must be >= 1");
  if (growth_rate <= -1.0) throw ConfigError("growth_rate must be > -1");
  if (aging_rate < 0.0) throw ConfigError("aging_rate must be non-negative");
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  auto get = [&](const char* key, auto& field) { detail::read_field(j, key, field); };
  try {
    detail::reject_unknown_keys(j, to_json(SynthConfig{}), "synth config");
    get("num_publications", c.num_publications);
    get("num_attributes_per_class", c.num_attributes_per_class);
    get("attribute_classes", c.attribute_classes);
    get("years", c.years);
    get("pref_attachment_exponent", c.pref_attachment_exponent);
    get("seed", c.seed);
    get("embedding_dim", c.embedding_dim);
    get("start_year", c.start_year);
    get("growth_rate", c.growth_rate);
    get("mean_references", c.mean_references);
    get("max_attributes_per_class", c.max_attributes_per_class);
    get("fitness_strength", c.fitness_strength);
    get("aging_rate", c.aging_rate);
    get("quality_drift", c.quality_drift);
    get("feature_signal", c.feature_signal);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const SynthConfig& c) {
  return {{"num_publications", c.num_publications},
          {"num_attributes_per_class", c.num_attributes_per_class},
          {"attribute_classes", c.attribute_classes},
          {"years", c.years},
          {"pref_attachment_exponent", c.pref_attachment_exponent},
          {"seed", c.seed},
          {"embedding_dim", c.embedding_dim},
          {"start_year", c.start_year},
          {"growth_rate", c.growth_rate},
          {"mean_references", c.mean_references},
          {"max_attributes_per_class", c.max_attributes_per_class},
          {"fitness_strength", c.fitness_strength},
          {"aging_rate", c.aging_rate},
          {"quality_drift", c.quality_drift},
          {"feature_signal", c.feature_signal}};
}

std::string relation_for_class(const std::string& attribute_class) {
  if (attribute_class == "applicant") return "appliedBy";
  if (attribute_class == "classification") return "belongTo";
  if (attribute_class == "keyword") return "relatedTo";
  return "has_" + attribute_class;
}

double attachment_weight(std::size_t citations, double exponent, double fitness, double fitness_strength, int age,
                         double aging_rate) {
  return std::pow(static_cast<double>(citations) + 1.0, exponent) * std::exp(fitness_strength * fitness) *
         std::exp(-aging_rate * static_cast<double>(age));
}

std::size_t sample_weighted(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw ContractError("sample_weighted: weights must have a positive sum");
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding can leave u just above the last bucket.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

namespace {

struct Attribute {
  std::string id;
  std::size_t cls = 0;
  double quality0 = 0.0;
  double drift = 0.0;
  int first_year = -1;
  std::vector<double> base;

  double quality(int year_index) const { return quality0 + drift * year_index; }
};

struct Publication {
  std::string id;
  int created = 0;
  std::vector<double> base;
  // Attribute indices per class, in position order.
  std::vector<std::vector<std::size_t>> attrs;
  std::size_t citations = 0;
};

std::vector<std::size_t> publications_per_year(const SynthConfig& c) {
  std::vector<double> w(c.years);
  for (std::size_t y = 0; y < c.years; ++y) w[y] = std::pow(1.0 + c.growth_rate, static_cast<double>(y));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> n(c.years);
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t y = 0; y < c.years; ++y) {
    const double exact = static_cast<double>(c.num_publications) * w[y] / total;
    n[y] = static_cast<std::size_t>(std::floor(exact));
    assigned += n[y];
    rem.emplace_back(-(exact - std::floor(exact)), y);
  }
  std::sort(rem.begin(), rem.end());
  for (std::size_t k = 0; assigned < c.num_publications; ++k, ++assigned) ++n[rem[k % rem.size()].second];
  if (n[0] == 0) {
    // The first year always holds a publication so every snapshot is non-empty.
    auto donor = std::max_element(n.begin(), n.end());
    --*donor;
    ++n[0];
  }
  return n;
}

std::string pad_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

}  // namespace

TemporalKG generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t n_classes = config.attribute_classes.size();
  const std::size_t dim = config.embedding_dim;

  TemporalKG tkg;
  tkg.embedding_dim = dim;
  tkg.relations.push_back(kCitedBy);
  std::vector<std::string> class_rel;
  for (const auto& c : config.attribute_classes) {
    class_rel.push_back(relation_for_class(c));
    tkg.relations.push_back(class_rel.back());
  }

  auto random_vector = [&](std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.uniform(-0.1, 0.1);
    return v;
  };

  // Attribute pools with a skewed popularity so some attributes are shared widely.
  std::vector<std::vector<Attribute>> pools(n_classes);
  std::vector<std::vector<double>> popularity(n_classes);
  std::vector<std::vector<double>> direction(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    direction[c].resize(dim);
    for (auto& x : direction[c]) x = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < config.num_attributes_per_class; ++k) {
      Attribute a;
      a.id = config.attribute_classes[c] + "_" + pad_id("", k);
      a.cls = c;
      a.quality0 = rng.normal();
      a.drift = config.quality_drift * rng.normal();
      a.base = random_vector(dim);
      pools[c].push_back(std::move(a));
      popularity[c].push_back(std::pow(static_cast<double>(k) + 1.0, -0.7));
    }
  }

  auto fitness = [&](const Publication& p, int year_index) {
    double acc = 0.0, norm = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t i = 0; i < p.attrs[c].size(); ++i) {
        const double w = i == 0 ? 1.0 : 0.5;
        acc += w * pools[c][p.attrs[c][i]].quality(year_index);
        norm += w;
      }
    }
    return norm > 0.0 ? acc / norm : 0.0;
  };

  const auto per_year = publications_per_year(config);
  std::vector<Publication> pubs;
  std::vector<Edge> edges;
  // Entity ids in creation order, with the year index they appeared.
  std::vector<std::pair<EntityRef, int>> created;

  for (std::size_t y = 0; y < config.years; ++y) {
    const int yi = static_cast<int>(y);
    const std::size_t existing = pubs.size();
    for (std::size_t k = 0; k < per_year[y]; ++k) {
      Publication p;
      p.id = pad_id("P", pubs.size());
      p.created = yi;
      p.base = random_vector(dim);
      p.attrs.resize(n_classes);
      created.push_back({EntityRef{p.id, EntityKind::publication, std::nullopt}, yi});

      for (std::size_t c = 0; c < n_classes; ++c) {
        const std::size_t want =
            std::min(1 + rng.index(config.max_attributes_per_class), config.num_attributes_per_class);
        std::vector<double> w = popularity[c];
        for (std::size_t i = 0; i < want; ++i) {
          const std::size_t a = sample_weighted(w, rng);
          w[a] = 0.0;
          p.attrs[c].push_back(a);
          auto& attr = pools[c][a];
          if (attr.first_year < 0) {
            attr.first_year = yi;
            created.push_back({EntityRef{attr.id, EntityKind::attribute, config.attribute_classes[c]}, yi});
          }
          edges.push_back({p.id, class_rel[c], attr.id, i});
        }
      }

      if (existing > 0) {
        const auto span_refs = static_cast<std::size_t>(std::llround(2.0 * config.mean_references - 1.0));
        const std::size_t want = std::min(1 + rng.index(std::max<std::size_t>(span_refs, 1)), existing);
        std::vector<double> w(existing);
        for (std::size_t q = 0; q < existing; ++q) {
          const auto& target = pubs[q];
          w[q] = attachment_weight(target.citations, config.pref_attachment_exponent, fitness(target, yi),
                                   config.fitness_strength, yi - target.created, config.aging_rate);
        }
        for (std::size_t i = 0; i < want; ++i) {
          const std::size_t q = sample_weighted(w, rng);
          w[q] = 0.0;
          // (cited, citedBy, citing); positions follow citation arrival.
          edges.push_back({pubs[q].id, kCitedBy, p.id, pubs[q].citations});
          ++pubs[q].citations;
        }
      }
      pubs.push_back(std::move(p));
    }

    // Edges are appended in creation order, so a prefix of `edges` forms
    // this year's snapshot.
    Snapshot snap;
    snap.year = config.start_year + yi;
    for (const auto& [ref, when] : created) snap.entities.push_back(ref);
    snap.edges = edges;
    for (const auto& p : pubs) snap.features[p.id] = p.base;
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (const auto& a : pools[c]) {
        if (a.first_year < 0) continue;
        std::vector<double> f = a.base;
        const double q = a.quality(yi);
        for (std::size_t j = 0; j < dim; ++j) f[j] += config.feature_signal * q * direction[c][j];
        snap.features[a.id] = std::move(f);
      }
    }
    tkg.snapshots.push_back(std::move(snap));
  }
  return tkg;
}

CitationSeries ground_truth(const TemporalKG& tkg, const std::string& publication, int T, std::size_t N) {
  const std::string ids[] = {publication};
  return ground_truth_all(tkg, ids, T, N).at(publication);
}

std::map<std::string, CitationSeries> ground_truth_all(const TemporalKG& tkg, std::span<const std::string> ids,
                                                       int T, std::size_t N) {
  const auto& base = tkg.at_year(T);
  for (const auto& id : ids) {
    const auto* e = base.find(id);
    if (!e || e->kind != EntityKind::publication) {
      throw LookupError("publication '" + id + "' does not exist in year " + std::to_string(T));
    }
  }
  std::vector<const Snapshot*> future;
  for (std::size_t k = 1; k <= N; ++k) {
    const int year = T + static_cast<int>(k);
    const auto it = std::find_if(tkg.snapshots.begin(), tkg.snapshots.end(),
                                 [&](const Snapshot& s) { return s.year == year; });
    if (it == tkg.snapshots.end()) throw RangeError("no snapshot for year " + std::to_string(year));
    future.push_back(&*it);
  }
  std::map<std::string, CitationSeries> out;
  for (const auto& id : ids) out[id] = CitationSeries{T, std::vector<double>(N, 0.0)};
  for (std::size_t k = 0; k < N; ++k) {
    std::unordered_map<std::string, std::size_t> cited;
    for (const auto& e : future[k]->edges) {
      if (e.rel == kCitedBy) ++cited[e.src];
    }
    for (auto& [id, series] : out) {
      const auto it = cited.find(id);
      series.values[k] = it == cited.end() ? 0.0 : static_cast<double>(it->second);
    }
  }
  return out;
}

}  // namespace ctpir
