#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctpir/errors.hpp"

namespace ctpir {

inline constexpr const char* kCitedBy = "citedBy";

enum class EntityKind { publication, attribute };

struct EntityRef {
  std::string id;
  EntityKind kind = EntityKind::publication;
  std::optional<std::string> attribute_class;

  bool operator==(const EntityRef&) const = default;
};

// (src, rel, dst) with the edge's ordinal position among the src's edges of
// the same relation. Every relation reads subject-first: (p, citedBy, q) records
// that p is cited by q, so p's citers are its citedBy neighbors.
struct Edge {
  std::string src;
  std::string rel;
  std::string dst;
  std::size_t pos = 0;

  auto operator<=>(const Edge&) const = default;
};

struct Snapshot {
  int year = 0;
  std::vector<EntityRef> entities;
  std::vector<Edge> edges;
  std::map<std::string, std::vector<double>> features;

  bool operator==(const Snapshot&) const = default;
  const EntityRef* find(const std::string& id) const;
};

// Yearly snapshots, cumulative: each year contains everything of the last.
struct TemporalKG {
  std::vector<std::string> relations;
  std::vector<Snapshot> snapshots;
  std::size_t embedding_dim = 0;

  bool operator==(const TemporalKG&) const = default;
  const Snapshot& at_year(int year) const;
  std::size_t index_of_year(int year) const;
  bool has_relation(const std::string& rel) const;
};

struct Violation {
  std::string rule;
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::size_t count(const std::string& rule) const;
  std::string summary(std::size_t max_items = 20) const;
};

ValidationReport validate(const TemporalKG& tkg);

struct LoadOptions {
  // 0 = infer from the stored features (falls back to 128 if none are stored).
  std::size_t embedding_dim = 0;
  std::uint64_t feature_seed = 0;
};

// Reads every snapshot_<year>.json in `dir`. Entities lacking a feature
// vector receive uniform(-0.1, 0.1) values seeded by (feature_seed, id).
TemporalKG load_snapshots(const std::filesystem::path& dir, const LoadOptions& opts = {});
void save_snapshots(const TemporalKG& tkg, const std::filesystem::path& dir);

nlohmann::json snapshot_to_json(const Snapshot& snap, const std::vector<std::string>& relations);
// `source` names the origin in error messages.
Snapshot snapshot_from_json(const nlohmann::json& j, const std::string& source,
                            std::vector<std::string>* relations_out = nullptr);
std::string snapshot_file_name(int year);

std::vector<double> default_feature(const std::string& id, std::size_t dim, std::uint64_t seed);

struct GraphStats {
  std::string relation;
  std::size_t num_entities = 0;
  std::size_t num_edges = 0;
  double avg_degree = 0.0;
};

// 2|R|/|E|; 0 for an empty graph.
double average_degree(std::size_t num_entities, std::size_t num_edges);
GraphStats stats(const TemporalKG& tkg, const std::string& relation, int year);
nlohmann::json to_json(const GraphStats& s);

// Targets of (node, relation, ·) edges ordered by stored position.
std::vector<EntityRef> neighbors(const Snapshot& snap, const std::string& node,
                                 const std::string& relation);

// Number of publications citing `publication` in `snap`.
std::size_t citation_count(const Snapshot& snap, const std::string& publication);

}  // namespace ctpir
