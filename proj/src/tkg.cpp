#include "ctpir/tkg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ctpir/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ctpir {

const EntityRef* Snapshot::find(const std::string& id) const {
  for (const auto& e : entities) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

const Snapshot& TemporalKG::at_year(int year) const { return snapshots[index_of_year(year)]; }

std::size_t TemporalKG::index_of_year(int year) const {
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (snapshots[i].year == year) return i;
  }
  throw LookupError("no snapshot for year " + std::to_string(year));
}

bool TemporalKG::has_relation(const std::string& rel) const {
  return std::find(relations.begin(), relations.end(), rel) != relations.end();
}

std::size_t ValidationReport::count(const std::string& rule) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [&](const Violation& v) { return v.rule == rule; }));
}

std::string ValidationReport::summary(std::size_t max_items) const {
  std::ostringstream os;
  os << violations.size() << " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < max_items; ++i) {
    const auto& v = violations[i];
    os << "\n  [" << v.rule << "] " << v.location << ": " << v.message;
  }
  if (violations.size() > max_items) os << "\n  ...";
  return os.str();
}

// ---- validation -----------------------------------------------------------

namespace {

std::string edge_str(const Edge& e) {
  return e.src + " -" + e.rel + "-> " + e.dst + " @" + std::to_string(e.pos);
}

void validate_snapshot(const TemporalKG& tkg, const Snapshot& snap, ValidationReport& report) {
  const std::string where = "year " + std::to_string(snap.year);
  auto add = [&](std::string rule, std::string loc, std::string msg) {
    report.violations.push_back({std::move(rule), where + ", " + loc, std::move(msg)});
  };

  std::unordered_set<std::string> ids;
  for (const auto& e : snap.entities) {
    if (!ids.insert(e.id).second) add("unique_id", "entity " + e.id, "duplicated entity id");
    if (e.kind == EntityKind::attribute && (!e.attribute_class || e.attribute_class->empty())) {
      add("attribute_class", "entity " + e.id, "attribute entity without attribute_class");
    }
  }

  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> positions;
  for (const auto& e : snap.edges) {
    if (!ids.count(e.src)) add("edge_endpoint", "edge " + edge_str(e), "unknown source " + e.src);
    if (!ids.count(e.dst)) add("edge_endpoint", "edge " + edge_str(e), "unknown target " + e.dst);
    if (!tkg.has_relation(e.rel)) add("relation_declared", "edge " + edge_str(e), "undeclared relation " + e.rel);
    positions[{e.src, e.rel}].push_back(e.pos);
  }
  for (auto& [key, pos] : positions) {
    std::sort(pos.begin(), pos.end());
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (pos[i] != i) {
        add("ordinal_positions", "source " + key.first + ", relation " + key.second,
            "positions are not 0.." + std::to_string(pos.size() - 1) + " without gaps");
        break;
      }
    }
  }

  for (const auto& [id, vec] : snap.features) {
    if (!ids.count(id)) add("feature_entity", "features " + id, "feature vector for unknown entity");
    if (vec.size() != tkg.embedding_dim) {
      add("feature_dim", "features " + id,
          "dimension " + std::to_string(vec.size()) + " != embedding_dim " + std::to_string(tkg.embedding_dim));
    }
    if (!std::all_of(vec.begin(), vec.end(), [](double v) { return std::isfinite(v); })) {
      add("feature_finite", "features " + id, "non-finite feature value");
    }
  }
}

}  // namespace

ValidationReport validate(const TemporalKG& tkg) {
  ValidationReport report;
  if (tkg.embedding_dim == 0) report.violations.push_back({"embedding_dim", "graph", "embedding_dim must be positive"});
  {
    std::set<std::string> seen;
    for (const auto& r : tkg.relations) {
      if (!seen.insert(r).second) report.violations.push_back({"relation_declared", "graph", "relation declared twice: " + r});
    }
  }
  for (const auto& snap : tkg.snapshots) validate_snapshot(tkg, snap, report);

  std::unordered_map<std::string, const EntityRef*> first_seen;
  for (std::size_t i = 0; i < tkg.snapshots.size(); ++i) {
    const auto& snap = tkg.snapshots[i];
    for (const auto& e : snap.entities) {
      auto [it, inserted] = first_seen.emplace(e.id, &e);
      if (!inserted && !(*it->second == e)) {
        report.violations.push_back({"kind_consistency", "year " + std::to_string(snap.year) + ", entity " + e.id,
                                     "entity kind/class differs from earlier snapshot"});
      }
    }
    if (i == 0) continue;
    const auto& prev = tkg.snapshots[i - 1];
    const std::string where = "year " + std::to_string(snap.year);
    if (snap.year != prev.year + 1) {
      report.violations.push_back({"years_consecutive", where,
                                   "follows year " + std::to_string(prev.year) + "; years must increase by one"});
    }
    std::unordered_set<std::string> ids;
    for (const auto& e : snap.entities) ids.insert(e.id);
    for (const auto& e : prev.entities) {
      if (!ids.count(e.id)) {
        report.violations.push_back({"cumulative_entities", where + ", entity " + e.id,
                                     "entity present in year " + std::to_string(prev.year) + " is missing"});
      }
    }
    std::set<Edge> edges(snap.edges.begin(), snap.edges.end());
    for (const auto& e : prev.edges) {
      if (!edges.count(e)) {
        report.violations.push_back({"cumulative_edges", where + ", edge " + edge_str(e),
                                     "edge present in year " + std::to_string(prev.year) + " is missing"});
      }
    }
  }
  return report;
}

// ---- serialization --------------------------------------------------------

std::string snapshot_file_name(int year) { return "snapshot_" + std::to_string(year) + ".json"; }

json snapshot_to_json(const Snapshot& snap, const std::vector<std::string>& relations) {
  json j;
  j["year"] = snap.year;
  j["relations"] = relations;
  json ents = json::array();
  for (const auto& e : snap.entities) {
    json je;
    je["id"] = e.id;
    je["kind"] = e.kind == EntityKind::publication ? "publication" : "attribute";
    je["attribute_class"] = e.attribute_class ? json(*e.attribute_class) : json(nullptr);
    ents.push_back(std::move(je));
  }
  j["entities"] = std::move(ents);
  json edges = json::array();
  for (const auto& e : snap.edges) edges.push_back({{"src", e.src}, {"rel", e.rel}, {"dst", e.dst}, {"pos", e.pos}});
  j["edges"] = std::move(edges);
  json feats = json::object();
  for (const auto& [id, v] : snap.features) feats[id] = v;
  j["features"] = std::move(feats);
  return j;
}

Snapshot snapshot_from_json(const json& j, const std::string& source, std::vector<std::string>* relations_out) {
  auto fail = [&](const std::string& path, const std::string& msg) -> ParseError {
    return ParseError(source + ": " + path + ": " + msg);
  };
  auto need = [&](const json& obj, const char* key, const std::string& path) -> const json& {
    if (!obj.is_object() || !obj.contains(key)) throw fail(path, std::string("missing key '") + key + "'");
    return obj.at(key);
  };
  try {
    Snapshot snap;
    const auto& year = need(j, "year", "/");
    if (!year.is_number_integer()) throw fail("/year", "expected an integer");
    snap.year = year.get<int>();

    const auto& rels = need(j, "relations", "/");
    if (!rels.is_array()) throw fail("/relations", "expected an array of strings");
    if (relations_out) *relations_out = rels.get<std::vector<std::string>>();

    const auto& ents = need(j, "entities", "/");
    if (!ents.is_array()) throw fail("/entities", "expected an array");
    for (std::size_t i = 0; i < ents.size(); ++i) {
      const std::string path = "/entities/" + std::to_string(i);
      const auto& je = ents[i];
      EntityRef e;
      e.id = need(je, "id", path).get<std::string>();
      const auto kind = need(je, "kind", path).get<std::string>();
      if (kind == "publication") {
        e.kind = EntityKind::publication;
      } else if (kind == "attribute") {
        e.kind = EntityKind::attribute;
      } else {
        throw fail(path + "/kind", "unknown kind '" + kind + "'");
      }
      if (je.contains("attribute_class") && !je.at("attribute_class").is_null()) {
        e.attribute_class = je.at("attribute_class").get<std::string>();
      }
      snap.entities.push_back(std::move(e));
    }

    const auto& edges = need(j, "edges", "/");
    if (!edges.is_array()) throw fail("/edges", "expected an array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string path = "/edges/" + std::to_string(i);
      const auto& je = edges[i];
      Edge e;
      e.src = need(je, "src", path).get<std::string>();
      e.rel = need(je, "rel", path).get<std::string>();
      e.dst = need(je, "dst", path).get<std::string>();
      const auto& pos = need(je, "pos", path);
      if (!pos.is_number_unsigned() && !(pos.is_number_integer() && pos.get<long long>() >= 0)) {
        throw fail(path + "/pos", "expected a non-negative integer");
      }
      e.pos = pos.get<std::size_t>();
      snap.edges.push_back(std::move(e));
    }

    if (j.contains("features")) {
      const auto& feats = j.at("features");
      if (!feats.is_object()) throw fail("/features", "expected an object");
      for (auto it = feats.begin(); it != feats.end(); ++it) {
        snap.features[it.key()] = it.value().get<std::vector<double>>();
      }
    }
    return snap;
  } catch (const json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
}

std::vector<double> default_feature(const std::string& id, std::size_t dim, std::uint64_t seed) {
  Rng rng(mix_seed(seed, fnv1a(id)));
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.uniform(-0.1, 0.1);
  return v;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError(p.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

TemporalKG load_snapshots(const fs::path& dir, const LoadOptions& opts) {
  if (!fs::is_directory(dir)) throw ParseError(dir.string() + ": not a directory");
  static const std::regex name_re(R"(snapshot_(-?\d+)\.json)");
  std::vector<std::pair<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, name_re)) {
      files.emplace_back(std::stoi(m[1].str()), entry.path());
    }
  }
  if (files.empty()) throw ParseError(dir.string() + ": no snapshot_<year>.json files");
  std::sort(files.begin(), files.end());

  TemporalKG tkg;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& [year, path] = files[i];
    const std::string text = read_file(path);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_of(text, e.byte)) + ": " + e.what());
    }
    std::vector<std::string> rels;
    Snapshot snap = snapshot_from_json(j, path.string(), &rels);
    if (snap.year != year) {
      throw ParseError(path.string() + ": year " + std::to_string(snap.year) + " does not match file name");
    }
    if (i == 0) {
      tkg.relations = rels;
    } else if (rels != tkg.relations) {
      throw ValidationError(path.string() + ": relation list differs from " + files[0].second.string());
    }
    tkg.snapshots.push_back(std::move(snap));
  }

  tkg.embedding_dim = opts.embedding_dim;
  if (tkg.embedding_dim == 0) {
    tkg.embedding_dim = 128;
    for (const auto& s : tkg.snapshots) {
      if (!s.features.empty()) {
        tkg.embedding_dim = s.features.begin()->second.size();
        break;
      }
    }
  }
  for (auto& snap : tkg.snapshots) {
    for (const auto& e : snap.entities) {
      if (!snap.features.count(e.id)) snap.features[e.id] = default_feature(e.id, tkg.embedding_dim, opts.feature_seed);
    }
  }

  const auto report = validate(tkg);
  if (!report.ok()) throw ValidationError(dir.string() + ": " + report.summary());
  return tkg;
}

void save_snapshots(const TemporalKG& tkg, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& snap : tkg.snapshots) {
    const auto path = dir / snapshot_file_name(snap.year);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path.string() + ": cannot write file");
    out << snapshot_to_json(snap, tkg.relations).dump() << '\n';
  }
}

// ---- statistics & queries -------------------------------------------------

double average_degree(std::size_t num_entities, std::size_t num_edges) {
  if (num_entities == 0) return 0.0;
  return 2.0 * static_cast<double>(num_edges) / static_cast<double>(num_entities);
}

GraphStats stats(const TemporalKG& tkg, const std::string& relation, int year) {
  if (!tkg.has_relation(relation)) throw LookupError("unknown relation '" + relation + "'");
  const auto& snap = tkg.at_year(year);
  GraphStats s;
  s.relation = relation;
  std::unordered_set<std::string> incident;
  for (const auto& e : snap.edges) {
    if (e.rel != relation) continue;
    ++s.num_edges;
    incident.insert(e.src);
    incident.insert(e.dst);
  }
  s.num_entities = incident.size();
  s.avg_degree = average_degree(s.num_entities, s.num_edges);
  return s;
}

json to_json(const GraphStats& s) {
  return {{"relation", s.relation},
          {"num_entities", s.num_entities},
          {"num_edges", s.num_edges},
          {"avg_degree", s.avg_degree}};
}

std::vector<EntityRef> neighbors(const Snapshot& snap, const std::string& node, const std::string& relation) {
  if (!snap.find(node)) throw LookupError("unknown node '" + node + "' in year " + std::to_string(snap.year));
  std::vector<const Edge*> out;
  for (const auto& e : snap.edges) {
    if (e.src == node && e.rel == relation) out.push_back(&e);
  }
  std::stable_sort(out.begin(), out.end(), [](const Edge* a, const Edge* b) { return a->pos < b->pos; });
  std::vector<EntityRef> result;
  result.reserve(out.size());
  for (const auto* e : out) {
    const auto* ent = snap.find(e->dst);
    if (!ent) throw LookupError("edge target '" + e->dst + "' missing from year " + std::to_string(snap.year));
    result.push_back(*ent);
  }
  return result;
}

std::size_t citation_count(const Snapshot& snap, const std::string& publication) {
  return static_cast<std::size_t>(std::count_if(snap.edges.begin(), snap.edges.end(), [&](const Edge& e) {
    return e.rel == kCitedBy && e.src == publication;
  }));
}

}  // namespace ctpir
