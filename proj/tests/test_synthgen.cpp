#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "ctpir/synthgen.hpp"
#include "ctpir/tkg.hpp"

using namespace ctpir;

namespace {

SynthConfig small_config(std::uint64_t seed) {
  SynthConfig c;
  c.num_publications = 80;
  c.years = 6;
  c.embedding_dim = 4;
  c.seed = seed;
  return c;
}

// Brute-force citation count: scan every edge of the snapshot.
std::size_t scan_citations(const Snapshot& s, const std::string& id) {
  std::size_t n = 0;
  for (const auto& e : s.edges) n += e.rel == "citedBy" && e.src == id;
  return n;
}

}  // namespace

TEST_CASE("two years, four publications") {
  SynthConfig c;
  c.num_publications = 4;
  c.years = 2;
  c.embedding_dim = 3;
  const auto g = generate(c);
  REQUIRE(g.snapshots.size() == 2);
  CHECK(validate(g).ok());
  for (const auto& e : g.snapshots[0].entities) CHECK(g.snapshots[1].find(e.id) != nullptr);
  for (const auto& e : g.snapshots[0].edges) {
    CHECK(std::find(g.snapshots[1].edges.begin(), g.snapshots[1].edges.end(), e) != g.snapshots[1].edges.end());
  }
}

TEST_CASE("schema and validation across seeds") {
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const auto g = generate(small_config(seed));
    CHECK(validate(g).ok());
    CHECK(g.relations == std::vector<std::string>{"citedBy", "appliedBy", "belongTo", "relatedTo"});
    std::size_t pubs = 0;
    for (const auto& e : g.snapshots.back().entities) pubs += e.kind == EntityKind::publication;
    CHECK(pubs == 80);
  }
  SynthConfig c = small_config(1);
  c.attribute_classes = {"inventor"};
  CHECK(generate(c).relations == std::vector<std::string>{"citedBy", "has_inventor"});
}

TEST_CASE("config validation") {
  SynthConfig c;
  c.years = 1;
  CHECK_THROWS_AS(generate(c), ConfigError);
  c = SynthConfig{};
  c.num_publications = 0;
  CHECK_THROWS_AS(generate(c), ConfigError);
  CHECK_THROWS_AS(synth_config_from_json({{"years", "ten"}}), ConfigError);
  const auto back = synth_config_from_json(to_json(small_config(9)));
  CHECK(back.seed == 9);
  CHECK(back.num_publications == 80);
}

TEST_CASE("same seed gives byte-identical output") {
  const auto a = generate(small_config(5));
  const auto b = generate(small_config(5));
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    CHECK(snapshot_to_json(a.snapshots[i], a.relations).dump() == snapshot_to_json(b.snapshots[i], b.relations).dump());
  }
  CHECK_FALSE(generate(small_config(6)) == a);
}

TEST_CASE("exponent zero samples citation targets uniformly") {
  // Without fitness or aging every weight is 1 regardless of citations.
  for (std::size_t c : {0, 1, 7, 300}) CHECK(attachment_weight(c, 0.0, 0.8, 0.0, 4, 0.0) == 1.0);

  const std::size_t bins = 50, draws = 10000;
  std::vector<double> w(bins);
  for (std::size_t i = 0; i < bins; ++i) w[i] = attachment_weight(i * 3, 0.0, 0.0, 0.0, 0, 0.0);
  Rng rng(2024);
  std::vector<double> counts(bins, 0.0);
  for (std::size_t k = 0; k < draws; ++k) counts[sample_weighted(w, rng)] += 1.0;
  const double expected = static_cast<double>(draws) / static_cast<double>(bins);
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 0.999 quantile of chi-square with 49 degrees of freedom.
  CHECK(chi2 < 85.35);
}

TEST_CASE("preferential attachment produces a heavy tail") {
  for (std::uint64_t seed : {1, 2, 3}) {
    SynthConfig c;
    c.num_publications = 2000;
    c.years = 10;
    c.embedding_dim = 2;
    c.pref_attachment_exponent = 1.0;
    c.seed = seed;
    const auto g = generate(c);
    const auto& last = g.snapshots.back();
    std::map<std::string, double> cites;
    for (const auto& e : last.entities) {
      if (e.kind == EntityKind::publication) cites[e.id] = 0.0;
    }
    for (const auto& e : last.edges) {
      if (e.rel == "citedBy") cites[e.src] += 1.0;
    }
    std::vector<double> v;
    for (const auto& [id, n] : cites) v.push_back(n);
    std::sort(v.rbegin(), v.rend());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    const std::size_t top = v.size() / 100;
    const double top_mean = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(top), 0.0) /
                            static_cast<double>(top);
    CHECK(top_mean >= 10.0 * mean);
  }
}

TEST_CASE("sample_weighted contract") {
  Rng rng(1);
  const std::vector<double> zero(3, 0.0);
  CHECK_THROWS_AS(sample_weighted(zero, rng), ContractError);
  const std::vector<double> one_hot{0.0, 0.0, 2.0};
  for (int i = 0; i < 20; ++i) CHECK(sample_weighted(one_hot, rng) == 2);
}

TEST_CASE("ground truth") {
  SUBCASE("hand-built steps") {
    TemporalKG g;
    g.relations = {"citedBy"};
    g.embedding_dim = 1;
    for (int y = 0; y < 4; ++y) {
      Snapshot s;
      s.year = 2000 + y;
      s.entities = {{"A", EntityKind::publication, std::nullopt}, {"B", EntityKind::publication, std::nullopt}};
      if (y >= 2) s.edges.push_back({"A", "citedBy", "B", 0});
      s.features = {{"A", {0.0}}, {"B", {0.0}}};
      g.snapshots.push_back(s);
    }
    CHECK(ground_truth(g, "B", 2000, 3).values == std::vector<double>{0, 0, 0});
    CHECK(ground_truth(g, "A", 2000, 3).values == std::vector<double>{0, 1, 1});
    CHECK(ground_truth(g, "A", 2000, 3).start_year == 2000);
    CHECK_THROWS_AS(ground_truth(g, "A", 2001, 3), RangeError);
    CHECK_THROWS_AS(ground_truth(g, "Z", 2000, 1), LookupError);
  }
  SUBCASE("edge-scan oracle on a random graph") {
    const auto g = generate(small_config(17));
    const int T = g.snapshots[2].year;
    for (const auto& e : g.snapshots[2].entities) {
      if (e.kind != EntityKind::publication) continue;
      const auto s = ground_truth(g, e.id, T, 3);
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(s.values[k] == static_cast<double>(scan_citations(g.snapshots[3 + k], e.id)));
        if (k > 0) CHECK(s.values[k] >= s.values[k - 1]);
      }
    }
  }
}
