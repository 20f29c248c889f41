// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "ctpir/gradsuite.hpp"
#include "ctpir/synthgen.hpp"
#include "ctpir/train.hpp"
#include "ctpir/trajectory.hpp"
#include "oracles.hpp"

using namespace ctpir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seeds[] = {1, 2, 3};
  const auto results = run_gradient_suite(seeds);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results) {
    if (r.error > worst) {
      worst = r.error;
      worst_name = r.name;
    }
  }
  return {worst < 1e-4 && secs < 120.0, std::to_string(results.size()) + " checks, max relative error " +
                                            fmt("%.2e", worst) + " (" + worst_name + "), " + fmt("%.1f", secs) + " s"};
}

RgcnWeights small_weights(const std::vector<std::string>& relations, std::uint64_t seed, bool normalize) {
  RgcnConfig cfg;
  cfg.layer_dims = {3, 5, 4};
  cfg.normalize = normalize;
  Rng rng(seed);
  return RgcnWeights::init(relations, cfg, rng);
}

Outcome degeneracy() {
  std::size_t mismatches = 0, compared = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto g = oracle::random_graph(seed, 3);
    const auto index = GraphIndex::build(g);
    auto w = small_weights(g.relations, seed, true);
    auto static_stack = [&](std::size_t s) {
      Tensor h = index->features(s);
      for (std::size_t l = 0; l < w.layers.size(); ++l) h = rgcn_diff_layer(index->graph(s), nullptr, h, nullptr, w, l);
      return h;
    };
    const auto full = embed_sequence(index, w);
    const auto first = static_stack(0);
    for (std::size_t i = 0; i < first.size(); ++i, ++compared) mismatches += full.snapshot(0)[i] != first[i];
    for (auto& lw : w.layers) {
      for (auto& v : lw.temporal.mutable_data()) v = 0.0;
    }
    const auto frozen = embed_sequence(index, w);
    for (std::size_t s = 0; s < index->num_snapshots(); ++s) {
      const auto h = static_stack(s);
      for (std::size_t i = 0; i < h.size(); ++i, ++compared) mismatches += frozen.snapshot(s)[i] != h[i];
    }
  }
  return {mismatches == 0, std::to_string(compared) + " values compared bitwise, " + std::to_string(mismatches) +
                               " differ"};
}

Outcome layer_oracle() {
  double worst = 0.0;
  std::size_t graphs = 0;
  for (bool normalize : {true, false}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed, ++graphs) {
      const auto g = oracle::random_graph(seed, 3);
      const auto w = small_weights(g.relations, seed + 50, normalize);
      const auto table = embed_sequence(g, w);
      const auto ref = oracle::sequence_oracle(g, w);
      for (std::size_t s = 0; s < ref.size(); ++s) {
        const auto got = oracle::to_mat(table.snapshot(s));
        for (std::size_t i = 0; i < got.size(); ++i)
          for (std::size_t j = 0; j < got[i].size(); ++j) worst = std::max(worst, std::abs(got[i][j] - ref[s][i][j]));
      }
    }
  }
  return {worst < 1e-12, std::to_string(graphs) + " graphs, both normalizations, max abs diff " + fmt("%.2e", worst)};
}

Outcome richards() {
  Rng rng(7);
  double mid = 0.0, sat = 0.0, logistic = 0.0;
  std::size_t decreasing = 0;
  for (int k = 0; k < 100; ++k) {
    const double th1 = rng.uniform(1, 100), th2 = rng.uniform(0.05, 3), th3 = rng.uniform(0.1, 8);
    const double xi = rng.uniform(0.01, 5);
    const TrajectoryParams one{th1, th2, th3, 1.0}, gen{th1, th2, th3, xi};
    mid = std::max(mid, std::abs(citation_count(one, th3) - th1 / 2));
    sat = std::max(sat, std::abs(citation_count(gen, th3 + 50 / th2) - th1) / th1);
    double prev = -1.0;
    for (int i = 0; i < 1000; ++i) {
      const double t = 20.0 * i / 999.0 - 5.0;
      const double c = citation_count(gen, t);
      decreasing += c < prev;
      prev = c;
      const double ref = th1 / (1.0 + std::exp(-th2 * (t - th3)));
      logistic = std::max(logistic, std::abs(citation_count(one, t) - ref));
    }
  }
  const bool ok = mid < 1e-12 && sat < 1e-6 && decreasing == 0 && logistic < 1e-12;
  return {ok, "midpoint " + fmt("%.1e", mid) + ", saturation " + fmt("%.1e", sat) + "*theta1, " +
                  std::to_string(decreasing) + " decreasing steps, logistic " + fmt("%.1e", logistic)};
}

Outcome loss_oracles() {
  Rng rng(21);
  auto random_counts = [&] {
    std::vector<CitationSeries> m(10, CitationSeries{2000, std::vector<double>(5)});
    for (auto& s : m)
      for (auto& v : s.values) v = std::floor(rng.uniform(0, 200));
    return m;
  };
  double worst = 0.0;
  std::size_t order_violations = 0;
  for (int k = 0; k < 100; ++k) {
    const auto p = random_counts(), o = random_counts();
    worst = std::max(worst, std::abs(male(p, o) - oracle::male(p, o)));
    worst = std::max(worst, std::abs(rmsle(p, o) - oracle::rmsle(p, o)));
    order_violations += rmsle(p, o) < male(p, o);
  }
  const auto same = random_counts();
  const bool zero = male(same, same) == 0.0 && rmsle(same, same) == 0.0;
  return {worst < 1e-12 && order_violations == 0 && zero,
          "max diff " + fmt("%.1e", worst) + ", rmsle<male in " + std::to_string(order_violations) +
              "/100, exact zero " + (zero ? "yes" : "no")};
}

Outcome table_arithmetic() {
  struct Row {
    const char* relation;
    double entities[7], relations[7], published[7];
  };
  const Row rows[] = {
      {"citedBy",
       {156684, 197290, 254438, 332312, 430199, 521963, 607809},
       {560958, 715101, 937972, 1211852, 1592095, 1993470, 2371361},
       {7.1603, 7.2462, 7.3729, 7.2934, 7.4016, 7.6383, 7.8030}},
      {"relatedTo",
       {346023, 419615, 521160, 654882, 830763, 1044713, 1245627},
       {2448072, 3155158, 4150369, 5469801, 7224994, 9322740, 11244536},
       {14.1498, 15.0382, 15.9273, 16.7046, 17.3936, 17.8474, 18.0543}},
      {"appliedBy",
       {476775, 559548, 672545, 820147, 1011069, 1245065, 1465285},
       {510239, 591512, 699531, 840231, 1024256, 1252572, 1469457},
       {2.1404, 2.1267, 2.1142, 2.0802, 2.0490, 2.0121, 2.0057}},
      {"belongTo",
       {309520, 378852, 475442, 603826, 772219, 980661, 1178524},
       {309451, 378781, 475371, 603754, 772147, 980589, 1178452},
       {1.9995, 1.9996, 1.9997, 1.9998, 1.9998, 1.9998, 2.0000}},
  };
  std::size_t matched = 0;
  std::string misses;
  for (const auto& r : rows) {
    for (int y = 0; y < 7; ++y) {
      const double d = average_degree(static_cast<std::size_t>(r.entities[y]), static_cast<std::size_t>(r.relations[y]));
      if (std::abs(d - r.published[y]) < 5e-4) {
        ++matched;
      } else {
        misses += std::string(misses.empty() ? "" : ", ") + r.relation + "-" + std::to_string(2015 + y) + " " +
                  fmt("%.4f", d) + " vs " + fmt("%.4f", r.published[y]);
      }
    }
  }
  return {matched == 28, std::to_string(matched) + "/28 cells within 5e-4" + (misses.empty() ? "" : "; off: " + misses)};
}

std::map<std::string, CitationSeries> all_targets(const TemporalKG& tkg, const HyperParams& hp) {
  const int T = cutoff_year(tkg, hp);
  return ground_truth_all(tkg, publications_at(tkg, T), T, hp.horizon);
}

SynthConfig synthetic(std::size_t publications, std::uint64_t seed) {
  SynthConfig c;
  c.num_publications = publications;
  c.years = 10;
  c.seed = seed;
  return c;
}

Outcome overfit() {
  const auto tkg = generate(synthetic(200, 1));
  HyperParams hp;
  hp.embed_years = 5;
  hp.horizon = 5;
  hp.epochs = 200;
  hp.optimizer = OptimizerKind::adam;
  hp.learning_rate = 0.002;
  hp.lr_schedule = LrSchedule::cosine;
  hp.batch_size = 8;
  const auto targets = all_targets(tkg, hp);
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    hp.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = train(tkg, targets, hp);
    const double secs = seconds_since(t0);
    const double bound = std::max(0.1, 0.1 * m.initial.male);
    const double final_male = m.history.back().male;
    ok = ok && final_male < bound && secs < 300.0;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": " +
              fmt("%.4f", m.initial.male) + " -> " + fmt("%.4f", final_male) + " (bound " + fmt("%.3f", bound) +
              ", " + fmt("%.0f", secs) + " s)";
  }
  return {ok, std::to_string(targets.size()) + " publications; " + detail};
}

Outcome generalization() {
  const auto tkg = generate(synthetic(2000, 1));
  HyperParams hp;
  const int T = cutoff_year(tkg, hp);
  const auto targets = all_targets(tkg, hp);
  std::size_t wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    double test_male[2];
    for (int variant = 0; variant < 2; ++variant) {
      hp.seed = seed;
      hp.ablation = variant == 0 ? Ablation::none : Ablation::no_influence;
      const auto m = train(tkg, targets, hp);
      test_male[variant] = *evaluate(m, tkg, m.test_ids, {Subtask::mix, 0.0}, T, hp.horizon).male;
    }
    wins += test_male[0] <= test_male[1];
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": full " +
              fmt("%.4f", test_male[0]) + " vs no_influence " + fmt("%.4f", test_male[1]);
  }
  return {wins >= 2, std::to_string(wins) + "/3 seeds; " + detail};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  auto c = synthetic(80, 4);
  c.embedding_dim = 16;
  const auto tkg = generate(c);
  HyperParams hp;
  hp.rgcn.layer_dims = {16, 8, 16};
  hp.lstm_hidden = 8;
  hp.influence_dim = 8;
  hp.epochs = 3;
  hp.batch_size = 16;
  hp.seed = 9;
  const int T = cutoff_year(tkg, hp);
  const auto targets = all_targets(tkg, hp);
  const auto dir = std::filesystem::temp_directory_path();
  std::string models[2], metrics[2];
  for (int run = 0; run < 2; ++run) {
    const auto m = train(tkg, targets, hp);
    const auto path = dir / ("ctpir_acceptance_model_" + std::to_string(run) + ".json");
    m.save(path);
    models[run] = slurp(path);
    std::filesystem::remove(path);
    metrics[run] = to_json(evaluate(m, tkg, m.test_ids, {Subtask::mix, 0.0}, T, hp.horizon)).dump();
  }
  const bool ok = models[0] == models[1] && metrics[0] == metrics[1];
  return {ok, "model files " + std::string(models[0] == models[1] ? "identical" : "differ") + " (" +
                  std::to_string(models[0].size()) + " bytes), metric JSON " +
                  (metrics[0] == metrics[1] ? "identical" : "differs")};
}

Outcome subtask_boundaries() {
  // Publications cited exactly 4, 5, 12 and 13 times at T.
  TemporalKG g;
  g.relations = {"citedBy"};
  g.embedding_dim = 1;
  Snapshot s;
  s.year = 2010;
  const std::pair<const char*, int> counts[] = {{"C4", 4}, {"C5", 5}, {"C12", 12}, {"C13", 13}};
  for (int i = 0; i < 13; ++i) s.entities.push_back({"Q" + std::to_string(i), EntityKind::publication, std::nullopt});
  for (const auto& [id, n] : counts) {
    s.entities.push_back({id, EntityKind::publication, std::nullopt});
    for (int i = 0; i < n; ++i) s.edges.push_back({id, "citedBy", "Q" + std::to_string(i), static_cast<std::size_t>(i)});
  }
  g.snapshots = {s};
  const std::vector<std::string> ids{"C4", "C5", "C12", "C13"};
  const auto profile = DatasetProfile::aipatent();
  const auto newborn = select_subtask(g, ids, profile.spec(Subtask::newborn), 2010);
  const auto grown = select_subtask(g, ids, profile.spec(Subtask::grown), 2010);
  const bool ok = newborn == std::vector<std::string>{"C4"} && grown == std::vector<std::string>{"C13"};
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& x : v) out += (out.empty() ? "" : ",") + x;
    return "{" + out + "}";
  };
  return {ok, "thresholds 5/12: newborn " + join(newborn) + ", grown " + join(grown)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient suite", gradient_suite},
      {"degeneracy equivalences", degeneracy},
      {"layer loop oracle", layer_oracle},
      {"Richards curve analytics", richards},
      {"loss oracles", loss_oracles},
      {"degree arithmetic", table_arithmetic},
      {"overfit", overfit},
      {"generalization smoke test", generalization},
      {"determinism", determinism},
      {"subtask filter boundaries", subtask_boundaries},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (int k = 0; k < 10; ++k) {
    if (!only.empty() && !only.count(k + 1)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %2d  %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
