#pragma once

// Reference implementations shared by the unit tests and the acceptance run.
// They use plain loops over the raw graph and never call the library's
// tensor ops.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "ctpir/embedding.hpp"
#include "ctpir/rng.hpp"
#include "ctpir/series.hpp"

namespace oracle {

using namespace ctpir;

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b.front().size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b.front().size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat mat_add(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
  return a;
}

// Random cumulative graph over 3..6 entities and 3 years, two relations.
inline TemporalKG random_graph(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  const std::size_t n = 3 + rng.bits() % 4;
  TemporalKG g;
  g.relations = {"citedBy", "relatedTo"};
  g.embedding_dim = dim;
  std::vector<EntityRef> all;
  for (std::size_t i = 0; i < n; ++i) all.push_back({"E" + std::to_string(i), EntityKind::publication, std::nullopt});
  std::set<std::tuple<std::string, std::string, std::string>> used;
  std::map<std::pair<std::string, std::string>, std::size_t> next_pos;
  Snapshot s;
  for (std::size_t y = 0; y < 3; ++y) {
    s.year = 1990 + static_cast<int>(y);
    const std::size_t alive = std::min(n, 2 + y + rng.bits() % 2);
    while (s.entities.size() < alive) s.entities.push_back(all[s.entities.size()]);
    for (int k = 0; k < 3; ++k) {
      const std::size_t a = rng.bits() % alive, b = rng.bits() % alive;
      const std::string rel = g.relations[rng.bits() % 2];
      if (a == b) continue;
      const auto key = std::make_tuple(all[a].id, rel, all[b].id);
      if (!used.insert(key).second) continue;
      s.edges.push_back({all[a].id, rel, all[b].id, next_pos[{all[a].id, rel}]++});
    }
    for (const auto& e : s.entities) {
      std::vector<double> f(dim);
      for (auto& v : f) v = rng.uniform(-1.0, 1.0);
      s.features[e.id] = f;
    }
    g.snapshots.push_back(s);
  }
  return g;
}

// Literal per-entity loops over the snapshot's edge list.
inline Mat static_oracle(const Snapshot& snap, const std::vector<std::string>& relations, const GraphIndex& index,
                  const Mat& h, const RgcnLayerWeights& w, bool normalize) {
  const std::size_t n = h.size();
  Mat out = mat_mul(h, to_mat(w.self));
  for (std::size_t r = 0; r < relations.size(); ++r) {
    Mat agg(n, std::vector<double>(h.front().size(), 0.0));
    std::vector<double> count(n, 0.0);
    for (const auto& e : snap.edges) {
      if (e.rel != relations[r]) continue;
      const std::size_t a = index.row(e.src), b = index.row(e.dst);
      for (std::size_t j = 0; j < h[b].size(); ++j) agg[a][j] += h[b][j];
      for (std::size_t j = 0; j < h[a].size(); ++j) agg[b][j] += h[a][j];
      count[a] += 1.0;
      count[b] += 1.0;
    }
    if (normalize) {
      for (std::size_t i = 0; i < n; ++i)
        for (auto& v : agg[i]) v = count[i] > 0 ? v / count[i] : 0.0;
    }
    out = mat_add(out, mat_mul(agg, to_mat(w.relation[r])));
  }
  return out;
}

inline std::vector<Mat> sequence_oracle(const TemporalKG& g, const RgcnWeights& w) {
  const auto index = GraphIndex::build(g);
  std::vector<Mat> outputs;
  std::vector<Mat> prev_pre;
  for (std::size_t s = 0; s < g.snapshots.size(); ++s) {
    Mat h(index->num_nodes(), std::vector<double>(g.embedding_dim, 0.0));
    for (const auto& [id, f] : g.snapshots[s].features) h[index->row(id)] = f;
    std::vector<Mat> pre;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      const Mat st = static_oracle(g.snapshots[s], g.relations, *index, h, w.layers[l], w.config.normalize);
      Mat z = s == 0 ? st : mat_add(st, mat_mul(prev_pre[l], to_mat(w.layers[l].temporal)));
      if (l + 1 < w.layers.size()) {
        for (auto& row : z)
          for (auto& v : row) v = std::max(v, 0.0);
      }
      pre.push_back(st);
      h = z;
    }
    prev_pre = pre;
    outputs.push_back(h);
  }
  return outputs;
}

// Scalar-loop log-count errors over equally long series.
inline double male(const std::vector<CitationSeries>& pred, const std::vector<CitationSeries>& obs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    for (std::size_t i = 0; i < pred[j].values.size(); ++i) {
      sum += std::abs(std::log(1.0 + pred[j].values[i]) - std::log(1.0 + obs[j].values[i]));
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

inline double rmsle(const std::vector<CitationSeries>& pred, const std::vector<CitationSeries>& obs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    for (std::size_t i = 0; i < pred[j].values.size(); ++i) {
      const double d = std::log(1.0 + pred[j].values[i]) - std::log(1.0 + obs[j].values[i]);
      sum += d * d;
      ++n;
    }
  }
  return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace oracle
