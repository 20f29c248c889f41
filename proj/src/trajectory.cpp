#include "ctpir/trajectory.hpp"

#include <cmath>
#include <iomanip>

namespace ctpir {

namespace {

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_column(const char* op, const Tensor& t, std::size_t rows) {
  if (t.rank() != 2 || t.cols() != 1 || t.rows() != rows) {
    throw DimensionError(std::string(op) + ": expected a (" + std::to_string(rows) + ",1) column, got " +
                         shape_str(t.shape()));
  }
}

void check_pairs(std::span<const CitationSeries> pred, std::span<const CitationSeries> obs) {
  if (pred.size() != obs.size()) {
    throw DimensionError("metric: " + std::to_string(pred.size()) + " predicted vs " + std::to_string(obs.size()) +
                         " observed series");
  }
  if (pred.empty()) throw DimensionError("metric: no series");
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (pred[j].values.size() != obs[j].values.size() || pred[j].values.empty()) {
      throw DimensionError("metric: series " + std::to_string(j) + " lengths differ or are empty");
    }
    for (double v : pred[j].values) {
      if (!(v >= 0.0)) throw DomainError("metric: negative predicted count");
    }
    for (double v : obs[j].values) {
      if (!(v >= 0.0)) throw DomainError("metric: negative observed count");
    }
  }
}

void check_counts(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (v < 0.0) throw DomainError(std::string("loss: negative ") + what + " count");
  }
}

Tensor log_error(const Tensor& pred, const Tensor& obs) {
  if (pred.shape() != obs.shape()) {
    throw DimensionError("loss: predicted " + shape_str(pred.shape()) + " vs observed " + shape_str(obs.shape()));
  }
  check_counts(pred, "predicted");
  check_counts(obs, "observed");
  return sub(log1p(pred), log1p(obs));
}

}  // namespace

ParamHeads ParamHeads::init(std::size_t input_dim, const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  ParamHeads h;
  for (auto& m : h.heads) m = Mlp::init(dims, rng, Activation::relu);
  return h;
}

void ParamHeads::add_to(ParameterSet& params) const {
  static const char* names[] = {"theta1", "theta2", "theta3", "xi"};
  for (std::size_t k = 0; k < 4; ++k) params.add(std::string("heads.") + names[k], heads[k]);
}

TrajectoryTensors logistic_params(const Tensor& momentum, const ParamHeads& heads) {
  if (momentum.rank() != 2 || momentum.cols() != heads.heads[0].layers.front().weight.shape()[0]) {
    throw DimensionError("logistic_params: momentum " + shape_str(momentum.shape()) + " does not match head input");
  }
  TrajectoryTensors p;
  p.theta1 = softplus(heads.heads[0].forward(momentum));
  p.theta2 = softplus(heads.heads[1].forward(momentum));
  p.theta3 = heads.heads[2].forward(momentum);
  p.xi = add_scalar(softplus(heads.heads[3].forward(momentum)), kXiFloor);
  return p;
}

TrajectoryParams logistic_params_value(std::span<const double> momentum, const ParamHeads& heads) {
  const auto t = logistic_params(Tensor::matrix(1, momentum.size(), {momentum.begin(), momentum.end()}), heads);
  return {t.theta1.item(), t.theta2.item(), t.theta3.item(), t.xi.item()};
}

double citation_count(const TrajectoryParams& p, double t) {
  // log(1 + xi e^z) = softplus(z + log xi) never overflows.
  const double u = -p.theta2 * (t - p.theta3) + std::log(p.xi);
  return p.theta1 * std::exp(-softplus_value(u) / p.xi);
}

CitationSeries trajectory(const TrajectoryParams& p, int T, std::size_t N) {
  CitationSeries s{T, std::vector<double>(N)};
  for (std::size_t i = 0; i < N; ++i) s.values[i] = citation_count(p, static_cast<double>(i + 1));
  return s;
}

Tensor richards_curve(const TrajectoryTensors& p, std::span<const double> times) {
  const std::size_t P = p.theta1.rows(), N = times.size();
  require_column("richards_curve", p.theta1, P);
  require_column("richards_curve", p.theta2, P);
  require_column("richards_curve", p.theta3, P);
  require_column("richards_curve", p.xi, P);
  if (N == 0) throw DimensionError("richards_curve: no evaluation times");
  for (double x : p.xi.data()) {
    if (!(x > 0.0)) throw DomainError("richards_curve: xi must be positive");
  }
  std::vector<double> t(times.begin(), times.end());
  std::vector<double> out(P * N);
  for (std::size_t i = 0; i < P; ++i) {
    const TrajectoryParams q{p.theta1[i], p.theta2[i], p.theta3[i], p.xi[i]};
    for (std::size_t k = 0; k < N; ++k) out[i * N + k] = citation_count(q, t[k]);
  }
  BackwardFn bw = [p, t, P, N](std::span<const double> y, std::span<const double> g,
                               std::span<std::vector<double>* const> grads) {
    for (std::size_t i = 0; i < P; ++i) {
      const double th2 = p.theta2[i], th3 = p.theta3[i], xi = p.xi[i];
      double d1 = 0, d2 = 0, d3 = 0, dxi = 0;
      for (std::size_t k = 0; k < N; ++k) {
        const double gk = g[i * N + k];
        if (gk == 0.0) continue;
        const double c = y[i * N + k];
        const double u = -th2 * (t[k] - th3) + std::log(xi);
        const double sp = softplus_value(u);
        const double sg = sigmoid_value(u);
        const double dc_du = -c * sg / xi;
        d1 += gk * std::exp(-sp / xi);
        d2 += gk * dc_du * -(t[k] - th3);
        d3 += gk * dc_du * th2;
        // u depends on xi through log(xi) as well.
        dxi += gk * c * (sp - sg) / (xi * xi);
      }
      if (grads[0]) (*grads[0])[i] += d1;
      if (grads[1]) (*grads[1])[i] += d2;
      if (grads[2]) (*grads[2])[i] += d3;
      if (grads[3]) (*grads[3])[i] += dxi;
    }
  };
  return Tensor::make_op("richards_curve", {P, N}, std::move(out), {p.theta1, p.theta2, p.theta3, p.xi},
                         std::move(bw));
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

CitationSeries lognormal_trajectory(const LognormalParams& p, int T, std::size_t N) {
  if (!(p.sigma > 0.0)) throw DomainError("lognormal_trajectory: sigma must be positive");
  CitationSeries s{T, std::vector<double>(N)};
  for (std::size_t i = 0; i < N; ++i) {
    s.values[i] = p.scale * standard_normal_cdf((std::log(static_cast<double>(i + 1)) - p.mu) / p.sigma);
  }
  return s;
}

LognormalTensors lognormal_params(const Tensor& momentum, const ParamHeads& heads) {
  LognormalTensors p;
  p.scale = softplus(heads.heads[0].forward(momentum));
  p.mu = heads.heads[2].forward(momentum);
  p.sigma = add_scalar(softplus(heads.heads[3].forward(momentum)), kXiFloor);
  return p;
}

Tensor lognormal_curve(const LognormalTensors& p, std::span<const double> times) {
  const std::size_t P = p.scale.rows(), N = times.size();
  require_column("lognormal_curve", p.scale, P);
  require_column("lognormal_curve", p.mu, P);
  require_column("lognormal_curve", p.sigma, P);
  if (N == 0) throw DimensionError("lognormal_curve: no evaluation times");
  std::vector<double> logt;
  for (double t : times) {
    if (!(t > 0.0)) throw DomainError("lognormal_curve: times must be positive");
    logt.push_back(std::log(t));
  }
  for (double s : p.sigma.data()) {
    if (!(s > 0.0)) throw DomainError("lognormal_curve: sigma must be positive");
  }
  std::vector<double> out(P * N);
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t k = 0; k < N; ++k) {
      out[i * N + k] = p.scale[i] * standard_normal_cdf((logt[k] - p.mu[i]) / p.sigma[i]);
    }
  }
  BackwardFn bw = [p, logt, P, N](std::span<const double>, std::span<const double> g,
                                  std::span<std::vector<double>* const> grads) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < P; ++i) {
      const double sc = p.scale[i], mu = p.mu[i], sigma = p.sigma[i];
      double ds = 0, dmu = 0, dsig = 0;
      for (std::size_t k = 0; k < N; ++k) {
        const double gk = g[i * N + k];
        const double z = (logt[k] - mu) / sigma;
        const double dc_dz = sc * inv_sqrt_2pi * std::exp(-0.5 * z * z);
        ds += gk * standard_normal_cdf(z);
        dmu += gk * dc_dz * (-1.0 / sigma);
        dsig += gk * dc_dz * (-z / sigma);
      }
      if (grads[0]) (*grads[0])[i] += ds;
      if (grads[1]) (*grads[1])[i] += dmu;
      if (grads[2]) (*grads[2])[i] += dsig;
    }
  };
  return Tensor::make_op("lognormal_curve", {P, N}, std::move(out), {p.scale, p.mu, p.sigma}, std::move(bw));
}

double male(std::span<const CitationSeries> pred, std::span<const CitationSeries> obs) {
  check_pairs(pred, obs);
  double total = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    double row = 0.0;
    const auto& a = pred[j].values;
    const auto& b = obs[j].values;
    for (std::size_t i = 0; i < a.size(); ++i) row += std::abs(std::log1p(a[i]) - std::log1p(b[i]));
    total += row / static_cast<double>(a.size());
  }
  return total / static_cast<double>(pred.size());
}

double rmsle(std::span<const CitationSeries> pred, std::span<const CitationSeries> obs) {
  check_pairs(pred, obs);
  double total = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    double row = 0.0;
    const auto& a = pred[j].values;
    const auto& b = obs[j].values;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = std::log1p(a[i]) - std::log1p(b[i]);
      row += d * d;
    }
    total += row / static_cast<double>(a.size());
  }
  return std::sqrt(total / static_cast<double>(pred.size()));
}

Tensor male_loss(const Tensor& pred, const Tensor& obs) { return mean(abs(log_error(pred, obs))); }

Tensor rmsle_loss(const Tensor& pred, const Tensor& obs) { return sqrt(mean(square(log_error(pred, obs)))); }

void write_trajectory_csv(std::ostream& out, const std::map<std::string, CitationSeries>& predicted,
                          const std::map<std::string, CitationSeries>& observed) {
  out << "year,publication_id,predicted,observed\n";
  out << std::setprecision(10);
  for (const auto& [id, series] : predicted) {
    const auto it = observed.find(id);
    for (std::size_t k = 0; k < series.values.size(); ++k) {
      out << series.start_year + static_cast<int>(k) + 1 << ',' << id << ',' << series.values[k] << ',';
      if (it != observed.end() && k < it->second.values.size()) out << it->second.values[k];
      out << '\n';
    }
  }
}

}  // namespace ctpir
