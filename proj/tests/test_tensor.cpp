#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctpir/gradcheck.hpp"
#include "ctpir/nn.hpp"
#include "ctpir/rng.hpp"
#include "ctpir/tensor.hpp"

using namespace ctpir;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool grad = false) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::matrix(r, c, std::move(v), grad);
}

// Sum-of-products reference for matmul.
std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) out[i * n + j] += a.at(i, p) * b.at(p, j);
  return out;
}

}  // namespace

TEST_CASE("matmul values") {
  SUBCASE("hand-computed 2x2") {
    const auto c = matmul(Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::matrix(2, 2, {5, 6, 7, 8}));
    CHECK(std::vector<double>(c.data().begin(), c.data().end()) == std::vector<double>{19, 22, 43, 50});
  }
  SUBCASE("identity and zero") {
    Rng rng(3);
    const auto b = random_matrix(3, 2, rng);
    const auto id = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const auto c = matmul(id, b);
    for (std::size_t i = 0; i < 6; ++i) CHECK(c[i] == b[i]);
    const auto z = matmul(Tensor::zeros({2, 3}), b);
    for (double v : z.data()) CHECK(v == 0.0);
  }
  SUBCASE("random against loops") {
    Rng rng(11);
    const auto a = random_matrix(4, 7, rng), b = random_matrix(7, 3, rng);
    const auto c = matmul(a, b);
    const auto ref = naive_matmul(a, b);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-14));
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("(2,3)") != std::string::npos);
    }
  }
}

TEST_CASE("elementwise definitions") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(softplus(Tensor::scalar(0.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(relu(Tensor::scalar(-3.2)).item() == 0.0);
  CHECK(relu(Tensor::scalar(3.2)).item() == 3.2);
  CHECK(softplus(Tensor::scalar(800.0)).item() == 800.0);
  CHECK(softplus(Tensor::scalar(-800.0)).item() == 0.0);
  CHECK(std::isfinite(exp(Tensor::scalar(1000.0)).item()));
  CHECK_THROWS_AS(log(Tensor::vector({1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(log(Tensor::vector({-2.0})), DomainError);
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  const Tensor in[] = {Tensor::vector({1.0, 2.0}), Tensor::vector({3.0, 4.0})};
  const auto m = elementwise(Elementwise::mul, in);
  CHECK(m[0] == 3.0);
  CHECK(m[1] == 8.0);
}

TEST_CASE("non-finite results are errors") {
  CHECK_THROWS_AS(mul(Tensor::scalar(1e300), Tensor::scalar(1e300)), NumericError);
  CHECK_THROWS_AS(Tensor::vector({std::nan("")}), NumericError);
}

TEST_CASE("concat") {
  const auto c = concat(Tensor::vector({1, 2}), Tensor::vector({3}), 0);
  CHECK(c.shape() == Shape{3});
  CHECK(c[2] == 3.0);
  const auto d = concat(Tensor::zeros({2, 3}), Tensor::zeros({2, 5}), 1);
  CHECK(d.shape() == Shape{2, 8});
  CHECK_THROWS_AS(concat(Tensor::zeros({2, 3}), Tensor::zeros({3, 5}), 1), DimensionError);

  auto a = Tensor::vector({1, 2}, true);
  auto b = Tensor::vector({3, 4, 5}, true);
  backward(sum(concat(a, b, 0)));
  for (double g : a.grad()) CHECK(g == 1.0);
  for (double g : b.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward basics") {
  auto x = Tensor::vector({1, 2, 3, 4}, true);
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  auto s = Tensor::scalar(3.0, true);
  backward(mul(s, s));
  CHECK(s.grad()[0] == 6.0);

  CHECK_THROWS_AS(backward(Tensor::vector({1.0, 2.0}, true)), ContractError);
}

TEST_CASE("tape visits every op once in reverse order") {
  auto x = Tensor::vector({0.3, -0.2}, true);
  const auto y = tanh(x);
  // y is used twice; its backward rule must still run once.
  const auto loss = sum(add(mul(y, y), y));
  auto tape = GradientTape::record(loss);
  // x plus four ops; only the ops have backward rules to invoke.
  CHECK(tape.size() == 5);
  CHECK(tape.replay() == 4);
  for (std::size_t i = 0; i < 2; ++i) {
    const double t = std::tanh(x[i]);
    CHECK(x.grad()[i] == doctest::Approx((2 * t + 1) * (1 - t * t)).epsilon(1e-14));
  }
}

TEST_CASE("backward is deterministic and linear") {
  Rng rng(5);
  auto a = random_matrix(3, 4, rng, true);
  auto b = random_matrix(4, 2, rng, true);
  auto f1 = [&] { return sum(square(matmul(a, b))); };
  auto f2 = [&] { return sum(sigmoid(matmul(a, b))); };

  backward(f1());
  const std::vector<double> g1(a.grad().begin(), a.grad().end());
  a.zero_grad();
  b.zero_grad();
  backward(f1());
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(a.grad()[i] == g1[i]);
  a.zero_grad();
  b.zero_grad();
  backward(f2());
  const std::vector<double> g2(a.grad().begin(), a.grad().end());
  a.zero_grad();
  b.zero_grad();
  backward(add(f1(), f2()));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(a.grad()[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-13));
}

TEST_CASE("no-grad guard records nothing") {
  auto x = Tensor::vector({1.0, 2.0}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = sum(square(x));
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(GradientTape::record(y).size() == 0);
}

TEST_CASE("grad_check examples") {
  Rng rng(9);
  const auto x = random_matrix(3, 3, rng);
  CHECK(grad_check([](const Tensor& v) { return sum(square(v)); }, x) < 1e-7);
  CHECK(grad_check([](const Tensor& v) { return sum(sigmoid(sigmoid(scale(v, 2.0)))); }, x) < 1e-5);
  CHECK(grad_check([](const Tensor& v) { return sum(scale(v, 3.0)); }, x) < 1e-10);
}

TEST_CASE("random three-layer mlp gradients") {
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const auto mlp = Mlp::init({4, 6, 5, 1}, rng, Activation::tanh);
    const auto x = random_matrix(3, 4, rng);
    std::vector<Tensor> params;
    for (const auto& l : mlp.layers) {
      params.push_back(l.weight);
      params.push_back(l.bias);
    }
    CHECK(grad_check_params([&] { return sum(square(mlp.forward(x))); }, params) < 1e-4);
  }
}

TEST_CASE("optimizers") {
  auto w = Tensor::vector({1.0, -2.0}, true);
  ParameterSet ps;
  ps.add("w", w);
  Sgd sgd(0.1);
  backward(sum(square(w)));
  sgd.step(ps);
  CHECK(w[0] == doctest::Approx(0.8));
  CHECK(w[1] == doctest::Approx(-1.6));

  auto v = Tensor::vector({1.0}, true);
  ParameterSet pv;
  pv.add("v", v);
  Adam adam(0.01);
  backward(sum(square(v)));
  adam.step(pv);
  // First Adam step moves each coordinate by lr in the gradient's direction.
  CHECK(v[0] == doctest::Approx(0.99).epsilon(1e-9));
}
