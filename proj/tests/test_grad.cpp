#include "splinestroke/grad/checkpoint.hpp"
#include "splinestroke/grad/ops.hpp"
#include "splinestroke/grad/optim.hpp"
#include "support/fd.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace splinestroke::grad;
using testsupport::central_difference;
using testsupport::max_relative_error;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Buffer b(static_cast<Eigen::Index>(numel(shape)));
  for (auto& v : b) v = u(rng);
  return Tensor(std::move(shape), std::move(b), true);
}

/// Checks d(sum(w * f(inputs)))/d(inputs) against central differences.
/// The random weights make every output element matter.
void check_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                     std::uint64_t seed, double tol = 1e-3) {
  std::mt19937_64 rng(seed);
  Tensor probe;
  {
    NoGradGuard ng;
    probe = f(inputs);
  }
  Tensor w = random_tensor(probe.shape(), rng, 0.5, 1.5);
  w.set_requires_grad(false);
  Tape::current().clear();
  for (auto& x : inputs) x.zero_grad();
  backward(sum(mul(f(inputs), w)));
  auto scalar = [&] {
    NoGradGuard ng;
    return sum(mul(f(inputs), w)).item();
  };
  for (auto& x : inputs) {
    if (!x.requires_grad()) continue;
    const Buffer numeric = central_difference(scalar, x, 1e-6);
    CHECK(max_relative_error(x.grad(), numeric) < tol);
  }
  Tape::current().clear();
}

}  // namespace

TEST_CASE("pow forward and backward") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = pow(x, 2.0);
  CHECK(y.item() == doctest::Approx(9.0));
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
  Tape::current().clear();
}

TEST_CASE("clamp saturates with zero subgradient") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = clamp(x, 0.0, 1.0);
  CHECK(y.item() == 1.0);
  backward(y);
  CHECK(x.grad()[0] == 0.0);
  Tape::current().clear();

  Tensor at_bound = Tensor::scalar(1.0, true);
  backward(clamp(at_bound, 0.0, 1.0));
  CHECK(at_bound.grad()[0] == 0.0);
  Tape::current().clear();

  Tensor inside = Tensor::scalar(0.5, true);
  backward(clamp(inside, 0.0, 1.0));
  CHECK(inside.grad()[0] == 1.0);
  Tape::current().clear();
}

TEST_CASE("matmul gradients match central differences") {
  std::mt19937_64 rng(7);
  Tensor a = random_tensor({4, 3}, rng);
  Tensor b = random_tensor({3, 2}, rng);
  Tensor w = random_tensor({4, 2}, rng);
  w.set_requires_grad(false);
  backward(sum(mul(matmul(a, b), w)));
  auto f = [&] {
    NoGradGuard ng;
    return sum(mul(matmul(a, b), w)).item();
  };
  CHECK(max_relative_error(a.grad(), central_difference(f, a, 1e-4), 1e-9) < 1e-4);
  CHECK(max_relative_error(b.grad(), central_difference(f, b, 1e-4), 1e-9) < 1e-4);
  Tape::current().clear();
}

TEST_CASE("backward: sum and max routing") {
  Tensor x = Tensor::from({5}, {1, 2, 3, 4, 5}, true);
  backward(sum(x));
  CHECK((x.grad() == 1.0).all());
  Tape::current().clear();

  Tensor a = Tensor::scalar(2.0, true), b = Tensor::scalar(3.0, true);
  backward(maximum(a, b));
  CHECK(a.grad()[0] == 0.0);
  CHECK(b.grad()[0] == 1.0);
  Tape::current().clear();

  Tensor c = Tensor::scalar(2.0, true), d = Tensor::scalar(2.0, true);
  backward(maximum(c, d));
  CHECK(c.grad()[0] == 1.0);
  CHECK(d.grad()[0] == 0.0);
  Tape::current().clear();

  Tensor e = Tensor::scalar(2.0, true), g = Tensor::scalar(2.0, true);
  backward(minimum(e, g));
  CHECK(e.grad()[0] == 1.0);
  CHECK(g.grad()[0] == 0.0);
  Tape::current().clear();

  Tensor r = Tensor::from({4}, {1, 7, 7, 3}, true);
  backward(max(r));
  CHECK(r.grad()[1] == 1.0);
  CHECK(r.grad()[2] == 0.0);
  Tape::current().clear();
}

TEST_CASE("every op kind matches finite differences") {
  std::mt19937_64 rng(11);
  auto pos = [&](Shape s) { return random_tensor(std::move(s), rng, 0.5, 2.0); };
  auto any = [&](Shape s) { return random_tensor(std::move(s), rng, -1.0, 1.0); };
  std::uint64_t seed = 100;

  using V = std::vector<Tensor>;
  check_gradients([](const V& v) { return add(v[0], v[1]); }, {any({3, 4}), any({4})}, ++seed);
  check_gradients([](const V& v) { return sub(v[0], v[1]); }, {any({3, 1}), any({1, 4})}, ++seed);
  check_gradients([](const V& v) { return mul(v[0], v[1]); }, {any({2, 3, 4}), any({3, 1})}, ++seed);
  check_gradients([](const V& v) { return div(v[0], v[1]); }, {any({3, 4}), pos({3, 4})}, ++seed);
  check_gradients([](const V& v) { return tanh(v[0]); }, {any({6})}, ++seed);
  check_gradients([](const V& v) { return exp(v[0]); }, {any({6})}, ++seed);
  check_gradients([](const V& v) { return log(v[0]); }, {pos({6})}, ++seed);
  check_gradients([](const V& v) { return sqrt(v[0]); }, {pos({6})}, ++seed);
  check_gradients([](const V& v) { return pow(v[0], 2.5); }, {pos({6})}, ++seed);
  check_gradients([](const V& v) { return pow(v[0], v[1]); }, {pos({3, 2}), pos({2})}, ++seed);
  check_gradients([](const V& v) { return abs(v[0]); }, {random_tensor({5}, rng, 0.2, 1.0)}, ++seed);
  check_gradients([](const V& v) { return sin(v[0]) + cos(v[0]); }, {any({5})}, ++seed);
  check_gradients([](const V& v) { return sum(v[0], 1); }, {any({3, 4, 2})}, ++seed);
  check_gradients([](const V& v) { return mean(v[0], 0, true); }, {any({3, 4})}, ++seed);
  check_gradients([](const V& v) { return mean(v[0]); }, {any({3, 4})}, ++seed);
  check_gradients([](const V& v) { return l2_norm(v[0], 2); }, {pos({3, 2, 2})}, ++seed);
  check_gradients([](const V& v) { return concat({v[0], v[1]}, 1); }, {any({2, 3}), any({2, 1})}, ++seed);
  check_gradients([](const V& v) { return slice(v[0], 1, 1, 3); }, {any({2, 4})}, ++seed);
  check_gradients([](const V& v) { return reshape(v[0], {6}); }, {any({2, 3})}, ++seed);
  check_gradients([](const V& v) { return avg_pool2d(v[0], 2); }, {any({5, 3, 2})}, ++seed);

  // Non-smooth ops away from their kinks.
  Tensor spread = Tensor::from({6}, {-0.9, -0.4, 0.3, 0.45, 0.8, 1.7}, true);
  check_gradients([](const V& v) { return relu(v[0]); }, {spread}, ++seed);
  check_gradients([](const V& v) { return clamp(v[0], -0.5, 1.0); }, {spread}, ++seed);
  check_gradients([](const V& v) { return minimum(v[0], v[1]); },
                  {spread, Tensor::from({6}, {0.1, -0.6, 0.0, 0.9, 0.5, 1.0}, true)}, ++seed);
  check_gradients([](const V& v) { return maximum(v[0], v[1]); },
                  {spread, Tensor::from({6}, {0.1, -0.6, 0.0, 0.9, 0.5, 1.0}, true)}, ++seed);
  check_gradients([](const V& v) { return max(v[0]) + min(v[0]); }, {spread}, ++seed);

  Eigen::Array<bool, Eigen::Dynamic, 1> mask(4);
  mask << true, false, false, true;
  check_gradients([mask](const V& v) { return select(mask, v[0], v[1]); }, {any({4}), any({4})}, ++seed);
}

TEST_CASE("pow with tensor exponent guards the base at zero") {
  Tensor base = Tensor::from({2}, {0.0, 0.25}, true);
  Tensor e = Tensor::scalar(1.5, true);
  Tensor y = sum(pow(base, e));
  CHECK(y.item() == doctest::Approx(0.125));
  backward(y);
  CHECK(std::isfinite(e.grad()[0]));
  CHECK(e.grad()[0] == doctest::Approx(0.125 * std::log(0.25)));
  CHECK(base.grad()[0] == 0.0);
  Tape::current().clear();
}

TEST_CASE("gradients accumulate across uses") {
  Tensor x = Tensor::scalar(1.5, true);
  backward(mul(x, x) + x * 3.0);
  CHECK(x.grad()[0] == doctest::Approx(2 * 1.5 + 3.0));
  Tape::current().clear();
  backward(x * 2.0);
  CHECK(x.grad()[0] == doctest::Approx(2 * 1.5 + 3.0 + 2.0));
  Tape::current().clear();
}

TEST_CASE("errors are reported with op kind and shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add: shape mismatch [2,3] vs [4]"), GradError);
  CHECK_THROWS_WITH_AS(log(a), doctest::Contains("log"), GradError);
  CHECK_THROWS_WITH_AS(div(Tensor::scalar(1.0), Tensor::scalar(0.0)), doctest::Contains("division by zero"), GradError);
  CHECK_THROWS_AS(matmul(a, a), GradError);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0, std::nan("")}), GradError);
  CHECK_THROWS_AS(exp(Tensor::scalar(1e6)), GradError);

  Tensor x = Tensor::from({2}, {1, 2}, true);
  CHECK_THROWS_WITH_AS(backward(x * 2.0), doctest::Contains("scalar"), GradError);
  Tensor y = sum(x);
  Tape::current().clear();
  CHECK_THROWS_WITH_AS(backward(y), doctest::Contains("stale"), GradError);
}

TEST_CASE("clearing the tape releases saved activations") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  std::weak_ptr<detail::Node> inner;
  Tensor y;
  {
    Tensor t = tanh(x);
    inner = t.node();
    y = sum(t);
  }
  CHECK(Tape::current().size() == 2);
  CHECK_FALSE(inner.expired());
  Tape::current().clear();
  CHECK(inner.expired());
  CHECK(Tape::current().size() == 0);
}

TEST_CASE("no-grad guard skips recording") {
  Tensor x = Tensor::scalar(2.0, true);
  {
    NoGradGuard ng;
    Tensor y = x * x;
    CHECK_FALSE(y.requires_grad());
    CHECK(Tape::current().size() == 0);
  }
  CHECK((x * x).requires_grad());
  Tape::current().clear();
}

TEST_CASE("forward and backward are deterministic") {
  auto run = [] {
    std::mt19937_64 rng(3);
    Tensor a = random_tensor({8, 5}, rng);
    Tensor b = random_tensor({5, 3}, rng);
    Tensor loss = mean(square(tanh(matmul(a, b))));
    backward(loss);
    Buffer g = a.grad();
    const double v = loss.item();
    Tape::current().clear();
    return std::make_pair(v, g);
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK((g1 == g2).all());
}

TEST_CASE("adam minimizes a quadratic") {
  Tensor x = Tensor::from({2}, {3.0, -2.0}, true);
  Adam opt({.lr = 0.1});
  opt.add(x);
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    backward(sum(square(x - 1.0)));
    opt.step();
    Tape::current().clear();
  }
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("checkpoint round trip is value exact") {
  std::mt19937_64 rng(5);
  NamedTensors in{{"w", random_tensor({3, 4}, rng)}, {"b", random_tensor({4}, rng)}, {"s", Tensor::scalar(M_PI)}};
  auto path = std::filesystem::temp_directory_path() / "splinestroke_ckpt_test.json";
  save_tensors(path, in);
  NamedTensors out = load_tensors(path);
  REQUIRE(out.size() == 3);
  for (const auto& [k, t] : in) {
    CHECK(out.at(k).shape() == t.shape());
    CHECK((out.at(k).value() == t.value()).all());
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"x": {"shape": [2], "data": [1]}})")), GradError);
}
