#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <filesystem>
#include <string>

#include "gentoc/numerics/autodiff.hpp"
#include "gentoc/numerics/checkpoint.hpp"
#include "gentoc/numerics/optimizer.hpp"
#include "oracles.hpp"

using namespace gentoc::numerics;
using gentoc::testing::gradcheck;

namespace {

using gentoc::testing::project;
using gentoc::testing::random_tensor;

constexpr double kTolerance = 1e-3;

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  Tape<double> tape;
  const auto y = softmax(tape.constant({1, 2}, {0.0, 0.0}));
  CHECK(y.values()[0] == doctest::Approx(0.5));
  CHECK(y.values()[1] == doctest::Approx(0.5));
}

TEST_CASE("identity matmul returns the operand") {
  Rng rng(1);
  Tape<double> tape;
  const auto a = random_tensor({3, 3}, rng);
  const auto out = matmul(tape.constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), tape.constant(a));
  for (std::size_t i = 0; i < 9; ++i) CHECK(out.values()[i] == a.values[i]);
}

TEST_CASE("cross entropy of uniform logits is ln V") {
  Tape<double> tape;
  const std::vector<int> target{5};
  const auto loss = cross_entropy(tape.constant({1, 8}, std::vector<double>(8, 0.3)), std::span<const int>(target));
  CHECK(loss.item() == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("backward through sum and square") {
  Tensor<double> x({1, 3}, {1.0, 2.0, 3.0});
  {
    Tape<double> tape;
    tape.backward(sum(tape.parameter(x)));
    CHECK(x.grad == std::vector<double>{1, 1, 1});
  }
  Tensor<double> y({1, 2}, {1.0, 2.0});
  Tape<double> tape;
  const auto v = tape.parameter(y);
  tape.backward(sum(mul(v, v)));
  CHECK(y.grad == std::vector<double>{2, 4});
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor<double> x({1, 3}, {1.0, 2.0, 3.0});
  Tape<double> tape;
  CHECK_THROWS(tape.backward(tape.parameter(x)));
}

TEST_CASE("shape errors name the op and dimensions") {
  Tape<double> tape;
  const auto a = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  const auto b = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  try {
    matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, tape.constant({3, 2}, std::vector<double>(6, 1.0))), ShapeError);
}

TEST_CASE("parameters off the trace get no gradient") {
  Tensor<double> used({1, 2}, {1.0, 2.0});
  Tensor<double> unused({1, 2}, {1.0, 2.0});
  Tape<double> tape;
  const auto u = tape.parameter(used);
  const auto v = tape.parameter(unused);
  (void)v;
  tape.backward(sum(u));
  CHECK(std::all_of(unused.grad.begin(), unused.grad.end(), [](double g) { return g == 0.0; }));
}

// ---------------------------------------------------------------------------

TEST_CASE("gradient check: every primitive") {
  const auto checks = gentoc::testing::primitive_gradchecks();
  CHECK(checks.size() == 18);
  for (const auto& c : checks) {
    INFO(c.name);
    CHECK(c.result.checked > 0);
    CHECK(c.result.max_rel_error < kTolerance);
  }
}

TEST_CASE("gradient check: two-layer MLP") {
  Rng rng(7);
  const auto x = random_tensor({5, 6}, rng);
  const auto w1 = random_tensor({6, 8}, rng, 0.5);
  const auto b1 = random_tensor({1, 8}, rng, 0.1);
  const auto w2 = random_tensor({8, 3}, rng, 0.5);
  const auto b2 = random_tensor({1, 3}, rng, 0.1);
  const std::vector<int> labels{0, 2, 1, 1, 0};
  const auto r = gradcheck({x, w1, b1, w2, b2}, [&](auto&, auto& v) {
    const auto h = sigmoid(linear(v[0], v[1], v[2]));
    return cross_entropy(linear(h, v[3], v[4]), std::span<const int>(labels));
  });
  CHECK(r.checked == 30 + 48 + 8 + 24 + 3);
  CHECK(r.max_rel_error < kTolerance);
}

TEST_CASE("softmax rows sum to one; layer norm rows are standardized") {
  Rng rng(3);
  Tensor<float> x({6, 16});
  for (auto& v : x.values) v = static_cast<float>(3.0 * rng.normal() + 2.0);
  Tape<float> tape(false);
  const auto sm = softmax(tape.constant(x));
  const auto ln = layer_norm(tape.constant(x), tape.constant({1, 16}, std::vector<float>(16, 1.0f)),
                             tape.constant({1, 16}, std::vector<float>(16, 0.0f)));
  for (int r = 0; r < 6; ++r) {
    double s = 0.0, mean = 0.0, var = 0.0;
    for (int c = 0; c < 16; ++c) {
      s += sm.values()[r * 16 + c];
      mean += ln.values()[r * 16 + c];
    }
    mean /= 16;
    for (int c = 0; c < 16; ++c) var += std::pow(ln.values()[r * 16 + c] - mean, 2);
    var /= 16;
    CHECK(std::abs(s - 1.0) < 1e-6);
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("forward and backward are deterministic") {
  auto run = [] {
    Rng rng(11);
    Tensor<float> w({4, 4});
    for (auto& v : w.values) v = static_cast<float>(rng.normal());
    Tape<float> tape;
    const auto p = tape.parameter(w);
    Rng drop(5);
    const auto h = dropout(softmax(matmul(p, p)), 0.2f, drop);
    tape.backward(sum(mul(h, h)));
    return std::make_pair(std::vector<float>(h.values().begin(), h.values().end()), w.grad);
  };
  CHECK(run() == run());
}

TEST_CASE("all_finite flags overflow") {
  Tape<float> tape;
  const auto big = tape.constant({1, 2}, {3e38f, 3e38f});
  add(big, big);
  CHECK_FALSE(tape.all_finite());
}

// ---------------------------------------------------------------------------

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
  ParameterSet<double> params;
  params.add("w", {1, 1});
  params.zero_grad();
  Adam<double> adam({0.1});
  adam.step(params);
  CHECK(params[0].values[0] == 0.0);
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam: converges on a quadratic bowl") {
  ParameterSet<double> params;
  params.add("w", {1, 1});
  Adam<double> adam({0.05});
  for (int i = 0; i < 500; ++i) {
    Tape<double> tape;
    const auto w = tape.parameter(params[0]);
    const auto d = add(w, tape.constant({1, 1}, {-3.0}));
    tape.backward(sum(mul(d, d)));
    adam.step(params);
  }
  CHECK(std::abs(params[0].values[0] - 3.0) < 0.05);
}

TEST_CASE("adam: zero learning rate is bitwise inert but counts the step") {
  ParameterSet<float> params;
  params.add("w", {2, 2});
  params[0].values = {0.1f, -0.2f, 0.3f, 0.4f};
  const auto before = params[0].values;
  params.zero_grad();
  params[0].grad = {1.0f, 1.0f, -1.0f, 2.0f};
  Adam<float> adam({0.0});
  adam.step(params);
  CHECK(params[0].values == before);
  CHECK(adam.steps() == 1);
  CHECK(std::all_of(params[0].grad.begin(), params[0].grad.end(), [](float g) { return g == 0.0f; }));
}

TEST_CASE("adam: missing gradient is an error") {
  ParameterSet<float> params;
  params.add("w", {1, 1});
  Adam<float> adam;
  CHECK_THROWS_AS(adam.step(params), NumericsError);
}

TEST_CASE("parameter names are unique") {
  ParameterSet<float> params;
  params.add("w", {1, 1});
  CHECK_THROWS(params.add("w", {2, 2}));
}

TEST_CASE("checkpoint round trip") {
  ParameterSet<float> params;
  params.add("a", {2, 3});
  params.add("b.bias", {1, 4});
  Rng rng(4);
  for (auto& p : params.items()) {
    for (auto& v : p.tensor.values) v = static_cast<float>(rng.normal());
  }
  const auto path = std::filesystem::temp_directory_path() / "gentoc_numerics_ckpt.bin";
  write_checkpoint(path, {{"kind", "test"}}, params);
  const auto back = read_checkpoint(path);
  CHECK(back.model.at("kind") == "test");
  REQUIRE(back.params.size() == 2);
  CHECK(back.params.items()[1].name == "b.bias");
  CHECK(back.params[0].values == params[0].values);
  CHECK(back.params[1].values == params[1].values);
  const auto manifest = read_checkpoint_manifest(path);
  CHECK(manifest.at("parameters").size() == 2);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects a foreign header") {
  const auto path = std::filesystem::temp_directory_path() / "gentoc_bad_ckpt.bin";
  {
    std::ofstream out(path);
    out << "NOT-A-CHECKPOINT\n{}\n";
  }
  CHECK_THROWS(read_checkpoint(path));
  std::filesystem::remove(path);
}
