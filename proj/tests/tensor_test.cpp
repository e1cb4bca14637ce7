#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "personaforge/tensor/checkpoint.hpp"
#include "personaforge/tensor/grad_check.hpp"
#include "personaforge/tensor/ops.hpp"
#include "personaforge/tensor/optim.hpp"
#include "test_support.hpp"

using namespace personaforge::tensor;
using personaforge::testing::max_abs_diff;
using personaforge::testing::random_tensor;

namespace {

double check(const ScalarFunction& f, std::vector<Tensor> point) {
  return grad_check(f, point);
}

}  // namespace

TEST_CASE("matmul matches definition and loop oracle") {
  Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  Tensor c = matmul(eye, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(max_abs_diff(c, b) == 0.0);

  CHECK(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})).item() == 11.0);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor({3, 4}, rng);
    Tensor y = random_tensor({4, 2}, rng);
    const auto oracle = personaforge::testing::naive_matmul(x, y);
    Tensor z = matmul(x, y);
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(z[i] - oracle[i]) <= 1e-12);
  }

  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST_CASE("matmul forward and backward at blocked-kernel sizes") {
  std::mt19937_64 rng(12);
  const std::size_t shapes[][3] = {{144, 256, 32}, {576, 1024, 16}, {33, 65, 129}};
  for (const auto& dims : shapes) {
    const std::size_t m = dims[0], n = dims[1], k = dims[2];
    Tensor x = random_tensor({m, k}, rng);
    Tensor y = random_tensor({k, n}, rng);
    Tensor weights = random_tensor({m, n}, rng);
    x.set_requires_grad(true);
    y.set_requires_grad(true);
    Tape tape;
    Tensor z = matmul(x, y);
    const auto oracle = personaforge::testing::naive_matmul(x, y);
    double worst = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) worst = std::max(worst, std::abs(z[i] - oracle[i]));
    CHECK(worst <= 1e-10);
    tape.backward(sum(mul(z, weights)));

    std::vector<double> dx(m * k, 0.0), dy(k * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) {
          dx[i * k + p] += weights[i * n + j] * y[p * n + j];
          dy[p * n + j] += x[i * k + p] * weights[i * n + j];
        }
    const auto gx = x.grad(), gy = y.grad();
    double worst_dx = 0.0, worst_dy = 0.0;
    for (std::size_t i = 0; i < dx.size(); ++i) worst_dx = std::max(worst_dx, std::abs(gx[i] - dx[i]));
    for (std::size_t i = 0; i < dy.size(); ++i) worst_dy = std::max(worst_dy, std::abs(gy[i] - dy[i]));
    CHECK(worst_dx <= 1e-9);
    CHECK(worst_dy <= 1e-9);
  }
}

TEST_CASE("conv2d input gradient at encoder widths") {
  std::mt19937_64 rng(13);
  Tensor in = random_tensor({16, 16, 16}, rng);
  Tensor k = random_tensor({32, 16, 3, 3}, rng);
  Tensor weights = random_tensor({32, 16, 16}, rng);
  in.set_requires_grad(true);
  Tape tape;
  tape.backward(sum(mul(conv2d(in, k, 1, 1), weights)));
  // Adjoint of cross-correlation: scatter each output weight back through the kernel.
  std::vector<double> expected(in.numel(), 0.0);
  for (std::size_t o = 0; o < 32; ++o)
    for (std::size_t c = 0; c < 16; ++c)
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x)
          for (std::size_t dy = 0; dy < 3; ++dy)
            for (std::size_t dx = 0; dx < 3; ++dx) {
              const long iy = static_cast<long>(y + dy) - 1, ix = static_cast<long>(x + dx) - 1;
              if (iy < 0 || iy >= 16 || ix < 0 || ix >= 16) continue;
              expected[(c * 16 + static_cast<std::size_t>(iy)) * 16 + static_cast<std::size_t>(ix)] +=
                  weights[(o * 16 + y) * 16 + x] * k[((o * 16 + c) * 3 + dy) * 3 + dx];
            }
  const auto g = in.grad();
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i] - expected[i]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("conv2d cross-correlation semantics") {
  std::mt19937_64 rng(5);
  Tensor img = random_tensor({1, 4, 5}, rng);
  Tensor one = Tensor(Shape{1, 1, 1, 1}, std::vector<double>{1.0});
  CHECK(max_abs_diff(conv2d(img, one, 1, 0), img) == 0.0);

  Tensor ones3 = Tensor::full({1, 3, 3}, 1.0);
  Tensor k3 = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor nine = conv2d(ones3, k3, 1, 0);
  CHECK(nine.shape() == Shape{1, 1, 1});
  CHECK(nine.item() == 9.0);

  for (auto [stride, pad] : std::vector<std::pair<int, int>>{{1, 0}, {1, 1}, {2, 1}, {3, 1}}) {
    Tensor in = random_tensor({2, 8, 8}, rng);
    Tensor k = random_tensor({4, 2, 3, 3}, rng);
    const std::size_t s = static_cast<std::size_t>(stride), p = static_cast<std::size_t>(pad);
    if ((8 + 2 * p - 3) % s != 0) {
      CHECK_THROWS_AS(conv2d(in, k, s, p), DimensionError);
      continue;
    }
    const auto oracle = personaforge::testing::direct_conv(in, k, s, p);
    Tensor out = conv2d(in, k, s, p);
    REQUIRE(out.numel() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(out[i] - oracle[i]) <= 1e-10);
  }

  CHECK_THROWS_AS(conv2d(Tensor({3, 4, 4}), Tensor({1, 2, 3, 3}), 1, 1), DimensionError);
  CHECK_THROWS_AS(conv2d(Tensor({1, 2, 2}), Tensor({1, 1, 3, 3}), 1, 0), DimensionError);
}

TEST_CASE("pool max and avg") {
  Tensor x({1, 2, 2}, {1, 3, 5, 7});
  CHECK(pool(x, PoolMode::kAvg, 2, 2).item() == 4.0);
  CHECK(pool(x, PoolMode::kMax, 2, 2).item() == 7.0);

  std::mt19937_64 rng(3);
  Tensor in = random_tensor({3, 4, 4}, rng);
  for (bool max_mode : {true, false}) {
    for (std::size_t stride : {1u, 2u}) {
      const auto oracle = personaforge::testing::window_pool(in, max_mode, 2, stride);
      Tensor out = pool(in, max_mode ? PoolMode::kMax : PoolMode::kAvg, 2, stride);
      REQUIRE(out.numel() == oracle.size());
      for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(out[i] == oracle[i]);
    }
  }
  CHECK_THROWS_AS(pool(Tensor({1, 5, 5}), PoolMode::kMax, 2, 2), DimensionError);
}

TEST_CASE("max pool routes gradient to the first maximal element") {
  Tensor x({1, 2, 2}, {2, 2, 1, 2}, true);
  Tape tape;
  tape.backward(sum(pool(x, PoolMode::kMax, 2, 2)));
  CHECK(x.grad() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("activations at reference points") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  Tensor r = relu(Tensor::vector({-2.0, 3.0}));
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 3.0);

  std::mt19937_64 rng(17);
  Tensor p = random_tensor({6}, rng, -2.0, 2.0);
  CHECK(check([](auto in) { return sum(tanh(in[0])); }, {p}) < 1e-6);
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(23);
  Tensor x = random_tensor({3, 4, 5}, rng, -5.0, 5.0);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    Tensor s = softmax(x, axis);
    const std::size_t outer = axis == 0 ? 1 : (axis == 1 ? 3 : 12);
    const std::size_t extent = x.dim(axis);
    const std::size_t inner = 60 / outer / extent;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < inner; ++j) {
        double total = 0.0;
        for (std::size_t e = 0; e < extent; ++e) total += s[(o * extent + e) * inner + j];
        CHECK(std::abs(total - 1.0) <= 1e-9);
      }
  }
}

TEST_CASE("embedding lookup gathers and scatters") {
  std::mt19937_64 rng(2);
  Tensor table = random_tensor({4, 3}, rng);
  const std::vector<std::size_t> twice{0, 0};
  Tensor rows = embedding_lookup(table, twice);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(rows[j] == table[j]);
    CHECK(rows[3 + j] == table[j]);
  }
  Tensor empty = embedding_lookup(table, std::vector<std::size_t>{});
  CHECK(empty.shape() == Shape{0, 3});

  table.set_requires_grad(true);
  {
    Tape tape;
    const std::vector<std::size_t> ids{2, 1, 2};
    tape.backward(sum(embedding_lookup(table, ids)));
  }
  const auto g = table.grad();
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(g[0 * 3 + j] == 0.0);
    CHECK(g[1 * 3 + j] == 1.0);
    CHECK(g[2 * 3 + j] == 2.0);
    CHECK(g[3 * 3 + j] == 0.0);
  }
  CHECK_THROWS_AS(embedding_lookup(table, std::vector<std::size_t>{4}), DimensionError);
}

TEST_CASE("backward on simple losses") {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  {
    Tape tape;
    tape.backward(sum(x));
  }
  CHECK(x.grad() == std::vector<double>(6, 1.0));

  Tensor y({2}, {1, 2}, true);
  {
    Tape tape;
    tape.backward(sum(mul(y, y)));
  }
  CHECK(y.grad() == std::vector<double>{2, 4});

  Tape tape;
  Tensor v = mul(y, y);
  CHECK_THROWS_AS(tape.backward(v), NumericError);
}

TEST_CASE("tape records only inside a scope and visits each node once") {
  Tensor w({2}, {1, 2}, true);
  Tensor out = mul(w, w);
  CHECK_FALSE(out.requires_grad());

  Tape tape;
  Tensor a = mul(w, w);
  Tensor b = add(a, a);
  CHECK(tape.size() == 2);
  {
    NoGradGuard guard;
    Tensor c = add(b, b);
    CHECK_FALSE(c.requires_grad());
    CHECK(tape.size() == 2);
  }
  tape.backward(sum(b));
  CHECK(tape.size() == 0);
  CHECK(w.grad() == std::vector<double>{4, 8});
}

TEST_CASE("every differentiable op passes central-difference checks") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    Tensor same = random_tensor({3, 4}, rng);
    Tensor s = random_tensor({1}, rng);
    CHECK(check([](auto in) { return sum(tanh(matmul(in[0], in[1]))); }, {a, b}) < 1e-4);
    CHECK(check([](auto in) { return sum(mul(tanh(add(in[0], in[1])), sub(in[0], in[1]))); },
                {a, same}) < 1e-4);
    CHECK(check([](auto in) { return sum(mul(in[0], tanh(in[1]))); }, {a, s}) < 1e-4);
    CHECK(check([](auto in) { return sum(sigmoid(scale(in[0], 2.0))); }, {a}) < 1e-4);
    CHECK(check([](auto in) { return sum(mul(relu(in[0]), in[0])); }, {a}) < 1e-4);
    CHECK(check([](auto in) { return sum(mul(leaky_relu(in[0], 0.2), in[0])); }, {a}) < 1e-4);
    CHECK(check([](auto in) { return sum(softplus(scale(in[0], 3.0))); }, {a}) < 1e-4);
    CHECK(check([](auto in) { return sum(log(affine(in[0], 0.4, 1.0))); }, {a}) < 1e-4);
    CHECK(check([](auto in) { return sum(mul(clamp(in[0], -0.99, 0.99), in[0])); }, {a}) < 1e-4);

    Tensor weights = random_tensor({3, 4}, rng);
    CHECK(check([weights](auto in) { return sum(mul(softmax(in[0], 1), weights)); }, {a}) < 1e-4);
    CHECK(check([weights](auto in) { return sum(mul(softmax(in[0], 0), weights)); }, {a}) < 1e-4);

    Tensor x = random_tensor({4}, rng);
    Tensor bias = random_tensor({2}, rng);
    CHECK(check([](auto in) { return sum(tanh(linear(in[0], in[1], in[2]))); }, {x, b, bias}) < 1e-4);
    CHECK(check([](auto in) { return sum(tanh(linear(in[0], in[1], in[2]))); }, {a, b, bias}) < 1e-4);

    Tensor v1 = random_tensor({5}, rng), v2 = random_tensor({5}, rng), v3 = random_tensor({2}, rng);
    CHECK(check([](auto in) {
            std::vector<Tensor> parts{in[0], in[1]};
            std::vector<Tensor> cat{average(parts), in[2]};
            return sum(tanh(concat(cat)));
          },
          {v1, v2, v3}) < 1e-4);
    CHECK(check([](auto in) { return sum(tanh(reshape(in[0], {4, 3}))); }, {a}) < 1e-4);
    CHECK(check([](auto in) { return mean(mul(in[0], in[0])); }, {a}) < 1e-4);

    Tensor table = random_tensor({5, 3}, rng);
    CHECK(check([](auto in) {
            const std::vector<std::size_t> ids{4, 0, 4, 2};
            return sum(tanh(embedding_lookup(in[0], ids)));
          },
          {table}) < 1e-4);

    Tensor img = random_tensor({2, 6, 6}, rng);
    Tensor kern = random_tensor({3, 2, 3, 3}, rng);
    Tensor kb = random_tensor({3}, rng);
    CHECK(check([](auto in) { return sum(tanh(conv2d(in[0], in[1], in[2], 1, 1))); },
                {img, kern, kb}) < 1e-4);
    CHECK(check([](auto in) { return sum(tanh(conv2d(in[0], in[1], 3, 0))); }, {img, kern}) < 1e-4);
    CHECK(check([](auto in) { return sum(tanh(pool(in[0], PoolMode::kMax, 2, 2))); }, {img}) < 1e-4);
    CHECK(check([](auto in) { return sum(tanh(pool(in[0], PoolMode::kAvg, 2, 2))); }, {img}) < 1e-4);
    CHECK(check([](auto in) { return sum(tanh(spatial_mean(in[0]))); }, {img}) < 1e-4);
    CHECK(check([](auto in) { return sum(tanh(upsample2x(in[0]))); }, {img}) < 1e-4);

    Tensor cs = random_tensor({2}, rng), ct = random_tensor({2}, rng);
    CHECK(check([](auto in) { return sum(tanh(channel_affine(in[0], in[1], in[2]))); },
                {img, cs, ct}) < 1e-4);
    Tensor probe = random_tensor({2, 6, 6}, rng);
    CHECK(check([probe](auto in) { return sum(mul(instance_norm(in[0]), probe)); }, {img}) < 1e-4);
  }
}

TEST_CASE("seeded computation is bit-identical across runs") {
  auto run = [] {
    std::mt19937_64 rng(77);
    Tensor img = random_tensor({3, 8, 8}, rng);
    Tensor k = random_tensor({4, 3, 3, 3}, rng, -1, 1);
    k.set_requires_grad(true);
    Tape tape;
    Tensor loss = sum(tanh(pool(relu(conv2d(img, k, 1, 1)), PoolMode::kMax, 2, 2)));
    tape.backward(loss);
    auto g = k.grad();
    g.push_back(loss.item());
    return g;
  };
  CHECK(run() == run());
}

TEST_CASE("adam minimizes a quadratic") {
  Tensor x({3}, {3.0, -2.0, 1.0}, true);
  Adam adam({x}, AdamConfig{.learning_rate = 0.05});
  for (int i = 0; i < 400; ++i) {
    Tape tape;
    tape.backward(sum(mul(x, x)));
    adam.step();
  }
  for (double v : x.data()) CHECK(std::abs(v) < 1e-2);
}

TEST_CASE("checkpoint roundtrip and format guards") {
  personaforge::testing::TempDir dir("ckpt");
  std::mt19937_64 rng(9);
  ParameterList params{{"a.weight", random_tensor({3, 2}, rng)}, {"a.bias", random_tensor({2}, rng)},
                       {"empty", Tensor(Shape{0, 4})}};
  const auto path = dir.path() / "model.ckpt";
  save_checkpoint(path, params, {{"kind", "test"}});

  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.meta["kind"] == "test");
  REQUIRE(loaded.tensors.size() == 3);
  CHECK(loaded.at("a.weight").shape() == Shape{3, 2});
  CHECK(max_abs_diff(loaded.at("a.weight"), params[0].tensor) == 0.0);
  CHECK(loaded.at("empty").shape() == Shape{0, 4});

  ParameterList target{{"a.weight", Tensor({3, 2})}, {"a.bias", Tensor({2})}};
  restore_parameters(loaded, target);
  CHECK(max_abs_diff(target[1].tensor, params[1].tensor) == 0.0);

  ParameterList wrong{{"a.weight", Tensor({2, 3})}};
  CHECK_THROWS_AS(restore_parameters(loaded, wrong), CheckpointError);
  ParameterList missing{{"nope", Tensor({1})}};
  CHECK_THROWS_AS(restore_parameters(loaded, missing), CheckpointError);

  std::ofstream(dir.path() / "junk.ckpt") << "garbage";
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "junk.ckpt"), CheckpointError);
}
