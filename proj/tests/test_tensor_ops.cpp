#include <doctest.h>

#include <cmath>

#include "checks.hpp"
#include "ctcv/error.hpp"
#include "ctcv/ops.hpp"
#include "oracles.hpp"

using namespace ctcv;

namespace {

Tensor<double> grid3x3() { return Tensor<double>(Shape{1, 3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9}); }

}  // namespace

TEST_CASE("shape rejects empty, oversized and zero-extent layouts") {
  CHECK_THROWS_AS(Shape(std::vector<std::size_t>{}), ShapeError);
  CHECK_THROWS_AS(Shape({1, 2, 3, 4, 5}), ShapeError);
  CHECK_THROWS_AS(Shape({2, 0}), ShapeError);
  CHECK(Shape({2, 3, 4}).numel() == 24);
  CHECK(Shape({2, 3}).str() == "[2,3]");
}

TEST_CASE("tensor indexing is row-major") {
  Tensor<double> t(Shape{2, 3}, {0, 1, 2, 3, 4, 5});
  CHECK(t.at({1, 0}) == 3);
  CHECK(t.at({0, 2}) == 2);
  CHECK(t.reshaped(Shape{3, 2}).at({2, 1}) == 5);
  CHECK_THROWS_AS(t.reshaped(Shape{4}), ShapeError);
  CHECK_THROWS_AS(Tensor<double>(Shape{2}, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("elementwise examples") {
  const Tensor<double> a(Shape{2}, {1, 2}), b(Shape{2}, {3, 4});
  CHECK(elementwise(ElementwiseOp::add, a, b) == Tensor<double>(Shape{2}, {4, 6}));
  CHECK(elementwise(ElementwiseOp::max_scalar, Tensor<double>(Shape{3}, {-1, 0, 2}), 0.0) ==
        Tensor<double>(Shape{3}, {0, 0, 2}));
  CHECK(elementwise(ElementwiseOp::mul, Tensor<double>(Shape{2}, {2, 3}), 0.0) == Tensor<double>(Shape{2}, {0, 0}));
  CHECK(elementwise(ElementwiseOp::sub, b, a) == Tensor<double>(Shape{2}, {2, 2}));
}

TEST_CASE("elementwise shape mismatch names both shapes") {
  const Tensor<float> a(Shape{2}), b(Shape{3});
  try {
    elementwise(ElementwiseOp::add, a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2]") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
  }
}

TEST_CASE("matmul examples and errors") {
  const Tensor<double> eye(Shape{2, 2}, {1, 0, 0, 1}), m(Shape{2, 2}, {5, 6, 7, 8});
  CHECK(matmul(eye, m) == m);
  CHECK(matmul(Tensor<double>(Shape{1, 2}, {1, 2}), Tensor<double>(Shape{2, 1}, {3, 4}))[0] == 11);
  CHECK_THROWS_AS(matmul(Tensor<double>(Shape{2, 3}), Tensor<double>(Shape{2, 3})), ShapeError);
}

TEST_CASE("conv2d identity kernel and all-ones corner") {
  Tensor<double> centre(Shape{3, 3, 1, 1});
  centre.at({1, 1, 0, 0}) = 1.0;
  const Tensor<double> zero_bias(Shape{1});
  CHECK(conv2d(grid3x3(), centre, zero_bias, Padding::same, 1) == grid3x3());

  const Tensor<double> ones(Shape{3, 3, 1, 1}, 1.0);
  const auto y = conv2d(grid3x3(), ones, zero_bias, Padding::same, 1);
  CHECK(y.at({0, 0, 0, 0}) == 12.0);
  CHECK(y.at({0, 1, 1, 0}) == 45.0);
}

TEST_CASE("conv2d geometry") {
  auto g = conv_geometry(7, 8, 3, 3, 2, Padding::same);
  CHECK(g.out_h == 4);
  CHECK(g.out_w == 4);
  CHECK(g.pad_top == 1);
  g = conv_geometry(6, 6, 2, 2, 2, Padding::same);
  CHECK(g.out_h == 3);
  CHECK(g.pad_top == 0);
  g = conv_geometry(7, 7, 3, 3, 2, Padding::valid);
  CHECK(g.out_h == 3);
  CHECK_THROWS_AS(conv_geometry(2, 2, 3, 3, 1, Padding::valid), ShapeError);
  CHECK_THROWS_AS(conv_geometry(4, 4, 3, 3, 0, Padding::same), InvalidArgument);
}

TEST_CASE("conv2d rejects channel and bias mismatches") {
  const Tensor<double> x(Shape{1, 4, 4, 2});
  CHECK_THROWS_AS(conv2d(x, Tensor<double>(Shape{3, 3, 3, 1}), Tensor<double>(Shape{1}), Padding::same, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor<double>(Shape{3, 3, 2, 4}), Tensor<double>(Shape{3}), Padding::same, 1), ShapeError);
}

TEST_CASE("pool2d examples") {
  const Tensor<double> x(Shape{1, 2, 2, 1}, {1, 2, 3, 4});
  CHECK(pool2d(x, PoolKind::max, 2, 2).output[0] == 4.0);
  CHECK(pool2d(x, PoolKind::average, 2, 2).output[0] == 2.5);
  const Tensor<double> c(Shape{1, 4, 4, 2}, 0.25);
  const auto y = pool2d(c, PoolKind::max, 2, 2).output;
  CHECK(y.shape() == Shape{1, 2, 2, 2});
  for (double v : y.data()) CHECK(v == 0.25);
  CHECK_THROWS_AS(pool2d(x, PoolKind::max, 3, 1), ShapeError);
}

TEST_CASE("max pool routes the gradient to the first maximum") {
  const Tensor<double> x(Shape{1, 2, 2, 1}, {7, 7, 1, 7});
  const auto r = pool2d(x, PoolKind::max, 2, 2);
  const auto g = pool2d_backward(x.shape(), PoolKind::max, 2, 2, r.argmax, Tensor<double>(Shape{1, 1, 1, 1}, 1.0));
  CHECK(g == Tensor<double>(Shape{1, 2, 2, 1}, {1, 0, 0, 0}));
}

TEST_CASE("softmax examples") {
  auto p = softmax(Tensor<double>(Shape{1, 2}, {0, 0}));
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
  p = softmax(Tensor<double>(Shape{1, 2}, {std::log(2.0), 0}));
  CHECK(std::abs(p[0] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(p[1] - 1.0 / 3.0) < 1e-15);
  p = softmax(Tensor<double>(Shape{1, 2}, {1000, 0}));
  CHECK(p.all_finite());
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] < 1e-300);
}

TEST_CASE("softmax rows sum to one and ignore a per-row shift") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(5), k = 2 + rng.index(6);
    const auto z = oracle::random_tensor(Shape{n, k}, rng, -20.0, 20.0);
    auto shifted = z;
    for (std::size_t r = 0; r < n; ++r) {
      const double c = rng.uniform(-50.0, 50.0);
      for (std::size_t j = 0; j < k; ++j) shifted.at({r, j}) += c;
    }
    const auto p = softmax(z), q = softmax(shifted);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += p.at({r, j});
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    CHECK(oracle::max_abs_diff(p, q) <= 1e-12);
  }
}

TEST_CASE("ops match the nested-loop oracles") {
  const auto r = checks::kernel_oracle_sweep(11, 40);
  CHECK(r.matmul <= 1e-10);
  CHECK(r.conv2d <= 1e-10);
  CHECK(r.pool2d <= 1e-10);
}

TEST_CASE("float and double paths agree") {
  Rng rng(3);
  const auto x = oracle::random_tensor(Shape{2, 5, 6, 3}, rng);
  const auto w = oracle::random_tensor(Shape{3, 3, 3, 4}, rng);
  const auto b = oracle::random_tensor(Shape{4}, rng);
  const auto yd = conv2d(x, w, b, Padding::same, 2);
  const auto yf = conv2d(x.cast<float>(), w.cast<float>(), b.cast<float>(), Padding::same, 2);
  CHECK(oracle::max_abs_diff(yd, yf.cast<double>()) < 1e-5);
}
