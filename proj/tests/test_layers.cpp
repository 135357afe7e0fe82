#include <doctest.h>

#include "checks.hpp"
#include "ctcv/error.hpp"
#include "ctcv/layers.hpp"
#include "ctcv/model.hpp"
#include "ctcv/network.hpp"
#include "oracles.hpp"

using namespace ctcv;

namespace {

template <typename T>
Tensor<T> forward(const LayerSpec& spec, const LayerParams<T>& p, const Tensor<T>& x, Mode mode,
                  LayerCache<T>& cache, std::uint64_t seed = 0) {
  Rng rng(seed);
  return layer_forward(spec, p, x, mode, rng, cache);
}

LayerParams<double> identity_dense(std::size_t d) {
  LayerParams<double> p{Tensor<double>(Shape{d, d}), Tensor<double>(Shape{d})};
  for (std::size_t i = 0; i < d; ++i) p.weights.at({i, i}) = 1.0;
  return p;
}

}  // namespace

TEST_CASE("dense identity forward and backward") {
  const Tensor<double> x(Shape{2, 3}, {1, -2, 3, 0.5, 4, -6});
  LayerCache<double> cache;
  const auto spec = LayerSpec::dense(3);
  const auto p = identity_dense(3);
  CHECK(forward(spec, p, x, Mode::train, cache) == x);
  const Tensor<double> up(Shape{2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  CHECK(layer_backward(spec, p, cache, up).input == up);
}

TEST_CASE("dropout in eval mode is exact identity") {
  Rng rng(1);
  const auto x = oracle::random_tensor(Shape{4, 5}, rng);
  LayerCache<double> cache;
  CHECK(forward(LayerSpec::dropout(0.5), LayerParams<double>{}, x, Mode::eval, cache) == x);
}

TEST_CASE("dropout in train mode zeroes or rescales") {
  const Tensor<double> x(Shape{1, 1000}, 1.0);
  LayerCache<double> cache;
  const auto y = forward(LayerSpec::dropout(0.25), LayerParams<double>{}, x, Mode::train, cache, 9);
  std::size_t kept = 0;
  for (double v : y.data()) {
    CHECK((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15));
    kept += v != 0.0;
  }
  CHECK(kept > 700);
  CHECK(kept < 800);
}

TEST_CASE("relu forward and gate") {
  const Tensor<double> x(Shape{1, 3}, {-3, 0, 5});
  LayerCache<double> cache;
  CHECK(forward(LayerSpec::relu(), LayerParams<double>{}, x, Mode::train, cache) ==
        Tensor<double>(Shape{1, 3}, {0, 0, 5}));

  const Tensor<double> x2(Shape{1, 2}, {-1, 2});
  LayerCache<double> c2;
  forward(LayerSpec::relu(), LayerParams<double>{}, x2, Mode::train, c2);
  CHECK(layer_backward(LayerSpec::relu(), LayerParams<double>{}, c2, Tensor<double>(Shape{1, 2}, 1.0)).input ==
        Tensor<double>(Shape{1, 2}, {0, 1}));
}

TEST_CASE("layer shape inference") {
  CHECK(infer_output_shape(LayerSpec::conv2d(32, 3), Shape{1, 256, 256, 1}) == Shape{1, 256, 256, 32});
  CHECK(infer_output_shape(LayerSpec::conv2d(8, 3, 2, Padding::valid), Shape{2, 9, 9, 3}) == Shape{2, 4, 4, 8});
  CHECK(infer_output_shape(LayerSpec::maxpool(2, 2), Shape{1, 7, 7, 4}) == Shape{1, 3, 3, 4});
  CHECK(infer_output_shape(LayerSpec::global_avgpool(), Shape{3, 7, 7, 512}) == Shape{3, 512});
  CHECK(infer_output_shape(LayerSpec::flatten(), Shape{2, 32, 32, 32}) == Shape{2, 32768});
  CHECK(infer_output_shape(LayerSpec::dense(64), Shape{2, 32768}) == Shape{2, 64});
  CHECK_THROWS_AS(infer_output_shape(LayerSpec::dense(4), Shape{1, 2, 2, 1}), ShapeError);
  CHECK_THROWS_AS(infer_output_shape(LayerSpec::softmax(), Shape{1, 2, 2, 1}), ShapeError);
}

TEST_CASE("layer validation") {
  CHECK_THROWS_AS(validate(LayerSpec::dropout(1.0)), InvalidArgument);
  CHECK_THROWS_AS(validate(LayerSpec::dropout(-0.1)), InvalidArgument);
  CHECK_THROWS_AS(validate(LayerSpec::conv2d(0, 3)), InvalidArgument);
  CHECK_THROWS_AS(validate(LayerSpec::dense(0)), InvalidArgument);
  CHECK_THROWS_AS(validate(LayerSpec::maxpool(0, 2)), InvalidArgument);
  CHECK_NOTHROW(validate(LayerSpec::dropout(0.0)));
}

TEST_CASE("layer text form round-trips") {
  const std::vector<LayerSpec> specs = {
      LayerSpec::conv2d(32, 3),      LayerSpec::conv2d(4, 5, 2, Padding::valid), LayerSpec::maxpool(2, 2),
      LayerSpec::avgpool(3, 1),      LayerSpec::global_avgpool(),                 LayerSpec::relu(),
      LayerSpec::flatten(),          LayerSpec::dense(64),                        LayerSpec::dropout(0.1),
      LayerSpec::softmax()};
  for (const auto& s : specs) CHECK(parse_layer(format_layer(s)) == s);
  CHECK(format_layer(LayerSpec::conv2d(32, 3)) == "conv2d filters=32 kernel=3 stride=1 padding=same");
  CHECK_THROWS_AS(parse_layer("conv2d filters=x kernel=3"), InvalidArgument);
  CHECK_THROWS_AS(parse_layer("lstm units=3"), InvalidArgument);
}

TEST_CASE("backward rejects a mis-shaped upstream gradient") {
  const Tensor<double> x(Shape{1, 4}, 1.0);
  LayerCache<double> cache;
  const auto p = identity_dense(4);
  forward(LayerSpec::dense(4), p, x, Mode::train, cache);
  CHECK_THROWS_AS(layer_backward(LayerSpec::dense(4), p, cache, Tensor<double>(Shape{1, 3})), ShapeError);
}

TEST_CASE("every layer kind passes the finite-difference check") {
  for (const auto& r : checks::gradient_sweep(2024, 6)) {
    INFO(r.name);
    CHECK(r.worst <= 1e-4);
  }
}

TEST_CASE("whole-network parameter gradients match finite differences") {
  ModelSpec spec;
  spec.name = "probe";
  spec.input_shape = Shape{6, 6, 2};
  spec.layers = {LayerSpec::conv2d(3, 3),  LayerSpec::relu(),     LayerSpec::maxpool(2, 2),
                 LayerSpec::flatten(),     LayerSpec::dense(4),   LayerSpec::relu(),
                 LayerSpec::dense(2),      LayerSpec::softmax()};
  Network<double> net(spec, initialize_params<double>(spec, 17));
  Rng rng(4);
  const auto x = oracle::random_tensor(spec.batched_input(3), rng);
  const auto y = one_hot<double>({0, 1, 1}, 2);

  Rng fwd(0);
  const auto probs = net.forward(x, Mode::train, fwd);
  const auto grads = net.backward_from_logits(cross_entropy_loss(probs, y).grad_logits);

  auto objective = [&]() { return cross_entropy_loss(net.predict(x), y).loss; };
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!spec.layers[i].has_params()) continue;
    INFO("layer " << i);
    CHECK(oracle::max_abs_diff(grads[i].weights, oracle::finite_difference(net.params()[i].weights, objective)) < 1e-7);
    CHECK(oracle::max_abs_diff(grads[i].bias, oracle::finite_difference(net.params()[i].bias, objective)) < 1e-7);
  }
}

TEST_CASE("frozen layers receive zero gradients") {
  const ModelSpec spec = build_small_cnn(16);
  Network<double> net(spec, initialize_params<double>(spec, 3));
  std::vector<bool> mask(spec.layers.size(), true);
  mask[0] = false;
  net.set_trainable(mask);
  Rng rng(1);
  const auto x = oracle::random_tensor(spec.batched_input(2), rng, 0.0, 1.0);
  Rng fwd(0);
  const auto probs = net.forward(x, Mode::train, fwd);
  const auto g = net.backward_from_logits(cross_entropy_loss(probs, one_hot<double>({0, 1}, 2)).grad_logits);
  for (double v : g[0].weights.data()) CHECK(v == 0.0);
  for (double v : g[0].bias.data()) CHECK(v == 0.0);
  bool any = false;
  for (double v : g[3].weights.data()) any = any || v != 0.0;
  CHECK(any);
}

TEST_CASE("network reports the failing layer on a bad batch") {
  const ModelSpec spec = build_small_cnn(16);
  Network<float> net(spec, initialize_params<float>(spec, 3));
  try {
    net.predict(Tensor<float>(Shape{1, 8, 8, 1}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[1,8,8,1]") != std::string::npos);
  }
}
