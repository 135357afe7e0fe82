#include <doctest.h>

#include "ctcv/error.hpp"
#include "ctcv/model.hpp"
#include "ctcv/network.hpp"
#include "oracles.hpp"

using namespace ctcv;

namespace {

std::vector<std::size_t> pool_trace(const ModelSpec& spec) {
  const auto shapes = trace_shapes(spec, 1);
  std::vector<std::size_t> out = {spec.input_shape[0]};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::maxpool) out.push_back(shapes[i + 1][1]);
  }
  return out;
}

}  // namespace

TEST_CASE("small-cnn layout and parameter count") {
  const ModelSpec spec = build_small_cnn();
  CHECK(spec.input_shape == Shape{256, 256, 1});
  CHECK(spec.layers.size() == 14);
  CHECK(count_parameters(spec) == 2116162);
  const auto shapes = trace_shapes(spec, 1);
  CHECK(shapes[10] == Shape{1, 32768});
  CHECK(shapes.back() == Shape{1, 2});

  const auto ps = model_param_shapes(spec);
  const std::vector<std::size_t> per_layer = {320, 9248, 9248, 2097216, 130};
  std::vector<std::size_t> got;
  for (const auto& p : ps) {
    if (!p.empty()) got.push_back(p[0].numel() + p[1].numel());
  }
  CHECK(got == per_layer);
}

TEST_CASE("vgg16 conv stack, head and spatial trace") {
  const ModelSpec spec = build_vgg16();
  CHECK(spec.input_shape == Shape{224, 224, 3});
  CHECK(count_conv_parameters(spec) == 14714688);
  CHECK(count_parameters(spec) - count_conv_parameters(spec) == 1026);
  CHECK(pool_trace(spec) == std::vector<std::size_t>{224, 112, 56, 28, 14, 7});
  std::size_t convs = 0;
  for (const auto& l : spec.layers) convs += l.kind == LayerKind::conv2d;
  CHECK(convs == 13);
  const auto shapes = trace_shapes(spec, 1);
  CHECK(shapes.back() == Shape{1, 2});
  CHECK(spec.layers[spec.layers.size() - 3].kind == LayerKind::dropout);
  CHECK(spec.layers[spec.layers.size() - 3].rate == 0.5);
}

TEST_CASE("builders by name") {
  CHECK(build_model("small-cnn", 64) == build_small_cnn(64));
  CHECK(build_model("vgg16", 32) == build_vgg16(32));
  CHECK(default_input_size("small-cnn") == 256);
  CHECK(default_input_size("vgg16") == 224);
  CHECK_THROWS_AS(build_model("resnet50", 224), InvalidArgument);
}

TEST_CASE("shape inference matches actual forward shapes at batch 1 and 4") {
  for (const ModelSpec& spec : {build_small_cnn(), build_vgg16()}) {
    Network<float> net(spec, initialize_params<float>(spec, 1));
    for (std::size_t batch : {std::size_t{1}, std::size_t{4}}) {
      INFO(spec.name << " batch " << batch);
      Rng rng(batch);
      Tensor<float> x(spec.batched_input(batch));
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform01());
      const auto y = net.predict(x);
      CHECK(y.shape() == trace_shapes(spec, batch).back());
      for (std::size_t r = 0; r < batch; ++r) CHECK(std::abs(y.at({r, 0}) + y.at({r, 1}) - 1.0f) < 1e-5f);
    }
  }
}

TEST_CASE("model description round-trips") {
  for (const ModelSpec& spec : {build_small_cnn(), build_vgg16(64)}) {
    CHECK(parse_model_spec(format_model_spec(spec)) == spec);
  }
  CHECK_THROWS_AS(parse_model_spec("model=x\nbogus=1\n"), InvalidArgument);
}

TEST_CASE("model validation names the failing layer") {
  ModelSpec spec = build_small_cnn(8);
  spec.layers.insert(spec.layers.begin() + 9, LayerSpec::maxpool(2, 2));
  try {
    validate_model(spec);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 9") != std::string::npos);
  }
  ModelSpec headless = build_small_cnn(16);
  headless.layers.pop_back();
  CHECK_THROWS_AS(validate_model(headless), ShapeError);
}

TEST_CASE("initialization is seeded, bounded and zero-biased") {
  const ModelSpec spec = build_small_cnn(32);
  const auto a = initialize_params<double>(spec, 5), b = initialize_params<double>(spec, 5),
             c = initialize_params<double>(spec, 6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  // He-uniform for the first conv: fan_in 9, limit sqrt(6 / 9).
  const double limit = std::sqrt(6.0 / 9.0);
  for (double v : a[0].weights.data()) CHECK(std::abs(v) <= limit);
  for (const auto& p : a) {
    for (double v : p.bias.data()) CHECK(v == 0.0);
  }
  CHECK(parameter_count(a) == count_parameters(spec));
}
