#include "ctcv/model.hpp"

#include <cmath>
#include <sstream>

#include "ctcv/error.hpp"
#include "ctcv/random.hpp"

namespace ctcv {

ModelSpec build_small_cnn(std::size_t input_size) {
  ModelSpec spec{kSmallCnnName, Shape{input_size, input_size, 1}, {}, 2};
  for (int block = 0; block < 3; ++block) {
    spec.layers.push_back(LayerSpec::conv2d(32, 3, 1, Padding::same));
    spec.layers.push_back(LayerSpec::relu());
    spec.layers.push_back(LayerSpec::maxpool(2, 2));
  }
  spec.layers.push_back(LayerSpec::flatten());
  spec.layers.push_back(LayerSpec::dense(64));
  spec.layers.push_back(LayerSpec::relu());
  spec.layers.push_back(LayerSpec::dense(2));
  spec.layers.push_back(LayerSpec::softmax());
  return spec;
}

ModelSpec build_vgg16(std::size_t input_size) {
  ModelSpec spec{kVgg16Name, Shape{input_size, input_size, 3}, {}, 2};
  const std::vector<std::vector<std::size_t>> blocks = {
      {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  for (const auto& block : blocks) {
    for (std::size_t filters : block) {
      spec.layers.push_back(LayerSpec::conv2d(filters, 3, 1, Padding::same));
      spec.layers.push_back(LayerSpec::relu());
    }
    spec.layers.push_back(LayerSpec::maxpool(2, 2));
  }
  spec.layers.push_back(LayerSpec::global_avgpool());
  spec.layers.push_back(LayerSpec::dropout(0.5));
  spec.layers.push_back(LayerSpec::dense(2));
  spec.layers.push_back(LayerSpec::softmax());
  return spec;
}

ModelSpec build_model(const std::string& name, std::size_t input_size) {
  if (name == kSmallCnnName) return build_small_cnn(input_size);
  if (name == kVgg16Name) return build_vgg16(input_size);
  throw InvalidArgument("unknown model '" + name + "' (expected small-cnn or vgg16)");
}

std::size_t default_input_size(const std::string& name) {
  if (name == kSmallCnnName) return 256;
  if (name == kVgg16Name) return 224;
  throw InvalidArgument("unknown model '" + name + "' (expected small-cnn or vgg16)");
}

std::vector<Shape> trace_shapes(const ModelSpec& spec, std::size_t batch) {
  if (spec.input_shape.rank() != 3) {
    throw ShapeError("model input must be H x W x C, got " + spec.input_shape.str());
  }
  std::vector<Shape> shapes{spec.batched_input(batch)};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      shapes.push_back(infer_output_shape(spec.layers[i], shapes.back()));
    } catch (const Error& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + to_string(spec.layers[i].kind) +
                       "): " + e.what());
    }
  }
  return shapes;
}

void validate_model(const ModelSpec& spec) {
  const auto shapes = trace_shapes(spec);
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::softmax) {
    throw ShapeError("model '" + spec.name + "' must end in a softmax layer");
  }
  if (shapes.back() != Shape{1, spec.num_classes}) {
    throw ShapeError("model '" + spec.name + "' head produces " + shapes.back().str() +
                     ", expected " + std::to_string(spec.num_classes) + " classes");
  }
}

std::vector<std::vector<Shape>> model_param_shapes(const ModelSpec& spec) {
  const auto shapes = trace_shapes(spec);
  std::vector<std::vector<Shape>> out;
  out.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    out.push_back(param_shapes(spec.layers[i], shapes[i]));
  }
  return out;
}

namespace {

std::size_t count_where(const ModelSpec& spec, bool conv_only) {
  const auto shapes = model_param_shapes(spec);
  std::size_t n = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (conv_only && spec.layers[i].kind != LayerKind::conv2d) continue;
    for (const auto& s : shapes[i]) n += s.numel();
  }
  return n;
}

bool feeds_softmax(const ModelSpec& spec, std::size_t layer) {
  for (std::size_t j = layer + 1; j < spec.layers.size(); ++j) {
    const LayerKind k = spec.layers[j].kind;
    if (k == LayerKind::dropout) continue;
    return k == LayerKind::softmax;
  }
  return false;
}

}  // namespace

std::size_t count_parameters(const ModelSpec& spec) { return count_where(spec, false); }

std::size_t count_conv_parameters(const ModelSpec& spec) { return count_where(spec, true); }

template <typename T>
ParamSet<T> initialize_params(const ModelSpec& spec, std::uint64_t seed) {
  const auto shapes = model_param_shapes(spec);
  Rng rng(seed);
  ParamSet<T> params(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (shapes[i].empty()) continue;
    const Shape& w = shapes[i][0];
    std::size_t fan_in = 0, fan_out = 0;
    if (spec.layers[i].kind == LayerKind::conv2d) {
      const std::size_t area = w[0] * w[1];
      fan_in = area * w[2];
      fan_out = area * w[3];
    } else {
      fan_in = w[0];
      fan_out = w[1];
    }
    const double limit = feeds_softmax(spec, i)
                             ? std::sqrt(6.0 / static_cast<double>(fan_in + fan_out))
                             : std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor<T> weights(w);
    for (std::size_t j = 0; j < weights.size(); ++j) {
      weights[j] = static_cast<T>(rng.uniform(-limit, limit));
    }
    params[i].weights = std::move(weights);
    params[i].bias = Tensor<T>(shapes[i][1]);
  }
  return params;
}

template ParamSet<float> initialize_params(const ModelSpec&, std::uint64_t);
template ParamSet<double> initialize_params(const ModelSpec&, std::uint64_t);

std::string format_model_spec(const ModelSpec& spec) {
  std::ostringstream os;
  os << "model=" << spec.name << '\n';
  os << "input=" << spec.input_shape[0] << 'x' << spec.input_shape[1] << 'x'
     << spec.input_shape[2] << '\n';
  os << "classes=" << spec.num_classes << '\n';
  for (const auto& layer : spec.layers) os << "layer=" << format_layer(layer) << '\n';
  return os.str();
}

ModelSpec parse_model_spec(const std::string& text) {
  ModelSpec spec;
  std::istringstream is(text);
  std::string line;
  bool have_input = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("malformed model line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "model") {
      spec.name = value;
    } else if (key == "input") {
      std::size_t h = 0, w = 0, c = 0;
      char x1 = 0, x2 = 0;
      std::istringstream vs(value);
      if (!(vs >> h >> x1 >> w >> x2 >> c) || x1 != 'x' || x2 != 'x') {
        throw InvalidArgument("malformed input shape '" + value + "'");
      }
      spec.input_shape = Shape{h, w, c};
      have_input = true;
    } else if (key == "classes") {
      spec.num_classes = std::stoul(value);
    } else if (key == "layer") {
      spec.layers.push_back(parse_layer(value));
    } else {
      throw InvalidArgument("unknown model key '" + key + "'");
    }
  }
  if (spec.name.empty() || !have_input) throw InvalidArgument("model description incomplete");
  return spec;
}

}  // namespace ctcv
