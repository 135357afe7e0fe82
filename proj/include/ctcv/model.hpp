#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ctcv/layers.hpp"

namespace ctcv {

inline constexpr const char* kSmallCnnName = "small-cnn";
inline constexpr const char* kVgg16Name = "vgg16";

struct ModelSpec {
  std::string name;
  Shape input_shape;  // H x W x C, per sample
  std::vector<LayerSpec> layers;
  std::size_t num_classes = 2;

  Shape batched_input(std::size_t batch) const {
    return Shape{batch, input_shape[0], input_shape[1], input_shape[2]};
  }

  bool operator==(const ModelSpec&) const = default;
};

// Three conv(32, 3x3, same) -> relu -> maxpool(2) blocks, flatten,
// dense(64) -> relu, dense(2) -> softmax. Single-channel input.
ModelSpec build_small_cnn(std::size_t input_size = 256);

// The 13-layer VGG16 convolutional stack with five 2x2 max pools, followed by
// global average pooling, dropout(0.5) and a 2-way softmax head. Three-channel input.
ModelSpec build_vgg16(std::size_t input_size = 224);

ModelSpec build_model(const std::string& name, std::size_t input_size);
std::size_t default_input_size(const std::string& name);

// Batched output shape after every layer; element 0 is the input. Throws
// ShapeError naming the failing layer.
std::vector<Shape> trace_shapes(const ModelSpec& spec, std::size_t batch = 1);

// Shape inference end to end, softmax head of width num_classes.
void validate_model(const ModelSpec& spec);

// Per-layer weight/bias shapes (empty for parameter-free layers).
std::vector<std::vector<Shape>> model_param_shapes(const ModelSpec& spec);

std::size_t count_parameters(const ModelSpec& spec);
// Parameters of conv2d layers only.
std::size_t count_conv_parameters(const ModelSpec& spec);

// He-uniform for layers feeding a ReLU, Glorot-uniform for the layer feeding
// the softmax, zero biases; one generator seeded with `seed`, layer order.
template <typename T>
ParamSet<T> initialize_params(const ModelSpec& spec, std::uint64_t seed);

// Line-oriented text form used inside checkpoints.
std::string format_model_spec(const ModelSpec& spec);
ModelSpec parse_model_spec(const std::string& text);

}  // namespace ctcv
