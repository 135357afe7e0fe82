#pragma once

// Training-time augmentation on H x W x C images with values in [0, 1].

#include <cstdint>

#include "ctcv/random.hpp"
#include "ctcv/tensor.hpp"

namespace ctcv {

struct AugmentConfig {
  double zoom_min = 0.9;
  double zoom_max = 1.1;
  double hflip_prob = 0.5;
  double shear_range = 0.1;  // radians, symmetric
  double shift_range = 0.1;  // fraction of width/height, symmetric
  double brightness_delta = 0.1;
  double contrast_min = 0.9;
  double contrast_max = 1.1;
  double saturation_min = 0.9;
  double saturation_max = 1.1;
  std::uint64_t seed = 0;

  // Every draw is the identity transform.
  static AugmentConfig neutral();

  // Throws InvalidArgument on unordered ranges, probabilities outside
  // [0, 1], non-positive zoom or non-finite values.
  void validate() const;

  bool operator==(const AugmentConfig&) const = default;
};

struct GeometricParams {
  double zoom = 1.0;
  bool hflip = false;
  double shear = 0.0;
  double shift_x = 0.0;
  double shift_y = 0.0;

  bool is_identity_warp() const { return zoom == 1.0 && shear == 0.0 && shift_x == 0.0 && shift_y == 0.0; }
};

struct PhotometricParams {
  double brightness_delta = 0.0;
  double contrast_factor = 1.0;
  double saturation_factor = 1.0;
};

struct AugmentParams {
  GeometricParams geometric;
  PhotometricParams photometric;
};

AugmentParams sample_params(const AugmentConfig& config, Rng& rng);

// One affine warp about the image centre (zoom, shear, shift), bilinear
// sampling with edge replication, then the optional horizontal mirror.
template <typename T>
Tensor<T> apply_geometric(const Tensor<T>& image, const GeometricParams& params);

// brightness, then contrast about the image mean, then saturation against
// per-pixel luminance (3-channel only); each step clamps to [0, 1].
template <typename T>
Tensor<T> apply_photometric(const Tensor<T>& image, const PhotometricParams& params);

template <typename T>
Tensor<T> augment_image(const Tensor<T>& image, const AugmentParams& params) {
  return apply_photometric(apply_geometric(image, params.geometric), params.photometric);
}

}  // namespace ctcv
