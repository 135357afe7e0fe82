#include "ctcv/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctcv/error.hpp"

namespace ctcv {

AugmentConfig AugmentConfig::neutral() {
  AugmentConfig c;
  c.zoom_min = c.zoom_max = 1.0;
  c.hflip_prob = 0.0;
  c.shear_range = 0.0;
  c.shift_range = 0.0;
  c.brightness_delta = 0.0;
  c.contrast_min = c.contrast_max = 1.0;
  c.saturation_min = c.saturation_max = 1.0;
  return c;
}

void AugmentConfig::validate() const {
  const double values[] = {zoom_min,         zoom_max,     hflip_prob,   shear_range,
                           shift_range,      brightness_delta, contrast_min, contrast_max,
                           saturation_min,   saturation_max};
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("augmentation ranges must be finite");
  }
  auto ordered = [](double lo, double hi, const char* name) {
    if (lo > hi) throw InvalidArgument(std::string(name) + " range is not ordered (min > max)");
  };
  ordered(zoom_min, zoom_max, "zoom");
  ordered(contrast_min, contrast_max, "contrast");
  ordered(saturation_min, saturation_max, "saturation");
  if (zoom_min <= 0.0) throw InvalidArgument("zoom must be positive");
  if (hflip_prob < 0.0 || hflip_prob > 1.0) throw InvalidArgument("hflip_prob must lie in [0, 1]");
  if (shear_range < 0.0 || shift_range < 0.0 || brightness_delta < 0.0) {
    throw InvalidArgument("shear, shift and brightness ranges must be non-negative");
  }
  if (contrast_min < 0.0 || saturation_min < 0.0) {
    throw InvalidArgument("contrast and saturation factors must be non-negative");
  }
}

AugmentParams sample_params(const AugmentConfig& c, Rng& rng) {
  AugmentParams p;
  p.geometric.zoom = rng.uniform(c.zoom_min, c.zoom_max);
  p.geometric.hflip = rng.bernoulli(c.hflip_prob);
  p.geometric.shear = rng.uniform(-c.shear_range, c.shear_range);
  p.geometric.shift_x = rng.uniform(-c.shift_range, c.shift_range);
  p.geometric.shift_y = rng.uniform(-c.shift_range, c.shift_range);
  p.photometric.brightness_delta = rng.uniform(-c.brightness_delta, c.brightness_delta);
  p.photometric.contrast_factor = rng.uniform(c.contrast_min, c.contrast_max);
  p.photometric.saturation_factor = rng.uniform(c.saturation_min, c.saturation_max);
  return p;
}

namespace {

void require_image(const Shape& s) {
  if (s.rank() != 3) throw ShapeError("augmentation expects an H x W x C image, got " + s.str());
}

template <typename T>
T clamp01(T v) {
  return std::clamp(v, T(0), T(1));
}

}  // namespace

template <typename T>
Tensor<T> apply_geometric(const Tensor<T>& image, const GeometricParams& p) {
  require_image(image.shape());
  if (!(p.zoom > 0.0)) throw InvalidArgument("zoom must be positive");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);

  Tensor<T> warped;
  if (p.is_identity_warp()) {
    warped = image;
  } else {
    // Forward map about the centre: q = ctr + zoom * S * (src - ctr) + shift,
    // S = [[1, tan(shear)], [0, 1]]. Each output pixel pulls from the inverse.
    warped = Tensor<T>(image.shape());
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double tx = p.shift_x * static_cast<double>(w);
    const double ty = p.shift_y * static_cast<double>(h);
    const double k = std::tan(p.shear);
    const double inv_zoom = 1.0 / p.zoom;
    const double max_x = static_cast<double>(w - 1), max_y = static_cast<double>(h - 1);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dx = (static_cast<double>(x) - cx - tx) * inv_zoom;
        const double dy = (static_cast<double>(y) - cy - ty) * inv_zoom;
        const double sx = std::clamp(cx + dx - k * dy, 0.0, max_x);
        const double sy = std::clamp(cy + dy, 0.0, max_y);
        const std::size_t x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
        const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double v00 = image[(y0 * w + x0) * c + ch], v01 = image[(y0 * w + x1) * c + ch];
          const double v10 = image[(y1 * w + x0) * c + ch], v11 = image[(y1 * w + x1) * c + ch];
          const double top = v00 + (v01 - v00) * fx;
          const double bottom = v10 + (v11 - v10) * fx;
          warped[(y * w + x) * c + ch] = clamp01(static_cast<T>(top + (bottom - top) * fy));
        }
      }
    }
  }
  if (!p.hflip) return warped;
  Tensor<T> out(image.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const T* src = warped.ptr() + (y * w + (w - 1 - x)) * c;
      std::copy(src, src + c, out.ptr() + (y * w + x) * c);
    }
  }
  return out;
}

template <typename T>
Tensor<T> apply_photometric(const Tensor<T>& image, const PhotometricParams& p) {
  require_image(image.shape());
  Tensor<T> out = image;
  if (p.brightness_delta != 0.0) {
    const T delta = static_cast<T>(p.brightness_delta);
    for (auto& v : out.data()) v = clamp01(v + delta);
  }
  if (p.contrast_factor != 1.0) {
    double sum = 0.0;
    for (T v : out.data()) sum += v;
    const double mean = sum / static_cast<double>(out.size());
    for (auto& v : out.data()) {
      v = clamp01(static_cast<T>(mean + p.contrast_factor * (static_cast<double>(v) - mean)));
    }
  }
  if (p.saturation_factor != 1.0 && image.dim(2) == 3) {
    const std::size_t pixels = image.dim(0) * image.dim(1);
    for (std::size_t i = 0; i < pixels; ++i) {
      T* px = out.ptr() + i * 3;
      const double lum = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
      for (int ch = 0; ch < 3; ++ch) {
        px[ch] = clamp01(static_cast<T>(lum + p.saturation_factor * (px[ch] - lum)));
      }
    }
  }
  return out;
}

template Tensor<float> apply_geometric(const Tensor<float>&, const GeometricParams&);
template Tensor<double> apply_geometric(const Tensor<double>&, const GeometricParams&);
template Tensor<float> apply_photometric(const Tensor<float>&, const PhotometricParams&);
template Tensor<double> apply_photometric(const Tensor<double>&, const PhotometricParams&);

}  // namespace ctcv
