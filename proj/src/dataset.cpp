#include "ctcv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ctcv/error.hpp"
#include "ctcv/random.hpp"

namespace ctcv {

namespace fs = std::filesystem;

const char* label_name(Label label) { return label == Label::covid ? "covid" : "normal"; }

Label parse_label(const std::string& name) {
  if (name == "covid") return Label::covid;
  if (name == "normal") return Label::normal;
  throw InvalidArgument("unknown label '" + name + "'");
}

std::size_t LabeledDataset::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const auto& s) { return s.label == label; }));
}

LabeledDataset scan_dataset(const fs::path& root) {
  LabeledDataset ds;
  ds.root = root;
  for (Label label : {Label::covid, Label::normal}) {
    const fs::path dir = root / label_name(label);
    if (!fs::is_directory(dir)) {
      throw IoError("missing class directory " + dir.string());
    }
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
      const std::string rel = std::string(label_name(label)) + "/" + name;
      if (probe_image(dir / name)) {
        ds.samples.push_back({rel, label});
      } else {
        ds.skipped.push_back({rel, "not a decodable 8-bit PNG/JPEG image"});
      }
    }
  }
  if (ds.samples.empty()) throw IoError("dataset at " + root.string() + " has no decodable images");
  std::sort(ds.samples.begin(), ds.samples.end(),
            [](const auto& a, const auto& b) { return a.path < b.path; });
  return ds;
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& image, std::size_t height, std::size_t width) {
  if (image.shape().rank() != 3) throw ShapeError("resize expects H x W x C, got " + image.shape().str());
  const std::size_t ih = image.dim(0), iw = image.dim(1), c = image.dim(2);
  if (ih == height && iw == width) return image;
  Tensor<T> out(Shape{height, width, c});
  const double sy = static_cast<double>(ih) / static_cast<double>(height);
  const double sx = static_cast<double>(iw) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy_src = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                     static_cast<double>(ih - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy_src);
    const std::size_t y1 = std::min(y0 + 1, ih - 1);
    const double fy = fy_src - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx_src = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                       static_cast<double>(iw - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx_src);
      const std::size_t x1 = std::min(x0 + 1, iw - 1);
      const double fx = fx_src - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v00 = image[(y0 * iw + x0) * c + ch], v01 = image[(y0 * iw + x1) * c + ch];
        const double v10 = image[(y1 * iw + x0) * c + ch], v11 = image[(y1 * iw + x1) * c + ch];
        const double top = v00 + (v01 - v00) * fx;
        const double bottom = v10 + (v11 - v10) * fx;
        out[(y * width + x) * c + ch] = static_cast<T>(top + (bottom - top) * fy);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> image_to_tensor(const Image8& img, std::size_t height, std::size_t width,
                          std::size_t channels) {
  if (channels != 1 && channels != 3) throw InvalidArgument("channels must be 1 or 3");
  const std::size_t pixels = img.width * img.height;
  Tensor<T> native(Shape{img.height, img.width, channels});
  for (std::size_t i = 0; i < pixels; ++i) {
    const std::uint8_t* px = img.pixels.data() + i * img.channels;
    if (channels == 1) {
      native[i] = img.channels == 1 ? static_cast<T>(px[0])
                                    : static_cast<T>(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
    } else {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        native[i * 3 + ch] = static_cast<T>(img.channels == 1 ? px[0] : px[ch]);
      }
    }
  }
  Tensor<T> out = resize_bilinear(native, height, width);
  for (auto& v : out.data()) v = std::clamp(v / T(255), T(0), T(1));
  return out;
}

template <typename T>
Tensor<T> decode_and_resize(const fs::path& path, std::size_t height, std::size_t width,
                            std::size_t channels) {
  return image_to_tensor<T>(read_image(path), height, width, channels);
}

template <typename T>
Image8 tensor_to_image(const Tensor<T>& image) {
  if (image.shape().rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw ShapeError("expected H x W x {1,3} image, got " + image.shape().str());
  }
  Image8 img{image.dim(1), image.dim(0), image.dim(2), std::vector<std::uint8_t>(image.size())};
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

const char* split_name(SplitRole role) {
  switch (role) {
    case SplitRole::train: return "train";
    case SplitRole::val: return "val";
    case SplitRole::test: return "test";
  }
  return "?";
}

SplitRole parse_split(const std::string& name) {
  if (name == "train") return SplitRole::train;
  if (name == "val") return SplitRole::val;
  if (name == "test") return SplitRole::test;
  throw InvalidArgument("unknown split '" + name + "' (expected train, val or test)");
}

const LabeledDataset& SplitDataset::part(SplitRole role) const {
  switch (role) {
    case SplitRole::train: return train;
    case SplitRole::val: return val;
    case SplitRole::test: return test;
  }
  return train;
}

namespace {

void sort_samples(LabeledDataset& ds) {
  std::sort(ds.samples.begin(), ds.samples.end(),
            [](const auto& a, const auto& b) { return a.path < b.path; });
}

}  // namespace

SplitDataset stratified_split(const LabeledDataset& ds, const std::array<double, 3>& ratios,
                              std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw InvalidArgument("ratios must sum to 1");
  }
  SplitDataset out;
  out.seed = seed;
  out.train.root = out.val.root = out.test.root = ds.root;
  for (Label label : {Label::normal, Label::covid}) {
    std::vector<ImageSample> members;
    for (const auto& s : ds.samples) {
      if (s.label == label) members.push_back(s);
    }
    if (members.size() < 3) {
      throw InvalidArgument(std::string("class '") + label_name(label) + "' has " +
                            std::to_string(members.size()) + " samples; at least 3 are needed");
    }
    // Sort first so the result depends only on the sample set, not scan order.
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(label)});
    rng.shuffle(members);
    const double n = static_cast<double>(members.size());
    const std::size_t cut1 = static_cast<std::size_t>(std::llround(n * ratios[0]));
    const std::size_t cut2 = static_cast<std::size_t>(std::llround(n * (ratios[0] + ratios[1])));
    for (std::size_t i = 0; i < members.size(); ++i) {
      LabeledDataset& dst = i < cut1 ? out.train : (i < cut2 ? out.val : out.test);
      dst.samples.push_back(members[i]);
    }
  }
  sort_samples(out.train);
  sort_samples(out.val);
  sort_samples(out.test);
  return out;
}

std::string format_manifest(const SplitDataset& split) {
  std::ostringstream os;
  for (SplitRole role : {SplitRole::train, SplitRole::val, SplitRole::test}) {
    for (const auto& s : split.part(role).samples) {
      os << s.path << '\t' << label_name(s.label) << '\t' << split_name(role) << '\n';
    }
  }
  return os.str();
}

void write_manifest(const fs::path& path, const SplitDataset& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << format_manifest(split);
  if (!out) throw IoError("failed writing manifest " + path.string());
}

SplitDataset parse_manifest(const std::string& text, const fs::path& root) {
  SplitDataset split;
  split.train.root = split.val.root = split.test.root = root;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw IoError("manifest line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    if (!seen.insert(fields[0]).second) {
      throw IoError("manifest line " + std::to_string(lineno) + ": duplicate path " + fields[0]);
    }
    ImageSample s{fields[0], parse_label(fields[1])};
    LabeledDataset* dst = nullptr;
    switch (parse_split(fields[2])) {
      case SplitRole::train: dst = &split.train; break;
      case SplitRole::val: dst = &split.val; break;
      case SplitRole::test: dst = &split.test; break;
    }
    dst->samples.push_back(std::move(s));
  }
  sort_samples(split.train);
  sort_samples(split.val);
  sort_samples(split.test);
  return split;
}

SplitDataset read_manifest(const fs::path& path, const fs::path& root) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), root);
}

std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size,
                                                 bool shuffle, std::uint64_t seed,
                                                 std::uint64_t epoch) {
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) {
    Rng rng = Rng::derive(seed, {0x5348ULL, epoch});
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t i = 0; i < n; i += batch_size) {
    plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                      order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return plan;
}

template <typename T>
Tensor<T> FileSampleSource<T>::image(std::size_t i) const {
  return decode_and_resize<T>(ds_.full_path(ds_.samples[i]), height_, width_, channels_);
}

template <typename T>
MemorySampleSource<T>::MemorySampleSource(std::vector<Tensor<T>> images, std::vector<Label> labels)
    : images_(std::move(images)), labels_(std::move(labels)) {
  if (images_.empty() || images_.size() != labels_.size()) {
    throw InvalidArgument("memory source needs one label per image and at least one image");
  }
  for (const auto& img : images_) {
    if (img.shape() != images_.front().shape()) {
      throw ShapeError("memory source images differ in shape: " + img.shape().str() + " vs " +
                       images_.front().shape().str());
    }
  }
}

template <typename T>
Batch<T> assemble_batch(const SampleSource<T>& source, const std::vector<std::size_t>& indices,
                        SplitRole role, const AugmentConfig* augment, std::uint64_t epoch) {
  if (augment && role != SplitRole::train) {
    throw std::logic_error(std::string("augmentation requested for the ") + split_name(role) +
                           " split; only training batches may be augmented");
  }
  if (indices.empty()) throw InvalidArgument("empty batch");
  const Shape s = source.image_shape();
  const std::size_t per = s.numel();
  Batch<T> batch;
  batch.images = Tensor<T>(Shape{indices.size(), s[0], s[1], s[2]});
  std::vector<int> classes;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t idx = indices[b];
    Tensor<T> img = source.image(idx);
    if (img.shape() != s) {
      throw ShapeError(source.describe(idx) + ": decoded shape " + img.shape().str() +
                       " expected " + s.str());
    }
    if (augment) {
      Rng rng = Rng::derive(augment->seed, {epoch, static_cast<std::uint64_t>(idx)});
      img = augment_image(img, sample_params(*augment, rng));
    }
    std::copy(img.ptr(), img.ptr() + per, batch.images.ptr() + b * per);
    classes.push_back(static_cast<int>(source.label(idx)));
  }
  batch.labels = Tensor<T>(Shape{indices.size(), kNumClasses});
  for (std::size_t b = 0; b < classes.size(); ++b) {
    batch.labels[b * kNumClasses + static_cast<std::size_t>(classes[b])] = T(1);
  }
  batch.indices = indices;
  return batch;
}

template <typename T>
BatchStream<T>::BatchStream(const SampleSource<T>& source, std::size_t batch_size, bool shuffle,
                            std::uint64_t seed, std::uint64_t epoch, SplitRole role,
                            const AugmentConfig* augment)
    : source_(source),
      plan_(batch_plan(source.size(), batch_size, shuffle, seed, epoch)),
      role_(role),
      augment_(augment),
      epoch_(epoch) {}

template <typename T>
std::optional<Batch<T>> BatchStream<T>::next() {
  if (cursor_ >= plan_.size()) return std::nullopt;
  return assemble_batch(source_, plan_[cursor_++], role_, augment_, epoch_);
}

#define CTCV_INSTANTIATE_DATASET(T)                                                          \
  template Tensor<T> resize_bilinear(const Tensor<T>&, std::size_t, std::size_t);          \
  template Tensor<T> image_to_tensor(const Image8&, std::size_t, std::size_t, std::size_t); \
  template Tensor<T> decode_and_resize(const fs::path&, std::size_t, std::size_t,           \
                                       std::size_t);                                        \
  template Image8 tensor_to_image(const Tensor<T>&);                                        \
  template class FileSampleSource<T>;                                                       \
  template class MemorySampleSource<T>;                                                     \
  template Batch<T> assemble_batch(const SampleSource<T>&, const std::vector<std::size_t>&, \
                                   SplitRole, const AugmentConfig*, std::uint64_t);         \
  template class BatchStream<T>;

CTCV_INSTANTIATE_DATASET(float)
CTCV_INSTANTIATE_DATASET(double)

}  // namespace ctcv
