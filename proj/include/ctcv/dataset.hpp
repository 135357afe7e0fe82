#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctcv/augment.hpp"
#include "ctcv/image_io.hpp"
#include "ctcv/tensor.hpp"

namespace ctcv {

// covid is the positive class and the second softmax column.
enum class Label : int { normal = 0, covid = 1 };

inline constexpr std::size_t kNumClasses = 2;

const char* label_name(Label label);
Label parse_label(const std::string& name);

struct ImageSample {
  std::string path;  // relative to the dataset root, '/' separated
  Label label = Label::normal;

  bool operator==(const ImageSample&) const = default;
};

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct LabeledDataset {
  std::filesystem::path root;
  std::vector<ImageSample> samples;
  std::vector<SkippedFile> skipped;

  std::size_t count(Label label) const;
  std::size_t size() const { return samples.size(); }
  std::filesystem::path full_path(const ImageSample& s) const { return root / s.path; }
};

// Collects <root>/covid/* and <root>/normal/*, sorted by relative path.
// Files whose header cannot be decoded land in `skipped`.
LabeledDataset scan_dataset(const std::filesystem::path& root);

// ---- decoding ----

// Bilinear resize with half-pixel centres and edge clamping; H x W x C in, out.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& image, std::size_t height, std::size_t width);

// 8-bit image to H x W x channels in [0, 1]: gray via 0.299R + 0.587G + 0.114B
// when one channel is requested, replicated gray when three are, then
// bilinear resize and division by 255.
template <typename T>
Tensor<T> image_to_tensor(const Image8& image, std::size_t height, std::size_t width,
                          std::size_t channels);

template <typename T>
Tensor<T> decode_and_resize(const std::filesystem::path& path, std::size_t height,
                            std::size_t width, std::size_t channels);

// Back to 8 bits (round to nearest) for previews. 1 or 3 channels.
template <typename T>
Image8 tensor_to_image(const Tensor<T>& image);

// ---- splitting ----

enum class SplitRole { train, val, test };
const char* split_name(SplitRole role);
SplitRole parse_split(const std::string& name);

struct SplitDataset {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
  std::uint64_t seed = 0;

  const LabeledDataset& part(SplitRole role) const;
};

// Per class: seeded shuffle, then cuts at round(n * r0) and round(n * (r0 + r1)).
// Each part is sorted by path afterwards.
SplitDataset stratified_split(const LabeledDataset& ds, const std::array<double, 3>& ratios,
                              std::uint64_t seed);

// Tab-separated "path<TAB>label<TAB>split" lines: train, val, test blocks,
// each sorted by path.
std::string format_manifest(const SplitDataset& split);
void write_manifest(const std::filesystem::path& path, const SplitDataset& split);
SplitDataset parse_manifest(const std::string& text, const std::filesystem::path& root);
SplitDataset read_manifest(const std::filesystem::path& path, const std::filesystem::path& root);

// ---- batching ----

// Index batches for one epoch: a permutation keyed by (seed, epoch) when
// shuffling, identity order otherwise; the last batch may be short.
std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size,
                                                 bool shuffle, std::uint64_t seed,
                                                 std::uint64_t epoch);

// Random access to decoded, model-sized images.
template <typename T>
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual Label label(std::size_t i) const = 0;
  virtual Tensor<T> image(std::size_t i) const = 0;  // H x W x C
  virtual Shape image_shape() const = 0;
  virtual std::string describe(std::size_t i) const = 0;
};

template <typename T>
class FileSampleSource final : public SampleSource<T> {
 public:
  FileSampleSource(LabeledDataset ds, std::size_t height, std::size_t width, std::size_t channels)
      : ds_(std::move(ds)), height_(height), width_(width), channels_(channels) {}

  std::size_t size() const override { return ds_.samples.size(); }
  Label label(std::size_t i) const override { return ds_.samples[i].label; }
  Tensor<T> image(std::size_t i) const override;
  Shape image_shape() const override { return Shape{height_, width_, channels_}; }
  std::string describe(std::size_t i) const override { return ds_.full_path(ds_.samples[i]).string(); }

  const LabeledDataset& dataset() const { return ds_; }

 private:
  LabeledDataset ds_;
  std::size_t height_, width_, channels_;
};

template <typename T>
class MemorySampleSource final : public SampleSource<T> {
 public:
  MemorySampleSource(std::vector<Tensor<T>> images, std::vector<Label> labels);

  std::size_t size() const override { return images_.size(); }
  Label label(std::size_t i) const override { return labels_[i]; }
  Tensor<T> image(std::size_t i) const override { return images_[i]; }
  Shape image_shape() const override { return images_.front().shape(); }
  std::string describe(std::size_t i) const override { return "memory:" + std::to_string(i); }

 private:
  std::vector<Tensor<T>> images_;
  std::vector<Label> labels_;
};

template <typename T>
struct Batch {
  Tensor<T> images;  // N x H x W x C
  Tensor<T> labels;  // N x 2 one-hot
  std::vector<std::size_t> indices;
};

// Stacks the listed samples. Augmentation is only legal for the training
// split: passing `augment` with any other role throws std::logic_error.
// Per-sample parameters come from a stream keyed by (seed, epoch, index).
template <typename T>
Batch<T> assemble_batch(const SampleSource<T>& source, const std::vector<std::size_t>& indices,
                        SplitRole role, const AugmentConfig* augment = nullptr,
                        std::uint64_t epoch = 0);

// Pull-style iteration over one epoch.
template <typename T>
class BatchStream {
 public:
  BatchStream(const SampleSource<T>& source, std::size_t batch_size, bool shuffle,
              std::uint64_t seed, std::uint64_t epoch, SplitRole role = SplitRole::train,
              const AugmentConfig* augment = nullptr);

  std::optional<Batch<T>> next();
  std::size_t batch_count() const { return plan_.size(); }

 private:
  const SampleSource<T>& source_;
  std::vector<std::vector<std::size_t>> plan_;
  std::size_t cursor_ = 0;
  SplitRole role_;
  const AugmentConfig* augment_;
  std::uint64_t epoch_;
};

}  // namespace ctcv
