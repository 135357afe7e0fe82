#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   "CTCV"            4-byte magic
//   version           u8 (kCheckpointVersion)
//   header_len        u32
//   header            UTF-8 text: model description lines followed by
//                     seed=, epochs_trained=, created= lines
//   tensor_count      u32
//   tensors           per parameter tensor, layer order, weights before bias:
//                       rank u8, dims u32[rank], float32 values
//   checksum          u64 FNV-1a over every byte from header_len to the end
//                     of the last tensor

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctcv/error.hpp"
#include "ctcv/model.hpp"

namespace ctcv {

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t epochs_trained = 0;
  std::string created;  // ISO-8601 UTC
  std::uint8_t format_version = kCheckpointVersion;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  ModelSpec model_spec;
  ParamSet<float> params;
  CheckpointMeta meta;

  bool operator==(const Checkpoint&) const = default;
};

class CheckpointError : public Error {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, checksum_mismatch, shape_disagreement, malformed, io };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string utc_timestamp();

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
struct ImportedWeights {
  ParamSet<T> params;
  std::vector<bool> trainable;
};

// Copies the conv2d parameters of a checkpoint file, in order, into a fresh
// initialization of `spec`. With `freeze_conv`, conv layers are marked
// non-trainable. Throws ShapeError naming the first conv layer whose count or
// shape does not line up.
template <typename T>
ImportedWeights<T> import_pretrained_conv_weights(const std::filesystem::path& path,
                                                  const ModelSpec& spec, bool freeze_conv,
                                                  std::uint64_t seed);

}  // namespace ctcv
