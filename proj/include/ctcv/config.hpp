#pragma once

// Run configuration: flat UTF-8 "key = value" lines, '#' starts a comment,
// unknown keys are rejected.

#include <cstddef>
#include <filesystem>
#include <string>

#include "ctcv/trainer.hpp"

namespace ctcv {

enum class Precision { f32, f64 };

struct RunConfig {
  std::filesystem::path data_root;
  std::filesystem::path manifest;
  std::filesystem::path output_dir = ".";
  std::filesystem::path checkpoint;  // defaults to <output_dir>/best.ckpt
  std::filesystem::path pretrained_weights;
  std::size_t input_size = 0;        // 0: the model's default
  Precision precision = Precision::f32;
  TrainConfig train;

  std::filesystem::path checkpoint_path() const {
    return checkpoint.empty() ? output_dir / "best.ckpt" : checkpoint;
  }
  std::size_t resolved_input_size() const {
    return input_size ? input_size : default_input_size(train.model);
  }
};

// Throws ConfigError naming the offending line or key.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ctcv
