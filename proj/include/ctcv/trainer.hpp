#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctcv/augment.hpp"
#include "ctcv/checkpoint.hpp"
#include "ctcv/dataset.hpp"
#include "ctcv/metrics.hpp"
#include "ctcv/network.hpp"
#include "ctcv/optimizer.hpp"

namespace ctcv {

struct TrainConfig {
  std::string model = kSmallCnnName;
  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer;
  std::uint64_t seed = 42;
  bool augment_enabled = true;
  AugmentConfig augment;
  bool transfer = false;  // vgg16: conv stack frozen after importing weights

  void validate() const;
};

// 25 for small-cnn, 50 for vgg16.
std::size_t default_epochs(const std::string& model);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double wall_seconds = 0.0;
};

std::string format_epoch_csv(const std::vector<EpochLog>& log);
std::vector<EpochLog> parse_epoch_csv(const std::string& text);

template <typename T>
Checkpoint make_checkpoint(const Network<T>& net, const CheckpointMeta& meta);

template <typename T>
Network<T> network_from_checkpoint(const Checkpoint& ckpt);

struct Evaluation {
  MetricsReport report;
  std::vector<ScoredSample> scores;
};

// Eval-mode pass over every sample, no augmentation. Parameters are untouched.
template <typename T>
Evaluation evaluate(const Network<T>& net, const SampleSource<T>& data, std::size_t batch_size = 32,
                    double threshold = kDecisionThreshold);

Evaluation evaluate_checkpoint(const Checkpoint& ckpt, const LabeledDataset& ds,
                               std::size_t batch_size = 32, double threshold = kDecisionThreshold);

struct Prediction {
  Label label = Label::normal;
  double covid_probability = 0.0;
  double normal_probability = 0.0;
};

template <typename T>
Prediction predict_image(const Network<T>& net, const std::filesystem::path& image,
                         double threshold = kDecisionThreshold);

// Epoch-at-a-time training. Keeps a float snapshot of the parameters from
// the epoch with the best validation accuracy (earliest on ties).
template <typename T>
class Trainer {
 public:
  Trainer(Network<T>& net, const SampleSource<T>& train, const SampleSource<T>& val,
          TrainConfig config, std::uint64_t epochs_already_trained = 0);

  EpochLog run_epoch();

  std::size_t epochs_done() const { return log_.size(); }
  const std::vector<EpochLog>& log() const { return log_; }
  const std::optional<Checkpoint>& best() const { return best_; }
  double best_val_accuracy() const { return best_val_accuracy_; }

 private:
  Network<T>& net_;
  const SampleSource<T>& train_;
  const SampleSource<T>& val_;
  TrainConfig config_;
  OptimizerState<T> opt_state_;
  std::uint64_t epoch_offset_;
  std::vector<EpochLog> log_;
  std::optional<Checkpoint> best_;
  double best_val_accuracy_ = -1.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

template <typename T>
TrainResult train(Network<T>& net, const SampleSource<T>& train_data, const SampleSource<T>& val_data,
                  const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {},
                  std::uint64_t epochs_already_trained = 0);

}  // namespace ctcv
