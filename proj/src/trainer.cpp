#include "ctcv/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ctcv/error.hpp"
#include "ctcv/loss.hpp"

namespace ctcv {

void TrainConfig::validate() const {
  if (model != kSmallCnnName && model != kVgg16Name) {
    throw ConfigError("unknown model '" + model + "' (expected small-cnn or vgg16)");
  }
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(optimizer.lr > 0.0)) throw ConfigError("learning_rate must be positive");
  if (transfer && model != kVgg16Name) throw ConfigError("transfer applies to vgg16 only");
  try {
    augment.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

std::size_t default_epochs(const std::string& model) { return model == kVgg16Name ? 50 : 25; }

std::string format_epoch_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,train_loss,train_accuracy,val_loss,val_accuracy,wall_seconds\n";
  for (const auto& e : log) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.3f\n", e.epoch, e.train_loss,
                  e.train_accuracy, e.val_loss, e.val_accuracy, e.wall_seconds);
    os << buf;
  }
  return os.str();
}

std::vector<EpochLog> parse_epoch_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("epoch,", 0) != 0) {
    throw InvalidArgument("epoch log lacks its header row");
  }
  std::vector<EpochLog> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    EpochLog e;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf", &e.epoch, &e.train_loss,
                    &e.train_accuracy, &e.val_loss, &e.val_accuracy, &e.wall_seconds) != 6) {
      throw InvalidArgument("malformed epoch log row '" + line + "'");
    }
    out.push_back(e);
  }
  return out;
}

template <typename T>
Checkpoint make_checkpoint(const Network<T>& net, const CheckpointMeta& meta) {
  return Checkpoint{net.spec(), cast_params<float>(net.params()), meta};
}

template <typename T>
Network<T> network_from_checkpoint(const Checkpoint& ckpt) {
  return Network<T>(ckpt.model_spec, cast_params<T>(ckpt.params));
}

template <typename T>
Evaluation evaluate(const Network<T>& net, const SampleSource<T>& data, std::size_t batch_size,
                    double threshold) {
  if (data.size() == 0) throw InvalidArgument("cannot evaluate on an empty dataset");
  Evaluation ev;
  double loss_sum = 0.0;
  for (const auto& idx : batch_plan(data.size(), batch_size, false, 0, 0)) {
    const Batch<T> batch = assemble_batch(data, idx, SplitRole::test);
    const Tensor<T> probs = net.predict(batch.images);
    loss_sum += static_cast<double>(cross_entropy_loss(probs, batch.labels).loss) *
                static_cast<double>(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b) {
      ev.scores.push_back({static_cast<double>(probs[b * kNumClasses + 1]),
                           data.label(idx[b]) == Label::covid});
    }
  }
  ev.report = compute_metrics(ev.scores, loss_sum / static_cast<double>(data.size()), threshold);
  return ev;
}

Evaluation evaluate_checkpoint(const Checkpoint& ckpt, const LabeledDataset& ds,
                               std::size_t batch_size, double threshold) {
  const Network<float> net = network_from_checkpoint<float>(ckpt);
  const Shape& in = ckpt.model_spec.input_shape;
  FileSampleSource<float> source(ds, in[0], in[1], in[2]);
  return evaluate(net, source, batch_size, threshold);
}

template <typename T>
Prediction predict_image(const Network<T>& net, const std::filesystem::path& image, double threshold) {
  const Shape& in = net.spec().input_shape;
  Tensor<T> x = decode_and_resize<T>(image, in[0], in[1], in[2]);
  const Tensor<T> probs = net.predict(std::move(x).reshaped(Shape{1, in[0], in[1], in[2]}));
  Prediction p;
  p.normal_probability = static_cast<double>(probs[0]);
  p.covid_probability = static_cast<double>(probs[1]);
  p.label = p.covid_probability >= threshold ? Label::covid : Label::normal;
  return p;
}

template <typename T>
Trainer<T>::Trainer(Network<T>& net, const SampleSource<T>& train, const SampleSource<T>& val,
                    TrainConfig config, std::uint64_t epochs_already_trained)
    : net_(net), train_(train), val_(val), config_(std::move(config)),
      epoch_offset_(epochs_already_trained) {
  config_.validate();
  if (train_.size() == 0) throw InvalidArgument("training split is empty");
  if (val_.size() == 0) throw InvalidArgument("validation split is empty");
  const Shape& in = net_.spec().input_shape;
  for (const SampleSource<T>* src : {&train_, &val_}) {
    if (src->image_shape() != in) {
      throw ShapeError("data yields " + src->image_shape().str() + " images but model '" +
                       net_.spec().name + "' expects " + in.str());
    }
  }
}

template <typename T>
EpochLog Trainer<T>::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t epoch = log_.size() + 1;
  const std::uint64_t global_epoch = epoch_offset_ + epoch;
  const AugmentConfig* augment = config_.augment_enabled ? &config_.augment : nullptr;

  double loss_sum = 0.0;
  std::size_t correct = 0;
  const auto plan = batch_plan(train_.size(), config_.batch_size, true, config_.seed, global_epoch);
  for (std::size_t b = 0; b < plan.size(); ++b) {
    const Batch<T> batch = assemble_batch(train_, plan[b], SplitRole::train, augment, global_epoch);
    Rng dropout_rng = Rng::derive(config_.seed, {0xD80ULL, global_epoch, b});
    const Tensor<T> probs = net_.forward(batch.images, Mode::train, dropout_rng);
    const LossResult<T> loss = cross_entropy_loss(probs, batch.labels);
    if (!std::isfinite(static_cast<double>(loss.loss))) {
      throw NumericError("non-finite loss at epoch " + std::to_string(global_epoch) + ", batch " +
                         std::to_string(b + 1));
    }
    const GradientSet<T> grads = net_.backward_from_logits(loss.grad_logits);
    try {
      optimizer_step(net_.params(), grads, opt_state_, config_.optimizer, net_.trainable());
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(global_epoch) +
                         ", batch " + std::to_string(b + 1));
    }
    loss_sum += static_cast<double>(loss.loss) * static_cast<double>(plan[b].size());
    for (std::size_t i = 0; i < plan[b].size(); ++i) {
      const bool predicted = static_cast<double>(probs[i * kNumClasses + 1]) >= kDecisionThreshold;
      correct += predicted == (batch.labels[i * kNumClasses + 1] == T(1)) ? 1 : 0;
    }
  }

  const Evaluation val = evaluate(net_, val_, config_.batch_size);
  EpochLog entry;
  entry.epoch = epoch;
  entry.train_loss = loss_sum / static_cast<double>(train_.size());
  entry.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_.size());
  entry.val_loss = val.report.loss;
  entry.val_accuracy = val.report.accuracy;
  if (entry.val_accuracy > best_val_accuracy_) {
    best_val_accuracy_ = entry.val_accuracy;
    best_ = make_checkpoint(net_, CheckpointMeta{config_.seed, global_epoch, utc_timestamp()});
  }
  entry.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log_.push_back(entry);
  return entry;
}

template <typename T>
TrainResult train(Network<T>& net, const SampleSource<T>& train_data, const SampleSource<T>& val_data,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch,
                  std::uint64_t epochs_already_trained) {
  Trainer<T> trainer(net, train_data, val_data, config, epochs_already_trained);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const EpochLog entry = trainer.run_epoch();
    if (on_epoch) on_epoch(entry);
  }
  return TrainResult{*trainer.best(), trainer.log()};
}

#define CTCV_INSTANTIATE_TRAINER(T)                                                              \
  template Checkpoint make_checkpoint(const Network<T>&, const CheckpointMeta&);                 \
  template Network<T> network_from_checkpoint(const Checkpoint&);                                \
  template Evaluation evaluate(const Network<T>&, const SampleSource<T>&, std::size_t, double);  \
  template Prediction predict_image(const Network<T>&, const std::filesystem::path&, double);    \
  template class Trainer<T>;                                                                     \
  template TrainResult train(Network<T>&, const SampleSource<T>&, const SampleSource<T>&,        \
                             const TrainConfig&, const std::function<void(const EpochLog&)>&,    \
                             std::uint64_t);

CTCV_INSTANTIATE_TRAINER(float)
CTCV_INSTANTIATE_TRAINER(double)

}  // namespace ctcv
