// ctcv: chest-CT COVID/normal classification pipeline.
//
//   ctcv split    --data <dir> [--ratios 0.6,0.2,0.2] [--seed N] --out <manifest>
//   ctcv train    --config <file> [--resume <ckpt>]
//   ctcv evaluate --ckpt <file> --data <dir | manifest:split> [--root <dir>] [--out <file>]
//   ctcv predict  --ckpt <file> --image <path>
//   ctcv augment-preview --config <file> --image <path> --n <k> --out <dir>
//
// Exit codes: 0 success, 2 usage/config/input errors, 3 numeric failure.

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "ctcv/augment.hpp"
#include "ctcv/checkpoint.hpp"
#include "ctcv/config.hpp"
#include "ctcv/dataset.hpp"
#include "ctcv/error.hpp"
#include "ctcv/kernels/kernels.hpp"
#include "ctcv/metrics.hpp"
#include "ctcv/trainer.hpp"

namespace fs = std::filesystem;
using namespace ctcv;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw InvalidArgument("--ratios takes exactly three values");
    try {
      r[i++] = std::stod(part);
    } catch (const std::exception&) {
      throw InvalidArgument("--ratios: '" + part + "' is not a number");
    }
  }
  if (i != 3) throw InvalidArgument("--ratios takes exactly three values");
  return r;
}

void print_split_table(const SplitDataset& split) {
  std::printf("%-8s %8s %8s %8s %8s\n", "class", "train", "val", "test", "total");
  std::size_t col[4] = {};
  for (Label label : {Label::covid, Label::normal}) {
    const std::size_t a = split.train.count(label), b = split.val.count(label),
                      c = split.test.count(label);
    std::printf("%-8s %8zu %8zu %8zu %8zu\n", label_name(label), a, b, c, a + b + c);
    col[0] += a;
    col[1] += b;
    col[2] += c;
    col[3] += a + b + c;
  }
  std::printf("%-8s %8zu %8zu %8zu %8zu\n", "total", col[0], col[1], col[2], col[3]);
}

int cmd_split(const std::string& data, const std::string& ratios, std::uint64_t seed,
              const std::string& out) {
  const auto r = parse_ratios(ratios);
  const LabeledDataset ds = scan_dataset(data);
  for (const auto& s : ds.skipped) std::cerr << "skipped " << s.path << ": " << s.reason << '\n';
  const SplitDataset split = stratified_split(ds, r, seed);
  write_manifest(out, split);
  print_split_table(split);
  return 0;
}

// Resolves "<dir>" or "<manifest>:<split>" into a dataset.
LabeledDataset resolve_data(const std::string& arg, const std::string& root) {
  if (fs::is_directory(arg)) return scan_dataset(arg);
  const auto colon = arg.rfind(':');
  if (colon == std::string::npos) {
    throw IoError("--data must be a dataset directory or <manifest>:<split>, got '" + arg + "'");
  }
  const fs::path manifest = arg.substr(0, colon);
  const SplitRole role = parse_split(arg.substr(colon + 1));
  const fs::path base = root.empty() ? manifest.parent_path() : fs::path(root);
  return read_manifest(manifest, base).part(role);
}

template <typename T>
int run_training(const RunConfig& cfg, const std::string& resume) {
  if (cfg.manifest.empty() && cfg.data_root.empty()) {
    throw ConfigError("config needs 'manifest' and/or 'data_root'");
  }
  if (cfg.train.transfer && cfg.pretrained_weights.empty()) {
    throw ConfigError("transfer = true requires 'pretrained_weights'");
  }
  fs::create_directories(cfg.output_dir);

  SplitDataset split;
  if (!cfg.manifest.empty()) {
    const fs::path root = cfg.data_root.empty() ? cfg.manifest.parent_path() : cfg.data_root;
    split = read_manifest(cfg.manifest, root);
  } else {
    split = stratified_split(scan_dataset(cfg.data_root), {0.6, 0.2, 0.2}, cfg.train.seed);
    write_manifest(cfg.output_dir / "manifest.tsv", split);
  }

  const ModelSpec spec = build_model(cfg.train.model, cfg.resolved_input_size());
  std::uint64_t already = 0;
  ParamSet<T> params;
  std::vector<bool> trainable;
  if (!resume.empty()) {
    const Checkpoint ckpt = load_checkpoint(resume);
    if (!(ckpt.model_spec == spec)) {
      throw ShapeError("--resume checkpoint model does not match the config:\n checkpoint:\n" +
                       format_model_spec(ckpt.model_spec) + " config:\n" + format_model_spec(spec));
    }
    params = cast_params<T>(ckpt.params);
    already = ckpt.meta.epochs_trained;
  } else if (!cfg.pretrained_weights.empty()) {
    auto imported = import_pretrained_conv_weights<T>(cfg.pretrained_weights, spec,
                                                      cfg.train.transfer, cfg.train.seed);
    params = std::move(imported.params);
    trainable = std::move(imported.trainable);
  } else {
    params = initialize_params<T>(spec, cfg.train.seed);
  }
  Network<T> net(spec, std::move(params));
  if (!trainable.empty()) net.set_trainable(trainable);

  const Shape& in = spec.input_shape;
  const FileSampleSource<T> train_src(split.train, in[0], in[1], in[2]);
  const FileSampleSource<T> val_src(split.val, in[0], in[1], in[2]);

  std::printf("training %s (%zu parameters, %s kernels) on %zu images, validating on %zu\n",
              spec.name.c_str(), count_parameters(spec),
              std::string(kernels::active_variant_name()).c_str(), train_src.size(), val_src.size());
  const auto result = train(
      net, train_src, val_src, cfg.train,
      [&](const EpochLog& e) {
        std::printf("epoch %zu/%zu train_loss %.6f train_acc %.6f val_loss %.6f val_acc %.6f (%.1fs)\n",
                    e.epoch, cfg.train.epochs, e.train_loss, e.train_accuracy, e.val_loss,
                    e.val_accuracy, e.wall_seconds);
        std::fflush(stdout);
      },
      already);

  save_checkpoint(result.best, cfg.checkpoint_path());
  write_text(cfg.output_dir / "epochs.csv", format_epoch_csv(result.log));
  const Evaluation val = evaluate_checkpoint(result.best, split.val, cfg.train.batch_size);
  const std::string report = format_metrics(val.report);
  write_text(cfg.output_dir / "val_metrics.txt", report);
  std::printf("best checkpoint (epoch %llu) -> %s\nvalidation metrics:\n%s",
              static_cast<unsigned long long>(result.best.meta.epochs_trained),
              cfg.checkpoint_path().string().c_str(), report.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume) {
  const RunConfig cfg = load_run_config(config_path);
  return cfg.precision == Precision::f64 ? run_training<double>(cfg, resume)
                                         : run_training<float>(cfg, resume);
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data, const std::string& root,
                 const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const LabeledDataset ds = resolve_data(data, root);
  if (ds.samples.empty()) throw IoError("no samples selected by --data " + data);
  const Evaluation ev = evaluate_checkpoint(ckpt, ds);
  if (!ev.report.auc) std::cerr << "warning: AUC undefined (single-class data); omitted\n";
  const std::string report = format_metrics(ev.report);
  std::cout << report;
  if (!out.empty()) write_text(out, report);
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& image) {
  const Network<float> net = network_from_checkpoint<float>(load_checkpoint(ckpt_path));
  const Prediction p = predict_image(net, image);
  std::printf("%s\t%.6f\n", label_name(p.label), p.covid_probability);
  return 0;
}

int cmd_augment_preview(const std::string& config_path, const std::string& image, std::size_t n,
                        const std::string& out_dir) {
  const RunConfig cfg = load_run_config(config_path);
  const AugmentConfig& aug = cfg.train.augment;
  const Image8 src = read_image(image);
  const Tensor<double> base = image_to_tensor<double>(src, src.height, src.width, src.channels);
  fs::create_directories(out_dir);
  const std::string stem = fs::path(image).stem().string();
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::derive(aug.seed, {static_cast<std::uint64_t>(i)});
    const Tensor<double> result = augment_image(base, sample_params(aug, rng));
    const fs::path dst = fs::path(out_dir) / (stem + "_aug" + std::to_string(i) + "_seed" +
                                              std::to_string(aug.seed) + ".png");
    write_png(dst, tensor_to_image(result));
    std::printf("%s\n", dst.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chest-CT COVID-19 classification: split, train, evaluate, predict"};
  app.require_subcommand(1);

  std::string data, ratios = "0.6,0.2,0.2", out, config, resume, ckpt, image, root;
  std::uint64_t seed = 42;
  std::size_t count = 4;

  auto* split = app.add_subcommand("split", "Stratified train/val/test manifest from a dataset directory");
  split->add_option("--data", data, "Dataset root with covid/ and normal/")->required();
  split->add_option("--ratios", ratios, "train,val,test fractions");
  split->add_option("--seed", seed, "Shuffle seed");
  split->add_option("--out", out, "Manifest file to write")->required();

  auto* trn = app.add_subcommand("train", "Train a model from a run configuration");
  trn->add_option("--config", config, "Run configuration file")->required();
  trn->add_option("--resume", resume, "Continue from this checkpoint");

  auto* eval = app.add_subcommand("evaluate", "Metrics for a checkpoint on a dataset or manifest split");
  eval->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  eval->add_option("--data", data, "Dataset directory or <manifest>:<split>")->required();
  eval->add_option("--root", root, "Dataset root for manifest paths (default: manifest directory)");
  eval->add_option("--out", out, "Also write the report to this file");

  auto* pred = app.add_subcommand("predict", "Classify one image");
  pred->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  pred->add_option("--image", image, "Image file")->required();

  auto* prev = app.add_subcommand("augment-preview", "Write augmented variants of one image");
  prev->add_option("--config", config, "Run configuration (augmentation keys)")->required();
  prev->add_option("--image", image, "Source image")->required();
  prev->add_option("--n", count, "Number of variants");
  prev->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*split) return cmd_split(data, ratios, seed, out);
    if (*trn) return cmd_train(config, resume);
    if (*eval) return cmd_evaluate(ckpt, data, root, out);
    if (*pred) return cmd_predict(ckpt, image);
    if (*prev) return cmd_augment_preview(config, image, count, out);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
