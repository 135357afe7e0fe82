#include <doctest.h>

#include "ctcv/checkpoint.hpp"
#include "ctcv/config.hpp"
#include "ctcv/dataset.hpp"
#include "ctcv/metrics.hpp"
#include "ctcv/trainer.hpp"
#include "test_support.hpp"

using namespace ctcv;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void write_config(const fs::path& path, const std::string& body) { testing::write_bytes(path, body); }

}  // namespace

TEST_CASE("usage errors exit 2") {
  testing::TempDir dir("cli");
  CHECK(testing::run_cli("", dir.path()).exit_code == 2);
  CHECK(testing::run_cli("frobnicate", dir.path()).exit_code == 2);
  CHECK(testing::run_cli("split --data x", dir.path()).exit_code == 2);
  CHECK(testing::run_cli("--help", dir.path()).exit_code == 0);
}

TEST_CASE("split writes a manifest and prints counts") {
  testing::TempDir dir("cli");
  testing::make_toy_dataset(dir / "data", 10, 10, 8);
  const auto r = testing::run_cli("split --data " + q(dir / "data") + " --out " + q(dir / "m.tsv") + " --seed 3",
                                  dir.path());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("train") != std::string::npos);
  const auto split = read_manifest(dir / "m.tsv", dir / "data");
  CHECK(split.train.size() == 12);
  CHECK(split.val.size() == 4);
  CHECK(split.test.size() == 4);
  const auto again = testing::run_cli("split --data " + q(dir / "data") + " --out " + q(dir / "m2.tsv") + " --seed 3",
                                      dir.path());
  REQUIRE(again.exit_code == 0);
  CHECK(testing::read_text(dir / "m.tsv") == testing::read_text(dir / "m2.tsv"));

  const auto bad = testing::run_cli("split --data " + q(dir / "data") + " --ratios 0.5,0.2,0.2 --out " + q(dir / "x.tsv"),
                                    dir.path());
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("sum to 1") != std::string::npos);
  CHECK(testing::run_cli("split --data " + q(dir / "nope") + " --out " + q(dir / "x.tsv"), dir.path()).exit_code == 2);
}

TEST_CASE("train rejects unknown config keys") {
  testing::TempDir dir("cli");
  write_config(dir / "bad.cfg", "learning_rat = 0.1\n");
  const auto r = testing::run_cli("train --config " + q(dir / "bad.cfg"), dir.path());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("unknown config key 'learning_rat'") != std::string::npos);
}

TEST_CASE("train, evaluate and predict on toy data") {
  testing::TempDir dir("cli");
  testing::make_toy_dataset(dir / "data", 6, 6, 24);
  write_config(dir / "run.cfg", "data_root = " + (dir / "data").string() + "\noutput_dir = " +
                                    (dir / "out").string() + "\nepochs = 1\nbatch_size = 4\ninput_size = 16\n");
  const auto t = testing::run_cli("train --config " + q(dir / "run.cfg"), dir.path());
  REQUIRE_MESSAGE(t.exit_code == 0, t.err);
  CHECK(t.out.find("epoch 1/1") != std::string::npos);
  const Checkpoint ckpt = load_checkpoint(dir / "out/best.ckpt");
  CHECK(ckpt.model_spec == build_small_cnn(16));
  CHECK(parse_epoch_csv(testing::read_text(dir / "out/epochs.csv")).size() == 1);
  CHECK(parse_metrics(testing::read_text(dir / "out/val_metrics.txt")).confusion.total() == 2);
  CHECK(fs::exists(dir / "out/manifest.tsv"));

  const auto e = testing::run_cli("evaluate --ckpt " + q(dir / "out/best.ckpt") + " --data " +
                                      q((dir / "out/manifest.tsv").string() + ":test") + " --root " +
                                      q(dir / "data") + " --out " + q(dir / "test_metrics.txt"),
                                  dir.path());
  REQUIRE_MESSAGE(e.exit_code == 0, e.err);
  const auto report = parse_metrics(testing::read_text(dir / "test_metrics.txt"));
  CHECK(report.confusion.total() == 2);
  CHECK(e.out == testing::read_text(dir / "test_metrics.txt"));

  const auto p = testing::run_cli("predict --ckpt " + q(dir / "out/best.ckpt") + " --image " +
                                      q(dir / "data/covid/c100.png"),
                                  dir.path());
  REQUIRE(p.exit_code == 0);
  const auto tab = p.out.find('\t');
  REQUIRE(tab != std::string::npos);
  const std::string label = p.out.substr(0, tab);
  CHECK((label == "covid" || label == "normal"));
  const double prob = std::stod(p.out.substr(tab + 1));
  CHECK((prob >= 0.0 && prob <= 1.0));

  // Resuming with a different architecture is refused with both descriptions.
  write_config(dir / "other.cfg", "data_root = " + (dir / "data").string() + "\noutput_dir = " +
                                      (dir / "out2").string() + "\nepochs = 1\ninput_size = 32\n");
  const auto resume = testing::run_cli("train --config " + q(dir / "other.cfg") + " --resume " +
                                           q(dir / "out/best.ckpt"),
                                       dir.path());
  CHECK(resume.exit_code == 2);
  CHECK(resume.err.find("input=16x16x1") != std::string::npos);
  CHECK(resume.err.find("input=32x32x1") != std::string::npos);
}

TEST_CASE("evaluate on a single-class directory warns and omits AUC") {
  testing::TempDir dir("cli");
  testing::make_toy_dataset(dir / "data", 3, 0, 16);
  fs::create_directories(dir / "data/normal");
  const ModelSpec spec = build_small_cnn(16);
  save_checkpoint(Checkpoint{spec, initialize_params<float>(spec, 1), CheckpointMeta{1, 0, utc_timestamp()}},
                  dir / "m.ckpt");
  const auto r = testing::run_cli("evaluate --ckpt " + q(dir / "m.ckpt") + " --data " + q(dir / "data"), dir.path());
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("AUC undefined") != std::string::npos);
  CHECK(r.out.find("auc") == std::string::npos);
}

TEST_CASE("corrupt checkpoint and non-finite training map to exit codes") {
  testing::TempDir dir("cli");
  testing::make_toy_dataset(dir / "data", 4, 4, 16);
  testing::write_bytes(dir / "junk.ckpt", "JUNKJUNKJUNK");
  const auto r = testing::run_cli("predict --ckpt " + q(dir / "junk.ckpt") + " --image " + q(dir / "data/covid/c100.png"),
                                  dir.path());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("bad magic") != std::string::npos);

  write_config(dir / "nan.cfg", "data_root = " + (dir / "data").string() + "\noutput_dir = " +
                                    (dir / "out").string() + "\nepochs = 1\ninput_size = 16\nlearning_rate = 1e300\n" +
                                    "optimizer = sgd\nbatch_size = 2\n");
  const auto n = testing::run_cli("train --config " + q(dir / "nan.cfg"), dir.path());
  CHECK(n.exit_code == 3);
  CHECK(n.err.find("epoch 1") != std::string::npos);
}

TEST_CASE("augment-preview writes seeded variants") {
  testing::TempDir dir("cli");
  write_png(dir / "scan.png", testing::pattern_image(20, true, 1));
  write_config(dir / "aug.cfg", "augment_seed = 12\n");
  const auto r = testing::run_cli("augment-preview --config " + q(dir / "aug.cfg") + " --image " + q(dir / "scan.png") +
                                      " --n 3 --out " + q(dir / "prev"),
                                  dir.path());
  REQUIRE(r.exit_code == 0);
  for (int i = 0; i < 3; ++i) {
    const auto p = dir / ("prev/scan_aug" + std::to_string(i) + "_seed12.png");
    REQUIRE(fs::exists(p));
    const Image8 img = read_image(p);
    CHECK(img.width == 20);
    CHECK(img.height == 20);
  }
  const auto first = testing::read_text(dir / "prev/scan_aug0_seed12.png");
  REQUIRE(testing::run_cli("augment-preview --config " + q(dir / "aug.cfg") + " --image " + q(dir / "scan.png") +
                               " --n 1 --out " + q(dir / "prev2"),
                           dir.path())
              .exit_code == 0);
  CHECK(testing::read_text(dir / "prev2/scan_aug0_seed12.png") == first);
}
