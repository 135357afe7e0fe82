#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "ctcv/checkpoint.hpp"
#include "ctcv/loss.hpp"
#include "ctcv/trainer.hpp"
#include "test_support.hpp"

using namespace ctcv;
using Kind = CheckpointError::Kind;

namespace {

Checkpoint fresh(const ModelSpec& spec, std::uint64_t seed) {
  return Checkpoint{spec, initialize_params<float>(spec, seed), CheckpointMeta{seed, 3, "2026-01-02T03:04:05Z"}};
}

Kind load_error(std::span<const std::uint8_t> bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("expected CheckpointError");
  return Kind::io;
}

}  // namespace

TEST_CASE("checkpoint round-trip is bit-exact for both architectures") {
  testing::TempDir dir("ckpt");
  for (const ModelSpec& spec : {build_small_cnn(), build_vgg16()}) {
    const Checkpoint c = fresh(spec, 11);
    const auto path = dir / (spec.name + ".ckpt");
    save_checkpoint(c, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.model_spec == c.model_spec);
    CHECK(back.meta == c.meta);
    REQUIRE(back.params.size() == c.params.size());
    for (std::size_t i = 0; i < c.params.size(); ++i) {
      REQUIRE(back.params[i].weights.size() == c.params[i].weights.size());
      CHECK(std::memcmp(back.params[i].weights.ptr(), c.params[i].weights.ptr(), c.params[i].weights.size() * 4) == 0);
      CHECK(std::memcmp(back.params[i].bias.ptr(), c.params[i].bias.ptr(), c.params[i].bias.size() * 4) == 0);
    }
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(c));
  }
}

TEST_CASE("checkpoint error kinds") {
  const auto good = serialize_checkpoint(fresh(build_small_cnn(16), 1));

  auto bad = good;
  bad[0] = 'X';
  CHECK(load_error(bad) == Kind::bad_magic);

  Checkpoint future = fresh(build_small_cnn(16), 1);
  future.meta.format_version = kCheckpointVersion + 1;
  CHECK(load_error(serialize_checkpoint(future)) == Kind::version_mismatch);

  CHECK(load_error(std::span(good).first(good.size() - 9)) == Kind::truncated);
  CHECK(load_error(std::span(good).first(40)) == Kind::truncated);

  // Inside the float payload of the last dense weights.
  bad = good;
  bad[good.size() - 100] ^= 0x01;
  CHECK(load_error(bad) == Kind::checksum_mismatch);
  bad = good;
  bad[12] ^= 0x40;
  CHECK(load_error(bad) == Kind::checksum_mismatch);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(load_error(trailing) == Kind::malformed);
}

TEST_CASE("dense width disagreeing with the stored model is a shape disagreement") {
  ModelSpec wide = build_small_cnn(16);
  wide.layers[10] = LayerSpec::dense(32);
  Checkpoint c = fresh(build_small_cnn(16), 1);
  c.params = initialize_params<float>(wide, 1);
  try {
    deserialize_checkpoint(serialize_checkpoint(c));
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == Kind::shape_disagreement);
    CHECK(std::string(e.what()).find("layer 10") != std::string::npos);
  }
}

TEST_CASE("missing checkpoint file is an io error") {
  try {
    load_checkpoint("/nonexistent/dir/x.ckpt");
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == Kind::io);
  }
}

TEST_CASE("every single-byte flip in a small checkpoint is detected") {
  ModelSpec tiny;
  tiny.name = "tiny";
  tiny.input_shape = Shape{2, 2, 1};
  tiny.layers = {LayerSpec::flatten(), LayerSpec::dense(2), LayerSpec::softmax()};
  const auto good = serialize_checkpoint(fresh(tiny, 2));
  for (std::size_t i = 0; i < good.size(); ++i) {
    auto bad = good;
    bad[i] ^= 0x10;
    CHECK_THROWS_AS(deserialize_checkpoint(bad), CheckpointError);
  }
}

TEST_CASE("timestamp honours SOURCE_DATE_EPOCH") {
  setenv("SOURCE_DATE_EPOCH", "0", 1);
  CHECK(utc_timestamp() == "1970-01-01T00:00:00Z");
  unsetenv("SOURCE_DATE_EPOCH");
  CHECK(utc_timestamp().size() == 20);
}

TEST_CASE("pretrained import with twelve conv blobs is a layer-count error") {
  testing::TempDir dir("import");
  ModelSpec short_spec = build_vgg16(32);
  std::size_t last_conv = 0;
  for (std::size_t i = 0; i < short_spec.layers.size(); ++i) {
    if (short_spec.layers[i].kind == LayerKind::conv2d) last_conv = i;
  }
  short_spec.layers.erase(short_spec.layers.begin() + last_conv, short_spec.layers.begin() + last_conv + 2);
  save_checkpoint(fresh(short_spec, 4), dir / "w12.ckpt");
  try {
    import_pretrained_conv_weights<float>(dir / "w12.ckpt", build_vgg16(32), true, 1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("12 conv layers") != std::string::npos);
    CHECK(msg.find("conv 12") != std::string::npos);
  }
}

TEST_CASE("pretrained import copies conv layers and freezes them") {
  testing::TempDir dir("import");
  const ModelSpec source = build_vgg16(224);
  save_checkpoint(fresh(source, 8), dir / "w.ckpt");
  const ModelSpec spec = build_vgg16(32);
  const auto imported = import_pretrained_conv_weights<float>(dir / "w.ckpt", spec, true, 99);
  const auto ref = load_checkpoint(dir / "w.ckpt");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::conv2d) {
      CHECK(imported.params[i] == ref.params[i]);
      CHECK_FALSE(imported.trainable[i]);
    } else if (spec.layers[i].kind == LayerKind::dense) {
      CHECK(imported.trainable[i]);
    }
  }
  const auto unfrozen = import_pretrained_conv_weights<float>(dir / "w.ckpt", spec, false, 99);
  for (bool t : unfrozen.trainable) CHECK(t);
}

TEST_CASE("frozen conv stack is untouched by an epoch of training") {
  testing::TempDir dir("freeze");
  const ModelSpec spec = build_vgg16(32);
  save_checkpoint(fresh(spec, 8), dir / "w.ckpt");
  auto imported = import_pretrained_conv_weights<float>(dir / "w.ckpt", spec, true, 3);
  Network<float> net(spec, imported.params);
  net.set_trainable(imported.trainable);

  Rng rng(0);
  const auto data = testing::synthetic_source<float>(8, 32, 3);
  const Batch<float> batch = assemble_batch(data, {0, 1, 2, 3}, SplitRole::train);
  const auto probs = net.forward(batch.images, Mode::train, rng);
  const auto grads = net.backward_from_logits(cross_entropy_loss(probs, batch.labels).grad_logits);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind != LayerKind::conv2d) continue;
    CHECK(std::all_of(grads[i].weights.data().begin(), grads[i].weights.data().end(), [](float v) { return v == 0.0f; }));
    CHECK(std::all_of(grads[i].bias.data().begin(), grads[i].bias.data().end(), [](float v) { return v == 0.0f; }));
  }

  const ParamSet<float> before = net.params();
  TrainConfig cfg;
  cfg.model = kVgg16Name;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.transfer = true;
  Trainer<float> trainer(net, data, data, cfg);
  trainer.run_epoch();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::conv2d) {
      CHECK(std::memcmp(before[i].weights.ptr(), net.params()[i].weights.ptr(), before[i].weights.size() * 4) == 0);
      CHECK(std::memcmp(before[i].bias.ptr(), net.params()[i].bias.ptr(), before[i].bias.size() * 4) == 0);
    } else if (spec.layers[i].kind == LayerKind::dense) {
      CHECK_FALSE(before[i].weights == net.params()[i].weights);
    }
  }
}
