#include "ctcv/checkpoint.hpp"

#include <bit>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ctcv {
namespace {

constexpr char kMagic[4] = {'C', 'T', 'C', 'V'};
using Kind = CheckpointError::Kind;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError(Kind::truncated, "checkpoint truncated");
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::string format_header(const Checkpoint& ckpt) {
  std::ostringstream os;
  os << format_model_spec(ckpt.model_spec);
  os << "seed=" << ckpt.meta.seed << '\n';
  os << "epochs_trained=" << ckpt.meta.epochs_trained << '\n';
  os << "created=" << ckpt.meta.created << '\n';
  return os.str();
}

void parse_header(const std::string& header, Checkpoint& ckpt) {
  std::istringstream is(header);
  std::string line, model_text;
  try {
    while (std::getline(is, line)) {
      if (line.rfind("seed=", 0) == 0) {
        ckpt.meta.seed = std::stoull(line.substr(5));
      } else if (line.rfind("epochs_trained=", 0) == 0) {
        ckpt.meta.epochs_trained = std::stoull(line.substr(15));
      } else if (line.rfind("created=", 0) == 0) {
        ckpt.meta.created = line.substr(8);
      } else {
        model_text += line + '\n';
      }
    }
    ckpt.model_spec = parse_model_spec(model_text);
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::malformed, std::string("malformed checkpoint header: ") + e.what());
  }
}

}  // namespace

std::string utc_timestamp() {
  // SOURCE_DATE_EPOCH pins the clock for reproducible artifacts.
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::atoll(fixed));
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u8(ckpt.meta.format_version);
  const std::string header = format_header(ckpt);
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.bytes(header.data(), header.size());

  std::uint32_t count = 0;
  for (const auto& p : ckpt.params) {
    if (!p.weights.empty()) ++count;
    if (!p.bias.empty()) ++count;
  }
  w.u32(count);
  auto put = [&](const Tensor<float>& t) {
    if (t.empty()) return;
    w.u8(static_cast<std::uint8_t>(t.shape().rank()));
    for (std::size_t d : t.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data()) w.f32(v);
  };
  for (const auto& p : ckpt.params) {
    put(p.weights);
    put(p.bias);
  }
  auto& buf = w.buffer();
  const std::uint64_t sum = fnv1a64(std::span(buf).subspan(5));
  w.u64(sum);
  return std::move(buf);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(Kind::bad_magic, "bad magic: not a checkpoint file");
  }
  Reader r(bytes);
  r.text(4);
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                      " unsupported (expected " +
                                                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t header_len = r.u32();
  const std::string header = r.text(header_len);
  const std::uint32_t count = r.u32();
  std::vector<Tensor<float>> tensors;
  // A corrupted count must not drive the allocation: every tensor needs at least 5 bytes.
  tensors.reserve(std::min<std::size_t>(count, r.remaining() / 5));
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint8_t rank = r.u8();
    if (rank < 1 || rank > 4) throw CheckpointError(Kind::malformed, "bad tensor rank in checkpoint");
    std::vector<std::size_t> dims(rank);
    std::size_t numel = 1;
    for (auto& d : dims) {
      d = r.u32();
      if (d == 0) throw CheckpointError(Kind::malformed, "zero extent in checkpoint tensor");
      numel *= d;
      r.need(std::min<std::size_t>(numel, r.remaining() / 4 + 1) * 4);
    }
    r.need(numel * 4);
    std::vector<float> data(numel);
    for (auto& v : data) v = r.f32();
    tensors.emplace_back(Shape(std::move(dims)), std::move(data));
  }
  const std::size_t payload_end = r.pos();
  const std::uint64_t stored = r.u64();
  if (fnv1a64(bytes.subspan(5, payload_end - 5)) != stored) {
    throw CheckpointError(Kind::checksum_mismatch, "checkpoint checksum mismatch (corrupted payload)");
  }
  if (r.pos() != bytes.size()) {
    throw CheckpointError(Kind::malformed, "trailing bytes after checkpoint checksum");
  }

  Checkpoint ckpt;
  ckpt.meta.format_version = version;
  parse_header(header, ckpt);

  std::vector<std::vector<Shape>> expected;
  try {
    expected = model_param_shapes(ckpt.model_spec);
  } catch (const Error& e) {
    throw CheckpointError(Kind::shape_disagreement, std::string("checkpoint model invalid: ") + e.what());
  }
  std::size_t want = 0;
  for (const auto& e : expected) want += e.size();
  if (want != tensors.size()) {
    throw CheckpointError(Kind::shape_disagreement,
                          "shape disagreement: model needs " + std::to_string(want) +
                              " parameter tensors, checkpoint holds " + std::to_string(tensors.size()));
  }
  ckpt.params.resize(expected.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].empty()) continue;
    for (std::size_t j = 0; j < 2; ++j) {
      if (tensors[next].shape() != expected[i][j]) {
        throw CheckpointError(Kind::shape_disagreement,
                              "shape disagreement at layer " + std::to_string(i) + " (" +
                                  to_string(ckpt.model_spec.layers[i].kind) + "): stored " +
                                  tensors[next].shape().str() + ", model expects " +
                                  expected[i][j].str());
      }
      (j == 0 ? ckpt.params[i].weights : ckpt.params[i].bias) = std::move(tensors[next]);
      ++next;
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::io, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, "cannot read checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.kind(), path.string() + ": " + e.what());
  }
}

template <typename T>
ImportedWeights<T> import_pretrained_conv_weights(const std::filesystem::path& path,
                                                  const ModelSpec& spec, bool freeze_conv,
                                                  std::uint64_t seed) {
  const Checkpoint source = load_checkpoint(path);
  std::vector<const LayerParams<float>*> blobs;
  for (std::size_t i = 0; i < source.model_spec.layers.size(); ++i) {
    if (source.model_spec.layers[i].kind == LayerKind::conv2d) blobs.push_back(&source.params[i]);
  }
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::conv2d) targets.push_back(i);
  }

  ImportedWeights<T> out{initialize_params<T>(spec, seed), std::vector<bool>(spec.layers.size(), true)};
  for (std::size_t c = 0; c < targets.size(); ++c) {
    const std::size_t layer = targets[c];
    if (c >= blobs.size()) {
      throw ShapeError("pretrained weights hold " + std::to_string(blobs.size()) +
                       " conv layers, model needs " + std::to_string(targets.size()) +
                       "; first missing: conv " + std::to_string(c) + " (layer " +
                       std::to_string(layer) + ")");
    }
    auto& dst = out.params[layer];
    if (blobs[c]->weights.shape() != dst.weights.shape() || blobs[c]->bias.shape() != dst.bias.shape()) {
      throw ShapeError("pretrained conv " + std::to_string(c) + " (layer " + std::to_string(layer) +
                       ") has shape " + blobs[c]->weights.shape().str() + ", model expects " +
                       dst.weights.shape().str());
    }
    dst.weights = blobs[c]->weights.template cast<T>();
    dst.bias = blobs[c]->bias.template cast<T>();
    if (freeze_conv) out.trainable[layer] = false;
  }
  if (blobs.size() > targets.size()) {
    throw ShapeError("pretrained weights hold " + std::to_string(blobs.size()) +
                     " conv layers, model needs " + std::to_string(targets.size()) +
                     "; first extra: conv " + std::to_string(targets.size()));
  }
  return out;
}

template ImportedWeights<float> import_pretrained_conv_weights(const std::filesystem::path&,
                                                               const ModelSpec&, bool,
                                                               std::uint64_t);
template ImportedWeights<double> import_pretrained_conv_weights(const std::filesystem::path&,
                                                                const ModelSpec&, bool,
                                                                std::uint64_t);

}  // namespace ctcv
