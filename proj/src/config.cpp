#include "ctcv/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ctcv/error.hpp"

namespace ctcv {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  bool epochs_given = false;
  bool augment_seed_given = false;

  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  const std::map<std::string, Setter> setters = {
      {"data_root", [&](auto&, auto& v) { cfg.data_root = v; }},
      {"manifest", [&](auto&, auto& v) { cfg.manifest = v; }},
      {"output_dir", [&](auto&, auto& v) { cfg.output_dir = v; }},
      {"checkpoint", [&](auto&, auto& v) { cfg.checkpoint = v; }},
      {"pretrained_weights", [&](auto&, auto& v) { cfg.pretrained_weights = v; }},
      {"model", [&](auto&, auto& v) { cfg.train.model = v; }},
      {"input_size", [&](auto& k, auto& v) { cfg.input_size = to_uint(k, v); }},
      {"precision",
       [&](auto& k, auto& v) {
         if (v == "f32") cfg.precision = Precision::f32;
         else if (v == "f64") cfg.precision = Precision::f64;
         else throw ConfigError("config key '" + k + "': expected f32 or f64");
       }},
      {"epochs",
       [&](auto& k, auto& v) {
         cfg.train.epochs = to_uint(k, v);
         epochs_given = true;
       }},
      {"batch_size", [&](auto& k, auto& v) { cfg.train.batch_size = to_uint(k, v); }},
      {"optimizer",
       [&](auto& k, auto& v) {
         if (v == "adam") cfg.train.optimizer.kind = OptimizerKind::adam;
         else if (v == "sgd") cfg.train.optimizer.kind = OptimizerKind::sgd;
         else throw ConfigError("config key '" + k + "': expected adam or sgd");
       }},
      {"learning_rate", [&](auto& k, auto& v) { cfg.train.optimizer.lr = to_double(k, v); }},
      {"beta1", [&](auto& k, auto& v) { cfg.train.optimizer.beta1 = to_double(k, v); }},
      {"beta2", [&](auto& k, auto& v) { cfg.train.optimizer.beta2 = to_double(k, v); }},
      {"epsilon", [&](auto& k, auto& v) { cfg.train.optimizer.epsilon = to_double(k, v); }},
      {"seed", [&](auto& k, auto& v) { cfg.train.seed = to_uint(k, v); }},
      {"transfer", [&](auto& k, auto& v) { cfg.train.transfer = to_bool(k, v); }},
      {"augment", [&](auto& k, auto& v) { cfg.train.augment_enabled = to_bool(k, v); }},
      {"augment_seed",
       [&](auto& k, auto& v) {
         cfg.train.augment.seed = to_uint(k, v);
         augment_seed_given = true;
       }},
      {"zoom_min", [&](auto& k, auto& v) { cfg.train.augment.zoom_min = to_double(k, v); }},
      {"zoom_max", [&](auto& k, auto& v) { cfg.train.augment.zoom_max = to_double(k, v); }},
      {"hflip_prob", [&](auto& k, auto& v) { cfg.train.augment.hflip_prob = to_double(k, v); }},
      {"shear_range", [&](auto& k, auto& v) { cfg.train.augment.shear_range = to_double(k, v); }},
      {"shift_range", [&](auto& k, auto& v) { cfg.train.augment.shift_range = to_double(k, v); }},
      {"brightness_delta",
       [&](auto& k, auto& v) { cfg.train.augment.brightness_delta = to_double(k, v); }},
      {"contrast_min", [&](auto& k, auto& v) { cfg.train.augment.contrast_min = to_double(k, v); }},
      {"contrast_max", [&](auto& k, auto& v) { cfg.train.augment.contrast_max = to_double(k, v); }},
      {"saturation_min",
       [&](auto& k, auto& v) { cfg.train.augment.saturation_min = to_double(k, v); }},
      {"saturation_max",
       [&](auto& k, auto& v) { cfg.train.augment.saturation_max = to_double(k, v); }},
  };

  std::istringstream is(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }

  if (!epochs_given) cfg.train.epochs = default_epochs(cfg.train.model);
  if (!augment_seed_given) cfg.train.augment.seed = cfg.train.seed;
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace ctcv
