#include "vessel/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <functional>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace vessel {

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, v));
  }
  return out;
}

bool to_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

struct KeyDef {
  const char* name;  // section.key
  const char* fallback;
  const char* help;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> apply;
};

const std::vector<KeyDef>& keys() {
  static const std::vector<KeyDef> defs = {
      {"preprocess.clip_limit", "2.0", "CLAHE clip limit",
       [](RunConfig& c, auto& k, auto& v) { c.preprocess.clip_limit = to_double(k, v); }},
      {"preprocess.tiles_x", "8", "CLAHE tile columns",
       [](RunConfig& c, auto& k, auto& v) { c.preprocess.tiles_x = to_u64(k, v); }},
      {"preprocess.tiles_y", "8", "CLAHE tile rows",
       [](RunConfig& c, auto& k, auto& v) { c.preprocess.tiles_y = to_u64(k, v); }},
      {"preprocess.gamma", "1.2", "gamma correction exponent",
       [](RunConfig& c, auto& k, auto& v) { c.preprocess.gamma = to_double(k, v); }},
      {"augment.enabled", "true", "train on the 60 crop/rotation/flip variants of each image",
       [](RunConfig& c, auto& k, auto& v) { c.augment = to_bool(k, v); }},
      {"model.input_size", "224", "network input height and width (multiple of 32)",
       [](RunConfig& c, auto& k, auto& v) { c.model.input_height = c.model.input_width = to_u64(k, v); }},
      {"model.width_factor", "1.0", "channel multiplier (0.125 for desk scale)",
       [](RunConfig& c, auto& k, auto& v) { c.model.width_factor = to_double(k, v); }},
      {"model.groups", "16", "group norm groups",
       [](RunConfig& c, auto& k, auto& v) { c.model.groups = to_u64(k, v); }},
      {"model.dropout", "0.3", "dropout rate before the output layer",
       [](RunConfig& c, auto& k, auto& v) { c.model.dropout_rate = to_double(k, v); }},
      {"model.use_skips", "true", "encoder-decoder skip connections",
       [](RunConfig& c, auto& k, auto& v) { c.model.use_skips = to_bool(k, v); }},
      {"train.seed", "(required)", "seed for initialization, splits, shuffling and dropout",
       [](RunConfig& c, auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"train.batch_size", "2", "images per optimizer step",
       [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = to_u64(k, v); }},
      {"train.val_fraction", "0.15", "share of training images held out for validation",
       [](RunConfig& c, auto& k, auto& v) { c.train.val_fraction = to_double(k, v); }},
      {"train.max_epochs", "1000", "epoch limit",
       [](RunConfig& c, auto& k, auto& v) { c.train.max_epochs = to_u64(k, v); }},
      {"train.lr", "0.0001", "NAdam learning rate",
       [](RunConfig& c, auto& k, auto& v) { c.train.optimizer.lr = to_double(k, v); }},
      {"train.lr_patience", "25", "epochs without improvement before the LR is reduced",
       [](RunConfig& c, auto& k, auto& v) { c.train.lr_patience = to_u64(k, v); }},
      {"train.lr_factor", "0.5", "LR reduction factor",
       [](RunConfig& c, auto& k, auto& v) { c.train.lr_factor = to_double(k, v); }},
      {"train.stop_patience", "100", "epochs without improvement before stopping",
       [](RunConfig& c, auto& k, auto& v) { c.train.stop_patience = to_u64(k, v); }},
      {"train.bce_weight", "0.75", "weight of the cross-entropy term",
       [](RunConfig& c, auto& k, auto& v) { c.train.bce_weight = to_double(k, v); }},
      {"train.jaccard_weight", "0.25", "weight of the Jaccard term",
       [](RunConfig& c, auto& k, auto& v) { c.train.jaccard_weight = to_double(k, v); }},
      {"train.resample_val_each_epoch", "false", "redraw the train/val split every epoch",
       [](RunConfig& c, auto& k, auto& v) { c.train.resample_val_each_epoch = to_bool(k, v); }},
      {"eval.protocol", "random_15", "drive_fixed | stare_loocv | chase_first20 | hrf_5percat | random_15",
       [](RunConfig& c, auto&, auto& v) {
         try {
           c.protocol = parse_protocol(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(fmt::format("eval.protocol: {}", e.what()));
         }
       }},
      {"eval.threshold", "0.5", "probability threshold for vessel pixels",
       [](RunConfig& c, auto& k, auto& v) { c.eval.threshold = to_double(k, v); }},
      {"eval.pooled", "false", "pool confusion counts over a fold instead of averaging images",
       [](RunConfig& c, auto& k, auto& v) { c.eval.pooled = to_bool(k, v); }},
      {"eval.native_resolution", "false", "compare at the mask's native size",
       [](RunConfig& c, auto& k, auto& v) { c.eval.native_resolution = to_bool(k, v); }},
      {"paths.data_dir", "data", "dataset root holding the image and mask directories",
       [](RunConfig& c, auto&, auto& v) { c.paths.data_dir = v; }},
      {"paths.images_subdir", "images", "image directory under data_dir",
       [](RunConfig& c, auto&, auto& v) { c.paths.images_subdir = v; }},
      {"paths.masks_subdir", "masks", "mask directory under data_dir",
       [](RunConfig& c, auto&, auto& v) { c.paths.masks_subdir = v; }},
      {"paths.out_dir", "out", "checkpoints, logs and reports",
       [](RunConfig& c, auto&, auto& v) { c.paths.out_dir = v; }},
      {"paths.model_dir", "", "fold models for evaluate (empty: out_dir)",
       [](RunConfig& c, auto&, auto& v) { c.paths.model_dir = v; }},
      {"paths.init_weights", "", "archive loaded non-strictly before training",
       [](RunConfig& c, auto&, auto& v) { c.paths.init_weights = v; }},
  };
  return defs;
}

const KeyDef& find_key(const std::string& name) {
  for (const auto& k : keys())
    if (name == k.name) return k;
  throw ConfigError(fmt::format("unknown config key '{}'", name));
}

std::string env_name(std::string dotted) {
  for (auto& ch : dotted) ch = ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return kEnvPrefix + dotted;
}

}  // namespace

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
  find_key(dotted_key).apply(*this, dotted_key, value);
}

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (file) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(fmt::format("cannot read config: {}", e.what()));
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw ConfigError(fmt::format("config key '{}' is outside any section", section));
      for (const auto& [key, value] : body) cfg.set(section + "." + key, value.get_value<std::string>());
    }
  }
  for (const auto& k : keys()) {
    if (const char* v = std::getenv(env_name(k.name).c_str())) cfg.set(k.name, v);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not section.key=value", o));
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
  try {
    cfg.model.validate();
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.eval.threshold > 0 && cfg.eval.threshold < 1)) throw ConfigError("eval.threshold must be in (0, 1)");
  cfg.eval.input_height = cfg.model.input_height;
  cfg.eval.input_width = cfg.model.input_width;
  cfg.eval.preprocess = cfg.preprocess;
  return cfg;
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ConfigError("a seed is required: set train.seed or pass --seed");
  return *seed;
}

std::string config_reference() {
  std::string out;
  for (const auto& k : keys()) {
    out += fmt::format("  {:<32} = {:<12} {} (env {})\n", k.name, k.fallback[0] ? k.fallback : "\"\"", k.help,
                       env_name(k.name));
  }
  return out;
}

}  // namespace vessel
