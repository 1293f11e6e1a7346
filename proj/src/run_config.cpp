#include "iamseq/run_config.hpp"

#include <fstream>
#include <set>

#include "iamseq/checkpoint.hpp"
#include "iamseq/errors.hpp"

namespace iamseq {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : section.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& section, const std::string& where, const char* key, T& out) {
  if (!section.contains(key)) return;
  const json& v = section.at(key);
  const std::string field = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(field + " must be a boolean");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(field + " must be a string");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(field + " must be a number");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<long long>() < 0)) {
      throw ConfigError(field + " must be a non-negative integer");
    }
  }
  out = v.get<T>();
}

void read_path(const json& section, const std::string& where, const char* key,
               std::optional<std::filesystem::path>& out) {
  if (!section.contains(key)) return;
  std::string s;
  read(section, where, key, s);
  out = s;
}

}  // namespace

std::filesystem::path RunConfig::resolved_train_dir() const {
  return train_dir ? *train_dir : run_dir() / "data" / "train";
}

std::filesystem::path RunConfig::resolved_test_dir() const {
  return test_dir ? *test_dir : run_dir() / "data" / "test";
}

std::uint64_t RunConfig::required_seed() const {
  if (!seed) {
    throw ConfigError("no seed given: set \"seed\" in the config or pass --seed");
  }
  return *seed;
}

void RunConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos) {
    throw ConfigError("name must be a non-empty string without '/'");
  }
  model.validate();
  if (stride == 0) throw ConfigError("data.stride must be at least 1");
  if (train.batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(train.lr_floor > 0.0 && train.lr_floor <= train.lr)) {
    throw ConfigError("train.lr_floor must lie in (0, lr]");
  }
  if (!(train.lr_factor > 0.0 && train.lr_factor < 1.0)) {
    throw ConfigError("train.lr_factor must lie in (0, 1)");
  }
  if (train.patience == 0) throw ConfigError("train.patience must be at least 1");
  if (!(train.validation_fraction >= 0.0 && train.validation_fraction < 1.0)) {
    throw ConfigError("train.validation_fraction must lie in [0, 1)");
  }
  if (top_k == 0) throw ConfigError("explain.top_k must be at least 1");
}

RunConfig parse_run_config(const json& j) {
  reject_unknown(j, "config",
                 {"name", "seed", "output_dir", "data", "synth", "model", "train",
                  "explain"});
  RunConfig c;
  read(j, "config", "name", c.name);
  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    read(j, "config", "seed", seed);
    c.seed = seed;
  }
  if (j.contains("output_dir")) {
    std::string out;
    read(j, "config", "output_dir", out);
    c.output_dir = out;
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, "data", {"train_dir", "test_dir", "label_mode", "stride"});
    read_path(d, "data", "train_dir", c.train_dir);
    read_path(d, "data", "test_dir", c.test_dir);
    if (d.contains("label_mode")) {
      std::string mode;
      read(d, "data", "label_mode", mode);
      c.label_mode = label_mode_from_string(mode);
    }
    read(d, "data", "stride", c.stride);
  }
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    reject_unknown(s, "synth",
                   {"num_classes", "windows_per_class", "shift", "drift_amplitude",
                    "ar_coefficient"});
    read(s, "synth", "num_classes", c.synth.num_classes);
    read(s, "synth", "windows_per_class", c.synth.windows_per_class);
    read(s, "synth", "shift", c.synth.shift);
    read(s, "synth", "drift_amplitude", c.synth.drift_amplitude);
    read(s, "synth", "ar_coefficient", c.synth.ar_coefficient);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, "train",
                   {"epochs", "batch_size", "lr", "lr_floor", "lr_factor", "patience",
                    "shuffle", "validation_fraction"});
    read(t, "train", "epochs", c.train.epochs);
    read(t, "train", "batch_size", c.train.batch_size);
    read(t, "train", "lr", c.train.lr);
    read(t, "train", "lr_floor", c.train.lr_floor);
    read(t, "train", "lr_factor", c.train.lr_factor);
    read(t, "train", "patience", c.train.patience);
    read(t, "train", "shuffle", c.train.shuffle);
    read(t, "train", "validation_fraction", c.train.validation_fraction);
  }
  if (j.contains("explain")) {
    const json& e = j.at("explain");
    reject_unknown(e, "explain", {"top_k", "correct_only"});
    read(e, "explain", "top_k", c.top_k);
    read(e, "explain", "correct_only", c.correct_only);
  }
  c.synth.seq_len = c.model.seq_len;
  c.synth.num_features = c.model.num_features;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& c) {
  json j{{"name", c.name},
         {"output_dir", c.output_dir.string()},
         {"data",
          {{"train_dir", c.resolved_train_dir().string()},
           {"test_dir", c.resolved_test_dir().string()},
           {"label_mode", to_string(c.label_mode)},
           {"stride", c.stride}}},
         {"synth",
          {{"num_classes", c.synth.num_classes},
           {"windows_per_class", c.synth.windows_per_class},
           {"shift", c.synth.shift},
           {"drift_amplitude", c.synth.drift_amplitude},
           {"ar_coefficient", c.synth.ar_coefficient}}},
         {"model", model_config_to_json(c.model)},
         {"train",
          {{"epochs", c.train.epochs},
           {"batch_size", c.train.batch_size},
           {"lr", c.train.lr},
           {"lr_floor", c.train.lr_floor},
           {"lr_factor", c.train.lr_factor},
           {"patience", c.train.patience},
           {"shuffle", c.train.shuffle},
           {"validation_fraction", c.train.validation_fraction}}},
         {"explain", {{"top_k", c.top_k}, {"correct_only", c.correct_only}}}};
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

}  // namespace iamseq
