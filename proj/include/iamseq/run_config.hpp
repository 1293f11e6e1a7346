#ifndef IAMSEQ_RUN_CONFIG_HPP_
#define IAMSEQ_RUN_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "iamseq/data.hpp"
#include "iamseq/model.hpp"
#include "iamseq/synth.hpp"
#include "iamseq/train.hpp"

namespace iamseq {

// A run is fully described by a JSON document:
//
//   {
//     "name": "synth_quickstart",          // run directory under output_dir
//     "seed": 7,                           // mandatory (or --seed)
//     "output_dir": "runs",
//     "data":  {"train_dir", "test_dir", "label_mode", "stride"},
//     "synth": {"num_classes", "windows_per_class", "shift",
//               "drift_amplitude", "ar_coefficient"},
//     "model": {"seq_len", "num_features", "hidden", "fc1", "fc2",
//               "num_classes", "dropout", "pooling"},
//     "train": {"epochs", "batch_size", "lr", "lr_floor", "lr_factor",
//               "patience", "shuffle", "validation_fraction"},
//     "explain": {"top_k", "correct_only"}
//   }
//
// Every section is optional; unknown keys and wrong types are rejected
// with ConfigError before any work starts. See docs/config.md.
struct RunConfig {
  std::string name = "run";
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_dir = "runs";

  std::optional<std::filesystem::path> train_dir;
  std::optional<std::filesystem::path> test_dir;
  LabelMode label_mode = LabelMode::PerFile;
  std::size_t stride = 1;

  SynthConfig synth;
  ModelConfig model;
  TrainOptions train;

  std::size_t top_k = 4;
  bool correct_only = true;

  std::filesystem::path run_dir() const { return output_dir / name; }
  // Default: <run_dir>/data/train and <run_dir>/data/test.
  std::filesystem::path resolved_train_dir() const;
  std::filesystem::path resolved_test_dir() const;
  std::uint64_t required_seed() const;

  // Counts and rates of the model, data and training sections. Synth limits
  // are checked by the synth command. Throws ConfigError or ParameterError.
  void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);

}  // namespace iamseq

#endif  // IAMSEQ_RUN_CONFIG_HPP_
