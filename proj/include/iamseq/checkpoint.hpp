#ifndef IAMSEQ_CHECKPOINT_HPP_
#define IAMSEQ_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "iamseq/model.hpp"

namespace iamseq {

// Checkpoint file layout (all integers little-endian):
//
//   offset 0   8 bytes   magic "IAMSEQ01"; the trailing "01" is the version
//   offset 8   u64       header length N
//   offset 16  N bytes   JSON header: format_version, config, seed, metadata
//                        and the parameter manifest (name, shape, offset,
//                        count, crc32) with offsets relative to the payload
//   16 + N     ...       float32 payloads, row-major, in manifest order
//
// See docs/checkpoint_format.md.
inline constexpr char kCheckpointMagic[] = "IAMSEQ";
inline constexpr char kCheckpointVersion[] = "01";
inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMetadata {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::optional<double> best_test_loss;
  std::optional<double> best_train_loss;

  bool operator==(const CheckpointMetadata&) const = default;
};

struct Checkpoint {
  ModelConfig config;
  ParameterRegistry parameters;
  CheckpointMetadata metadata;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
// Unknown or mistyped keys raise ConfigError; missing keys keep defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

// Throws NumericError when a parameter is non-finite, IoError when the file
// cannot be written.
void save_checkpoint(const std::filesystem::path& path,
                     const ParameterRegistry& parameters,
                     const ModelConfig& config,
                     const CheckpointMetadata& metadata);

// Throws VersionError for an unknown version, IntegrityError (naming the
// offending record when there is one) for corrupt or truncated files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace iamseq

#endif  // IAMSEQ_CHECKPOINT_HPP_
