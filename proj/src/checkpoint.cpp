#include "iamseq/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "iamseq/errors.hpp"

namespace iamseq {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order");

namespace {

using nlohmann::json;

constexpr std::size_t kPreambleBytes = 16;

std::uint32_t crc_of(const std::vector<float>& values) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(values.data()),
            static_cast<uInt>(values.size() * sizeof(float))));
}

std::size_t read_count(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(std::string("model config: '") + key +
                      "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json optional_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return json{{"seq_len", c.seq_len},
              {"num_features", c.num_features},
              {"hidden", c.hidden},
              {"fc1", c.fc1},
              {"fc2", c.fc2},
              {"num_classes", c.num_classes},
              {"dropout", c.dropout},
              {"pooling", to_string(c.pooling)}};
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "seq_len") c.seq_len = read_count(j, "seq_len");
    else if (key == "num_features") c.num_features = read_count(j, "num_features");
    else if (key == "hidden") c.hidden = read_count(j, "hidden");
    else if (key == "fc1") c.fc1 = read_count(j, "fc1");
    else if (key == "fc2") c.fc2 = read_count(j, "fc2");
    else if (key == "num_classes") c.num_classes = read_count(j, "num_classes");
    else if (key == "dropout") {
      if (!value.is_number()) throw ConfigError("model config: 'dropout' must be a number");
      c.dropout = value.get<double>();
    } else if (key == "pooling") {
      if (!value.is_string()) throw ConfigError("model config: 'pooling' must be a string");
      try {
        c.pooling = pooling_from_string(value.get<std::string>());
      } catch (const ParameterError& e) {
        throw ConfigError(e.what());
      }
    } else {
      throw ConfigError("model config: unknown key '" + key + "'");
    }
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path,
                     const ParameterRegistry& parameters,
                     const ModelConfig& config,
                     const CheckpointMetadata& metadata) {
  json manifest = json::array();
  std::vector<std::vector<float>> payloads;
  std::size_t offset = 0;
  for (const auto& [name, tensor] : parameters) {
    std::vector<float> values;
    values.reserve(tensor.numel());
    for (double v : tensor.data()) {
      if (!std::isfinite(v)) {
        throw NumericError("save_checkpoint: parameter '" + name +
                           "' holds a non-finite value");
      }
      values.push_back(static_cast<float>(v));
    }
    manifest.push_back({{"name", name},
                        {"shape", tensor.shape()},
                        {"offset", offset},
                        {"count", values.size()},
                        {"crc32", crc_of(values)}});
    offset += values.size() * sizeof(float);
    payloads.push_back(std::move(values));
  }
  json header{{"format_version", kCheckpointFormatVersion},
              {"config", model_config_to_json(config)},
              {"seed", metadata.seed},
              {"metadata",
               {{"epoch", metadata.epoch},
                {"best_test_loss", optional_to_json(metadata.best_test_loss)},
                {"best_train_loss", optional_to_json(metadata.best_train_loss)}}},
              {"parameters", manifest},
              {"payload_bytes", offset}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 6);
  out.write(kCheckpointVersion, 2);
  const std::uint64_t length = text.size();
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : payloads) {
    out.write(reinterpret_cast<const char*>(p.data()),
              static_cast<std::streamsize>(p.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed while writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const std::string where = path.string();

  if (bytes.size() < kPreambleBytes || bytes.compare(0, 6, kCheckpointMagic) != 0) {
    throw IntegrityError(where + ": not a checkpoint (bad magic)");
  }
  if (bytes.compare(6, 2, kCheckpointVersion) != 0) {
    throw VersionError(where + ": unsupported checkpoint version '" +
                       bytes.substr(6, 2) + "'");
  }
  std::uint64_t header_length = 0;
  std::memcpy(&header_length, bytes.data() + 8, sizeof header_length);
  if (header_length > bytes.size() - kPreambleBytes) {
    throw IntegrityError(where + ": header truncated");
  }
  json header;
  try {
    header = json::parse(bytes.substr(kPreambleBytes, header_length));
  } catch (const json::exception& e) {
    throw IntegrityError(where + ": unreadable header: " + e.what());
  }

  Checkpoint ckpt;
  const std::size_t payload_start = kPreambleBytes + header_length;
  try {
    if (header.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw VersionError(where + ": unsupported format_version " +
                         header.at("format_version").dump());
    }
    try {
      ckpt.config = model_config_from_json(header.at("config"));
    } catch (const ConfigError& e) {
      throw IntegrityError(where + ": " + e.what());
    }
    ckpt.metadata.seed = header.at("seed").get<std::uint64_t>();
    const json& meta = header.at("metadata");
    ckpt.metadata.epoch = meta.at("epoch").get<std::size_t>();
    ckpt.metadata.best_test_loss = optional_number(meta, "best_test_loss");
    ckpt.metadata.best_train_loss = optional_number(meta, "best_train_loss");

    for (const json& record : header.at("parameters")) {
      const std::string name = record.at("name").get<std::string>();
      const Shape shape = record.at("shape").get<Shape>();
      const std::size_t offset = record.at("offset").get<std::size_t>();
      const std::size_t count = record.at("count").get<std::size_t>();
      if (shape_numel(shape) != count) {
        throw IntegrityError(where + ": record '" + name +
                             "' count does not match its shape");
      }
      const std::size_t begin = payload_start + offset;
      if (begin > bytes.size() || count * sizeof(float) > bytes.size() - begin) {
        throw IntegrityError(where + ": record '" + name + "' is truncated");
      }
      std::vector<float> values(count);
      std::memcpy(values.data(), bytes.data() + begin, count * sizeof(float));
      if (crc_of(values) != record.at("crc32").get<std::uint32_t>()) {
        throw IntegrityError(where + ": record '" + name +
                             "' failed its checksum");
      }
      std::vector<double> widened(values.begin(), values.end());
      for (double v : widened) {
        if (!std::isfinite(v)) {
          throw IntegrityError(where + ": record '" + name +
                               "' holds a non-finite value");
        }
      }
      ckpt.parameters.add(name, Tensor::from(shape, std::move(widened), true));
    }
  } catch (const json::exception& e) {
    throw IntegrityError(where + ": malformed header: " + e.what());
  } catch (const DimensionError& e) {
    throw IntegrityError(where + ": " + e.what());
  }
  return ckpt;
}

}  // namespace iamseq
