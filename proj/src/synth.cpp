#include "iamseq/synth.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "iamseq/errors.hpp"

namespace iamseq {

namespace {

constexpr std::uint64_t kPlantStream = 1000;
constexpr std::uint64_t kTrainStream = 2000;
constexpr std::uint64_t kTestStream = 3000;

std::size_t channels_owned(std::size_t cls) { return cls == 0 ? 0 : 2 + cls % 2; }

std::size_t channels_needed(std::size_t num_classes) {
  std::size_t n = 0;
  for (std::size_t k = 1; k < num_classes; ++k) n += channels_owned(k);
  return n;
}

struct Plant {
  std::vector<double> level;
  std::vector<double> scale;
  std::vector<double> phase;
};

Plant make_plant(const SynthConfig& c) {
  Rng rng(derive_seed(c.seed, kPlantStream));
  Plant p;
  for (std::size_t f = 0; f < c.num_features; ++f) {
    p.level.push_back(rng.uniform(10.0, 100.0));
    p.scale.push_back(rng.uniform(0.5, 2.5));
    p.phase.push_back(rng.uniform(0.0, 2.0 * M_PI));
  }
  return p;
}

RawSeries generate_series(const SynthConfig& c, const Plant& plant,
                          std::size_t cls, std::uint64_t seed,
                          const char* split) {
  const std::size_t rows = c.windows_per_class + c.seq_len - 1;
  const std::size_t f = c.num_features;
  Rng rng(seed);
  RawSeries s;
  s.num_features = f;
  s.values.resize(rows * f);
  s.labels.assign(rows, static_cast<int>(cls));
  s.label_mode = LabelMode::PerFile;
  s.source = std::string("synth:") + split + ":class_" + std::to_string(cls);

  const double phi = c.ar_coefficient;
  const double innovation = std::sqrt(1.0 - phi * phi);
  std::vector<double> noise(f);
  for (double& n : noise) n = rng.normal();  // stationary start
  const auto sig = signature_channels(cls, f);
  const double period = 12.0 + 2.0 * static_cast<double>(cls);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t ch = 0; ch < f; ++ch) {
      if (t > 0) noise[ch] = phi * noise[ch] + innovation * rng.normal();
      s.values[t * f + ch] = plant.level[ch] + plant.scale[ch] * noise[ch];
    }
    for (std::size_t ch : sig) {
      const double drift = std::sin(2.0 * M_PI * static_cast<double>(t) / period +
                                    plant.phase[ch]);
      s.values[t * f + ch] +=
          plant.scale[ch] * (c.shift + c.drift_amplitude * drift);
    }
  }
  return s;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes == 0 || num_classes > kMaxSynthClasses) {
    throw ParameterError("synth: num_classes must lie in [1, 21], got " +
                         std::to_string(num_classes));
  }
  if (windows_per_class == 0 || seq_len == 0) {
    throw ParameterError("synth: windows_per_class and seq_len must be positive");
  }
  if (channels_needed(num_classes) > num_features) {
    throw ParameterError("synth: " + std::to_string(num_features) +
                         " features cannot host signatures for " +
                         std::to_string(num_classes) + " classes");
  }
  if (!(ar_coefficient > -1.0 && ar_coefficient < 1.0)) {
    throw ParameterError("synth: ar_coefficient must lie in (-1, 1)");
  }
}

std::vector<std::size_t> signature_channels(std::size_t cls,
                                            std::size_t num_features) {
  if (cls == 0) return {};
  const std::size_t first = channels_needed(cls);
  const std::size_t count = channels_owned(cls);
  if (first + count > num_features) {
    throw ParameterError("synth: class " + std::to_string(cls) +
                         " has no signature channels left among " +
                         std::to_string(num_features));
  }
  const bool permute = std::gcd(std::size_t{7}, num_features) == 1;
  std::vector<std::size_t> channels;
  for (std::size_t p = first; p < first + count; ++p) {
    channels.push_back(permute ? (7 * p + 4) % num_features : p);
  }
  return channels;
}

SynthDataset synth_generate(const SynthConfig& config) {
  config.validate();
  const Plant plant = make_plant(config);
  SynthDataset d;
  for (std::size_t k = 0; k < config.num_classes; ++k) {
    d.train.push_back(generate_series(
        config, plant, k, derive_seed(config.seed, kTrainStream + k), "train"));
    d.test.push_back(generate_series(
        config, plant, k, derive_seed(config.seed, kTestStream + k), "test"));
  }
  return d;
}

}  // namespace iamseq
