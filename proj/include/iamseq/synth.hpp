#ifndef IAMSEQ_SYNTH_HPP_
#define IAMSEQ_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "iamseq/data.hpp"

namespace iamseq {

// Synthetic plant with TEP-like conventions: 52 channels with their own
// operating level and noise scale, class 0 normal operation, classes 1..20
// faults. A fault adds, on its signature channels only,
//   scale_c * (shift + drift_amplitude * sin(2*pi*t / (12 + 2k) + phase_c))
// on top of the stationary AR(1) noise shared by all classes.
struct SynthConfig {
  std::size_t num_classes = 5;
  std::size_t windows_per_class = 200;
  std::size_t seq_len = 10;
  std::size_t num_features = 52;
  std::uint64_t seed = 0;
  double shift = 3.0;            // in units of the channel noise scale
  double drift_amplitude = 1.0;  // same units
  double ar_coefficient = 0.5;

  // Throws ParameterError when num_classes is 0 or above 21, or the channel
  // count cannot host disjoint signatures.
  void validate() const;
};

inline constexpr std::size_t kMaxSynthClasses = 21;

// Signature channels of fault class k (empty for class 0). Class k owns
// 2 + (k % 2) channels; positions are handed out in order along the
// permutation p -> (7p + 4) mod F, so signatures of different classes are
// disjoint. For F = 52, class 1 owns {4, 11, 18} and class 2 {25, 32}.
std::vector<std::size_t> signature_channels(std::size_t cls,
                                            std::size_t num_features = 52);

struct SynthDataset {
  std::vector<RawSeries> train;  // one per class, label = class id
  std::vector<RawSeries> test;
};

// Each series has windows_per_class + seq_len - 1 rows, i.e. exactly
// windows_per_class stride-1 windows. Train and test noise come from
// different streams of `seed`; output is a pure function of the config.
SynthDataset synth_generate(const SynthConfig& config);

}  // namespace iamseq

#endif  // IAMSEQ_SYNTH_HPP_
