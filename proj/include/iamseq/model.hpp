#ifndef IAMSEQ_MODEL_HPP_
#define IAMSEQ_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "iamseq/attention.hpp"
#include "iamseq/recurrent.hpp"
#include "iamseq/tensor.hpp"

namespace iamseq {

// How the attended BiLSTM sequence is reduced to one vector per window.
enum class Pooling { LastStep, MeanOverTime };

const char* to_string(Pooling pooling);
Pooling pooling_from_string(const std::string& name);

struct ModelConfig {
  std::size_t seq_len = 10;
  std::size_t num_features = 52;
  std::size_t hidden = 128;
  std::size_t fc1 = 128;
  std::size_t fc2 = 64;
  std::size_t num_classes = 21;
  double dropout = 0.2;
  Pooling pooling = Pooling::MeanOverTime;

  // Throws ParameterError on a zero count or a dropout outside [0, 1).
  void validate() const;
  std::size_t parameter_count() const;

  bool operator==(const ModelConfig&) const = default;
};

// Named trainable leaves in insertion order. Entries share storage with the
// model that registered them.
class ParameterRegistry {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor tensor);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t total_elements() const;
  void zero_grad();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
};

// Plain copy of every parameter value, used for best-model snapshots.
using ParameterSnapshot = std::vector<std::vector<double>>;

enum class Mode { Train, Eval };

struct ForwardResult {
  Tensor logits;     // (batch, classes); softmax lives in the loss
  Tensor attn_in;    // (batch, features, features)
  Tensor attn_out;   // (batch, steps, steps)
};

// Input IAM over features -> BiLSTM -> IAM over time -> pooling ->
// FC1 + ReLU + dropout -> FC2 + ReLU + dropout -> linear classifier.
class IamBiLstmClassifier {
 public:
  // Parameters drawn from `seed`; dropout masks use a stream derived from it.
  IamBiLstmClassifier(ModelConfig config, std::uint64_t seed);

  ForwardResult forward(const Tensor& batch, Mode mode);

  const ModelConfig& config() const { return config_; }
  ParameterRegistry& parameters() { return registry_; }
  const ParameterRegistry& parameters() const { return registry_; }

  ParameterSnapshot snapshot() const;
  void restore(const ParameterSnapshot& snapshot);
  // Copies values from a registry with identical names and shapes.
  void load_parameters(const ParameterRegistry& source);

  // Reseeds the dropout stream.
  void reseed_dropout(std::uint64_t seed) { dropout_rng_ = Rng(seed); }

 private:
  struct Linear {
    Tensor weight;  // (out, in)
    Tensor bias;    // (out)
  };

  Linear make_linear(const std::string& name, std::size_t in, std::size_t out,
                     Rng& rng);
  static Tensor apply(const Linear& layer, const Tensor& x);

  ModelConfig config_;
  ParameterRegistry registry_;
  DynamicScale scale_in_;
  DynamicScale scale_out_;
  BiLstmParams lstm_;
  Linear fc1_;
  Linear fc2_;
  Linear classifier_;
  Rng dropout_rng_;
};

}  // namespace iamseq

#endif  // IAMSEQ_MODEL_HPP_
