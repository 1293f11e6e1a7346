#include "iamseq/model.hpp"

#include <cmath>

#include "iamseq/errors.hpp"

namespace iamseq {

namespace {

constexpr std::uint64_t kDropoutStream = 1;

void register_lstm(ParameterRegistry& registry, const std::string& prefix,
                   const LstmParams& p) {
  registry.add(prefix + ".w_forget", p.w_forget);
  registry.add(prefix + ".w_input", p.w_input);
  registry.add(prefix + ".w_cell", p.w_cell);
  registry.add(prefix + ".w_output", p.w_output);
  registry.add(prefix + ".b_forget", p.b_forget);
  registry.add(prefix + ".b_input", p.b_input);
  registry.add(prefix + ".b_cell", p.b_cell);
  registry.add(prefix + ".b_output", p.b_output);
}

}  // namespace

const char* to_string(Pooling pooling) {
  return pooling == Pooling::LastStep ? "last_step" : "mean_over_time";
}

Pooling pooling_from_string(const std::string& name) {
  if (name == "last_step") return Pooling::LastStep;
  if (name == "mean_over_time") return Pooling::MeanOverTime;
  throw ConfigError("unknown pooling '" + name +
                       "' (expected last_step or mean_over_time)");
}

void ModelConfig::validate() const {
  const std::pair<const char*, std::size_t> counts[] = {
      {"seq_len", seq_len}, {"num_features", num_features},
      {"hidden", hidden},   {"fc1", fc1},
      {"fc2", fc2},         {"num_classes", num_classes}};
  for (const auto& [name, value] : counts) {
    if (value == 0) {
      throw ParameterError(std::string("model config: ") + name +
                           " must be at least 1");
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ParameterError("model config: dropout must lie in [0, 1), got " +
                         std::to_string(dropout));
  }
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t lambdas = 2;
  const std::size_t lstm = 2 * 4 * (hidden * (hidden + num_features) + hidden);
  const std::size_t head = (2 * hidden * fc1 + fc1) + (fc1 * fc2 + fc2) +
                           (fc2 * num_classes + num_classes);
  return lambdas + lstm + head;
}

// ---- ParameterRegistry -----------------------------------------------------

void ParameterRegistry::add(std::string name, Tensor tensor) {
  if (contains(name)) {
    throw ContractError("parameter '" + name + "' registered twice");
  }
  for (const auto& [other, t] : entries_) {
    if (t.same_storage(tensor)) {
      throw ContractError("parameter '" + name + "' already registered as '" +
                          other + "'");
    }
  }
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool ParameterRegistry::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

const Tensor& ParameterRegistry::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

Tensor& ParameterRegistry::at(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::size_t ParameterRegistry::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

void ParameterRegistry::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

// ---- IamBiLstmClassifier ---------------------------------------------------

IamBiLstmClassifier::IamBiLstmClassifier(ModelConfig config, std::uint64_t seed)
    : config_(config),
      scale_in_(DynamicScale::create(1.0)),
      scale_out_(DynamicScale::create(1.0)),
      dropout_rng_(derive_seed(seed, kDropoutStream)) {
  config_.validate();
  Rng init(seed);
  registry_.add("iam_in.lambda", scale_in_.lambda);
  registry_.add("iam_out.lambda", scale_out_.lambda);
  lstm_.forward = LstmParams::initialized(config_.num_features, config_.hidden, init);
  lstm_.backward = LstmParams::initialized(config_.num_features, config_.hidden, init);
  register_lstm(registry_, "bilstm.forward", lstm_.forward);
  register_lstm(registry_, "bilstm.backward", lstm_.backward);
  fc1_ = make_linear("fc1", 2 * config_.hidden, config_.fc1, init);
  fc2_ = make_linear("fc2", config_.fc1, config_.fc2, init);
  classifier_ = make_linear("classifier", config_.fc2, config_.num_classes, init);
}

IamBiLstmClassifier::Linear IamBiLstmClassifier::make_linear(
    const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  Linear layer{Tensor::zeros({out, in}, true), Tensor::zeros({out}, true)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : layer.weight.mutable_data()) v = rng.uniform(-bound, bound);
  registry_.add(name + ".weight", layer.weight);
  registry_.add(name + ".bias", layer.bias);
  return layer;
}

Tensor IamBiLstmClassifier::apply(const Linear& layer, const Tensor& x) {
  return add(matmul(x, transpose_last_two(layer.weight)), layer.bias);
}

ForwardResult IamBiLstmClassifier::forward(const Tensor& batch, Mode mode) {
  if (batch.rank() != 3 || batch.dim(1) != config_.seq_len ||
      batch.dim(2) != config_.num_features) {
    throw DimensionError("model_forward: batch shape " +
                         shape_to_string(batch.shape()) + " does not match (B, " +
                         std::to_string(config_.seq_len) + ", " +
                         std::to_string(config_.num_features) + ")");
  }
  const bool training = mode == Mode::Train;

  IamOutput in = iam_forward(batch, AttentionAxis::Feature, scale_in_);
  Tensor h = bilstm_forward(in.output, lstm_);
  IamOutput out = iam_forward(h, AttentionAxis::Time, scale_out_);

  Tensor pooled = config_.pooling == Pooling::MeanOverTime
                      ? mean(out.output, 1)
                      : select(out.output, 1, config_.seq_len - 1);
  Tensor y3 = dropout(relu(apply(fc1_, pooled)), config_.dropout, training,
                      dropout_rng_);
  Tensor z = dropout(relu(apply(fc2_, y3)), config_.dropout, training,
                     dropout_rng_);
  return {apply(classifier_, z), in.weights, out.weights};
}

ParameterSnapshot IamBiLstmClassifier::snapshot() const {
  ParameterSnapshot snap;
  snap.reserve(registry_.size());
  for (const auto& [name, t] : registry_) snap.push_back(t.to_vector());
  return snap;
}

void IamBiLstmClassifier::restore(const ParameterSnapshot& snapshot) {
  if (snapshot.size() != registry_.size()) {
    throw ContractError("restore: snapshot has " + std::to_string(snapshot.size()) +
                        " entries, model has " + std::to_string(registry_.size()));
  }
  std::size_t i = 0;
  for (auto& [name, t] : registry_) {
    auto dst = t.mutable_data();
    if (snapshot[i].size() != dst.size()) {
      throw DimensionError("restore: size mismatch for '" + name + "'");
    }
    std::copy(snapshot[i].begin(), snapshot[i].end(), dst.begin());
    ++i;
  }
}

void IamBiLstmClassifier::load_parameters(const ParameterRegistry& source) {
  if (source.size() != registry_.size()) {
    throw ContractError("load_parameters: expected " +
                        std::to_string(registry_.size()) + " parameters, got " +
                        std::to_string(source.size()));
  }
  for (auto& [name, t] : registry_) {
    const Tensor& src = source.at(name);
    if (src.shape() != t.shape()) {
      throw DimensionError("load_parameters: '" + name + "' has shape " +
                           shape_to_string(src.shape()) + ", model expects " +
                           shape_to_string(t.shape()));
    }
    auto values = src.data();
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  }
}

}  // namespace iamseq
