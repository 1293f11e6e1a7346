#include "iamseq/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "iamseq/errors.hpp"

namespace iamseq {

void adam_step(ParameterRegistry& parameters, AdamState& state, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ParameterError("adam_step: learning rate must be finite and >= 0");
  }
  if (state.m.empty()) {
    for (const auto& [name, t] : parameters) {
      state.m.emplace_back(t.numel(), 0.0);
      state.v.emplace_back(t.numel(), 0.0);
    }
  }
  if (state.m.size() != parameters.size()) {
    throw ContractError("adam_step: optimizer state tracks " +
                        std::to_string(state.m.size()) + " parameters, registry has " +
                        std::to_string(parameters.size()));
  }
  // Validate every gradient before touching any parameter.
  for (auto& [name, t] : parameters) {
    if (!t.has_grad()) {
      throw ContractError("adam_step: parameter '" + name + "' has no gradient");
    }
    for (double g : t.mutable_grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient for '" + name + "'");
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  std::size_t i = 0;
  for (auto& [name, param] : parameters) {
    auto w = param.mutable_data();
    auto g = param.mutable_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != w.size()) {
      throw ContractError("adam_step: state size mismatch for '" + name + "'");
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    ++i;
  }
}

LrSchedule::LrSchedule(double initial, double floor, double factor,
                       std::size_t patience)
    : initial_(initial),
      floor_(floor),
      factor_(factor),
      patience_(patience),
      current_(initial) {
  if (!(floor > 0.0 && floor <= initial)) {
    throw ParameterError("lr schedule: need 0 < floor <= initial");
  }
  if (!(factor > 0.0 && factor < 1.0)) {
    throw ParameterError("lr schedule: factor must lie in (0, 1)");
  }
  if (patience == 0) throw ParameterError("lr schedule: patience must be >= 1");
}

bool LrSchedule::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    stale_epochs_ = 0;
    return false;
  }
  if (++stale_epochs_ < patience_) return false;
  stale_epochs_ = 0;
  const double next = std::max(current_ * factor_, floor_);
  const bool reduced = next < current_;
  current_ = next;
  return reduced;
}

}  // namespace iamseq
