#ifndef IAMSEQ_OPTIM_HPP_
#define IAMSEQ_OPTIM_HPP_

#include <cstddef>
#include <limits>
#include <vector>

#include "iamseq/model.hpp"

namespace iamseq {

// First/second moment estimates, one pair of arrays per registered
// parameter in registry order. Sized on the first step.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient. A parameter without a gradient violates the contract; a NaN or
// Inf gradient raises NumericError naming the parameter.
void adam_step(ParameterRegistry& parameters, AdamState& state, double lr);

// Reduce-on-plateau: after `patience` consecutive epochs without a strict
// improvement of the monitored loss, multiply the rate by `factor`, never
// going below `floor`.
class LrSchedule {
 public:
  LrSchedule(double initial = 1e-3, double floor = 1e-4, double factor = 0.1,
             std::size_t patience = 10);

  double current() const { return current_; }
  double initial() const { return initial_; }
  double floor() const { return floor_; }
  // Feeds one epoch's monitored loss; returns true when the rate dropped.
  bool observe(double loss);

 private:
  double initial_;
  double floor_;
  double factor_;
  std::size_t patience_;
  double current_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs_ = 0;
};

}  // namespace iamseq

#endif  // IAMSEQ_OPTIM_HPP_
