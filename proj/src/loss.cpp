#include "iamseq/loss.hpp"

#include <cmath>

#include "iamseq/autograd.hpp"
#include "iamseq/errors.hpp"

namespace iamseq {

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) {
    throw DimensionError("cross_entropy: expected (batch, classes), got " +
                         shape_to_string(logits.shape()));
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ContractError("cross_entropy: " + std::to_string(labels.size()) +
                        " labels for a batch of " + std::to_string(batch));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ContractError("cross_entropy: label " + std::to_string(y) +
                          " out of range for " + std::to_string(classes) +
                          " classes");
    }
  }
  auto z = logits.data();
  std::vector<double> probs(z.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = z.data() + b * classes;
    double hi = row[0];
    for (std::size_t c = 1; c < classes; ++c) hi = std::max(hi, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = std::exp(row[c] - hi);
      sum += probs[b * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] /= sum;
    total += hi + std::log(sum) - row[labels[b]];
  }
  std::vector<int> targets(labels.begin(), labels.end());
  return detail::make_result(
      "cross_entropy", {}, {total / static_cast<double>(batch)}, {logits},
      [probs = std::move(probs), targets = std::move(targets), batch,
       classes](detail::Node& self) {
        auto g = detail::grad_buffer(*self.inputs[0]);
        const double factor = self.grad[0] / static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = static_cast<int>(c) == targets[b] ? 1.0 : 0.0;
            g[b * classes + c] += factor * (probs[b * classes + c] - onehot);
          }
        }
      });
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("argmax_rows: expected (batch, classes), got " +
                         shape_to_string(logits.shape()));
  }
  const std::size_t classes = logits.dim(1);
  auto z = logits.data();
  std::vector<int> out(logits.dim(0));
  for (std::size_t b = 0; b < out.size(); ++b) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (z[b * classes + c] > z[b * classes + best]) best = c;
    }
    out[b] = static_cast<int>(best);
  }
  return out;
}

}  // namespace iamseq
