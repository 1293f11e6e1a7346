#ifndef IAMSEQ_AUTOGRAD_HPP_
#define IAMSEQ_AUTOGRAD_HPP_

// Graph internals. Only needed by code that defines new differentiable ops.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "iamseq/tensor.hpp"

namespace iamseq::detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  // Empty until the first accumulation.
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;
};

// Zero-initialised gradient buffer of `node`, allocated on first use.
std::span<double> grad_buffer(Node& node);

// Wraps a freshly computed value as an op result. Non-finite values raise
// NumericError naming `op`. History is recorded only when grad mode is on
// and at least one input requires a gradient.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn);

}  // namespace iamseq::detail

#endif  // IAMSEQ_AUTOGRAD_HPP_
