#include "iamseq/attention.hpp"

#include <cmath>

#include "iamseq/errors.hpp"

namespace iamseq {

namespace {

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("attention: Q, K, V must share a (batch, tokens, dim) "
                         "shape, got " + shape_to_string(q.shape()) + ", " +
                         shape_to_string(k.shape()) + ", " +
                         shape_to_string(v.shape()));
  }
}

Tensor scaled_scores(const Tensor& q, const Tensor& k) {
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(q.dim(2)));
  return scale(matmul(q, transpose_last_two(k)), inv_sqrt_dim);
}

}  // namespace

AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k,
                                     const Tensor& v) {
  check_qkv(q, k, v);
  Tensor weights = softmax(scaled_scores(q, k), 2);
  return {matmul(weights, v), weights};
}

AttentionOutput dynamic_attention(const Tensor& q, const Tensor& k,
                                  const Tensor& v, const DynamicScale& scale) {
  check_qkv(q, k, v);
  if (!scale.lambda.defined() || scale.lambda.numel() != 1) {
    throw DimensionError("dynamic_attention: lambda must be a scalar");
  }
  Tensor weights = softmax(mul(scaled_scores(q, k), scale.lambda), 2);
  return {matmul(weights, v), weights};
}

IamOutput iam_forward(const Tensor& x, AttentionAxis axis,
                      const DynamicScale& scale) {
  if (x.rank() != 3) {
    throw DimensionError("iam_forward: expected (batch, steps, features), got " +
                         shape_to_string(x.shape()));
  }
  if (axis == AttentionAxis::Time) {
    AttentionOutput a = dynamic_attention(x, x, x, scale);
    return {add(x, a.attended), a.weights};
  }
  Tensor tokens = transpose_last_two(x);
  AttentionOutput a = dynamic_attention(tokens, tokens, tokens, scale);
  return {add(x, transpose_last_two(a.attended)), a.weights};
}

std::vector<double> importance_profile(const Tensor& weights) {
  if (weights.rank() != 3 || weights.dim(1) != weights.dim(2)) {
    throw DimensionError("importance_profile: expected (batch, tokens, tokens), "
                         "got " + shape_to_string(weights.shape()));
  }
  const std::size_t batch = weights.dim(0);
  const std::size_t tokens = weights.dim(1);
  auto w = weights.data();
  std::vector<double> importance(tokens, 0.0);
  for (std::size_t row = 0; row < batch * tokens; ++row) {
    for (std::size_t j = 0; j < tokens; ++j) {
      importance[j] += w[row * tokens + j];
    }
  }
  for (double& v : importance) v /= static_cast<double>(batch * tokens);
  return importance;
}

}  // namespace iamseq
