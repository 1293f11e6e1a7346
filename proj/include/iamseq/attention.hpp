#ifndef IAMSEQ_ATTENTION_HPP_
#define IAMSEQ_ATTENTION_HPP_

#include <vector>

#include "iamseq/tensor.hpp"

namespace iamseq {

// Which axis of a (batch, steps, features) input plays the token role.
//   Time:    tokens are the steps, each embedded by its feature vector.
//   Feature: tokens are the features, each embedded by its window of steps.
enum class AttentionAxis { Time, Feature };

// Learnable sharpness multiplier applied to the scaled scores before the
// softmax. A single trainable scalar; 1 reproduces plain scaled
// dot-product attention.
struct DynamicScale {
  Tensor lambda;

  static DynamicScale create(double initial = 1.0) {
    return {Tensor::scalar(initial, /*requires_grad=*/true)};
  }
};

struct AttentionOutput {
  // Same shape as V.
  Tensor attended;
  // (batch, tokens, tokens); every row sums to 1.
  Tensor weights;
};

// weights = softmax(Q K^T / sqrt(D)) over the key axis, attended = weights V.
// Q, K, V must share a (batch, tokens, D) shape.
AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k,
                                     const Tensor& v);

// As scaled_dot_attention with the scaled scores multiplied by lambda
// before the softmax. Gradients flow to lambda.
AttentionOutput dynamic_attention(const Tensor& q, const Tensor& k,
                                  const Tensor& v, const DynamicScale& scale);

struct IamOutput {
  Tensor output;   // shape of x
  Tensor weights;  // (batch, tokens, tokens)
};

// Integrated attention: residual self-attention y = x + Z(x, x, x) with
// dynamic scaling, on a (batch, steps, features) input. In Feature mode the
// attention runs on the transposed (batch, features, steps) view and the
// result is transposed back.
IamOutput iam_forward(const Tensor& x, AttentionAxis axis,
                      const DynamicScale& scale);

// Attention received by each token: column means of the weights over batch
// and query rows. Sums to 1 when every row does.
std::vector<double> importance_profile(const Tensor& weights);

}  // namespace iamseq

#endif  // IAMSEQ_ATTENTION_HPP_
