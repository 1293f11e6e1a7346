#ifndef IAMSEQ_LOSS_HPP_
#define IAMSEQ_LOSS_HPP_

#include <span>
#include <vector>

#include "iamseq/tensor.hpp"

namespace iamseq {

// Mean over the batch of -log softmax(logits)[label], evaluated as
// logsumexp(row) - row[label]. Gradient: (softmax - onehot) / batch.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// Row-wise argmax of a (batch, classes) tensor; ties go to the lower index.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace iamseq

#endif  // IAMSEQ_LOSS_HPP_
