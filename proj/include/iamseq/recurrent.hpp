#ifndef IAMSEQ_RECURRENT_HPP_
#define IAMSEQ_RECURRENT_HPP_

#include <cstddef>
#include <optional>

#include "iamseq/tensor.hpp"

namespace iamseq {

// Gate weights act on the concatenation [h_{t-1}, x_t], so every W has shape
// (hidden, hidden + input) and every b has shape (hidden).
struct LstmParams {
  Tensor w_forget, w_input, w_cell, w_output;
  Tensor b_forget, b_input, b_cell, b_output;

  // All-zero parameters (trainable leaves).
  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);
  // W ~ U(-1/sqrt(H), 1/sqrt(H)); biases zero except the forget bias at 1.
  static LstmParams initialized(std::size_t input_size,
                                std::size_t hidden_size, Rng& rng);

  std::size_t hidden_size() const { return b_forget.numel(); }
  std::size_t input_size() const { return w_forget.dim(1) - hidden_size(); }
  // Throws DimensionError when the eight tensors disagree.
  void validate() const;
};

struct LstmState {
  Tensor h;  // (batch, hidden)
  Tensor c;  // (batch, hidden)

  static LstmState zeros(std::size_t batch, std::size_t hidden_size);
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  void validate() const;
};

// One step of the gated recurrence:
//   f = s(W_f[h,x] + b_f)   i = s(W_i[h,x] + b_i)   g = tanh(W_C[h,x] + b_C)
//   c' = f*c + i*g          o = s(W_o[h,x] + b_o)   h' = o*tanh(c')
LstmState lstm_cell_step(const Tensor& x_t, const LstmState& state,
                         const LstmParams& params);

// Unrolls the cell over a (batch, steps, input) sequence and returns the
// stacked hidden states, (batch, steps, hidden). The initial state defaults
// to zeros.
Tensor lstm_forward(const Tensor& seq, const LstmParams& params,
                    const std::optional<LstmState>& init = std::nullopt);

// Forward pass over t = 1..L and a second pass over the reversed sequence;
// position t of the output is [h_fwd(t), h_bwd(t)], (batch, steps, 2*hidden).
Tensor bilstm_forward(const Tensor& seq, const BiLstmParams& params);

}  // namespace iamseq

#endif  // IAMSEQ_RECURRENT_HPP_
