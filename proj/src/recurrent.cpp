#include "iamseq/recurrent.hpp"

#include <cmath>

#include "iamseq/errors.hpp"

namespace iamseq {

namespace {

// The four gate projections fused into one (hidden + input, 4*hidden)
// matrix so a step costs a single matmul. Gate order: f, i, C, o.
struct PackedGates {
  Tensor weights;
  Tensor bias;
  std::size_t hidden;
};

PackedGates pack(const LstmParams& p) {
  return {concat({transpose_last_two(p.w_forget), transpose_last_two(p.w_input),
                  transpose_last_two(p.w_cell), transpose_last_two(p.w_output)},
                 1),
          concat({p.b_forget, p.b_input, p.b_cell, p.b_output}, 0),
          p.hidden_size()};
}

LstmState packed_step(const Tensor& x_t, const LstmState& state,
                      const PackedGates& gates) {
  const std::size_t h = gates.hidden;
  Tensor z = add(matmul(concat({state.h, x_t}, 1), gates.weights), gates.bias);
  Tensor forget = sigmoid(slice(z, 1, 0, h));
  Tensor input = sigmoid(slice(z, 1, h, 2 * h));
  Tensor candidate = iamseq::tanh(slice(z, 1, 2 * h, 3 * h));
  Tensor output = sigmoid(slice(z, 1, 3 * h, 4 * h));
  Tensor c = add(mul(forget, state.c), mul(input, candidate));
  return {mul(output, iamseq::tanh(c)), c};
}

void check_sequence(const Tensor& seq, const LstmParams& params) {
  if (seq.rank() != 3) {
    throw DimensionError("lstm: expected (batch, steps, input), got " +
                         shape_to_string(seq.shape()));
  }
  if (seq.dim(2) != params.input_size()) {
    throw DimensionError("lstm: input width " + std::to_string(seq.dim(2)) +
                         " does not match parameters declared for " +
                         std::to_string(params.input_size()));
  }
}

}  // namespace

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  const Shape w{hidden_size, hidden_size + input_size};
  const Shape b{hidden_size};
  return {Tensor::zeros(w, true), Tensor::zeros(w, true),
          Tensor::zeros(w, true), Tensor::zeros(w, true),
          Tensor::zeros(b, true), Tensor::zeros(b, true),
          Tensor::zeros(b, true), Tensor::zeros(b, true)};
}

LstmParams LstmParams::initialized(std::size_t input_size,
                                   std::size_t hidden_size, Rng& rng) {
  LstmParams p = zeros(input_size, hidden_size);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  for (Tensor* w : {&p.w_forget, &p.w_input, &p.w_cell, &p.w_output}) {
    for (double& v : w->mutable_data()) v = rng.uniform(-bound, bound);
  }
  for (double& v : p.b_forget.mutable_data()) v = 1.0;
  return p;
}

void LstmParams::validate() const {
  if (b_forget.rank() != 1) {
    throw DimensionError("lstm: bias must be a vector, got " +
                         shape_to_string(b_forget.shape()));
  }
  const std::size_t h = b_forget.numel();
  if (w_forget.rank() != 2 || w_forget.dim(0) != h || w_forget.dim(1) <= h) {
    throw DimensionError("lstm: W_f shape " + shape_to_string(w_forget.shape()) +
                         " inconsistent with hidden size " + std::to_string(h));
  }
  for (const Tensor* w : {&w_input, &w_cell, &w_output}) {
    if (w->shape() != w_forget.shape()) {
      throw DimensionError("lstm: gate weights disagree: " +
                           shape_to_string(w->shape()) + " vs " +
                           shape_to_string(w_forget.shape()));
    }
  }
  for (const Tensor* b : {&b_input, &b_cell, &b_output}) {
    if (b->shape() != b_forget.shape()) {
      throw DimensionError("lstm: gate biases disagree: " +
                           shape_to_string(b->shape()) + " vs " +
                           shape_to_string(b_forget.shape()));
    }
  }
}

LstmState LstmState::zeros(std::size_t batch, std::size_t hidden_size) {
  return {Tensor::zeros({batch, hidden_size}), Tensor::zeros({batch, hidden_size})};
}

void BiLstmParams::validate() const {
  forward.validate();
  backward.validate();
  if (forward.w_forget.shape() != backward.w_forget.shape()) {
    throw DimensionError("bilstm: directions declare different sizes " +
                         shape_to_string(forward.w_forget.shape()) + " vs " +
                         shape_to_string(backward.w_forget.shape()));
  }
}

LstmState lstm_cell_step(const Tensor& x_t, const LstmState& state,
                         const LstmParams& params) {
  params.validate();
  const std::size_t h = params.hidden_size();
  if (x_t.rank() != 2 || x_t.dim(1) != params.input_size()) {
    throw DimensionError("lstm_cell_step: input " + shape_to_string(x_t.shape()) +
                         " does not match input size " +
                         std::to_string(params.input_size()));
  }
  const Shape state_shape{x_t.dim(0), h};
  if (state.h.shape() != state_shape || state.c.shape() != state_shape) {
    throw DimensionError("lstm_cell_step: state shapes " +
                         shape_to_string(state.h.shape()) + ", " +
                         shape_to_string(state.c.shape()) + " expected " +
                         shape_to_string(state_shape));
  }
  return packed_step(x_t, state, pack(params));
}

Tensor lstm_forward(const Tensor& seq, const LstmParams& params,
                    const std::optional<LstmState>& init) {
  params.validate();
  check_sequence(seq, params);
  const std::size_t batch = seq.dim(0);
  const std::size_t steps = seq.dim(1);
  LstmState state = init ? *init : LstmState::zeros(batch, params.hidden_size());
  const PackedGates gates = pack(params);
  std::vector<Tensor> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    state = packed_step(select(seq, 1, t), state, gates);
    outputs.push_back(state.h);
  }
  return stack(outputs, 1);
}

Tensor bilstm_forward(const Tensor& seq, const BiLstmParams& params) {
  params.validate();
  check_sequence(seq, params.forward);
  const std::size_t batch = seq.dim(0);
  const std::size_t steps = seq.dim(1);
  const std::size_t hidden = params.forward.hidden_size();

  std::vector<Tensor> inputs;
  inputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) inputs.push_back(select(seq, 1, t));

  const PackedGates fwd = pack(params.forward);
  const PackedGates bwd = pack(params.backward);
  std::vector<Tensor> fwd_out(steps);
  std::vector<Tensor> bwd_out(steps);
  LstmState fs = LstmState::zeros(batch, hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    fs = packed_step(inputs[t], fs, fwd);
    fwd_out[t] = fs.h;
  }
  LstmState bs = LstmState::zeros(batch, hidden);
  for (std::size_t t = steps; t-- > 0;) {
    bs = packed_step(inputs[t], bs, bwd);
    bwd_out[t] = bs.h;
  }
  return concat({stack(fwd_out, 1), stack(bwd_out, 1)}, 2);
}

}  // namespace iamseq
