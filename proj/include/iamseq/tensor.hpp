#ifndef IAMSEQ_TENSOR_HPP_
#define IAMSEQ_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace iamseq {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

// Dense row-major array of doubles that may take part in a define-by-run
// differentiation graph. A Tensor is a cheap handle: copies share storage,
// the same way a parameter registered in several places is a single leaf.
//
// A rank-0 shape ({}) denotes a scalar.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view of a leaf's values (optimizers, initializers, loaders).
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Accumulated gradient; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from this scalar through the recorded graph. Leaf
  // gradients accumulate; the intermediate graph is released afterwards.
  void backward() const;

  // Fresh leaf holding a copy of the values and no history.
  Tensor detach(bool requires_grad = false) const;

  bool same_storage(const Tensor& other) const noexcept {
    return node_ == other.node_;
  }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  const detail::Node& checked() const;
  std::shared_ptr<detail::Node> node_;
};

// While alive, newly created results do not record graph history.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

// Seeded generator shared by dropout, initializers, shuffling and the
// synthetic data generator. Draws are defined bit-for-bit by the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();
  std::uint64_t next() { return engine_(); }
  // Index in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Independent seed for a named sub-stream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// ---- Linear algebra -------------------------------------------------------

// Batched matrix product over the last two axes. Leading batch axes must
// agree, or one operand must have none (or only size-1 leading axes).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last_two(const Tensor& x);

// ---- Elementwise ----------------------------------------------------------
//
// Binary ops accept equal shapes, a single-element operand, or an operand
// whose shape (after dropping leading 1s) is a suffix of the other's, e.g.
// a bias of shape (n) against a (batch, n) activation.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// Numerically stable softmax along `axis` (max subtracted per slice).
Tensor softmax(const Tensor& x, std::size_t axis);

// ---- Shape manipulation and reductions ------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Inserts a new axis at `axis` and concatenates along it.
Tensor stack(const std::vector<Tensor>& parts, std::size_t axis);
// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end);
// slice of one index with the axis removed.
Tensor select(const Tensor& x, std::size_t axis, std::size_t index);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Inverted dropout: in training mode each element is zeroed with
// probability `rate` and survivors are scaled by 1/(1-rate). Outside
// training, or at rate 0, the input handle is returned unchanged.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

}  // namespace iamseq

#endif  // IAMSEQ_TENSOR_HPP_
