#include "iamseq/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "iamseq/autograd.hpp"
#include "iamseq/errors.hpp"

namespace iamseq {

namespace {

thread_local bool g_grad_enabled = true;

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

Shape drop_leading_ones(const Shape& s) {
  auto it = std::find_if(s.begin(), s.end(), [](std::size_t d) { return d != 1; });
  return Shape(it, s.end());
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " +
                         shape_to_string(x.shape()));
  }
}

// Splits a shape around `axis` into (outer, axis extent, inner) counts.
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

void accumulate(detail::Node& input, std::span<const double> delta) {
  auto g = detail::grad_buffer(input);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

// Broadcast plan for a binary elementwise op: the output takes the larger
// shape, the smaller operand is read at index i % small_numel.
struct Broadcast {
  Shape out_shape;
  std::size_t a_numel;
  std::size_t b_numel;
};

Broadcast plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return {sa, a.numel(), b.numel()};
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  if (nb <= na && is_suffix(drop_leading_ones(sb), sa) &&
      (nb == 1 || sb.size() <= sa.size())) {
    return {sa, na, nb};
  }
  if (na < nb && is_suffix(drop_leading_ones(sa), sb) &&
      (na == 1 || sa.size() <= sb.size())) {
    return {sb, na, nb};
  }
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_to_string(sa) + " and " + shape_to_string(sb));
}

template <typename Forward, typename GradA, typename GradB>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b,
                 Forward forward, GradA grad_a, GradB grad_b) {
  const Broadcast plan = plan_broadcast(a, b, op);
  const std::size_t n = shape_numel(plan.out_shape);
  auto da = a.data();
  auto db = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = forward(da[i % plan.a_numel], db[i % plan.b_numel]);
  }
  return detail::make_result(
      op, plan.out_shape, std::move(out), {a, b},
      [plan, n, grad_a, grad_b](detail::Node& self) {
        detail::Node& na = *self.inputs[0];
        detail::Node& nb = *self.inputs[1];
        const auto& va = na.value;
        const auto& vb = nb.value;
        const auto& g = self.grad;
        if (na.requires_grad) {
          auto ga = detail::grad_buffer(na);
          for (std::size_t i = 0; i < n; ++i) {
            const double x = va[i % plan.a_numel];
            const double y = vb[i % plan.b_numel];
            ga[i % plan.a_numel] += grad_a(g[i], x, y);
          }
        }
        if (nb.requires_grad) {
          auto gb = detail::grad_buffer(nb);
          for (std::size_t i = 0; i < n; ++i) {
            const double x = va[i % plan.a_numel];
            const double y = vb[i % plan.b_numel];
            gb[i % plan.b_numel] += grad_b(g[i], x, y);
          }
        }
      });
}

// Unary op whose derivative is expressed through the input x and output y.
template <typename Forward, typename Derivative>
Tensor unary_op(const char* op, const Tensor& x, Forward forward,
                Derivative derivative) {
  auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t i = 0; i < dx.size(); ++i) out[i] = forward(dx[i]);
  return detail::make_result(
      op, x.shape(), std::move(out), {x},
      [derivative](detail::Node& self) {
        detail::Node& in = *self.inputs[0];
        auto g = detail::grad_buffer(in);
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += self.grad[i] * derivative(in.value[i], self.value[i]);
        }
      });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

// ---- Graph plumbing --------------------------------------------------------

namespace detail {

std::span<double> grad_buffer(Node& node) {
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn) {
  for (double v : value) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": produced a non-finite value");
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->leaf = false;
  const bool track =
      g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() noexcept { return g_grad_enabled; }

// ---- Rng -------------------------------------------------------------------

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t Rng::below(std::size_t n) {
  // Rejection sampling keeps the draw unbiased and platform independent.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return static_cast<std::size_t>(r % n);
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_to_string(shape));
    }
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("tensor: non-finite input value");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

const detail::Node& Tensor::checked() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  check_axis(*this, axis, "dim");
  return shape()[axis];
}

std::size_t Tensor::numel() const { return checked().value.size(); }

std::span<const double> Tensor::data() const { return checked().value; }

std::span<double> Tensor::mutable_data() {
  checked();
  if (!node_->leaf) {
    throw ContractError("mutable_data: only leaf tensors may be written");
  }
  return node_->value;
}

std::vector<double> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item: tensor of shape " + shape_to_string(shape()) +
                         " is not a scalar");
  }
  return data()[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) {
    throw DimensionError("at: index rank does not match shape " +
                         shape_to_string(s));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) {
      throw DimensionError("at: index out of range for shape " +
                           shape_to_string(s));
    }
    flat = flat * s[axis] + i;
    ++axis;
  }
  return data()[flat];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }
bool Tensor::is_leaf() const { return checked().leaf; }
bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::vector<double> Tensor::grad() const {
  const auto& n = checked();
  if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
  return n.grad;
}

std::span<double> Tensor::mutable_grad() {
  checked();
  return detail::grad_buffer(*node_);
}

void Tensor::zero_grad() {
  checked();
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach(bool requires_grad) const {
  return from(shape(), to_vector(), requires_grad);
}

void Tensor::backward() const {
  const auto& root = checked();
  if (root.value.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_to_string(root.shape));
  }
  if (root.consumed) {
    throw ContractError("backward: graph already consumed");
  }
  if (!root.requires_grad) {
    throw ContractError("backward: loss is not connected to any tensor that "
                        "requires a gradient");
  }

  // Post-order DFS yields a topological order (inputs before consumers);
  // each node is visited exactly once.
  // The `consumed` flag doubles as the visit marker; leaves get it reset
  // once the order is built.
  // `order` owns its nodes: releasing a node's inputs below must not free
  // nodes still waiting for their turn.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  std::vector<detail::Node*> touched;
  auto visit = [&touched](detail::Node* n) {
    if (n->consumed) return false;
    n->consumed = true;
    touched.push_back(n);
    return true;
  };
  visit(node_.get());
  stack.emplace_back(node_, 0);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      std::shared_ptr<detail::Node> child = n->inputs[next++];
      if (child->requires_grad && visit(child.get())) {
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      order.push_back(std::move(n));
      stack.pop_back();
    }
  }
  for (detail::Node* n : touched) {
    if (n->leaf) n->consumed = false;
  }

  detail::grad_buffer(*node_)[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = it->get();
    if (n->leaf) continue;
    if (n->backward_fn) n->backward_fn(*n);
    // Release the consumed part of the graph.
    n->backward_fn = nullptr;
    n->inputs.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

// ---- Linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul: operands need at least 2 axes, got " +
                         shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa[sa.size() - 1];
  const std::size_t kb = sb[sb.size() - 2];
  const std::size_t n = sb[sb.size() - 1];
  const Shape lead_a(sa.begin(), sa.end() - 2);
  const Shape lead_b(sb.begin(), sb.end() - 2);
  const std::size_t batch_a = shape_numel(lead_a);
  const std::size_t batch_b = shape_numel(lead_b);
  const bool batches_ok =
      lead_a == lead_b || batch_a == 1 || batch_b == 1;
  if (k != kb || !batches_ok) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(sa) +
                         " and " + shape_to_string(sb));
  }
  const std::size_t batch = std::max(batch_a, batch_b);
  Shape out_shape = batch_a >= batch_b ? lead_a : lead_b;
  if (lead_a.size() > lead_b.size() && batch_a == batch) out_shape = lead_a;
  out_shape.push_back(m);
  out_shape.push_back(n);

  std::vector<double> out(batch * m * n);
  auto da = a.data();
  auto db = b.data();
  const std::size_t step_a = batch_a == 1 ? 0 : m * k;
  const std::size_t step_b = batch_b == 1 ? 0 : k * n;
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMatrixMap A(da.data() + i * step_a, m, k);
    ConstMatrixMap B(db.data() + i * step_b, k, n);
    MatrixMap C(out.data() + i * m * n, m, n);
    C.noalias() = A * B;
  }
  return detail::make_result(
      "matmul", out_shape, std::move(out), {a, b},
      [=](detail::Node& self) {
        detail::Node& na = *self.inputs[0];
        detail::Node& nb = *self.inputs[1];
        for (std::size_t i = 0; i < batch; ++i) {
          ConstMatrixMap G(self.grad.data() + i * m * n, m, n);
          if (na.requires_grad) {
            MatrixMap GA(detail::grad_buffer(na).data() + i * step_a, m, k);
            ConstMatrixMap B(nb.value.data() + i * step_b, k, n);
            GA.noalias() += G * B.transpose();
          }
          if (nb.requires_grad) {
            MatrixMap GB(detail::grad_buffer(nb).data() + i * step_b, k, n);
            ConstMatrixMap A(na.value.data() + i * step_a, m, k);
            GB.noalias() += A.transpose() * G;
          }
        }
      });
}

Tensor transpose_last_two(const Tensor& x) {
  if (x.rank() < 2) {
    throw DimensionError("transpose_last_two: need at least 2 axes, got " +
                         shape_to_string(x.shape()));
  }
  Shape s = x.shape();
  const std::size_t rows = s[s.size() - 2];
  const std::size_t cols = s[s.size() - 1];
  const std::size_t batch = x.numel() / (rows * cols);
  std::swap(s[s.size() - 2], s[s.size() - 1]);
  auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t base = b * rows * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        out[base + c * rows + r] = dx[base + r * cols + c];
      }
    }
  }
  return detail::make_result(
      "transpose_last_two", std::move(s), std::move(out), {x},
      [=](detail::Node& self) {
        auto g = detail::grad_buffer(*self.inputs[0]);
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t base = b * rows * cols;
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              g[base + r * cols + c] += self.grad[base + c * rows + r];
            }
          }
        }
      });
}

// ---- Elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](double v) {
        // Split by sign so exp never overflows.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double s) { return s * (1.0 - s); });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double t) { return 1.0 - t * t; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "softmax");
  auto dx = x.data();
  for (double v : dx) {
    if (std::isnan(v)) throw NumericError("softmax: NaN input");
  }
  const AxisView v = axis_view(x.shape(), axis);
  std::vector<double> out(dx.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double hi = dx[base];
      for (std::size_t j = 1; j < v.extent; ++j) {
        hi = std::max(hi, dx[base + j * v.inner]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < v.extent; ++j) {
        const double e = std::exp(dx[base + j * v.inner] - hi);
        out[base + j * v.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < v.extent; ++j) out[base + j * v.inner] /= total;
    }
  }
  return detail::make_result(
      "softmax", x.shape(), std::move(out), {x}, [v](detail::Node& self) {
        auto g = detail::grad_buffer(*self.inputs[0]);
        const auto& y = self.value;
        const auto& gy = self.grad;
        for (std::size_t o = 0; o < v.outer; ++o) {
          for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t base = o * v.extent * v.inner + in;
            double dot = 0.0;
            for (std::size_t j = 0; j < v.extent; ++j) {
              const std::size_t idx = base + j * v.inner;
              dot += gy[idx] * y[idx];
            }
            for (std::size_t j = 0; j < v.extent; ++j) {
              const std::size_t idx = base + j * v.inner;
              g[idx] += y[idx] * (gy[idx] - dot);
            }
          }
        }
      });
}

// ---- Shape manipulation and reductions -------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) +
                         " as " + shape_to_string(shape));
  }
  return detail::make_result("reshape", std::move(shape), x.to_vector(), {x},
                             [](detail::Node& self) {
                               accumulate(*self.inputs[0], self.grad);
                             });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  check_axis(parts[0], axis, "concat");
  Shape out_shape = parts[0].shape();
  std::size_t extent = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) {
      throw DimensionError("concat: rank mismatch " + shape_to_string(s) +
                           " vs " + shape_to_string(out_shape));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        throw DimensionError("concat: shapes " + shape_to_string(s) + " and " +
                             shape_to_string(out_shape) +
                             " differ off the concat axis");
      }
    }
    extents.push_back(s[axis]);
    extent += s[axis];
  }
  out_shape[axis] = extent;
  const AxisView v = axis_view(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto d = parts[p].data();
    const std::size_t chunk = extents[p] * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy_n(d.data() + o * chunk, chunk,
                  out.data() + o * extent * v.inner + offset);
    }
    offset += chunk;
  }
  return detail::make_result(
      "concat", out_shape, std::move(out), parts,
      [v, extent, extents](detail::Node& self) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < self.inputs.size(); ++p) {
          const std::size_t chunk = extents[p] * v.inner;
          detail::Node& in = *self.inputs[p];
          if (in.requires_grad) {
            auto g = detail::grad_buffer(in);
            for (std::size_t o = 0; o < v.outer; ++o) {
              const double* src = self.grad.data() + o * extent * v.inner + offset;
              double* dst = g.data() + o * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
            }
          }
          offset += chunk;
        }
      });
}

Tensor stack(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("stack: no inputs");
  if (axis > parts[0].rank()) {
    throw DimensionError("stack: axis " + std::to_string(axis) +
                         " out of range for shape " +
                         shape_to_string(parts[0].shape()));
  }
  std::vector<Tensor> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s = p.shape();
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(axis), 1);
    expanded.push_back(reshape(p, std::move(s)));
  }
  return concat(expanded, axis);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  check_axis(x, axis, "slice");
  if (begin >= end || end > x.shape()[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for shape " +
                         shape_to_string(x.shape()));
  }
  const AxisView v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * v.inner;
  auto d = x.data();
  std::vector<double> out(v.outer * chunk);
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(d.data() + o * v.extent * v.inner + begin * v.inner, chunk,
                out.data() + o * chunk);
  }
  return detail::make_result(
      "slice", std::move(out_shape), std::move(out), {x},
      [v, chunk, begin](detail::Node& self) {
        auto g = detail::grad_buffer(*self.inputs[0]);
        for (std::size_t o = 0; o < v.outer; ++o) {
          double* dst = g.data() + o * v.extent * v.inner + begin * v.inner;
          const double* src = self.grad.data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      });
}

Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
  Tensor s = slice(x, axis, index, index + 1);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  return reshape(s, std::move(shape));
}

Tensor sum(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "sum");
  const AxisView v = axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto d = x.data();
  std::vector<double> out(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t j = 0; j < v.extent; ++j) {
      const double* src = d.data() + (o * v.extent + j) * v.inner;
      double* dst = out.data() + o * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
    }
  }
  return detail::make_result(
      "sum", std::move(out_shape), std::move(out), {x},
      [v](detail::Node& self) {
        auto g = detail::grad_buffer(*self.inputs[0]);
        for (std::size_t o = 0; o < v.outer; ++o) {
          for (std::size_t j = 0; j < v.extent; ++j) {
            double* dst = g.data() + (o * v.extent + j) * v.inner;
            const double* src = self.grad.data() + o * v.inner;
            for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  check_axis(x, axis, "mean");
  return scale(sum(x, axis), 1.0 / static_cast<double>(x.shape()[axis]));
}

Tensor sum_all(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return detail::make_result("sum_all", {}, {total}, {x},
                             [](detail::Node& self) {
                               auto g = detail::grad_buffer(*self.inputs[0]);
                               for (double& gi : g) gi += self.grad[0];
                             });
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout: rate must lie in [0, 1), got " +
                         std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto d = x.data();
  std::vector<double> mask(d.size());
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = d[i] * mask[i];
  }
  return detail::make_result(
      "dropout", x.shape(), std::move(out), {x},
      [mask = std::move(mask)](detail::Node& self) {
        auto g = detail::grad_buffer(*self.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
      });
}

}  // namespace iamseq
