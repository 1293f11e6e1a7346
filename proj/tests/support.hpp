#ifndef IAMSEQ_TESTS_SUPPORT_HPP_
#define IAMSEQ_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "iamseq/tensor.hpp"

namespace iamseq::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = false,
                            double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(shape, std::move(v), requires_grad);
}

// Naive triple loop over the last two axes; batch axes must match exactly.
inline std::vector<double> naive_matmul(const std::vector<double>& a,
                                        const std::vector<double>& b,
                                        std::size_t batch, std::size_t m,
                                        std::size_t k, std::size_t n) {
  std::vector<double> c(batch * m * n, 0.0);
  for (std::size_t z = 0; z < batch; ++z) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
          acc += a[z * m * k + i * k + p] * b[z * k * n + p * n + j];
        }
        c[z * m * n + i * n + j] = acc;
      }
    }
  }
  return c;
}

// Relative error with a small floor on the denominator, so entries whose
// true derivative is (near) zero are judged on absolute error instead.
inline constexpr double kRelErrorFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<input>[<index>]: analytic vs numeric"
  std::size_t checked = 0;
};

// Compares backward() against central differences of `loss_fn` for every
// element of every leaf in `inputs`. `loss_fn` must rebuild the graph on
// each call and return a scalar.
inline GradCheckResult gradient_check(const std::function<Tensor()>& loss_fn,
                                      std::vector<Tensor> inputs,
                                      const std::vector<std::string>& names = {},
                                      double eps = 1e-4) {
  for (Tensor& t : inputs) t.zero_grad();
  loss_fn().backward();
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : inputs) analytic.push_back(t.grad());

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    auto data = inputs[n].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = loss_fn().item();
      data[i] = saved - eps;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[n][i], numeric);
      ++result.checked;
      if (result.worst.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        std::ostringstream os;
        os << (n < names.size() ? names[n] : "input" + std::to_string(n)) << '[' << i
           << "]: " << analytic[n][i] << " vs " << numeric;
        result.worst = os.str();
      }
    }
  }
  return result;
}

// loss = sum(y * w) for a fixed random w, so every output element carries a
// distinct, non-trivial upstream gradient.
inline Tensor weighted_sum(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  std::vector<double> w(y.numel());
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  return sum_all(mul(y, Tensor::from(y.shape(), std::move(w))));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("iamseq_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace iamseq::testing

#endif  // IAMSEQ_TESTS_SUPPORT_HPP_
