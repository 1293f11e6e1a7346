#include <cmath>
#include <limits>
#include <string>

#include "doctest.h"

#include "iamseq/errors.hpp"
#include "iamseq/tensor.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace iamseq;
using namespace iamseq::testing;

namespace {

Tensor mat(std::size_t r, std::size_t c, std::vector<double> v, bool grad = false) {
  return Tensor::from({r, c}, std::move(v), grad);
}

void require_close(const Tensor& t, const std::vector<double>& expected, double tol) {
  REQUIRE(t.numel() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    INFO("index " << i);
    CHECK(std::abs(t.data()[i] - expected[i]) <= tol);
  }
}

constexpr double kOpGradTol = 1e-5;

}  // namespace

TEST_CASE("construction checks shape against data") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({0, 3}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0, NAN}), NumericError);
  CHECK_THROWS_AS(Tensor::from({1}, {std::numeric_limits<double>::infinity()}),
                  NumericError);
  Tensor s = Tensor::scalar(2.5);
  CHECK(s.rank() == 0);
  CHECK(s.item() == 2.5);
  Tensor z = Tensor::zeros({3, 4});
  CHECK(z.numel() == 12);
  CHECK_FALSE(z.has_grad());
}

TEST_CASE("only leaves expose mutable storage") {
  Tensor a = Tensor::from({2}, {1, 2}, true);
  Tensor b = scale(a, 2.0);
  CHECK_NOTHROW(a.mutable_data());
  CHECK_THROWS_AS(b.mutable_data(), ContractError);
}

TEST_SUITE("matmul") {
  TEST_CASE("identity, worked example and annihilator") {
    Tensor b = mat(2, 2, {5, 6, 7, 8});
    require_close(matmul(mat(2, 2, {1, 0, 0, 1}), b), {5, 6, 7, 8}, 0.0);
    require_close(matmul(mat(2, 2, {1, 2, 3, 4}), b), {19, 22, 43, 50}, 0.0);
    Tensor any = mat(2, 3, {1.5, -2, 3, 4, 5, -6});
    require_close(matmul(mat(2, 2, {0, 0, 0, 0}), any), {0, 0, 0, 0, 0, 0}, 0.0);
  }

  TEST_CASE("shape mismatch names both shapes") {
    try {
      matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("(2, 3)") != std::string::npos);
      CHECK(msg.find("(4, 5)") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 2, 3}), Tensor::zeros({3, 3, 2})),
                    DimensionError);
    CHECK_THROWS_AS(matmul(Tensor::zeros({3}), Tensor::zeros({3, 1})), DimensionError);
  }

  TEST_CASE("agrees with the triple-loop oracle up to 16x16") {
    Rng rng(1);
    for (std::size_t m = 1; m <= 16; m += 3) {
      for (std::size_t k = 1; k <= 16; k += 5) {
        for (std::size_t n = 1; n <= 16; n += 4) {
          Tensor a = random_tensor({m, k}, rng, false, -3, 3);
          Tensor b = random_tensor({k, n}, rng, false, -3, 3);
          const auto expected = naive_matmul(a.to_vector(), b.to_vector(), 1, m, k, n);
          CHECK(max_abs_diff(matmul(a, b).data(), expected) < 1e-12);
        }
      }
    }
  }

  TEST_CASE("batched and broadcast batch of one") {
    Rng rng(2);
    Tensor a = random_tensor({3, 4, 5}, rng);
    Tensor b = random_tensor({3, 5, 2}, rng);
    CHECK(max_abs_diff(matmul(a, b).data(),
                       naive_matmul(a.to_vector(), b.to_vector(), 3, 4, 5, 2)) < 1e-12);

    Tensor w = random_tensor({5, 2}, rng);
    std::vector<double> tiled;
    for (int i = 0; i < 3; ++i) {
      auto v = w.to_vector();
      tiled.insert(tiled.end(), v.begin(), v.end());
    }
    Tensor out = matmul(a, w);
    CHECK(out.shape() == Shape{3, 4, 2});
    CHECK(max_abs_diff(out.data(), naive_matmul(a.to_vector(), tiled, 3, 4, 5, 2)) < 1e-12);
  }

  TEST_CASE("gradients match finite differences") {
    Rng rng(3);
    Tensor a = random_tensor({2, 3, 4}, rng, true);
    Tensor b = random_tensor({4, 2}, rng, true);
    auto r = gradient_check([&] { return weighted_sum(matmul(a, b)); }, {a, b});
    INFO(r.worst);
    CHECK(r.max_rel_error < kOpGradTol);
  }
}

TEST_SUITE("softmax") {
  TEST_CASE("worked examples") {
    require_close(softmax(Tensor::from({3}, {0, 0, 0}), 0), {1.0 / 3, 1.0 / 3, 1.0 / 3},
                  1e-15);
    require_close(softmax(Tensor::from({3}, {1, 2, 3}), 0),
                  {0.090031, 0.244728, 0.665241}, 1e-6);
    Tensor big = softmax(Tensor::from({2}, {1000, 0}), 0);
    CHECK(big.data()[0] == 1.0);
    CHECK(big.data()[1] >= 0.0);
    CHECK(big.data()[1] < 1e-300);
  }

  TEST_CASE("matches the high-precision oracle") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.below(20);
      Tensor x = random_tensor({n}, rng, false, -20, 20);
      const auto expected = hp_softmax(x.to_vector());
      CHECK(max_abs_diff(softmax(x, 0).data(), expected) < 1e-12);
    }
  }

  TEST_CASE("slices are distributions along every axis") {
    Rng rng(5);
    Tensor x = random_tensor({3, 4, 5}, rng, false, -10, 10);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      Tensor y = softmax(x, axis);
      Tensor sums = sum(y, axis);
      for (double s : sums.data()) CHECK(std::abs(s - 1.0) <= 1e-12);
      for (double v : y.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }

  TEST_CASE("shift invariance") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor x = random_tensor({4, 6}, rng, false, -5, 5);
      const double c = rng.uniform(-50, 50);
      Tensor shifted = add(x, Tensor::scalar(c));
      CHECK(max_abs_diff(softmax(x, 1).data(), softmax(shifted, 1).data()) < 1e-14);
    }
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(softmax(Tensor::zeros({2, 2}), 2), DimensionError);
    // NaN cannot be stored in a tensor, so the guard is reached through an
    // op that overflows before softmax.
    Tensor huge = Tensor::from({2}, {1e300, 1e300});
    CHECK_THROWS_AS(softmax(mul(huge, huge), 0), NumericError);
  }

  TEST_CASE("gradients match finite differences") {
    Rng rng(7);
    Tensor x = random_tensor({2, 3, 4}, rng, true, -2, 2);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      auto r = gradient_check([&] { return weighted_sum(softmax(x, axis)); }, {x});
      INFO("axis " << axis << ": " << r.worst);
      CHECK(r.max_rel_error < kOpGradTol);
    }
  }
}

TEST_SUITE("elementwise") {
  TEST_CASE("worked examples") {
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    CHECK(std::abs(tanh(Tensor::scalar(0.5)).item() - 0.462117) < 1e-6);
    CHECK(relu(Tensor::scalar(-3.0)).item() == 0.0);
  }

  TEST_CASE("sigmoid and tanh against high-precision oracles") {
    for (double x = -30.0; x <= 30.0; x += 0.37) {
      CHECK(std::abs(sigmoid(Tensor::scalar(x)).item() - hp_sigmoid(x)) < 1e-15);
      CHECK(std::abs(tanh(Tensor::scalar(x)).item() - hp_tanh(x)) < 1e-15);
    }
    CHECK(sigmoid(Tensor::scalar(-800.0)).item() == 0.0);
    CHECK(sigmoid(Tensor::scalar(800.0)).item() == 1.0);
  }

  TEST_CASE("arithmetic and broadcasting") {
    Tensor a = mat(2, 3, {1, 2, 3, 4, 5, 6});
    Tensor row = Tensor::from({3}, {10, 20, 30});
    require_close(add(a, row), {11, 22, 33, 14, 25, 36}, 0.0);
    require_close(sub(a, Tensor::scalar(1.0)), {0, 1, 2, 3, 4, 5}, 0.0);
    require_close(mul(Tensor::scalar(2.0), a), {2, 4, 6, 8, 10, 12}, 0.0);
    require_close(scale(a, -0.5), {-0.5, -1, -1.5, -2, -2.5, -3}, 0.0);
    require_close(add(a, Tensor::from({1, 3}, {1, 1, 1})), {2, 3, 4, 5, 6, 7}, 0.0);
  }

  TEST_CASE("incompatible shapes raise a dimension error") {
    CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);
    CHECK_THROWS_AS(mul(Tensor::zeros({2, 3}), Tensor::zeros({2})), DimensionError);
  }

  TEST_CASE("overflow is reported, not stored") {
    Tensor big = Tensor::scalar(1e200);
    CHECK_THROWS_AS(mul(big, big), NumericError);
    CHECK_THROWS_AS(scale(big, 1e200), NumericError);
  }

  TEST_CASE("gradients match finite differences") {
    Rng rng(8);
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({3, 4}, rng, true);
    Tensor bias = random_tensor({4}, rng, true);
    Tensor s = Tensor::scalar(0.7, true);
    const std::vector<std::pair<std::string, std::function<Tensor()>>> cases = {
        {"add", [&] { return weighted_sum(add(a, b)); }},
        {"sub", [&] { return weighted_sum(sub(a, b)); }},
        {"mul", [&] { return weighted_sum(mul(a, b)); }},
        {"bias", [&] { return weighted_sum(add(a, bias)); }},
        {"scalar", [&] { return weighted_sum(mul(a, s)); }},
        {"scale", [&] { return weighted_sum(scale(a, -1.7)); }},
        {"sigmoid", [&] { return weighted_sum(sigmoid(scale(a, 3.0))); }},
        {"tanh", [&] { return weighted_sum(tanh(scale(a, 2.0))); }},
    };
    for (const auto& [name, fn] : cases) {
      auto r = gradient_check(fn, {a, b, bias, s});
      INFO(name << ": " << r.worst);
      CHECK(r.max_rel_error < kOpGradTol);
    }
  }

  TEST_CASE("relu gradient passes where the input is positive") {
    // Inputs kept away from the kink, where the central difference is exact.
    Tensor x = Tensor::from({6}, {-2.0, -0.5, -0.1, 0.1, 0.5, 2.0}, true);
    auto r = gradient_check([&] { return weighted_sum(relu(x)); }, {x});
    CHECK(r.max_rel_error < kOpGradTol);
    x.zero_grad();
    sum_all(relu(x)).backward();
    CHECK(x.grad() == std::vector<double>{0, 0, 0, 1, 1, 1});
  }
}

TEST_SUITE("shape ops") {
  TEST_CASE("worked examples") {
    Tensor a = Tensor::zeros({2, 10, 3});
    CHECK(concat({a, a}, 2).shape() == Shape{2, 10, 6});
    CHECK(mean(Tensor::from({3}, {2, 4, 6}), 0).item() == 4.0);
    CHECK(transpose_last_two(Tensor::zeros({10, 52})).shape() == Shape{52, 10});
  }

  TEST_CASE("values") {
    Tensor x = mat(2, 3, {1, 2, 3, 4, 5, 6});
    require_close(transpose_last_two(x), {1, 4, 2, 5, 3, 6}, 0.0);
    require_close(sum(x, 0), {5, 7, 9}, 0.0);
    require_close(mean(x, 1), {2, 5}, 0.0);
    require_close(slice(x, 1, 1, 3), {2, 3, 5, 6}, 0.0);
    require_close(select(x, 0, 1), {4, 5, 6}, 0.0);
    CHECK(select(x, 0, 1).shape() == Shape{3});
    require_close(concat({x, x}, 0), {1, 2, 3, 4, 5, 6, 1, 2, 3, 4, 5, 6}, 0.0);
    Tensor st = stack({x, x}, 1);
    CHECK(st.shape() == Shape{2, 2, 3});
    require_close(st, {1, 2, 3, 1, 2, 3, 4, 5, 6, 4, 5, 6}, 0.0);
    CHECK(reshape(x, {3, 2}).shape() == Shape{3, 2});
    CHECK(sum_all(x).item() == 21.0);
    CHECK(mean_all(x).item() == 3.5);
  }

  TEST_CASE("axis out of range raises a dimension error") {
    Tensor x = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(sum(x, 2), DimensionError);
    CHECK_THROWS_AS(mean(x, 5), DimensionError);
    CHECK_THROWS_AS(concat({x, x}, 2), DimensionError);
    CHECK_THROWS_AS(concat({x, Tensor::zeros({3, 3})}, 1), DimensionError);
    CHECK_THROWS_AS(slice(x, 1, 2, 4), DimensionError);
    CHECK_THROWS_AS(select(x, 0, 2), DimensionError);
    CHECK_THROWS_AS(reshape(x, {4, 2}), DimensionError);
    CHECK_THROWS_AS(transpose_last_two(Tensor::zeros({3})), DimensionError);
  }

  TEST_CASE("gradients match finite differences") {
    Rng rng(9);
    Tensor x = random_tensor({2, 3, 4}, rng, true);
    Tensor y = random_tensor({2, 3, 2}, rng, true);
    const std::vector<std::pair<std::string, std::function<Tensor()>>> cases = {
        {"transpose", [&] { return weighted_sum(transpose_last_two(x)); }},
        {"concat", [&] { return weighted_sum(concat({x, y, x}, 2)); }},
        {"stack", [&] { return weighted_sum(stack({x, x}, 0)); }},
        {"slice", [&] { return weighted_sum(slice(x, 2, 1, 3)); }},
        {"select", [&] { return weighted_sum(select(x, 1, 2)); }},
        {"sum", [&] { return weighted_sum(sum(x, 1)); }},
        {"mean", [&] { return weighted_sum(mean(x, 2)); }},
        {"reshape", [&] { return weighted_sum(reshape(x, {4, 6})); }},
        {"mean_all", [&] { return mean_all(mul(x, x)); }},
    };
    for (const auto& [name, fn] : cases) {
      auto r = gradient_check(fn, {x, y});
      INFO(name << ": " << r.worst);
      CHECK(r.max_rel_error < kOpGradTol);
    }
  }
}

TEST_SUITE("dropout") {
  TEST_CASE("identity outside training and at rate zero") {
    Rng rng(10);
    Tensor x = random_tensor({4, 5}, rng);
    Tensor e = dropout(x, 0.2, false, rng);
    CHECK(e.same_storage(x));
    Tensor z = dropout(x, 0.0, true, rng);
    CHECK(z.same_storage(x));
  }

  TEST_CASE("rate outside [0, 1) is a parameter error") {
    Rng rng(11);
    Tensor x = Tensor::zeros({2});
    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ParameterError);
    CHECK_THROWS_AS(dropout(x, 1.5, false, rng), ParameterError);
    CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ParameterError);
  }

  TEST_CASE("survivor fraction and mean preservation over 1e5 elements") {
    Rng rng(12);
    const std::size_t n = 200000;
    Tensor x = Tensor::full({n}, 1.0);
    Tensor y = dropout(x, 0.2, true, rng);
    std::size_t kept = 0;
    double total = 0.0;
    for (double v : y.data()) {
      if (v != 0.0) {
        ++kept;
        CHECK_MESSAGE(std::abs(v - 1.25) < 1e-15, "survivor scaled by 1/(1-rate)");
      }
      total += v;
    }
    const double fraction = static_cast<double>(kept) / n;
    CHECK(std::abs(fraction - 0.8) < 0.02);
    CHECK(std::abs(total / n - 1.0) < 0.02);
  }

  TEST_CASE("masks are reproducible from the seed") {
    Tensor x = Tensor::full({1000}, 2.0);
    Rng r1(77), r2(77);
    CHECK(dropout(x, 0.3, true, r1).to_vector() == dropout(x, 0.3, true, r2).to_vector());
  }

  TEST_CASE("gradient is the mask") {
    Rng rng(13);
    Tensor x = random_tensor({50}, rng, true);
    Tensor y = dropout(x, 0.5, true, rng);
    sum_all(y).backward();
    const auto g = x.grad();
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(g[i] == (y.data()[i] == 0.0 ? 0.0 : 2.0));
    }
  }
}

TEST_SUITE("backward") {
  TEST_CASE("sum of squares") {
    Tensor x = Tensor::from({3}, {1, -2, 3}, true);
    sum_all(mul(x, x)).backward();
    CHECK(x.grad() == std::vector<double>{2, -4, 6});
  }

  TEST_CASE("sum of softmax has zero gradient") {
    Rng rng(14);
    Tensor x = random_tensor({7}, rng, true, -3, 3);
    sum_all(softmax(x, 0)).backward();
    for (double g : x.grad()) CHECK(std::abs(g) < 1e-15);
  }

  TEST_CASE("gradients accumulate across uses and calls") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    sum_all(add(mul(x, x), scale(x, 3.0))).backward();
    CHECK(x.grad() == std::vector<double>{5, 7});
    sum_all(x).backward();
    CHECK(x.grad() == std::vector<double>{6, 8});
    x.zero_grad();
    CHECK(x.grad() == std::vector<double>{0, 0});
  }

  TEST_CASE("contract errors") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(mul(x, x).backward(), ContractError);
    Tensor loss = sum_all(mul(x, x));
    loss.backward();
    CHECK_THROWS_AS(loss.backward(), ContractError);
    CHECK_THROWS_AS(sum_all(Tensor::from({2}, {1, 2})).backward(), ContractError);
  }

  TEST_CASE("no-grad mode records nothing") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    Tensor y;
    {
      NoGradGuard guard;
      CHECK_FALSE(grad_enabled());
      y = sum_all(mul(x, x));
    }
    CHECK(grad_enabled());
    CHECK_FALSE(y.requires_grad());
  }

  TEST_CASE("deep composite matches finite differences") {
    Rng rng(15);
    Tensor a = random_tensor({2, 3, 4}, rng, true);
    Tensor w = random_tensor({4, 4}, rng, true);
    Tensor b = random_tensor({4}, rng, true);
    auto fn = [&] {
      Tensor h = tanh(add(matmul(a, w), b));
      Tensor s = softmax(matmul(h, transpose_last_two(h)), 2);
      Tensor z = concat({matmul(s, h), sigmoid(h)}, 2);
      return weighted_sum(mean(z, 1));
    };
    auto r = gradient_check(fn, {a, w, b});
    INFO(r.worst);
    CHECK(r.max_rel_error < kOpGradTol);
  }

  TEST_CASE("long chains do not overflow the stack") {
    Tensor x = Tensor::scalar(0.5, true);
    Tensor y = x;
    for (int i = 0; i < 200000; ++i) y = add(y, Tensor::scalar(0.0));
    y.backward();
    CHECK(x.grad()[0] == 1.0);
  }
}

TEST_CASE("rng streams are stable") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  Rng c(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(c.below(7) < 7);
  }
}
