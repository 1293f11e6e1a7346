#include <cmath>

#include "doctest.h"

#include "iamseq/attention.hpp"
#include "iamseq/errors.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace iamseq;
using namespace iamseq::testing;

namespace {

Tensor identity_batch() { return Tensor::from({1, 2, 2}, {1, 0, 0, 1}); }

// Two-token self-attention on the identity: diagonal score s, off-diagonal 0.
double two_token_diagonal_weight(double s) {
  HighPrecision e = boost::multiprecision::exp(HighPrecision(s));
  return static_cast<double>(e / (e + 1));
}

void check_row_stochastic(const Tensor& w) {
  const std::size_t t = w.dim(2);
  auto d = w.data();
  for (std::size_t row = 0; row < w.numel() / t; ++row) {
    double s = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      const double v = d[row * t + j];
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

}  // namespace

TEST_SUITE("scaled dot-product attention") {
  TEST_CASE("single token attends to itself") {
    Tensor v = Tensor::from({2, 1, 3}, {1, 2, 3, -4, 5, 6});
    auto out = scaled_dot_attention(v, v, v);
    CHECK(out.weights.shape() == Shape{2, 1, 1});
    CHECK(out.weights.to_vector() == std::vector<double>{1.0, 1.0});
    CHECK(max_abs_diff(out.attended.data(), v.data()) == 0.0);
  }

  TEST_CASE("identity input against the exp(1/sqrt 2) oracle") {
    Tensor x = identity_batch();
    auto out = scaled_dot_attention(x, x, x);
    const double d = two_token_diagonal_weight(1.0 / std::sqrt(2.0));
    const std::vector<double> expected{d, 1 - d, 1 - d, d};
    CHECK(max_abs_diff(out.weights.data(), expected) < 1e-15);
    CHECK(max_abs_diff(out.attended.data(), expected) < 1e-15);
    CHECK(std::abs(d - 0.66976) < 1e-5);
  }

  TEST_CASE("zero values give zero output") {
    Rng rng(1);
    Tensor q = random_tensor({2, 4, 3}, rng);
    Tensor k = random_tensor({2, 4, 3}, rng);
    auto out = scaled_dot_attention(q, k, Tensor::zeros({2, 4, 3}));
    for (double v : out.attended.data()) CHECK(v == 0.0);
  }

  TEST_CASE("mismatched shapes raise a dimension error") {
    CHECK_THROWS_AS(scaled_dot_attention(Tensor::zeros({1, 2, 3}), Tensor::zeros({1, 2, 4}),
                                         Tensor::zeros({1, 2, 3})),
                    DimensionError);
    CHECK_THROWS_AS(scaled_dot_attention(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}),
                                         Tensor::zeros({2, 3})),
                    DimensionError);
  }

  TEST_CASE("gradients match finite differences") {
    Rng rng(2);
    Tensor q = random_tensor({2, 3, 4}, rng, true);
    Tensor k = random_tensor({2, 3, 4}, rng, true);
    Tensor v = random_tensor({2, 3, 4}, rng, true);
    auto r = gradient_check(
        [&] {
          auto out = scaled_dot_attention(q, k, v);
          return add(weighted_sum(out.attended, 1), weighted_sum(out.weights, 2));
        },
        {q, k, v}, {"q", "k", "v"});
    INFO(r.worst);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_SUITE("dynamic attention") {
  TEST_CASE("lambda 1 reduces to scaled dot-product") {
    Rng rng(3);
    Tensor q = random_tensor({3, 5, 4}, rng, false, -2, 2);
    Tensor k = random_tensor({3, 5, 4}, rng, false, -2, 2);
    Tensor v = random_tensor({3, 5, 4}, rng, false, -2, 2);
    auto plain = scaled_dot_attention(q, k, v);
    auto dyn = dynamic_attention(q, k, v, DynamicScale::create(1.0));
    CHECK(max_abs_diff(plain.weights.data(), dyn.weights.data()) <= 1e-12);
    CHECK(max_abs_diff(plain.attended.data(), dyn.attended.data()) <= 1e-12);
  }

  TEST_CASE("lambda 0 gives uniform weights and token-mean values") {
    Rng rng(4);
    Tensor x = random_tensor({2, 4, 3}, rng);
    auto out = dynamic_attention(x, x, x, DynamicScale::create(0.0));
    for (double w : out.weights.data()) CHECK(std::abs(w - 0.25) < 1e-15);
    Tensor token_mean = mean(x, 1);  // (2, 3)
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t d = 0; d < 3; ++d) {
          CHECK(std::abs(out.attended.at({b, t, d}) - token_mean.at({b, d})) < 1e-15);
        }
      }
    }
  }

  TEST_CASE("lambda 2 on the identity sharpens to the exp(2/sqrt 2) oracle") {
    Tensor x = identity_batch();
    auto out = dynamic_attention(x, x, x, DynamicScale::create(2.0));
    const double d = two_token_diagonal_weight(2.0 / std::sqrt(2.0));
    CHECK(max_abs_diff(out.weights.data(), std::vector<double>{d, 1 - d, 1 - d, d}) < 1e-15);
    CHECK(d > two_token_diagonal_weight(1.0 / std::sqrt(2.0)));
  }

  TEST_CASE("gradient reaches lambda") {
    Rng rng(5);
    Tensor q = random_tensor({2, 3, 4}, rng, true);
    Tensor k = random_tensor({2, 3, 4}, rng, true);
    Tensor v = random_tensor({2, 3, 4}, rng, true);
    DynamicScale lam = DynamicScale::create(1.3);
    auto r = gradient_check(
        [&] { return weighted_sum(dynamic_attention(q, k, v, lam).attended); },
        {q, k, v, lam.lambda}, {"q", "k", "v", "lambda"});
    INFO(r.worst);
    CHECK(r.max_rel_error < 1e-5);
    CHECK(lam.lambda.grad()[0] != 0.0);
  }
}

TEST_SUITE("iam") {
  TEST_CASE("single token doubles the input") {
    Rng rng(6);
    Tensor x = random_tensor({2, 1, 5}, rng);
    auto time = iam_forward(x, AttentionAxis::Time, DynamicScale::create());
    CHECK(max_abs_diff(time.output.data(), scale(x, 2.0).data()) < 1e-15);
    Tensor y = random_tensor({2, 4, 1}, rng);
    auto feat = iam_forward(y, AttentionAxis::Feature, DynamicScale::create());
    CHECK(max_abs_diff(feat.output.data(), scale(y, 2.0).data()) < 1e-15);
  }

  TEST_CASE("residual minus input equals the standalone attention") {
    Rng rng(8);
    Tensor x = random_tensor({2, 3, 4}, rng, false, -2, 2);
    DynamicScale lam = DynamicScale::create(0.8);
    auto time = iam_forward(x, AttentionAxis::Time, lam);
    auto attn = dynamic_attention(x, x, x, lam);
    CHECK(max_abs_diff(sub(time.output, x).data(), attn.attended.data()) <= 1e-12);
    CHECK(max_abs_diff(time.weights.data(), attn.weights.data()) <= 1e-12);

    Tensor xt = transpose_last_two(x);
    auto feat = iam_forward(x, AttentionAxis::Feature, lam);
    auto attn_t = dynamic_attention(xt, xt, xt, lam);
    CHECK(max_abs_diff(sub(feat.output, x).data(),
                       transpose_last_two(attn_t.attended).data()) <= 1e-12);
    CHECK(feat.weights.shape() == Shape{2, 4, 4});
  }

  TEST_CASE("with lambda 1 the residual-free part is scaled dot-product attention") {
    Rng rng(9);
    Tensor x = random_tensor({2, 5, 3}, rng, false, -2, 2);
    auto out = iam_forward(x, AttentionAxis::Time, DynamicScale::create(1.0));
    auto plain = scaled_dot_attention(x, x, x);
    CHECK(max_abs_diff(sub(out.output, x).data(), plain.attended.data()) <= 1e-12);
  }

  TEST_CASE("axis modes are transposes of one another") {
    Rng rng(10);
    for (std::size_t trial = 0; trial < 5; ++trial) {
      Tensor x = random_tensor({2, 3 + trial, 4}, rng, false, -2, 2);
      DynamicScale lam = DynamicScale::create(rng.uniform(0.2, 2.0));
      auto feat = iam_forward(x, AttentionAxis::Feature, lam);
      auto time = iam_forward(transpose_last_two(x), AttentionAxis::Time, lam);
      CHECK(max_abs_diff(feat.output.data(), transpose_last_two(time.output).data()) <=
            1e-12);
      CHECK(max_abs_diff(feat.weights.data(), time.weights.data()) <= 1e-12);
    }
  }

  TEST_CASE("output keeps the input shape and weights stay row-stochastic") {
    Rng rng(11);
    for (auto axis : {AttentionAxis::Time, AttentionAxis::Feature}) {
      for (int trial = 0; trial < 5; ++trial) {
        const Shape s{1 + rng.below(3), 1 + rng.below(6), 1 + rng.below(6)};
        Tensor x = random_tensor(s, rng, false, -4, 4);
        auto out = iam_forward(x, axis, DynamicScale::create(rng.uniform(-2, 3)));
        CHECK(out.output.shape() == s);
        const std::size_t tokens = axis == AttentionAxis::Time ? s[1] : s[2];
        CHECK(out.weights.shape() == Shape{s[0], tokens, tokens});
        check_row_stochastic(out.weights);
      }
    }
    Tensor q = random_tensor({2, 4, 3}, rng, false, -4, 4);
    check_row_stochastic(scaled_dot_attention(q, q, q).weights);
    check_row_stochastic(dynamic_attention(q, q, q, DynamicScale::create(5.0)).weights);
  }

  TEST_CASE("non-3-axis input raises a dimension error") {
    CHECK_THROWS_AS(iam_forward(Tensor::zeros({3, 4}), AttentionAxis::Time,
                                DynamicScale::create()),
                    DimensionError);
    CHECK_THROWS_AS(iam_forward(Tensor::zeros({1, 2, 3, 4}), AttentionAxis::Feature,
                                DynamicScale::create()),
                    DimensionError);
  }

  TEST_CASE("gradient of sum(y) reaches lambda in both modes") {
    Rng rng(12);
    for (auto axis : {AttentionAxis::Time, AttentionAxis::Feature}) {
      Tensor x = random_tensor({2, 3, 4}, rng, true, -1.5, 1.5);
      DynamicScale lam = DynamicScale::create(1.0);
      auto r = gradient_check([&] { return sum_all(iam_forward(x, axis, lam).output); },
                              {x, lam.lambda}, {"x", "lambda"});
      INFO(r.worst);
      CHECK(r.max_rel_error < 1e-5);
      CHECK(std::abs(lam.lambda.grad()[0]) > 1e-6);
    }
  }
}

TEST_CASE("lambda 0 residual adds the broadcast token mean") {
  Rng rng(13);
  Tensor x = random_tensor({2, 3, 4}, rng);
  auto out = iam_forward(x, AttentionAxis::Time, DynamicScale::create(0.0));
  Tensor m = mean(x, 1);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t f = 0; f < 4; ++f) {
        CHECK(std::abs(out.output.at({b, t, f}) - (x.at({b, t, f}) + m.at({b, f}))) <
              1e-15);
      }
    }
  }
}

TEST_SUITE("importance profile") {
  TEST_CASE("uniform weights") {
    auto p = importance_profile(Tensor::full({2, 4, 4}, 0.25));
    for (double v : p) CHECK(std::abs(v - 0.25) < 1e-15);
  }

  TEST_CASE("one-hot rows concentrate on their column") {
    std::vector<double> w5(5 * 5, 0.0);
    for (std::size_t r = 0; r < 5; ++r) w5[r * 5 + 3] = 1.0;
    auto p = importance_profile(Tensor::from({1, 5, 5}, w5));
    CHECK(p == std::vector<double>{0, 0, 0, 1, 0});
  }

  TEST_CASE("mixed one-hot rows average by hand") {
    // Rows one-hot at columns 0, 0 and 2.
    Tensor w = Tensor::from({1, 3, 3}, {1, 0, 0, 1, 0, 0, 0, 0, 1});
    auto p = importance_profile(w);
    CHECK(std::abs(p[0] - 2.0 / 3) < 1e-15);
    CHECK(p[1] == 0.0);
    CHECK(std::abs(p[2] - 1.0 / 3) < 1e-15);
  }

  TEST_CASE("profiles of attention weights sum to one") {
    Rng rng(14);
    Tensor x = random_tensor({3, 6, 5}, rng, false, -3, 3);
    auto out = iam_forward(x, AttentionAxis::Feature, DynamicScale::create(1.7));
    auto p = importance_profile(out.weights);
    CHECK(p.size() == 5);
    double s = 0.0;
    for (double v : p) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }

  TEST_CASE("non-square weights are rejected") {
    CHECK_THROWS_AS(importance_profile(Tensor::zeros({1, 2, 3})), DimensionError);
  }
}
