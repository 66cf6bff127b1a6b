#include <doctest.h>

#include <cmath>

#include "hjscc/channel.hpp"
#include "hjscc/ops.hpp"
#include "test_util.hpp"

using namespace hjscc;
using namespace hjscc::channel;
using hjscc::testing::bit_equal;
using hjscc::testing::random_tensor;

namespace {

Tensor row(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor(Shape{1, 1, n}, std::move(v));
}

}  // namespace

TEST_SUITE("channel") {
  TEST_CASE("noise variance from SNR") {
    CHECK(sigma_sq_from_snr(10.0, 1.0) == doctest::Approx(0.1));
    CHECK(sigma_sq_from_snr(0.0, 1.0) == doctest::Approx(1.0));
    CHECK(sigma_sq_from_snr(20.0, 2.0) == doctest::Approx(0.02));
    CHECK_THROWS_AS(sigma_sq_from_snr(10.0, 0.0), std::domain_error);
    CHECK(capacity_bits_per_symbol(0.0) == doctest::Approx(1.0));
  }

  TEST_CASE("channel settings validation") {
    ChannelSpec s;
    s.power = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }

  TEST_CASE("power normalization examples") {
    CHECK(power_normalize(row({2, 0}), row({1, 1}), 1.0).vec() == std::vector<double>{std::sqrt(2.0), 0.0});
    const Tensor already = row({1, -1, 1, -1});
    CHECK(power_normalize(already, row({1, 1, 1, 1}), 1.0).vec() == already.vec());
    CHECK(power_normalize(row({3, 99}), row({1, 0}), 1.0).vec() == std::vector<double>{1.0, 0.0});
    bool degenerate = false;
    const Tensor zeros = row({0, 0, 5});
    CHECK(power_normalize(zeros, row({1, 1, 0}), 1.0, &degenerate).vec() == zeros.vec());
    CHECK(degenerate);
    CHECK_THROWS_AS(power_normalize(row({1}), row({1}), 0.0), std::domain_error);
  }

  TEST_CASE("joint normalization over several streams") {
    std::mt19937_64 rng(1);
    const Tensor a = random_tensor(Shape{4, 2, 2}, rng), b = random_tensor(Shape{2, 3, 3}, rng);
    Tensor ma(a.shape(), 1.0), mb(b.shape(), 0.0);
    for (std::size_t i = 0; i < mb.size(); i += 2) mb[i] = 1.0;
    const auto n = power_normalize({Var(a), Var(b)}, {ma, mb}, 2.5);
    double energy = 0.0, count = ma.sum() + mb.sum();
    for (double v : n.symbols[0].value().vec()) energy += v * v;
    for (std::size_t i = 0; i < mb.size(); ++i) {
      const double v = n.symbols[1].value()[i];
      energy += v * v;
      if (mb[i] == 0.0) CHECK(v == 0.0);
    }
    CHECK(std::abs(energy / count - 2.5) / 2.5 < 1e-9);
    // One shared scale.
    CHECK(n.symbols[0].value()[0] == doctest::Approx(a[0] * n.scale));
    CHECK_THROWS_AS(power_normalize({Var(a)}, {}, 1.0), ContractError);
  }

  TEST_CASE("normalization is differentiable") {
    std::mt19937_64 rng(2);
    const Tensor a = random_tensor(Shape{2, 2, 2}, rng);
    const Tensor mask(Shape{2, 2, 2}, 1.0);
    const Tensor w = random_tensor(Shape{2, 2, 2}, rng);
    const double err = hjscc::testing::gradient_error(
        [&](const std::vector<Var>& v) {
          return ops::sum(ops::mul(power_normalize({v[0]}, {mask}, 1.0).symbols[0], Var(w)));
        },
        {a});
    CHECK(err < 1e-6);
  }

  TEST_CASE("noiseless channel is the identity and masked slots stay zero") {
    std::mt19937_64 rng(3);
    const Tensor s = random_tensor(Shape{4, 2, 2}, rng);
    Tensor mask(s.shape(), 1.0);
    CHECK(bit_equal(awgn_transmit(Var(s), mask, 0.0, rng).value(), s));
    for (int i = 8; i < 16; ++i) mask[i] = 0.0;
    const Tensor out = awgn_transmit(Var(s), mask, 0.5, rng).value();
    for (int i = 8; i < 16; ++i) CHECK(out[i] == 0.0);
    CHECK_THROWS_AS(awgn_transmit(Var(s), mask, -1.0, rng), std::domain_error);
  }

  TEST_CASE("awgn variance and unbiasedness") {
    std::mt19937_64 rng(4);
    constexpr int kN = 1'000'000;
    const Tensor zeros(Shape{1, 1, kN}, 0.0), ones(Shape{1, 1, kN}, 1.0);
    const Tensor out = awgn_transmit(Var(zeros), ones, 0.1, rng).value();
    double mean = 0.0, sq = 0.0;
    for (double v : out.vec()) {
      mean += v;
      sq += v * v;
    }
    mean /= kN;
    const double var = sq / kN - mean * mean;
    CHECK(std::abs(var - 0.1) / 0.1 < 0.01);
    CHECK(std::abs(mean) < 4.0 * std::sqrt(0.1 / kN));
  }

  TEST_CASE("seeded reproducibility") {
    const Tensor s(Shape{2, 4, 4}, 0.3), mask(Shape{2, 4, 4}, 1.0);
    std::mt19937_64 a(99), b(99);
    CHECK(bit_equal(awgn_transmit(Var(s), mask, 0.2, a).value(), awgn_transmit(Var(s), mask, 0.2, b).value()));
  }

  TEST_CASE("feedback link") {
    std::mt19937_64 rng(5);
    const Tensor s = random_tensor(Shape{2, 2, 2}, rng);
    const Tensor mask(s.shape(), 1.0);
    ChannelSpec spec;
    CHECK(bit_equal(feedback_link(Var(s), mask, spec, rng).value(), s));

    spec.feedback_snr_db = 20.0;
    constexpr int kN = 200'000;
    const Tensor zeros(Shape{1, 1, kN}, 0.0), ones(Shape{1, 1, kN}, 1.0);
    const Tensor fb = feedback_link(Var(zeros), ones, spec, rng).value();
    double sq = 0.0;
    for (double v : fb.vec()) sq += v * v;
    CHECK(std::abs(sq / kN - 0.01) / 0.01 < 0.02);
  }

  TEST_CASE("feedback noise is independent of forward noise") {
    std::mt19937_64 fwd(6), back(7);
    constexpr int kN = 100'000;
    const Tensor zeros(Shape{1, 1, kN}, 0.0), ones(Shape{1, 1, kN}, 1.0);
    ChannelSpec spec;
    spec.feedback_snr_db = 10.0;
    const Tensor rx = awgn_transmit(Var(zeros), ones, 0.1, fwd).value();
    const Tensor fb = feedback_link(Var(rx), ones, spec, back).value();
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < kN; ++i) {
      const double x = rx[i], y = fb[i] - rx[i];
      sxy += x * y;
      sxx += x * x;
      syy += y * y;
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.01);
  }

  TEST_CASE("bandwidth ratio") {
    CHECK(compute_cbr(1536.0, 64, 64) == doctest::Approx(0.125));
    CHECK(compute_cbr(0.0, 32, 32) == 0.0);
    CHECK_THROWS_AS(compute_cbr(1.0, 0, 4), ContractError);
  }
}
