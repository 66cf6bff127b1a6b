#include <doctest.h>

#include "hjscc/harness/optimizer.hpp"
#include "hjscc/jscc.hpp"
#include "test_util.hpp"

using namespace hjscc;
using hjscc::testing::bit_equal;
using hjscc::testing::random_tensor;

namespace {

HierarchyConfig one_level(int channels = 4) {
  HierarchyConfig h;
  h.latent_channels = {channels};
  h.downsampling = {4};
  h.width = 8;
  return h;
}

struct CodecFixture {
  explicit CodecFixture(CodecConfig cfg = {}, HierarchyConfig h = one_level())
      : init(3), codec(cfg, h, store, init), hierarchy(h) {}
  nn::ParamStore store;
  nn::Initializer init;
  JsccCodec codec;
  HierarchyConfig hierarchy;
};

struct Inputs {
  Var mu, prior, context;
  Tensor nlp;
};

Inputs make_inputs(int c, int h, int w, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {Var(random_tensor(Shape{c, h, w}, rng, -2, 2)),
          Var(random_tensor(Shape{2 * c, h, w}, rng, 0.1, 1)),
          Var(random_tensor(Shape{width, h, w}, rng)),
          random_tensor(Shape{c, h, w}, rng, 0, 1.5)};
}

// One optimizer step on a loss that touches the encoder output.
void train_one_step(CodecFixture& f, const Inputs& in, const rate::LevelRatePlan& plan) {
  harness::Adam adam(f.store);
  f.store.zero_grad();
  Var r = f.codec.encode_layer(0, in.mu, in.prior, plan, in.context);
  backward(ops::mse(r, in.mu));
  adam.step(1e-2);
}

}  // namespace

TEST_SUITE("jscc_codec") {
  TEST_CASE("encoder output matches the latent shape and is deterministic") {
    CodecFixture f;
    const Inputs in = make_inputs(4, 4, 4, 8, 1);
    const auto plan = rate::plan_level(in.nlp, 1.0, rate::OptionSet::uniform(4, 4), {2, 2});
    const Var r = f.codec.encode_layer(0, in.mu, in.prior, plan, in.context);
    CHECK(r.shape() == in.mu.shape());
    CHECK(bit_equal(r.value(), f.codec.encode_layer(0, in.mu, in.prior, plan, in.context).value()));
    CHECK_THROWS_AS(f.codec.encode_layer(0, in.mu, in.mu, plan, in.context), ContractError);
    CHECK_THROWS_AS(f.codec.encode_layer(1, in.mu, in.prior, plan, in.context), ContractError);
  }

  TEST_CASE("rate attention starts as the identity") {
    CodecFixture f;
    std::mt19937_64 rng(2);
    const Var feats(random_tensor(Shape{32, 4, 4}, rng));
    const Var a(random_tensor(Shape{1, 4, 4}, rng, 0, 4)), b(random_tensor(Shape{1, 4, 4}, rng, 0, 4));
    const Var out = f.codec.rate_attention(0, feats, a, b);
    CHECK(out.shape() == feats.shape());
    CHECK(bit_equal(out.value(), feats.value()));
    CHECK_THROWS_AS(f.codec.rate_attention(0, feats, Var(Tensor(Shape{1, 2, 2})), b), ContractError);
  }

  TEST_CASE("disabled rate attention creates no parameters") {
    CodecConfig off;
    off.rate_attention = false;
    CodecFixture f(off);
    for (const auto& name : f.store.names()) CHECK(name.find("rate_attention") == std::string::npos);
    CodecFixture g;
    bool found = false;
    for (const auto& name : g.store.names()) found = found || name.find("rate_attention") != std::string::npos;
    CHECK(found);
  }

  TEST_CASE("disabling rate attention leaves the other weights unchanged") {
    CodecConfig off;
    off.rate_attention = false;
    CodecFixture f(off);
    CodecFixture g;
    CHECK(f.store.names().size() < g.store.names().size());
    for (const auto& name : f.store.names())
      CHECK(bit_equal(f.store.get(name).value(), g.store.get(name).value()));
    const Inputs in = make_inputs(4, 4, 4, 8, 8);
    const auto plan = rate::plan_level(in.nlp, 1.0, rate::OptionSet::uniform(4, 4), {2, 2});
    CHECK(bit_equal(f.codec.encode_layer(0, in.mu, in.prior, plan, in.context).value(),
                    g.codec.encode_layer(0, in.mu, in.prior, plan, in.context).value()));
  }

  TEST_CASE("rate plan changes the encoding once training has begun") {
    CodecFixture f;
    const Inputs in = make_inputs(4, 4, 4, 8, 3);
    const auto q = rate::OptionSet::uniform(4, 4);
    const auto lo = rate::plan_level(in.nlp, 0.5, q, {2, 2});
    const auto hi = rate::plan_level(in.nlp, 2.0, q, {2, 2});
    CHECK(bit_equal(f.codec.encode_layer(0, in.mu, in.prior, lo, in.context).value(),
                    f.codec.encode_layer(0, in.mu, in.prior, hi, in.context).value()));
    train_one_step(f, in, lo);
    CHECK_FALSE(bit_equal(f.codec.encode_layer(0, in.mu, in.prior, lo, in.context).value(),
                          f.codec.encode_layer(0, in.mu, in.prior, hi, in.context).value()));
  }

  TEST_CASE("rate attention liveness after one step") {
    CodecFixture f;
    const Inputs in = make_inputs(4, 4, 4, 8, 4);
    const auto plan = rate::plan_level(in.nlp, 1.0, rate::OptionSet::uniform(4, 4), {2, 2});
    train_one_step(f, in, plan);
    std::mt19937_64 rng(5);
    for (int probe = 0; probe < 3; ++probe) {
      Var real(plan.real_lengths), merged(plan.merged_lengths, true);
      const Var r = f.codec.encode_layer(0, in.mu, in.prior, real, merged, in.context);
      backward(ops::sum(ops::mul(r, Var(random_tensor(r.shape(), rng)))));
      double norm = 0.0;
      for (double g : merged.grad().vec()) norm += g * g;
      CHECK(norm > 0.0);
    }
  }

  TEST_CASE("decoder shape and option-set contract") {
    CodecFixture f;
    std::mt19937_64 rng(6);
    const auto q = rate::OptionSet::uniform(4, 4);
    const Var s(random_tensor(Shape{4, 4, 4}, rng));
    const Var ctx(random_tensor(Shape{8, 4, 4}, rng));
    std::vector<int> lengths(16, 2);
    CHECK(f.codec.decode_layer(0, s, lengths, q, ctx).shape() == Shape{4, 4, 4});
    lengths[3] = 3;
    CHECK_THROWS_AS(f.codec.decode_layer(0, s, lengths, q, ctx), ContractError);
    lengths[3] = 6;
    CHECK_THROWS_AS(f.codec.decode_layer(0, s, lengths, q, ctx), ContractError);
  }

  TEST_CASE("decoder never reads masked slots") {
    CodecFixture f;
    std::mt19937_64 rng(7);
    const auto q = rate::OptionSet::uniform(4, 4);
    std::vector<int> lengths(16);
    for (int i = 0; i < 16; ++i) lengths[i] = q.values[i % q.values.size()];
    const Tensor mask = rate::mask_from_lengths(lengths, Shape{4, 4, 4});
    const Tensor s = random_tensor(Shape{4, 4, 4}, rng);
    Tensor garbage = s;
    for (std::size_t i = 0; i < garbage.size(); ++i)
      if (mask[i] == 0.0) garbage[i] = 1e6 * (static_cast<double>(i) - 7.0);
    const Var ctx(random_tensor(Shape{8, 4, 4}, rng));
    const Tensor a = f.codec.decode_layer(0, Var(rate::apply_mask(s, mask)), lengths, q, ctx).value();
    const Tensor b = f.codec.decode_layer(0, Var(garbage), lengths, q, ctx).value();
    CHECK(bit_equal(a, b));
  }

  TEST_CASE("noiseless full-length codec learns near identity") {
    CodecFixture f(CodecConfig{16, 1, true, 8});
    harness::Adam adam(f.store);
    const auto q = rate::OptionSet::uniform(4, 4);
    const auto plan = rate::full_length_plan(Shape{4, 4, 4}, q, {1, 1});
    const Var ctx(Tensor(Shape{8, 4, 4}, 0.0));
    auto reconstruction_error = [&](const Inputs& in) {
      const Var r = f.codec.encode_layer(0, in.mu, in.prior, plan, ctx);
      const Var back = f.codec.decode_layer(0, r, plan.quantized, q, ctx);
      return ops::mse(back, in.mu);
    };
    const Inputs held_out = make_inputs(4, 4, 4, 8, 999);
    const double before = reconstruction_error(held_out).value().item();
    for (int step = 0; step < 1000; ++step) {
      f.store.zero_grad();
      backward(reconstruction_error(make_inputs(4, 4, 4, 8, 100 + step)));
      adam.step(3e-3);
    }
    const double after = reconstruction_error(held_out).value().item();
    MESSAGE("identity codec mse " << before << " -> " << after);
    CHECK(after < 0.1 * before);
  }
}
