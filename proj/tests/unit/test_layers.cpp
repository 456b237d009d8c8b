#include <doctest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "ssmctb/block.hpp"
#include "ssmctb/channel_transformer.hpp"
#include "ssmctb/conv.hpp"
#include "ssmctb/error.hpp"
#include "ssmctb/grad_check.hpp"
#include "ssmctb/masked_conv.hpp"
#include "support/fixtures.hpp"

using namespace ssmctb;

namespace {

masked::MaskedConvConfig conv_cfg(std::size_t dims, std::size_t c, std::size_t kp, std::size_t d) {
  masked::MaskedConvConfig cfg;
  cfg.dims = dims;
  cfg.channels = c;
  cfg.sub_kernel = kp;
  cfg.dilation = d;
  return cfg;
}

transformer::TransformerConfig small_transformer(std::size_t dims) {
  transformer::TransformerConfig t;
  t.token_dim = 8;
  t.heads = 2;
  t.blocks = 2;
  t.pooled = Shape(dims, 2);
  return t;
}

}  // namespace

TEST_SUITE("conv") {
  TEST_CASE("dense 3x3 same conv matches hand computation") {
    // Single channel all-ones kernel counts in-bounds neighbours.
    const auto x = Tensor::full({3, 3, 1}, 1.0);
    ad::Tape tape;
    auto w = tape.constant(Tensor::full({9, 1, 1}, 1.0));
    auto b = tape.constant(Tensor::zeros({1}));
    auto y = ad::conv(tape.constant(x), w, b, 3, 1, 1);
    CHECK(y.value() == Tensor({3, 3, 1}, {4, 6, 4, 6, 9, 6, 4, 6, 4}));
  }

  TEST_CASE("strided output extents") {
    CHECK(conv::conv_output_spatial({32, 32}, 3, 2, 1) == Shape{16, 16});
    CHECK(conv::conv_output_spatial({8, 8, 8}, 3, 1, 1) == Shape{8, 8, 8});
  }

  TEST_CASE("nearest upsampling and its adjoint") {
    const auto x = Tensor({1, 2, 1}, {1, 2});
    const auto up = conv::upsample_nearest(x, 2);
    CHECK(up == Tensor({2, 4, 1}, {1, 1, 2, 2, 1, 1, 2, 2}));
    CHECK(conv::upsample_nearest_backward(up, x.shape(), 2) == Tensor({1, 2, 1}, {4, 8}));
  }

  TEST_CASE("mean filter keeps constants") {
    CHECK(max_abs_diff(conv::mean_filter3(Tensor::full({4, 5}, 2.0)), Tensor::full({4, 5}, 2.0)) < 1e-15);
  }

  TEST_CASE("conv gradients") {
    Rng rng(21);
    ParameterStore store;
    store.add("w", fixtures::random_tensor({9, 2, 3}, rng));
    store.add("b", fixtures::random_tensor({3}, rng));
    const auto x = fixtures::random_tensor({6, 6, 2}, rng);
    for (std::size_t stride : {1, 2}) {
      const auto report = grad_check(
          [&](ad::Tape& t, const ParameterStore& s) {
            auto y = ad::conv(t.constant(x), t.parameter(s, "w"), t.parameter(s, "b"), 3, stride, 1);
            return ad::sum(ad::square(y));
          },
          store);
      CHECK(report.passed(1e-6));
    }
  }
}

TEST_SUITE("masked_conv") {
  TEST_CASE("receptive offsets avoid the centre and fill the corners") {
    const auto cfg = conv_cfg(2, 1, 2, 1);
    CHECK(cfg.receptive_field() == 7);
    CHECK(cfg.padding() == 3);
    const auto offsets = masked::receptive_offsets(cfg);
    CHECK(offsets.size() == 16);
    for (const auto& o : offsets) {
      for (int v : o.offset) {
        CHECK(std::abs(v) >= 2);
        CHECK(std::abs(v) <= 3);
      }
    }
    // Sub-kernel 0 is top-left, 3 bottom-right.
    CHECK(offsets.front().offset == conv::Offset{-3, -3});
    CHECK(offsets.back().offset == conv::Offset{3, 3});
  }

  TEST_CASE("zero dilation keeps the centre hidden") {
    const auto offsets = masked::receptive_offsets(conv_cfg(3, 1, 1, 0));
    CHECK(offsets.size() == 8);
    for (const auto& o : offsets) {
      for (int v : o.offset) CHECK(std::abs(v) == 1);
    }
  }

  TEST_CASE("matches the dense masked oracle") {
    Rng rng(22);
    for (std::size_t dims : {2, 3}) {
      const auto cfg = conv_cfg(dims, 2, 1, 1);
      const auto params = masked::MaskedConvParams::random(cfg, rng);
      Shape s(dims, 5);
      s.push_back(2);
      const auto x = fixtures::random_tensor(s, rng);
      CHECK(max_abs_diff(masked::masked_conv_preactivation(x, params, cfg), oracle::dense_masked_conv(x, params, cfg)) <
            1e-12);
      CHECK(masked::masked_conv_forward(x, params, cfg) == relu(masked::masked_conv_preactivation(x, params, cfg)));
    }
  }

  TEST_CASE("output at a position ignores the input there") {
    Rng rng(23);
    const auto cfg = conv_cfg(2, 3, 1, 2);
    const auto params = masked::MaskedConvParams::random(cfg, rng);
    auto x = fixtures::random_tensor({7, 7, 3}, rng);
    const auto before = masked::masked_conv_forward(x, params, cfg);
    for (std::size_t m = 0; m < 3; ++m) x.at({3, 3, m}) += 100.0;
    const auto after = masked::masked_conv_forward(x, params, cfg);
    for (std::size_t j = 0; j < 3; ++j) CHECK(before.at({3, 3, j}) == after.at({3, 3, j}));
  }

  TEST_CASE("store round trip and parameter paths") {
    Rng rng(24);
    const auto cfg = conv_cfg(2, 2, 1, 3);
    const auto params = masked::MaskedConvParams::random(cfg, rng);
    ParameterStore store;
    params.save(store, "enc.");
    CHECK(store.size() == 8);
    CHECK(store.contains("enc.masked_conv.filter1.sub3"));
    const auto back = masked::MaskedConvParams::load(store, "enc.", cfg);
    CHECK(back.weights == params.weights);
  }

  TEST_CASE("differentiable form passes a gradient check") {
    Rng rng(25);
    const auto cfg = conv_cfg(2, 2, 1, 1);
    ParameterStore store;
    masked::MaskedConvParams::random(cfg, rng).save(store, "");
    const auto x = fixtures::random_tensor({5, 5, 2}, rng);
    const auto report = grad_check(
        [&](ad::Tape& t, const ParameterStore& s) {
          return ad::sum(ad::square(masked::masked_conv(t, t.constant(x), s, "", cfg)));
        },
        store);
    CHECK(report.passed(1e-6));
  }

  TEST_CASE("invalid configurations") {
    CHECK_THROWS_AS(conv_cfg(1, 1, 1, 1).validate(), ValidationError);
    CHECK_THROWS_AS(conv_cfg(2, 1, 0, 1).validate(), ValidationError);
    CHECK_THROWS_AS(conv_cfg(2, 0, 1, 1).validate(), ValidationError);
  }
}

TEST_SUITE("transformer") {
  TEST_CASE("head count must divide token width") {
    auto t = small_transformer(2);
    t.heads = 3;
    CHECK_THROWS_AS(t.validate(), ValidationError);
    CHECK(small_transformer(2).hidden() == 16);
  }

  TEST_CASE("tokenize shape and positional offset") {
    Rng rng(31);
    const auto cfg = small_transformer(2);
    auto params = transformer::TransformerParams::zeros(cfg, 3);
    params.pos = fixtures::random_tensor({3, 8}, rng);
    const auto z = fixtures::random_tensor({4, 4, 3}, rng);
    // Zero projection leaves only the positional embeddings.
    CHECK(transformer::tokenize(z, params, cfg) == params.pos);
  }

  TEST_CASE("single head attention matches a direct computation") {
    Rng rng(32);
    transformer::HeadParams head{fixtures::random_tensor({4, 2}, rng), fixtures::random_tensor({4, 2}, rng),
                                 fixtures::random_tensor({4, 4}, rng)};
    const auto r = fixtures::random_tensor({3, 4}, rng);
    const auto q = oracle::triple_loop_matmul(r, head.q);
    const auto k = oracle::triple_loop_matmul(r, head.k);
    const auto v = oracle::triple_loop_matmul(r, head.v);
    Tensor expect = Tensor::zeros({3, 4});
    for (std::size_t i = 0; i < 3; ++i) {
      std::vector<double> e(3);
      double z = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (std::size_t a = 0; a < 2; ++a) dot += q.at({i, a}) * k.at({j, a});
        e[j] = std::exp(dot / std::sqrt(2.0));
        z += e[j];
      }
      for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t a = 0; a < 4; ++a) expect.at({i, a}) += e[j] / z * v.at({j, a});
      }
    }
    CHECK(max_abs_diff(transformer::attention_head(r, head), expect) < 1e-12);
  }

  TEST_CASE("zero attention and MLP make each block an identity") {
    Rng rng(33);
    const auto cfg = small_transformer(2);
    const auto params = transformer::TransformerParams::zeros(cfg, 4);
    const auto tokens = fixtures::random_tensor({4, 8}, rng);
    CHECK(transformer::run_blocks(tokens, params, cfg) == tokens);
  }

  TEST_CASE("gate lies strictly inside (0, 1)") {
    Rng rng(34);
    const auto cfg = small_transformer(3);
    const auto params = transformer::TransformerParams::random(cfg, 5, rng);
    const auto g = transformer::gate_weights(fixtures::random_tensor({4, 4, 4, 5}, rng, 3.0), params, cfg);
    CHECK(g.size() == 5);
    for (double v : g.data()) CHECK((v > 0.0 && v < 1.0));
  }

  TEST_CASE("store round trip") {
    Rng rng(35);
    const auto cfg = small_transformer(2);
    const auto params = transformer::TransformerParams::random(cfg, 3, rng);
    ParameterStore store;
    params.save(store, "t.");
    const auto back = transformer::TransformerParams::load(store, "t.", cfg, 3);
    const auto z = fixtures::random_tensor({4, 4, 3}, rng);
    CHECK(transformer::gate_weights(z, back, cfg) == transformer::gate_weights(z, params, cfg));
  }
}

TEST_SUITE("block") {
  TEST_CASE("defaults") {
    const auto cfg = block::SsmctbConfig::defaults(2, 16);
    CHECK(cfg.conv.dilation == 3);
    CHECK(cfg.conv.sub_kernel == 1);
    CHECK(cfg.conv.channels == 16);
    CHECK(cfg.transformer.token_dim == 64);
    CHECK(cfg.transformer.heads == 4);
    CHECK(cfg.transformer.blocks == 2);
    CHECK(cfg.lambda == 0.1);
  }

  TEST_CASE("forward keeps the shape and the loss is the reconstruction MSE") {
    Rng rng(41);
    for (std::size_t dims : {2, 3}) {
      auto cfg = block::SsmctbConfig::defaults(dims, 3);
      cfg.transformer = small_transformer(dims);
      const auto params = block::SsmctbParams::random(cfg, rng);
      Shape s(dims, 6);
      s.push_back(3);
      const auto x = fixtures::random_tensor(s, rng);
      const auto out = block::ssmctb_forward(x, params, cfg);
      CHECK(out.x_hat.shape() == x.shape());
      CHECK(out.loss == doctest::Approx(mean(mul(sub(out.x_hat, x), sub(out.x_hat, x)))).epsilon(1e-14));

      // x_hat is Z scaled per channel by the gate.
      const auto z = masked::masked_conv_forward(x, params.conv, cfg.conv);
      const auto g = transformer::gate_weights(z, params.transformer, cfg.transformer);
      for (std::size_t p = 0; p < x.size(); ++p) CHECK(out.x_hat[p] == z[p] * g[p % 3]);
    }
  }

  TEST_CASE("total loss") {
    CHECK(block::total_loss(2.0, 3.0, 0.1) == doctest::Approx(2.3));
    CHECK(block::total_loss(2.0, 3.0, 0.0) == 2.0);
    CHECK_THROWS_AS(block::total_loss(1.0, 1.0, -0.5), ValidationError);
  }

  TEST_CASE("rejects inputs of the wrong rank") {
    Rng rng(42);
    auto cfg = block::SsmctbConfig::defaults(2, 2);
    cfg.transformer = small_transformer(2);
    const auto params = block::SsmctbParams::random(cfg, rng);
    CHECK_THROWS_AS(block::ssmctb_forward(Tensor::zeros({4, 4, 4, 2}), params, cfg), ValidationError);
  }
}
