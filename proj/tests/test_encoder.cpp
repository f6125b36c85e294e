#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mtft/encoder.hpp"
#include "mtft/rng.hpp"
#include "oracles.hpp"

using namespace mtft;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.5, 1.5);
  return t;
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig cfg;
  cfg.len = 6;
  cfg.n_heads = 3;
  cfg.d_model = 12;
  cfg.layers = 2;
  CHECK_NOTHROW(cfg.validate());
  cfg.d_model = 10;  // not divisible by 3 heads: rounds the head width down
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.d_head() == 3);
  cfg.d_model = 2;  // fewer channels than heads
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.d_model = 12;
  cfg.layers = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("positional table follows the sinusoid recipe") {
  std::size_t len = 7, d = 8;
  Tensor table = positional_table(len, d);
  REQUIRE(table.dim(0) == len);
  REQUIRE(table.dim(1) == d);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) /
                                          static_cast<double>(d));
      double arg = static_cast<double>(t) * freq;
      CHECK(table(t, 2 * i) == doctest::Approx(std::sin(arg)).epsilon(1e-12));
      CHECK(table(t, 2 * i + 1) ==
            doctest::Approx(std::cos(arg)).epsilon(1e-12));
    }
  }
  CHECK(table(0, 0) == 0.0);
  CHECK(table(0, 1) == 1.0);
}

TEST_CASE("embedding matches the two-layer oracle plus position table") {
  EncoderConfig cfg;
  cfg.len = 5;
  cfg.n_heads = 2;
  cfg.d_model = 8;
  cfg.layers = 1;
  ParameterStore ps(3);
  EncoderParams params = EncoderParams::create(ps, cfg);
  Rng rng(4);
  Tensor traj = random_matrix(cfg.len, 2, rng);

  Tensor hidden = oracle::affine(traj, params.embed.first.w->value,
                                 params.embed.first.b->value);
  for (std::size_t i = 0; i < hidden.size(); ++i)
    if (hidden[i] < 0) hidden[i] = 0;
  Tensor ref = oracle::affine(hidden, params.embed.second.w->value,
                              params.embed.second.b->value);
  Tensor table = positional_table(cfg.len, cfg.d_model);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] += table[i];

  Var out = embed_with_pos(traj, params, cfg);
  CHECK(oracle::max_abs(out.value(), ref) < 1e-12);

  cfg.use_positional = false;
  Var bare = embed_with_pos(traj, params, cfg);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] -= table[i];
  CHECK(oracle::max_abs(bare.value(), ref) < 1e-12);
}

TEST_CASE("scale attention matches the loop oracle") {
  Rng rng(9);
  ScaleMaskSet masks = build_scale_masks(6, 3);
  for (std::size_t s = 0; s < 3; ++s) {
    Tensor q = random_matrix(6, 4, rng);
    Tensor k = random_matrix(6, 4, rng);
    Tensor v = random_matrix(6, 4, rng);
    Tensor w;
    Var out = scale_attention(constant(q), constant(k), constant(v),
                              masks.masks[s], &w);
    Tensor ref = oracle::scale_attention(q, k, v, masks.masks[s]);
    CHECK(oracle::max_abs(out.value(), ref) < 1e-12);
    for (std::size_t a = 0; a < 6; ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < 6; ++b) {
        if (masks.masks[s](a, b) == 0.0) CHECK(w(a, b) == 0.0);
        sum += w(a, b);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("encoder output shapes and per-scale representations") {
  EncoderConfig cfg;
  cfg.len = 8;
  cfg.n_heads = 4;
  cfg.d_model = 16;
  cfg.layers = 3;
  ParameterStore ps(11);
  EncoderParams params = EncoderParams::create(ps, cfg);
  ScaleMaskSet masks = build_scale_masks(cfg.len, cfg.n_heads);
  Rng rng(12);
  Tensor traj = random_matrix(cfg.len, 2, rng);

  EncodeResult res = encode_multiscale(traj, cfg, params, masks);
  CHECK(res.hidden.value().dim(0) == cfg.len);
  CHECK(res.hidden.value().dim(1) == cfg.d_model);
  REQUIRE(res.scale_reps.size() == cfg.n_heads);
  for (const Var& rep : res.scale_reps) {
    CHECK(rep.value().dim(0) == cfg.len);
    CHECK(rep.value().dim(1) == cfg.d_head());
  }
  CHECK(res.hidden.value().all_finite());
}

TEST_CASE("recorded attention respects each head's scale pattern") {
  EncoderConfig cfg;
  cfg.len = 9;
  cfg.n_heads = 3;
  cfg.d_model = 12;
  cfg.layers = 2;
  ParameterStore ps(21);
  EncoderParams params = EncoderParams::create(ps, cfg);
  ScaleMaskSet masks = build_scale_masks(cfg.len, cfg.n_heads);
  Rng rng(22);
  Tensor traj = random_matrix(cfg.len, 2, rng);

  struct Rec {
    std::size_t layer, head;
    Tensor w;
  };
  std::vector<Rec> recs;
  encode_multiscale(traj, cfg, params, masks,
                    [&](std::size_t l, std::size_t h, const Tensor& w) {
                      recs.push_back({l, h, w});
                    });
  REQUIRE(recs.size() == cfg.layers * cfg.n_heads);
  for (const Rec& r : recs) {
    CHECK(r.layer < cfg.layers);
    REQUIRE(r.head < cfg.n_heads);
    const Tensor& mask = masks.masks[r.head];
    for (std::size_t a = 0; a < cfg.len; ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < cfg.len; ++b) {
        if (mask(a, b) == 0.0) CHECK(r.w(a, b) == 0.0);
        sum += r.w(a, b);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("encoding is deterministic for a fixed store seed") {
  EncoderConfig cfg;
  cfg.len = 6;
  cfg.n_heads = 2;
  cfg.d_model = 8;
  cfg.layers = 2;
  ScaleMaskSet masks = build_scale_masks(cfg.len, cfg.n_heads);
  Rng rng(31);
  Tensor traj = random_matrix(cfg.len, 2, rng);
  ParameterStore a(7), b(7);
  EncoderParams pa = EncoderParams::create(a, cfg);
  EncoderParams pb = EncoderParams::create(b, cfg);
  Tensor ha = encode_multiscale(traj, cfg, pa, masks).hidden.value();
  Tensor hb = encode_multiscale(traj, cfg, pb, masks).hidden.value();
  CHECK(max_abs_diff(ha, hb) == 0.0);
}
