#include "mtft/interaction_decoder.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

InteractionParams InteractionParams::create(ParameterStore& ps,
                                            std::size_t d_model) {
  InteractionParams p;
  p.g = Affine::create(ps, "interaction.g", d_model, d_model);
  p.w = &ps.create("interaction.w", {d_model, d_model}, d_model);
  return p;
}

Var global_interaction(const Var& features, const InteractionParams& params,
                       Tensor* alpha_out) {
  if (features.value().rank() != 2)
    fail("global_interaction: expected [vehicles, d] features, got " +
         features.value().shape_str());
  Var g = params.g.apply(features);
  Var alpha = softmax(matmul(g, transpose(g)));
  if (alpha_out) *alpha_out = alpha.value();
  Var mixed = matmul(alpha, features);
  return relu(matmul(mixed, param_leaf(*params.w)));
}

DecoderParams DecoderParams::create(ParameterStore& ps, std::size_t d_model,
                                    std::size_t hidden) {
  if (hidden < 1) fail("decoder: hidden width must be >= 1");
  DecoderParams p;
  p.hidden = hidden;
  p.init_h = Affine::create(ps, "decoder.init_h", d_model, hidden);
  p.init_c = Affine::create(ps, "decoder.init_c", d_model, hidden);
  p.w_ih = &ps.create("decoder.lstm.w_ih", {2, 4 * hidden}, 2);
  p.w_hh = &ps.create("decoder.lstm.w_hh", {hidden, 4 * hidden}, hidden);
  p.bias = &ps.create_filled("decoder.lstm.bias", {4 * hidden}, 0.0);
  p.head = Affine::create(ps, "decoder.head", hidden, 2);
  return p;
}

Var decode_future(const Var& v_tar, std::size_t t_f,
                  const DecoderParams& params) {
  if (t_f < 1) fail("decode_future: t_f must be >= 1");
  if (v_tar.value().rank() != 2 || v_tar.dim(0) != 1)
    fail("decode_future: expected 1 x d feature row, got " +
         v_tar.value().shape_str());
  std::size_t hid = params.hidden;
  Var h = params.init_h.apply(v_tar);
  Var c = params.init_c.apply(v_tar);
  Var x = constant(Tensor::zeros({1, 2}));
  Var wih = param_leaf(*params.w_ih);
  Var whh = param_leaf(*params.w_hh);
  Var b = param_leaf(*params.bias);
  std::vector<Var> offsets;
  offsets.reserve(t_f);
  for (std::size_t t = 0; t < t_f; ++t) {
    Var z = add_rowwise(add(matmul(x, wih), matmul(h, whh)), b);
    Var gi = sigmoid(slice_cols(z, 0, hid));
    Var gf = sigmoid(slice_cols(z, hid, hid));
    Var gg = tanh_op(slice_cols(z, 2 * hid, hid));
    Var go = sigmoid(slice_cols(z, 3 * hid, hid));
    c = add(mul(gf, c), mul(gi, gg));
    h = mul(go, tanh_op(c));
    Var off = params.head.apply(h);
    offsets.push_back(off);
    x = off;
  }
  return cumsum_rows(concat_rows(offsets));
}

}  // namespace mtft
