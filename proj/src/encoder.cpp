#include "mtft/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

void EncoderConfig::validate() const {
  if (len < 1) fail("encoder: len must be >= 1");
  if (n_heads < 1) fail("encoder: n_heads must be >= 1");
  if (layers < 1) fail("encoder: layers must be >= 1");
  if (d_model < n_heads)
    fail("encoder: d_model (" + std::to_string(d_model) +
         ") must be >= n_heads (" + std::to_string(n_heads) + ")");
}

EncoderParams EncoderParams::create(ParameterStore& ps,
                                    const EncoderConfig& cfg) {
  cfg.validate();
  EncoderParams p;
  p.embed = Mlp::create(ps, "encoder.embed", 2, cfg.d_model, cfg.d_model);
  std::size_t dh = cfg.d_head();
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::string base = "encoder.layer" + std::to_string(l);
    EncoderLayerParams layer;
    layer.ln_attn = LayerNormP::create(ps, base + ".ln_attn", cfg.d_model);
    layer.ln_ff = LayerNormP::create(ps, base + ".ln_ff", cfg.d_model);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      std::string hb = base + ".head" + std::to_string(h);
      HeadParams head;
      head.wq = Affine::create(ps, hb + ".wq", cfg.d_model, dh);
      head.wk = Affine::create(ps, hb + ".wk", cfg.d_model, dh);
      head.wv = Affine::create(ps, hb + ".wv", cfg.d_model, dh);
      layer.heads.push_back(head);
    }
    layer.wo = Affine::create(ps, base + ".wo", cfg.n_heads * dh, cfg.d_model);
    layer.ff = Mlp::create(ps, base + ".ff", cfg.d_model, cfg.ff_width(),
                           cfg.d_model);
    p.layers.push_back(std::move(layer));
  }
  p.final_norm = LayerNormP::create(ps, "encoder.final_norm", cfg.d_model);
  return p;
}

Tensor positional_table(std::size_t len, std::size_t d_model) {
  Tensor t = Tensor::zeros({len, d_model});
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t j = 0; j < d_model; ++j) {
      double expo = static_cast<double>(2 * (j / 2)) /
                    static_cast<double>(d_model);
      double div = std::pow(10000.0, expo);
      double angle = static_cast<double>(pos) / div;
      t(pos, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return t;
}

Var embed_with_pos(const Tensor& masked_traj, const EncoderParams& params,
                   const EncoderConfig& cfg) {
  if (masked_traj.rank() != 2 || masked_traj.dim(0) != cfg.len ||
      masked_traj.dim(1) != 2)
    fail("embed_with_pos: expected " + std::to_string(cfg.len) +
         " x 2 input, got " + masked_traj.shape_str());
  Var h = params.embed.apply(constant(masked_traj));
  if (cfg.use_positional)
    h = add(h, constant(positional_table(cfg.len, cfg.d_model)));
  return h;
}

Var scale_attention(const Var& q, const Var& k, const Var& v,
                    const Tensor& scalemask, Tensor* weights_out) {
  if (q.value().rank() != 2 || !q.value().same_shape(k.value()) ||
      !q.value().same_shape(v.value()))
    fail("scale_attention: q/k/v must share one len x d shape, got " +
         q.value().shape_str() + ", " + k.value().shape_str() + ", " +
         v.value().shape_str());
  std::size_t len = q.dim(0);
  if (scalemask.rank() != 2 || scalemask.dim(0) != len ||
      scalemask.dim(1) != len)
    fail("scale_attention: mask must be " + std::to_string(len) + " x " +
         std::to_string(len) + ", got " + scalemask.shape_str());
  double dk = static_cast<double>(q.dim(1));
  Var logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(dk));
  Var weights = masked_softmax(logits, scalemask);
  if (weights_out) *weights_out = weights.value();
  return matmul(weights, v);
}

EncodeResult encode_multiscale(const Tensor& masked_traj,
                               const EncoderConfig& cfg,
                               const EncoderParams& params,
                               const ScaleMaskSet& masks,
                               const AttnRecorder& record) {
  cfg.validate();
  if (masks.scales() != cfg.n_heads || masks.len != cfg.len)
    fail("encode_multiscale: mask set (" + std::to_string(masks.scales()) +
         " scales, len " + std::to_string(masks.len) +
         ") does not match config");
  if (params.layers.size() != cfg.layers)
    fail("encode_multiscale: params built for a different layer count");

  EncodeResult out;
  Var h = embed_with_pos(masked_traj, params, cfg);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const EncoderLayerParams& layer = params.layers[l];
    Var x = layer.ln_attn.apply(h);
    std::vector<Var> head_outs;
    head_outs.reserve(cfg.n_heads);
    for (std::size_t i = 0; i < cfg.n_heads; ++i) {
      Var q = layer.heads[i].wq.apply(x);
      Var k = layer.heads[i].wk.apply(x);
      Var v = layer.heads[i].wv.apply(x);
      Tensor w;
      Var o = scale_attention(q, k, v, masks.masks[i], record ? &w : nullptr);
      if (record) record(l, i, w);
      head_outs.push_back(o);
    }
    if (l + 1 == cfg.layers) out.scale_reps = head_outs;
    h = add(h, layer.wo.apply(concat_cols(head_outs)));
    h = add(h, layer.ff.apply(layer.ln_ff.apply(h)));
  }
  out.hidden = params.final_norm.apply(h);
  return out;
}

}  // namespace mtft
