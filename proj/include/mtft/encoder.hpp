#pragma once

#include <functional>
#include <vector>

#include "mtft/autodiff.hpp"
#include "mtft/masking.hpp"
#include "mtft/params.hpp"
#include "mtft/tensor.hpp"

namespace mtft {

struct EncoderConfig {
  std::size_t len = 20;
  std::size_t n_heads = 5;
  std::size_t layers = 4;
  std::size_t d_model = 128;
  std::size_t d_ff = 0;  // 0 -> d_model
  bool use_positional = true;

  std::size_t d_head() const { return d_model / n_heads; }
  std::size_t ff_width() const { return d_ff == 0 ? d_model : d_ff; }
  void validate() const;
};

struct HeadParams {
  Affine wq, wk, wv;  // d_model -> d_head
};

struct EncoderLayerParams {
  LayerNormP ln_attn, ln_ff;
  std::vector<HeadParams> heads;
  Affine wo;  // n_heads*d_head -> d_model
  Mlp ff;     // d_model -> ff_width -> d_model
};

struct EncoderParams {
  Mlp embed;  // 2 -> d_model -> d_model
  std::vector<EncoderLayerParams> layers;
  LayerNormP final_norm;

  static EncoderParams create(ParameterStore& ps, const EncoderConfig& cfg);
};

/// Fixed sinusoidal position table, len x d_model.
Tensor positional_table(std::size_t len, std::size_t d_model);

/// Coordinate embedding plus (optionally) the position table.
Var embed_with_pos(const Tensor& masked_traj, const EncoderParams& params,
                   const EncoderConfig& cfg);

/// softmax(q k^T / sqrt(d_k), restricted to the scale pattern) x v. Weights
/// are exactly zero off-pattern and each row sums to 1; the all-ones
/// diagonal of a scale mask guarantees no empty row. Optionally reports the
/// weight matrix.
Var scale_attention(const Var& q, const Var& k, const Var& v,
                    const Tensor& scalemask, Tensor* weights_out = nullptr);

using AttnRecorder =
    std::function<void(std::size_t layer, std::size_t head, const Tensor& w)>;

struct EncodeResult {
  Var hidden;                   // len x d_model, after the final block + norm
  std::vector<Var> scale_reps;  // final layer's per-head outputs, len x d_head
};

/// Pre-norm transformer stack whose heads each apply their own scale mask.
/// The last layer's head outputs (before concatenation) come back as the
/// per-scale representation set.
EncodeResult encode_multiscale(const Tensor& masked_traj,
                               const EncoderConfig& cfg,
                               const EncoderParams& params,
                               const ScaleMaskSet& masks,
                               const AttnRecorder& record = nullptr);

}  // namespace mtft
