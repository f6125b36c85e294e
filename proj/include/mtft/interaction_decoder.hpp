#pragma once

#include "mtft/autodiff.hpp"
#include "mtft/params.hpp"
#include "mtft/tensor.hpp"

namespace mtft {

struct InteractionParams {
  Affine g;                 // d_model -> d_model
  Parameter* w = nullptr;   // d_model x d_model, no bias

  static InteractionParams create(ParameterStore& ps, std::size_t d_model);
};

/// Inner-product interaction over per-vehicle features [N+1, d]: scores
/// s_ij = <G(e_i), G(e_j)>, row softmax (including self), then
/// v_i = ReLU(sum_j a_ij e_j W). Optionally reports the attention rows.
Var global_interaction(const Var& features, const InteractionParams& params,
                       Tensor* alpha_out = nullptr);

struct DecoderParams {
  Affine init_h, init_c;     // d_model -> hidden
  Parameter* w_ih = nullptr; // 2 x 4*hidden
  Parameter* w_hh = nullptr; // hidden x 4*hidden
  Parameter* bias = nullptr; // 4*hidden
  Affine head;               // hidden -> 2
  std::size_t hidden = 0;

  static DecoderParams create(ParameterStore& ps, std::size_t d_model,
                              std::size_t hidden);
};

/// Recurrent rollout: hidden/cell state seeded from v_tar, each step feeds
/// the previous predicted offset back in (zeros at the first step), the
/// per-step 2D offsets are cumulatively summed into coordinates relative to
/// the target's last observed position.
Var decode_future(const Var& v_tar, std::size_t t_f,
                  const DecoderParams& params);

}  // namespace mtft
