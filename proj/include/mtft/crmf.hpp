#pragma once

#include <vector>

#include "mtft/autodiff.hpp"
#include "mtft/params.hpp"
#include "mtft/tensor.hpp"

namespace mtft {

struct CrmfParams {
  Affine eta_q, eta_k, eta_v;  // d_head -> d_head
  Affine out;                  // d_head -> d_model

  static CrmfParams create(ParameterStore& ps, std::size_t d_head,
                           std::size_t d_model);
};

/// Fusion logits are divided by d_K by default, with the conventional
/// sqrt(d_K) scaling selectable.
enum class FusionScale { Dk, SqrtDk };

/// Across-time weights from information increments: softmax over the raw
/// integer counts, max-subtracted. Plain data — increments carry no
/// gradient. Returns a 1 x len row.
Tensor across_attention_weights(const std::vector<int>& increments);

/// Convex combination of representation rows: weights [1,len] x rep [len,d].
Var continuity_representation(const Tensor& weights, const Var& rep);

struct CrmfTrace {
  std::vector<Tensor> across_weights;  // per scale, 1 x len
  std::vector<Tensor> continuity;      // per scale, 1 x d_head
  Tensor fusion_attention;             // n x (n*len)
};

/// Continuity-queried fusion: queries from the n continuity rows, keys and
/// values from all n*len per-scale timestep rows, attention output
/// mean-pooled over the n rows and projected to d_model.
Var fuse_multiscale(const std::vector<Var>& r_c, const std::vector<Var>& r_m,
                    const CrmfParams& params, FusionScale fscale,
                    CrmfTrace* trace = nullptr);

}  // namespace mtft
