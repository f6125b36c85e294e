#include "mtft/crmf.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

CrmfParams CrmfParams::create(ParameterStore& ps, std::size_t d_head,
                              std::size_t d_model) {
  CrmfParams p;
  p.eta_q = Affine::create(ps, "crmf.eta_q", d_head, d_head);
  p.eta_k = Affine::create(ps, "crmf.eta_k", d_head, d_head);
  p.eta_v = Affine::create(ps, "crmf.eta_v", d_head, d_head);
  p.out = Affine::create(ps, "crmf.out", d_head, d_model);
  return p;
}

Tensor across_attention_weights(const std::vector<int>& increments) {
  if (increments.empty())
    fail("across_attention_weights: empty increment vector");
  std::size_t len = increments.size();
  int mx = increments[0];
  for (int v : increments)
    if (v > mx) mx = v;
  Tensor w({1, len});
  double sum = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    w[i] = std::exp(static_cast<double>(increments[i] - mx));
    sum += w[i];
  }
  for (std::size_t i = 0; i < len; ++i) w[i] /= sum;
  return w;
}

Var continuity_representation(const Tensor& weights, const Var& rep) {
  if (weights.rank() != 2 || weights.dim(0) != 1)
    fail("continuity_representation: weights must be 1 x len, got " +
         weights.shape_str());
  if (rep.value().rank() != 2 || rep.dim(0) != weights.dim(1))
    fail("continuity_representation: weights " + weights.shape_str() +
         " do not match representation " + rep.value().shape_str());
  return matmul(constant(weights), rep);
}

Var fuse_multiscale(const std::vector<Var>& r_c, const std::vector<Var>& r_m,
                    const CrmfParams& params, FusionScale fscale,
                    CrmfTrace* trace) {
  if (r_c.empty() || r_c.size() != r_m.size())
    fail("fuse_multiscale: need matching non-empty scale sets, got " +
         std::to_string(r_c.size()) + " continuity rows and " +
         std::to_string(r_m.size()) + " representations");
  std::size_t d = r_m[0].dim(1);
  for (const Var& rc : r_c)
    if (rc.value().rank() != 2 || rc.dim(0) != 1 || rc.dim(1) != d)
      fail("fuse_multiscale: continuity rows must be 1 x " +
           std::to_string(d) + ", got " + rc.value().shape_str());
  for (const Var& rm : r_m)
    if (rm.value().rank() != 2 || rm.dim(1) != d)
      fail("fuse_multiscale: representations must share width " +
           std::to_string(d) + ", got " + rm.value().shape_str());

  Var queries = params.eta_q.apply(concat_rows(r_c));  // n x d_k
  Var tokens = concat_rows(r_m);                       // n*len x d
  Var keys = params.eta_k.apply(tokens);
  Var values = params.eta_v.apply(tokens);
  double dk = static_cast<double>(keys.dim(1));
  double s = fscale == FusionScale::Dk ? 1.0 / dk : 1.0 / std::sqrt(dk);
  Var attn = softmax(scale(matmul(queries, transpose(keys)), s));
  if (trace) trace->fusion_attention = attn.value();
  Var pooled = mean_rows(matmul(attn, values));  // 1 x d_k
  return params.out.apply(pooled);               // 1 x d_model
}

}  // namespace mtft
