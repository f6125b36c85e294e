#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtft/autodiff.hpp"
#include "mtft/crmf.hpp"
#include "mtft/data.hpp"
#include "mtft/encoder.hpp"
#include "mtft/interaction_decoder.hpp"
#include "mtft/masking.hpp"
#include "mtft/params.hpp"
#include "mtft/tensor.hpp"

namespace mtft {

/// VTF: one attention pattern (all steps visible to every head), temporal
/// feature = mean over time. MTF: per-head scale patterns, mean over time.
/// MTFT: per-head scale patterns plus continuity-queried fusion.
enum class Variant { VTF, MTF, MTFT };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ModelConfig {
  std::size_t t_h = 20;
  std::size_t t_f = 30;
  std::size_t n_scales = 5;
  std::size_t layers = 4;
  std::size_t d_model = 128;
  std::size_t d_ff = 0;           // 0 -> d_model
  std::size_t decoder_hidden = 0; // 0 -> d_model
  Variant variant = Variant::MTFT;
  FusionScale fusion_scale = FusionScale::Dk;
  bool use_positional = true;
  double hz = 10.0;

  std::size_t d_head() const { return d_model / n_scales; }
  std::size_t decoder_width() const {
    return decoder_hidden == 0 ? d_model : decoder_hidden;
  }
  EncoderConfig encoder_config() const;
  void validate() const;

  std::map<std::string, std::string> to_meta() const;
  static ModelConfig from_meta(const std::map<std::string, std::string>& meta);
};

/// Everything the forward pass can report for inspection tools.
struct SceneTrace {
  struct AttnEntry {
    std::size_t vehicle = 0, layer = 0, head = 0;
    Tensor weights;  // t_h x t_h
  };
  std::vector<AttnEntry> attention;
  std::vector<CrmfTrace> crmf;  // one per vehicle; empty members off-variant
  Tensor interaction;           // (N+1) x (N+1) attention rows
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  /// Predicted future positions [t_f, 2] in the view's normalized frame
  /// (origin at the target's last observed point).
  Var predict(const SceneView& view, SceneTrace* trace = nullptr) const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  EncoderParams enc_;
  CrmfParams crmf_;  // populated only for the fused variant
  InteractionParams inter_;
  DecoderParams dec_;
  ScaleMaskSet scale_masks_;
};

}  // namespace mtft
