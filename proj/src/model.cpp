#include "mtft/model.hpp"

#include <stdexcept>
#include <utility>

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

std::string meta_at(const std::map<std::string, std::string>& meta,
                    const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end())
    throw std::runtime_error("checkpoint meta missing '" + key + "'");
  return it->second;
}

}  // namespace

Variant variant_from_string(const std::string& s) {
  if (s == "vtf") return Variant::VTF;
  if (s == "mtf") return Variant::MTF;
  if (s == "mtft") return Variant::MTFT;
  fail("unknown variant '" + s + "' (expected vtf, mtf or mtft)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::VTF: return "vtf";
    case Variant::MTF: return "mtf";
    default: return "mtft";
  }
}

EncoderConfig ModelConfig::encoder_config() const {
  EncoderConfig e;
  e.len = t_h;
  e.n_heads = n_scales;
  e.layers = layers;
  e.d_model = d_model;
  e.d_ff = d_ff;
  e.use_positional = use_positional;
  return e;
}

void ModelConfig::validate() const {
  if (t_h < 2) fail("model: t_h must be >= 2");
  if (t_f < 1) fail("model: t_f must be >= 1");
  if (layers < 1) fail("model: layers must be >= 1");
  if (hz <= 0.0) fail("model: hz must be positive");
  encoder_config().validate();
}

std::map<std::string, std::string> ModelConfig::to_meta() const {
  std::map<std::string, std::string> m;
  m["t_h"] = std::to_string(t_h);
  m["t_f"] = std::to_string(t_f);
  m["n_scales"] = std::to_string(n_scales);
  m["layers"] = std::to_string(layers);
  m["d_model"] = std::to_string(d_model);
  m["d_ff"] = std::to_string(d_ff);
  m["decoder_hidden"] = std::to_string(decoder_hidden);
  m["variant"] = to_string(variant);
  m["fusion_scale"] = fusion_scale == FusionScale::Dk ? "dk" : "sqrt_dk";
  m["use_positional"] = use_positional ? "1" : "0";
  m["hz"] = format_double(hz);
  return m;
}

ModelConfig ModelConfig::from_meta(
    const std::map<std::string, std::string>& meta) {
  ModelConfig c;
  c.t_h = std::stoul(meta_at(meta, "t_h"));
  c.t_f = std::stoul(meta_at(meta, "t_f"));
  c.n_scales = std::stoul(meta_at(meta, "n_scales"));
  c.layers = std::stoul(meta_at(meta, "layers"));
  c.d_model = std::stoul(meta_at(meta, "d_model"));
  c.d_ff = std::stoul(meta_at(meta, "d_ff"));
  c.decoder_hidden = std::stoul(meta_at(meta, "decoder_hidden"));
  c.variant = variant_from_string(meta_at(meta, "variant"));
  std::string fs = meta_at(meta, "fusion_scale");
  if (fs == "dk") c.fusion_scale = FusionScale::Dk;
  else if (fs == "sqrt_dk") c.fusion_scale = FusionScale::SqrtDk;
  else throw std::runtime_error("checkpoint meta: bad fusion_scale '" + fs + "'");
  c.use_positional = meta_at(meta, "use_positional") == "1";
  c.hz = std::stod(meta_at(meta, "hz"));
  c.validate();
  return c;
}

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg), store_(init_seed) {
  cfg_.validate();
  enc_ = EncoderParams::create(store_, cfg_.encoder_config());
  if (cfg_.variant == Variant::MTFT)
    crmf_ = CrmfParams::create(store_, cfg_.d_head(), cfg_.d_model);
  inter_ = InteractionParams::create(store_, cfg_.d_model);
  dec_ = DecoderParams::create(store_, cfg_.d_model, cfg_.decoder_width());
  scale_masks_ = cfg_.variant == Variant::VTF
                     ? build_full_masks(cfg_.t_h, cfg_.n_scales)
                     : build_scale_masks(cfg_.t_h, cfg_.n_scales);
}

Var Model::predict(const SceneView& view, SceneTrace* trace) const {
  std::size_t n_vehicles = view.masked.size();
  if (n_vehicles == 0) fail("predict: scene view has no vehicles");
  if (view.masks.size() != n_vehicles)
    fail("predict: mask/trajectory count mismatch");

  EncoderConfig ecfg = cfg_.encoder_config();
  std::vector<Var> temporal;
  temporal.reserve(n_vehicles);
  for (std::size_t v = 0; v < n_vehicles; ++v) {
    if (view.masked[v].rank() != 2 || view.masked[v].dim(0) != cfg_.t_h ||
        view.masked[v].dim(1) != 2)
      fail("predict: vehicle " + std::to_string(v) +
           " trajectory must be t_h x 2");
    AttnRecorder rec;
    if (trace)
      rec = [trace, v](std::size_t layer, std::size_t head, const Tensor& w) {
        trace->attention.push_back({v, layer, head, w});
      };
    EncodeResult er =
        encode_multiscale(view.masked[v], ecfg, enc_, scale_masks_, rec);

    if (cfg_.variant == Variant::MTFT) {
      auto obs = build_observation_matrices(view.masks[v], scale_masks_);
      CrmfTrace ct;
      CrmfTrace* ctp = trace ? &ct : nullptr;
      std::vector<Var> r_c;
      r_c.reserve(obs.size());
      for (std::size_t j = 0; j < obs.size(); ++j) {
        Tensor w = across_attention_weights(obs[j].increments);
        Var c = continuity_representation(w, er.scale_reps[j]);
        if (ctp) {
          ct.across_weights.push_back(w);
          ct.continuity.push_back(c.value());
        }
        r_c.push_back(std::move(c));
      }
      temporal.push_back(
          fuse_multiscale(r_c, er.scale_reps, crmf_, cfg_.fusion_scale, ctp));
      if (trace) trace->crmf.push_back(std::move(ct));
    } else {
      temporal.push_back(mean_rows(er.hidden));
      if (trace) trace->crmf.emplace_back();
    }
  }

  Var features = n_vehicles == 1 ? temporal[0] : concat_rows(temporal);
  Tensor alpha;
  Var mixed = global_interaction(features, inter_, trace ? &alpha : nullptr);
  if (trace) trace->interaction = std::move(alpha);
  Var v_tar = slice_rows(mixed, 0, 1);
  return decode_future(v_tar, cfg_.t_f, dec_);
}

void Model::save(const std::string& path) const {
  auto meta = cfg_.to_meta();
  meta["init_seed"] = std::to_string(store_.seed());
  store_.save(path, meta);
}

Model Model::load(const std::string& path) {
  auto meta = ParameterStore::read_meta(path);
  ModelConfig cfg = ModelConfig::from_meta(meta);
  std::uint64_t seed = std::stoull(meta_at(meta, "init_seed"));
  Model m(cfg, seed);
  m.store_.load(path);
  return m;
}

}  // namespace mtft
