#include "mtft/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "mtft/data.hpp"
#include "mtft/gradcheck.hpp"
#include "mtft/masking.hpp"
#include "mtft/metrics.hpp"
#include "mtft/model.hpp"
#include "mtft/rng.hpp"
#include "mtft/train.hpp"

namespace fs = std::filesystem;

namespace mtft {

namespace {

struct ModelOpts {
  std::string variant = "mtft";
  std::size_t d_model = 128;
  std::size_t layers = 4;
  std::size_t scales = 5;
  std::size_t d_ff = 0;
  std::size_t decoder_hidden = 0;
  std::string fusion_scale = "dk";
  bool no_positional = false;
};

void add_model_opts(CLI::App* sub, ModelOpts& o) {
  sub->add_option("--variant", o.variant, "Model variant")
      ->check(CLI::IsMember({"vtf", "mtf", "mtft"}))
      ->capture_default_str();
  sub->add_option("--d-model", o.d_model, "Hidden width")
      ->capture_default_str();
  sub->add_option("--layers", o.layers, "Encoder depth")->capture_default_str();
  sub->add_option("--scales", o.scales, "Attention scales (= heads)")
      ->capture_default_str();
  sub->add_option("--d-ff", o.d_ff, "Feed-forward width (0 = d_model)")
      ->capture_default_str();
  sub->add_option("--decoder-hidden", o.decoder_hidden,
                  "Decoder LSTM width (0 = d_model)")
      ->capture_default_str();
  sub->add_option("--fusion-scale", o.fusion_scale,
                  "Fusion logit scaling: dk or sqrt_dk")
      ->check(CLI::IsMember({"dk", "sqrt_dk"}))
      ->capture_default_str();
  sub->add_flag("--no-positional", o.no_positional,
                "Disable the positional table");
}

ModelConfig to_model_config(const ModelOpts& o, std::size_t t_h,
                            std::size_t t_f, double hz) {
  ModelConfig c;
  c.t_h = t_h;
  c.t_f = t_f;
  c.hz = hz;
  c.n_scales = o.scales;
  c.layers = o.layers;
  c.d_model = o.d_model;
  c.d_ff = o.d_ff;
  c.decoder_hidden = o.decoder_hidden;
  c.variant = variant_from_string(o.variant);
  c.fusion_scale =
      o.fusion_scale == "dk" ? FusionScale::Dk : FusionScale::SqrtDk;
  c.use_positional = !o.no_positional;
  return c;
}

struct TrainOpts {
  double lr = 1e-3;
  double lr_decay = 1.0;
  std::size_t epochs = 10;
  std::size_t batch = 128;
  std::size_t threads = 1;
};

void add_train_opts(CLI::App* sub, TrainOpts& o) {
  sub->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--lr-decay", o.lr_decay, "Per-epoch learning rate factor")
      ->capture_default_str();
  sub->add_option("--epochs", o.epochs, "Training epochs")
      ->capture_default_str();
  sub->add_option("--batch", o.batch, "Mini-batch size")
      ->capture_default_str();
  sub->add_option("--threads", o.threads, "Worker threads per batch")
      ->capture_default_str();
}

TrainConfig to_train_config(const TrainOpts& o, std::uint64_t seed,
                            const std::string& interval) {
  TrainConfig c;
  c.lr = o.lr;
  c.lr_decay = o.lr_decay;
  c.epochs = o.epochs;
  c.batch_size = o.batch;
  c.threads = o.threads;
  c.seed = seed;
  if (!interval.empty()) {
    auto [lo, hi] = parse_interval(interval);
    c.mask_lo = lo;
    c.mask_hi = hi;
  }
  return c;
}

void write_snapshot(CLI::App& sub, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::path p = fs::path(out_dir) / "config_resolved.txt";
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error(p.string() + ": cannot open for writing");
  f << sub.config_to_str(true, false);
  if (!f) throw std::runtime_error(p.string() + ": write failed");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error(p.string() + ": cannot open for writing");
  return f;
}

void write_metrics_csv(const MetricReport& rep, const std::string& variant,
                       const std::string& interval, std::uint64_t seed,
                       const std::string& path) {
  std::ofstream f = open_out(path);
  f << "variant,interval,horizon,rmse,ade,fde,mr,seed\n";
  for (const auto& [h, rmse] : rep.rmse_at)
    f << variant << ',' << interval << ',' << format_double(h) << ','
      << format_double(rmse) << ',' << format_double(rep.ade) << ','
      << format_double(rep.fde) << ',' << format_double(rep.mr) << ',' << seed
      << '\n';
  if (!f) throw std::runtime_error(path + ": write failed");
}

const TrajectoryScene& find_scene(const SceneDataset& ds, long id) {
  if (ds.scenes.empty()) throw std::runtime_error("dataset has no scenes");
  if (id < 0) return ds.scenes.front();
  for (const TrajectoryScene& s : ds.scenes)
    if (s.scene_id == id) return s;
  throw std::runtime_error("scene " + std::to_string(id) +
                           " not found in the dataset");
}

Model load_model(const std::string& path) { return Model::load(path); }

/// Small random scene for gradient checking: smooth coordinates, every
/// vehicle missing a few steps so the observation machinery is exercised.
SceneView gradcheck_view(std::size_t len, std::size_t t_f,
                         std::size_t neighbors, std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x97adc3ccull));
  auto fill = [&](Tensor& m) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-5.0, 5.0);
  };
  TrajectoryScene scene;
  scene.scene_id = 1;
  scene.hz = 10.0;
  scene.target.vehicle_id = 0;
  scene.target.history = Tensor({len, 2});
  scene.target.observed.bits.assign(len, 1);
  fill(scene.target.history);
  scene.future = Tensor({t_f, 2});
  fill(scene.future);
  for (std::size_t k = 0; k < neighbors; ++k) {
    VehicleTrack nb;
    nb.vehicle_id = static_cast<int>(k) + 1;
    nb.history = Tensor({len, 2});
    nb.observed.bits.assign(len, 1);
    fill(nb.history);
    scene.neighbors.push_back(std::move(nb));
  }
  std::vector<SequenceMask> masks;
  for (std::size_t slot = 0; slot <= neighbors; ++slot)
    masks.push_back(gen_sequence_mask(len, 20.0, 40.0,
                                      mask_stream_seed(seed, 1, slot)));
  return make_view(scene, masks);
}

std::pair<SceneDataset, SceneDataset> split_dataset(const SceneDataset& ds) {
  std::size_t n = ds.scenes.size();
  if (n < 2)
    throw std::runtime_error("ablate: need at least 2 scenes to split");
  std::size_t n_train = std::max<std::size_t>(
      1, std::min<std::size_t>(n - 1, n * 4 / 5));
  SceneDataset tr, ev;
  tr.manifest = ds.manifest;
  ev.manifest = ds.manifest;
  tr.scenes.assign(ds.scenes.begin(), ds.scenes.begin() + n_train);
  ev.scenes.assign(ds.scenes.begin() + n_train, ds.scenes.end());
  tr.manifest.count = tr.scenes.size();
  tr.manifest.split = "train";
  ev.manifest.count = ev.scenes.size();
  ev.manifest.split = "eval";
  return {std::move(tr), std::move(ev)};
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Multi-scale trajectory prediction pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  SynthConfig sy;
  std::string synth_out;
  synth->set_config("--config");
  synth->add_option("--count", sy.count, "Scenes to generate")
      ->capture_default_str();
  synth->add_option("--t-h", sy.t_h, "History steps")->capture_default_str();
  synth->add_option("--t-f", sy.t_f, "Future steps")->capture_default_str();
  synth->add_option("--hz", sy.hz, "Sampling rate")->capture_default_str();
  synth->add_option("--noise", sy.noise_sigma, "Position noise sigma (m)")
      ->capture_default_str();
  synth->add_option("--mix", sy.mix, "Kinematic family weights")
      ->capture_default_str();
  synth->add_flag("--challenging", sy.challenging,
                  "Keep only scenes passing the challenge filter");
  synth->add_option("--split", sy.split, "Split label")->capture_default_str();
  synth->add_option("--seed", sy.seed, "RNG seed")->required();
  synth->add_option("--out", synth_out, "Output dataset directory")
      ->required();
  synth->callback([&] {
    SceneDataset ds = synth_generate(sy);
    write_dataset(ds, synth_out);
    write_snapshot(*synth, synth_out);
    std::cout << "wrote " << ds.scenes.size() << " scenes to " << synth_out
              << "\n";
  });

  // mask
  auto* mask = app.add_subcommand("mask", "Sample missing-value masks");
  std::string mask_data, mask_out, mask_interval = "60-90";
  std::uint64_t mask_seed = 0;
  mask->set_config("--config");
  mask->add_option("--data", mask_data, "Dataset directory")->required();
  mask->add_option("--interval", mask_interval,
                   "Missing percent interval lo-hi")
      ->capture_default_str();
  mask->add_option("--seed", mask_seed, "RNG seed")->required();
  mask->add_option("--out", mask_out, "Output directory")->required();
  mask->callback([&] {
    SceneDataset ds = read_dataset(mask_data);
    auto [lo, hi] = parse_interval(mask_interval);
    write_snapshot(*mask, mask_out);
    std::ofstream f = open_out(fs::path(mask_out) / "masks.csv");
    f << "scene_id,vehicle_id";
    for (std::size_t t = 0; t < ds.manifest.t_h; ++t) f << ",t" << t;
    f << "\n";
    for (const TrajectoryScene& s : ds.scenes) {
      auto row = [&](int vid, std::size_t slot) {
        SequenceMask m = gen_sequence_mask(
            ds.manifest.t_h, lo, hi, mask_stream_seed(mask_seed, s.scene_id,
                                                      slot));
        f << s.scene_id << ',' << vid << ',' << mask_csv_row(m) << "\n";
      };
      row(s.target.vehicle_id, 0);
      for (std::size_t k = 0; k < s.neighbors.size(); ++k)
        row(s.neighbors[k].vehicle_id, k + 1);
    }
    if (!f) throw std::runtime_error(mask_out + "/masks.csv: write failed");
    std::cout << "wrote masks for " << ds.scenes.size() << " scenes\n";
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  ModelOpts tr_model;
  TrainOpts tr_opts;
  std::string tr_data, tr_out, tr_interval;
  std::uint64_t tr_seed = 0;
  std::size_t tr_ckpt_every = 1;
  train_cmd->set_config("--config");
  train_cmd->add_option("--data", tr_data, "Dataset directory")->required();
  add_model_opts(train_cmd, tr_model);
  add_train_opts(train_cmd, tr_opts);
  train_cmd->add_option("--interval", tr_interval,
                        "Training missing interval lo-hi (empty = none)");
  train_cmd
      ->add_option("--checkpoint-every", tr_ckpt_every,
                   "Epochs between checkpoints (0 = final only)")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr_seed, "RNG seed")->required();
  train_cmd->add_option("--out", tr_out, "Output directory")->required();
  train_cmd->callback([&] {
    SceneDataset ds = read_dataset(tr_data);
    write_snapshot(*train_cmd, tr_out);
    ModelConfig mc = to_model_config(tr_model, ds.manifest.t_h,
                                     ds.manifest.t_f, ds.manifest.hz);
    Model model(mc, tr_seed);
    TrainConfig tc = to_train_config(tr_opts, tr_seed, tr_interval);
    tc.checkpoint_dir = (fs::path(tr_out) / "checkpoints").string();
    tc.checkpoint_every = tr_ckpt_every;
    TrainLog log = train(model, ds, tc, &std::cout);
    model.save((fs::path(tr_out) / "model.ckpt").string());
    write_loss_curve(log.epoch_loss,
                     (fs::path(tr_out) / "loss_curve.csv").string());
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a trained model");
  std::string ev_data, ev_model, ev_out, ev_interval;
  std::uint64_t ev_seed = 0;
  eval_cmd->set_config("--config");
  eval_cmd->add_option("--data", ev_data, "Dataset directory")->required();
  eval_cmd->add_option("--model", ev_model, "Checkpoint path")->required();
  eval_cmd->add_option("--interval", ev_interval,
                       "Eval missing interval lo-hi (empty = none)");
  eval_cmd->add_option("--seed", ev_seed, "RNG seed")->required();
  eval_cmd->add_option("--out", ev_out, "Output directory")->required();
  eval_cmd->callback([&] {
    SceneDataset ds = read_dataset(ev_data);
    Model model = load_model(ev_model);
    write_snapshot(*eval_cmd, ev_out);
    std::vector<std::vector<SequenceMask>> masks;
    std::string tag = "none";
    if (!ev_interval.empty()) {
      auto [lo, hi] = parse_interval(ev_interval);
      masks = fixed_eval_masks(ds, lo, hi, ev_seed);
      tag = interval_tag(lo, hi);
    }
    MetricReport rep = evaluate(model, ds, masks);
    write_metrics_csv(rep, to_string(model.config().variant), tag, ev_seed,
                      (fs::path(ev_out) / "metrics.csv").string());
    std::cout << "ade " << format_double(rep.ade) << " fde "
              << format_double(rep.fde) << " mr " << format_double(rep.mr)
              << " over " << rep.samples << " scenes\n";
  });

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Variant/interval study");
  ModelOpts ab_model;
  TrainOpts ab_opts;
  std::string ab_data, ab_out;
  std::vector<std::string> ab_variants = {"vtf", "mtf", "mtft"};
  std::vector<std::string> ab_intervals = {"0-30", "30-60", "60-90"};
  std::vector<std::uint64_t> ab_seeds;
  std::uint64_t ab_seed = 0;
  ablate->set_config("--config");
  ablate->add_option("--data", ab_data, "Dataset directory (split 80/20)")
      ->required();
  add_model_opts(ablate, ab_model);
  add_train_opts(ablate, ab_opts);
  ablate->add_option("--variants", ab_variants, "Variants to run")
      ->delimiter(',')
      ->capture_default_str();
  ablate->add_option("--intervals", ab_intervals, "Missing intervals lo-hi")
      ->delimiter(',')
      ->capture_default_str();
  ablate
      ->add_option("--seeds", ab_seeds,
                   "Training seeds (default: just --seed)")
      ->delimiter(',');
  ablate->add_option("--seed", ab_seed, "RNG seed")->required();
  ablate->add_option("--out", ab_out, "Output directory")->required();
  ablate->callback([&] {
    SceneDataset ds = read_dataset(ab_data);
    write_snapshot(*ablate, ab_out);
    auto [tr, ev] = split_dataset(ds);
    AblateConfig ac;
    ac.base = to_model_config(ab_model, ds.manifest.t_h, ds.manifest.t_f,
                              ds.manifest.hz);
    ac.train_cfg = to_train_config(ab_opts, ab_seed, "");
    for (const std::string& v : ab_variants)
      ac.variants.push_back(variant_from_string(v));
    for (const std::string& iv : ab_intervals)
      ac.intervals.push_back(parse_interval(iv));
    ac.seeds = ab_seeds.empty() ? std::vector<std::uint64_t>{ab_seed}
                                : ab_seeds;
    auto rows = run_ablation(tr, ev, ac, &std::cout,
                             (fs::path(ab_out) / "loss_curves").string());
    write_ablation_csv(rows, (fs::path(ab_out) / "ablation.csv").string());
    std::cout << "wrote " << rows.size() << " rows to " << ab_out
              << "/ablation.csv\n";
  });

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "Finite-difference gradient check");
  std::size_t gc_d_model = 8, gc_len = 6, gc_t_f = 4, gc_scales = 3,
              gc_layers = 2, gc_neighbors = 1, gc_max_elements = 0;
  double gc_tol = 1e-4;
  std::uint64_t gc_seed = 0;
  std::string gc_out;
  gc->set_config("--config");
  gc->add_option("--d-model", gc_d_model, "Hidden width")
      ->capture_default_str();
  gc->add_option("--len", gc_len, "History steps")->capture_default_str();
  gc->add_option("--t-f", gc_t_f, "Future steps")->capture_default_str();
  gc->add_option("--scales", gc_scales, "Attention scales")
      ->capture_default_str();
  gc->add_option("--layers", gc_layers, "Encoder depth")
      ->capture_default_str();
  gc->add_option("--neighbors", gc_neighbors, "Neighbor vehicles")
      ->capture_default_str();
  gc->add_option("--max-elements", gc_max_elements,
                 "Subsample this many coordinates (0 = all)")
      ->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "Failure threshold")
      ->capture_default_str();
  gc->add_option("--seed", gc_seed, "RNG seed")->required();
  gc->add_option("--out", gc_out, "Optional report directory");
  gc->callback([&] {
    ModelConfig mc;
    mc.t_h = gc_len;
    mc.t_f = gc_t_f;
    mc.n_scales = gc_scales;
    mc.layers = gc_layers;
    mc.d_model = gc_d_model;
    mc.variant = Variant::MTFT;
    mc.hz = 10.0;
    Model model(mc, gc_seed);
    SceneView view = gradcheck_view(gc_len, gc_t_f, gc_neighbors, gc_seed);
    auto build = [&] {
      return trajectory_loss(model.predict(view), view.future);
    };
    GradCheckReport rep =
        gradcheck(model.store(), build, gc_seed, gc_max_elements);
    std::string line = "gradcheck max_rel_err " +
                       format_double(rep.max_rel_err) + " over " +
                       std::to_string(rep.checked) + " elements, worst " +
                       rep.worst_param;
    std::cout << line << "\n";
    if (!gc_out.empty()) {
      write_snapshot(*gc, gc_out);
      std::ofstream f = open_out(fs::path(gc_out) / "report.txt");
      f << line << "\n";
    }
    if (rep.max_rel_err > gc_tol)
      throw std::runtime_error("gradcheck: max relative error " +
                               format_double(rep.max_rel_err) +
                               " exceeds tolerance " + format_double(gc_tol));
  });

  // dump-attention
  auto* da = app.add_subcommand("dump-attention",
                                "Write per-head attention matrices");
  std::string da_data, da_model, da_out, da_interval;
  long da_scene = -1;
  std::uint64_t da_seed = 0;
  da->set_config("--config");
  da->add_option("--data", da_data, "Dataset directory")->required();
  da->add_option("--model", da_model, "Checkpoint path")->required();
  da->add_option("--scene", da_scene, "Scene id (default: first)");
  da->add_option("--interval", da_interval,
                 "Missing interval lo-hi (empty = none)");
  da->add_option("--seed", da_seed, "RNG seed")->required();
  da->add_option("--out", da_out, "Output directory")->required();
  da->callback([&] {
    SceneDataset ds = read_dataset(da_data);
    Model model = load_model(da_model);
    const TrajectoryScene& scene = find_scene(ds, da_scene);
    std::vector<SequenceMask> masks;
    if (!da_interval.empty()) {
      auto [lo, hi] = parse_interval(da_interval);
      masks = sample_scene_masks(scene, lo, hi, da_seed);
    }
    SceneView view = make_view(scene, masks);
    SceneTrace trace;
    model.predict(view, &trace);
    write_snapshot(*da, da_out);
    std::ofstream f = open_out(fs::path(da_out) / "attention.csv");
    f << "vehicle,layer,head,row,col,weight\n";
    for (const auto& e : trace.attention)
      for (std::size_t i = 0; i < e.weights.dim(0); ++i)
        for (std::size_t j = 0; j < e.weights.dim(1); ++j)
          f << e.vehicle << ',' << e.layer << ',' << e.head << ',' << i << ','
            << j << ',' << format_double(e.weights(i, j)) << "\n";
    if (!f) throw std::runtime_error(da_out + "/attention.csv: write failed");
    std::cout << "wrote " << trace.attention.size()
              << " attention matrices\n";
  });

  // dump-continuity
  auto* dc = app.add_subcommand(
      "dump-continuity", "Write across-time weights and fusion attention");
  std::string dc_data, dc_model, dc_out, dc_interval;
  long dc_scene = -1;
  std::uint64_t dc_seed = 0;
  dc->set_config("--config");
  dc->add_option("--data", dc_data, "Dataset directory")->required();
  dc->add_option("--model", dc_model, "Checkpoint path")->required();
  dc->add_option("--scene", dc_scene, "Scene id (default: first)");
  dc->add_option("--interval", dc_interval,
                 "Missing interval lo-hi (empty = none)");
  dc->add_option("--seed", dc_seed, "RNG seed")->required();
  dc->add_option("--out", dc_out, "Output directory")->required();
  dc->callback([&] {
    SceneDataset ds = read_dataset(dc_data);
    Model model = load_model(dc_model);
    if (model.config().variant != Variant::MTFT)
      throw std::runtime_error("dump-continuity: variant '" +
                               to_string(model.config().variant) +
                               "' has no fusion stage");
    const TrajectoryScene& scene = find_scene(ds, dc_scene);
    std::vector<SequenceMask> masks;
    if (!dc_interval.empty()) {
      auto [lo, hi] = parse_interval(dc_interval);
      masks = sample_scene_masks(scene, lo, hi, dc_seed);
    }
    SceneView view = make_view(scene, masks);
    SceneTrace trace;
    model.predict(view, &trace);
    write_snapshot(*dc, dc_out);

    std::ofstream fw = open_out(fs::path(dc_out) / "across_weights.csv");
    fw << "vehicle,scale,step,weight\n";
    std::ofstream fc = open_out(fs::path(dc_out) / "continuity.csv");
    fc << "vehicle,scale,dim,value\n";
    std::ofstream ff = open_out(fs::path(dc_out) / "fusion_attention.csv");
    ff << "vehicle,row,col,weight\n";
    for (std::size_t v = 0; v < trace.crmf.size(); ++v) {
      const CrmfTrace& ct = trace.crmf[v];
      for (std::size_t s = 0; s < ct.across_weights.size(); ++s)
        for (std::size_t t = 0; t < ct.across_weights[s].dim(1); ++t)
          fw << v << ',' << s + 1 << ',' << t << ','
             << format_double(ct.across_weights[s](0, t)) << "\n";
      for (std::size_t s = 0; s < ct.continuity.size(); ++s)
        for (std::size_t d = 0; d < ct.continuity[s].dim(1); ++d)
          fc << v << ',' << s + 1 << ',' << d << ','
             << format_double(ct.continuity[s](0, d)) << "\n";
      for (std::size_t i = 0; i < ct.fusion_attention.dim(0); ++i)
        for (std::size_t j = 0; j < ct.fusion_attention.dim(1); ++j)
          ff << v << ',' << i << ',' << j << ','
             << format_double(ct.fusion_attention(i, j)) << "\n";
    }
    std::cout << "wrote continuity dumps for " << trace.crmf.size()
              << " vehicles\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mtft
