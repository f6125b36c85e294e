#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtft/rng.hpp"
#include "mtft/train.hpp"
#include "oracles.hpp"

using namespace mtft;

namespace {

SceneDataset tiny_dataset(std::size_t count, std::size_t t_h, std::size_t t_f,
                          std::uint64_t seed) {
  SynthConfig cfg;
  cfg.count = count;
  cfg.t_h = t_h;
  cfg.t_f = t_f;
  cfg.seed = seed;
  cfg.noise_sigma = 0.05;
  return synth_generate(cfg);
}

ModelConfig tiny_model(std::size_t t_h, std::size_t t_f, Variant variant) {
  ModelConfig mc;
  mc.t_h = t_h;
  mc.t_f = t_f;
  mc.n_scales = 3;
  mc.layers = 2;
  mc.d_model = 12;
  mc.variant = variant;
  return mc;
}

}  // namespace

TEST_CASE("trajectory loss fixtures") {
  Tensor truth = Tensor::matrix({{3, 4}});
  CHECK(trajectory_loss_value(truth, truth) == 0.0);
  Tensor zero = Tensor::matrix({{0, 0}});
  CHECK(trajectory_loss_value(zero, truth) == 25.0);

  Tensor pred2 = Tensor::matrix({{0, 0}, {0, 0}});
  Tensor truth2 = Tensor::matrix({{0, 0}, {3, 4}});
  CHECK(trajectory_loss_value(pred2, truth2) == 12.5);

  Var graph = trajectory_loss(constant(pred2), truth2);
  CHECK(graph.value()[0] == 12.5);
  CHECK_THROWS_AS(trajectory_loss_value(pred2, truth), std::invalid_argument);
}

TEST_CASE("loss gradient is the scaled residual") {
  ParameterStore ps(3);
  Parameter& p = ps.create("p", {2, 2}, 2);
  p.value = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor truth = Tensor::matrix({{0, 0}, {0, 0}});
  backward(trajectory_loss(param_leaf(p), truth));
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(p.grad[i] == doctest::Approx(p.value[i]).epsilon(1e-12));  // 2r/T
}

TEST_CASE("metric fixtures") {
  std::vector<Tensor> truth{Tensor::matrix({{1, 1}, {2, 2}})};
  MetricReport perfect = compute_metrics(truth, truth, 10.0);
  CHECK(perfect.ade == 0.0);
  CHECK(perfect.fde == 0.0);
  CHECK(perfect.mr == 0.0);
  CHECK(perfect.rmse_all == 0.0);
  CHECK(perfect.samples == 1);
  REQUIRE(perfect.rmse_at.size() == 1);  // 2 steps at 10 Hz: final step only
  CHECK(perfect.rmse_at.begin()->first == doctest::Approx(0.2));

  std::vector<Tensor> pred{Tensor::matrix({{1, 1}, {5, 6}})};
  MetricReport off = compute_metrics(pred, truth, 10.0);
  CHECK(off.fde == 5.0);
  CHECK(off.mr == 1.0);
  CHECK(off.ade == 2.5);
  CHECK(off.rmse_all == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));

  // Miss rate counts strictly-greater-than-2 m endpoints.
  std::vector<Tensor> t3(3, Tensor::matrix({{0, 0}}));
  std::vector<Tensor> p3{Tensor::matrix({{1.5, 0}}), Tensor::matrix({{2.0, 0}}),
                         Tensor::matrix({{0, 5.0}})};
  MetricReport mr3 = compute_metrics(p3, t3, 10.0);
  CHECK(mr3.mr == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(compute_metrics({}, {}, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(pred, {}, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(pred, truth, 0.0), std::invalid_argument);
}

TEST_CASE("horizon grid covers whole seconds") {
  CHECK(default_horizons(30, 10.0) == std::vector<double>{1, 2, 3});
  CHECK(default_horizons(50, 10.0) == std::vector<double>{1, 2, 3, 4, 5});
  CHECK(default_horizons(4, 10.0) == std::vector<double>{0.4});

  std::vector<Tensor> truth{Tensor::matrix({{0, 0}, {0, 0}, {0, 0}})};
  std::vector<Tensor> pred{Tensor::matrix({{3, 0}, {1, 0}, {2, 0}})};
  MetricReport rep = compute_metrics(pred, truth, 1.0);
  REQUIRE(rep.rmse_at.size() == 3);
  CHECK(rep.rmse_at.at(1.0) == 3.0);
  CHECK(rep.rmse_at.at(2.0) == 1.0);
  CHECK(rep.rmse_at.at(3.0) == 2.0);
  CHECK(rep.rmse_all ==
        doctest::Approx(std::sqrt(14.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("rmse matches a naive recompute on random data") {
  Rng rng(8);
  std::vector<Tensor> pred, truth;
  for (int i = 0; i < 9; ++i) {
    Tensor p({12, 2}), t({12, 2});
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = rng.uniform(-10, 10);
      t[j] = rng.uniform(-10, 10);
    }
    pred.push_back(p);
    truth.push_back(t);
  }
  MetricReport rep = compute_metrics(pred, truth, 4.0);
  double acc = 0.0, ade = 0.0, fde = 0.0;
  int miss = 0;
  for (int i = 0; i < 9; ++i) {
    for (std::size_t t = 0; t < 12; ++t) {
      double dx = pred[i](t, 0) - truth[i](t, 0);
      double dy = pred[i](t, 1) - truth[i](t, 1);
      acc += dx * dx + dy * dy;
      ade += std::sqrt(dx * dx + dy * dy);
    }
    double fx = pred[i](11, 0) - truth[i](11, 0);
    double fy = pred[i](11, 1) - truth[i](11, 1);
    fde += std::hypot(fx, fy);
    if (std::hypot(fx, fy) > 2.0) ++miss;
  }
  CHECK(rep.rmse_all == doctest::Approx(std::sqrt(acc / 108)).epsilon(1e-12));
  CHECK(rep.ade == doctest::Approx(ade / 108).epsilon(1e-12));
  CHECK(rep.fde == doctest::Approx(fde / 9).epsilon(1e-12));
  CHECK(rep.mr == doctest::Approx(miss / 9.0).epsilon(1e-12));
  // Step for horizon h is round(h*hz) - 1.
  CHECK(rep.rmse_at.count(3.0) == 1);  // step 11 at 4 Hz
}

TEST_CASE("adam with zero learning rate is a no-op") {
  ParameterStore ps(4);
  Parameter& p = ps.create("p", {3}, 1);
  Tensor before = p.value;
  p.grad = Tensor::vector({1, -2, 3});
  adam_step(ps, 0.0);
  CHECK(max_abs_diff(p.value, before) == 0.0);
  CHECK(max_abs_diff(p.grad, Tensor::zeros({3})) == 0.0);  // consumed
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  ParameterStore ps(5);
  Parameter& p = ps.create("p", {2}, 1);
  Tensor before = p.value;
  p.grad = Tensor::vector({10, -0.3});
  adam_step(ps, 0.01);
  // First-step Adam update is lr * g / (|g| + eps'), essentially lr * sign.
  CHECK(p.value[0] == doctest::Approx(before[0] - 0.01).epsilon(1e-6));
  CHECK(p.value[1] == doctest::Approx(before[1] + 0.01).epsilon(1e-6));
  CHECK(p.adam_step == 1);
}

TEST_CASE("mask streams depend on scene and slot, not layout") {
  std::uint64_t s1 = mask_stream_seed(7, 42, 0);
  CHECK(s1 == mask_stream_seed(7, 42, 0));
  CHECK(s1 != mask_stream_seed(7, 42, 1));
  CHECK(s1 != mask_stream_seed(7, 43, 0));
  CHECK(s1 != mask_stream_seed(8, 42, 0));
}

TEST_CASE("sampled scene masks are per-vehicle and reproducible") {
  SceneDataset ds = tiny_dataset(2, 8, 4, 21);
  const TrajectoryScene& scene = ds.scenes[0];
  auto none = sample_scene_masks(scene, 0, 0, 5);
  CHECK(none.empty());
  auto masks = sample_scene_masks(scene, 30, 60, 5);
  REQUIRE(masks.size() == 1 + scene.neighbors.size());
  for (const SequenceMask& m : masks) {
    CHECK(m.len() == 8);
    int missing = 8 - m.observed_count();
    CHECK(missing >= 3);
    CHECK(missing <= 4);
  }
  auto again = sample_scene_masks(scene, 30, 60, 5);
  for (std::size_t i = 0; i < masks.size(); ++i)
    CHECK(masks[i].bits == again[i].bits);
}

TEST_CASE("fixed eval masks pair across models") {
  SceneDataset ds = tiny_dataset(3, 8, 4, 22);
  auto a = fixed_eval_masks(ds, 30, 60, 9);
  auto b = fixed_eval_masks(ds, 30, 60, 9);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(a[i].size() == 1 + ds.scenes[i].neighbors.size());
    for (std::size_t v = 0; v < a[i].size(); ++v)
      CHECK(a[i][v].bits == b[i][v].bits);
  }
  CHECK(fixed_eval_masks(ds, 0, 0, 9).front().empty());
}

TEST_CASE("training reduces the loss and is deterministic") {
  SceneDataset ds = tiny_dataset(12, 8, 4, 31);
  ModelConfig mc = tiny_model(8, 4, Variant::MTFT);
  TrainConfig tc;
  tc.epochs = 8;
  tc.lr = 2e-3;
  tc.batch_size = 6;
  tc.seed = 3;

  Model m1(mc, 77);
  std::ostringstream progress;
  TrainLog log1 = train(m1, ds, tc, &progress);
  REQUIRE(log1.epoch_loss.size() == 8);
  CHECK(log1.epoch_loss.back() < log1.epoch_loss.front());
  CHECK(progress.str().find("epoch 1/8") != std::string::npos);

  Model m2(mc, 77);
  TrainLog log2 = train(m2, ds, tc);
  for (std::size_t e = 0; e < 8; ++e)
    CHECK(log1.epoch_loss[e] == log2.epoch_loss[e]);
  for (const auto& name : m1.store().all())
    CHECK(max_abs_diff(name->value, m2.store().at(name->name).value) == 0.0);
}

TEST_CASE("training with sampled masks stays finite and logs checkpoints") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mtft_train_ckpt";
  fs::remove_all(dir);
  SceneDataset ds = tiny_dataset(8, 8, 4, 32);
  ModelConfig mc = tiny_model(8, 4, Variant::MTFT);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 5;
  tc.mask_lo = 30;
  tc.mask_hi = 60;
  tc.checkpoint_dir = dir.string();
  tc.checkpoint_every = 2;

  Model m(mc, 9);
  TrainLog log = train(m, ds, tc);
  for (double l : log.epoch_loss) CHECK(std::isfinite(l));
  REQUIRE(log.checkpoints.size() == 2);  // epochs 2 and 3 (final)
  for (const std::string& p : log.checkpoints) CHECK(fs::exists(p));
  Model back = Model::load(log.checkpoints.back());
  CHECK(back.config().d_model == mc.d_model);
  fs::remove_all(dir);
}

TEST_CASE("multi-threaded training matches single-threaded") {
  SceneDataset ds = tiny_dataset(10, 8, 4, 33);
  ModelConfig mc = tiny_model(8, 4, Variant::MTF);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 5;
  tc.seed = 7;
  tc.mask_lo = 0;
  tc.mask_hi = 30;

  Model a(mc, 11), b(mc, 11);
  tc.threads = 1;
  TrainLog la = train(a, ds, tc);
  tc.threads = 3;
  TrainLog lb = train(b, ds, tc);
  for (std::size_t e = 0; e < la.epoch_loss.size(); ++e)
    CHECK(la.epoch_loss[e] == doctest::Approx(lb.epoch_loss[e]).epsilon(1e-9));
  for (const auto& p : a.store().all())
    CHECK(max_abs_diff(p->value, b.store().at(p->name).value) < 1e-9);
}

TEST_CASE("training validates its inputs") {
  SceneDataset ds = tiny_dataset(4, 8, 4, 34);
  ModelConfig mc = tiny_model(8, 4, Variant::MTFT);
  Model m(mc, 1);
  TrainConfig tc;
  tc.epochs = 0;
  CHECK_THROWS_AS(train(m, ds, tc), std::invalid_argument);
  tc.epochs = 1;
  tc.mask_lo = 50;
  tc.mask_hi = 20;
  CHECK_THROWS_AS(train(m, ds, tc), std::invalid_argument);
  tc.mask_lo = tc.mask_hi = 0;
  SceneDataset empty;
  CHECK_THROWS_AS(train(m, empty, tc), std::invalid_argument);
  SceneDataset wrong = tiny_dataset(4, 10, 4, 34);
  CHECK_THROWS_WITH_AS(train(m, wrong, tc), doctest::Contains("horizons"),
                       std::invalid_argument);
}

TEST_CASE("evaluation scores every scene against the ground truth") {
  SceneDataset ds = tiny_dataset(6, 8, 4, 35);
  ModelConfig mc = tiny_model(8, 4, Variant::VTF);
  Model m(mc, 13);
  MetricReport rep = evaluate(m, ds, {});
  CHECK(rep.samples == 6);
  CHECK(rep.ade > 0.0);
  CHECK(std::isfinite(rep.rmse_all));
  MetricReport rep2 = evaluate(m, ds, fixed_eval_masks(ds, 30, 60, 2));
  CHECK(rep2.samples == 6);
  CHECK(rep2.ade != rep.ade);
}

TEST_CASE("interval tags round-trip") {
  auto [lo, hi] = parse_interval("60-90");
  CHECK(lo == 60.0);
  CHECK(hi == 90.0);
  CHECK(interval_tag(60, 90) == "60-90");
  CHECK(interval_tag(0, 30) == "0-30");
  auto [l2, h2] = parse_interval(interval_tag(30.5, 60.25));
  CHECK(l2 == 30.5);
  CHECK(h2 == 60.25);
  CHECK_THROWS_AS(parse_interval("banana"), std::invalid_argument);
  CHECK_THROWS_AS(parse_interval("60"), std::invalid_argument);
}

TEST_CASE("ablation emits one row per variant x interval x seed") {
  SceneDataset train_ds = tiny_dataset(6, 8, 4, 36);
  SceneDataset eval_ds = tiny_dataset(3, 8, 4, 37);
  AblateConfig ac;
  ac.base = tiny_model(8, 4, Variant::MTFT);
  ac.train_cfg.epochs = 2;
  ac.train_cfg.batch_size = 6;
  ac.variants = {Variant::VTF, Variant::MTFT};
  ac.intervals = {{0, 30}, {30, 60}};
  ac.seeds = {1, 2};

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mtft_ablate_curves";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream progress;
  auto rows = run_ablation(train_ds, eval_ds, ac, &progress, dir.string());
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].variant == "vtf");
  CHECK(rows[0].interval == "0-30");
  CHECK(rows[0].seed == 1);
  CHECK(rows[1].seed == 2);
  CHECK(rows[2].interval == "30-60");
  CHECK(rows[4].variant == "mtft");
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.rmse));
    CHECK(r.horizon == doctest::Approx(0.4));  // 4 steps at 10 Hz
    CHECK(fs::exists(dir / ("loss_" + r.variant + "_" + r.interval + "_s" +
                            std::to_string(r.seed) + ".csv")));
  }

  // Same seed + interval = same eval masks, so paired rows are comparable.
  fs::path csv = dir / "rows.csv";
  write_ablation_csv(rows, csv.string());
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "variant,interval,horizon,rmse,ade,fde,mr,seed");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++lines;
  CHECK(lines == 8);
  fs::remove_all(dir);
}

TEST_CASE("loss curves are written as epoch rows") {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / "mtft_loss_curve.csv";
  write_loss_curve({0.5, 0.25}, p.string());
  std::ifstream in(p);
  std::string l0, l1, l2;
  std::getline(in, l0);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l0 == "epoch,mean_loss");
  CHECK(l1 == "1,0.5");
  CHECK(l2 == "2,0.25");
  fs::remove(p);
}
