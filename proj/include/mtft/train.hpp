#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mtft/data.hpp"
#include "mtft/masking.hpp"
#include "mtft/metrics.hpp"
#include "mtft/model.hpp"

namespace mtft {

/// Mean over future steps of the squared Euclidean error.
Var trajectory_loss(const Var& pred, const Tensor& truth);
double trajectory_loss_value(const Tensor& pred, const Tensor& truth);

/// One Adam update over every parameter, consuming (and then clearing) the
/// accumulated gradients.
void adam_step(ParameterStore& ps, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

/// Seed of the mask stream for one vehicle slot in one scene. Depends only
/// on (run seed, scene id, slot), so masks are identical across batch
/// layouts, thread counts and model variants.
std::uint64_t mask_stream_seed(std::uint64_t run_seed, long scene_id,
                               std::size_t vehicle_slot);

/// One sampled mask per vehicle (target first) from the (lo, hi] percent
/// interval. lo == hi == 0 returns an empty vector: dataset masks only.
std::vector<SequenceMask> sample_scene_masks(const TrajectoryScene& scene,
                                             double lo_pct, double hi_pct,
                                             std::uint64_t run_seed);

struct TrainConfig {
  double lr = 1e-3;
  double lr_decay = 1.0;  // per-epoch multiplier on the learning rate
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  double mask_lo = 0.0;  // missing percent interval (lo, hi]
  double mask_hi = 0.0;
  std::size_t threads = 1;
  std::string checkpoint_dir;        // empty -> no checkpoints
  std::size_t checkpoint_every = 1;  // epochs between saves; 0 -> final only
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean per-scene loss
  std::vector<std::string> checkpoints;
};

/// Adam over shuffled mini-batches with masks resampled every epoch.
/// Per-scene gradients are averaged over the batch; with `threads` > 1 the
/// batch is split into contiguous chunks whose gradient sinks are reduced
/// in a fixed order, so results are deterministic for a given thread count.
/// Aborts on a non-finite batch loss, naming the epoch and batch.
TrainLog train(Model& model, const SceneDataset& data, const TrainConfig& cfg,
               std::ostream* progress = nullptr);

void write_loss_curve(const std::vector<double>& epoch_loss,
                      const std::string& path);

/// Frozen per-scene masks so different models get paired missing patterns.
std::vector<std::vector<SequenceMask>> fixed_eval_masks(
    const SceneDataset& data, double lo_pct, double hi_pct,
    std::uint64_t seed);

/// Runs the model over every scene (empty `masks` = dataset masks only) and
/// scores the predictions.
MetricReport evaluate(const Model& model, const SceneDataset& data,
                      const std::vector<std::vector<SequenceMask>>& masks,
                      const std::vector<double>& horizons = {});

std::pair<double, double> parse_interval(const std::string& tag);  // "60-90"
std::string interval_tag(double lo, double hi);

struct AblationRow {
  std::string variant;
  std::string interval;
  double horizon = 0.0;  // seconds; the final configured horizon
  double rmse = 0.0;     // at that horizon
  double ade = 0.0, fde = 0.0, mr = 0.0;
  std::uint64_t seed = 0;
};

struct AblateConfig {
  ModelConfig base;      // variant replaced per run
  TrainConfig train_cfg; // seed and mask interval replaced per run
  std::vector<Variant> variants;
  std::vector<std::pair<double, double>> intervals;
  std::vector<std::uint64_t> seeds;
};

/// Trains and scores every variant x interval x seed combination. Mask
/// streams depend on the seed but not the variant, so comparisons within a
/// seed are paired. One row per run; a non-empty loss_curve_dir gets one
/// loss-curve CSV per run.
std::vector<AblationRow> run_ablation(const SceneDataset& train_data,
                                      const SceneDataset& eval_data,
                                      const AblateConfig& cfg,
                                      std::ostream* progress = nullptr,
                                      const std::string& loss_curve_dir = "");

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::string& path);

}  // namespace mtft
