#include "mtft/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "mtft/rng.hpp"

namespace fs = std::filesystem;

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

void check_interval(double lo, double hi) {
  if (lo == 0.0 && hi == 0.0) return;
  if (!(0.0 <= lo && lo < hi && hi <= 90.0))
    fail("missing interval must satisfy 0 <= lo < hi <= 90, got (" +
         format_double(lo) + ", " + format_double(hi) + "]");
}

}  // namespace

Var trajectory_loss(const Var& pred, const Tensor& truth) {
  if (pred.shape() != truth.shape())
    fail("trajectory_loss: prediction shape " + pred.value().shape_str() +
         " does not match truth " + truth.shape_str());
  std::size_t t_f = truth.dim(0);
  Var sq = sum_all(square(sub(pred, constant(truth))));
  return scale(sq, 1.0 / static_cast<double>(t_f));
}

double trajectory_loss_value(const Tensor& pred, const Tensor& truth) {
  if (!pred.same_shape(truth))
    fail("trajectory_loss: prediction shape " + pred.shape_str() +
         " does not match truth " + truth.shape_str());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - truth[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.dim(0));
}

void adam_step(ParameterStore& ps, double lr, double beta1, double beta2,
               double eps) {
  for (const auto& up : ps.all()) {
    Parameter& p = *up;
    ++p.adam_step;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(p.adam_step));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(p.adam_step));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad[i];
      p.adam_m[i] = beta1 * p.adam_m[i] + (1.0 - beta1) * g;
      p.adam_v[i] = beta2 * p.adam_v[i] + (1.0 - beta2) * g * g;
      double mhat = p.adam_m[i] / c1;
      double vhat = p.adam_v[i] / c2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      p.grad[i] = 0.0;
    }
  }
}

std::uint64_t mask_stream_seed(std::uint64_t run_seed, long scene_id,
                               std::size_t vehicle_slot) {
  return Rng::mix(Rng::mix(run_seed, static_cast<std::uint64_t>(scene_id)),
                  static_cast<std::uint64_t>(vehicle_slot) + 1);
}

std::vector<SequenceMask> sample_scene_masks(const TrajectoryScene& scene,
                                             double lo_pct, double hi_pct,
                                             std::uint64_t run_seed) {
  if (lo_pct == 0.0 && hi_pct == 0.0) return {};
  std::vector<SequenceMask> out;
  std::size_t slots = 1 + scene.neighbors.size();
  std::size_t len = scene.target.observed.len();
  out.reserve(slots);
  for (std::size_t slot = 0; slot < slots; ++slot)
    out.push_back(gen_sequence_mask(
        len, lo_pct, hi_pct, mask_stream_seed(run_seed, scene.scene_id, slot)));
  return out;
}

TrainLog train(Model& model, const SceneDataset& data, const TrainConfig& cfg,
               std::ostream* progress) {
  if (data.scenes.empty()) fail("train: dataset is empty");
  if (cfg.epochs < 1) fail("train: epochs must be >= 1");
  if (cfg.batch_size < 1) fail("train: batch_size must be >= 1");
  if (cfg.threads < 1) fail("train: threads must be >= 1");
  if (cfg.lr < 0.0) fail("train: learning rate must be >= 0");
  if (!(cfg.lr_decay > 0.0) || cfg.lr_decay > 1.0)
    fail("train: lr_decay must be in (0, 1]");
  check_interval(cfg.mask_lo, cfg.mask_hi);
  const ModelConfig& mc = model.config();
  if (data.manifest.t_h != mc.t_h || data.manifest.t_f != mc.t_f)
    fail("train: dataset horizons (t_h=" + std::to_string(data.manifest.t_h) +
         ", t_f=" + std::to_string(data.manifest.t_f) +
         ") do not match the model (t_h=" + std::to_string(mc.t_h) +
         ", t_f=" + std::to_string(mc.t_f) + ")");

  TrainLog log;
  if (!cfg.checkpoint_dir.empty()) fs::create_directories(cfg.checkpoint_dir);

  std::size_t n = data.scenes.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double lr = cfg.lr;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::uint64_t run_seed = Rng::mix(cfg.seed, epoch + 1);
    Rng shuffle_rng(Rng::mix(run_seed, 0x5ceed0f5u));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      std::size_t count = std::min(cfg.batch_size, n - start);
      std::size_t workers = std::min(cfg.threads, count);
      std::vector<std::vector<Tensor>> sinks(workers);
      std::vector<double> losses(workers, 0.0);
      std::vector<std::exception_ptr> errors(workers);

      auto work = [&](std::size_t w) {
        try {
          std::size_t chunk = (count + workers - 1) / workers;
          std::size_t begin = start + w * chunk;
          std::size_t end = std::min(begin + chunk, start + count);
          for (std::size_t k = begin; k < end; ++k) {
            const TrajectoryScene& scene = data.scenes[order[k]];
            SceneView view = make_view(
                scene, sample_scene_masks(scene, cfg.mask_lo, cfg.mask_hi,
                                          run_seed));
            Var loss = trajectory_loss(model.predict(view), view.future);
            losses[w] += loss.value()[0];
            backward(scale(loss, 1.0 / static_cast<double>(count)),
                     &sinks[w]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      };

      if (workers == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
          pool.emplace_back(work, w);
        for (std::thread& t : pool) t.join();
      }
      for (std::size_t w = 0; w < workers; ++w)
        if (errors[w]) std::rethrow_exception(errors[w]);

      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error(
            "train: non-finite loss at epoch " + std::to_string(epoch + 1) +
            ", batch " + std::to_string(batch_index + 1));
      epoch_loss += batch_loss;

      const auto& params = model.store().all();
      for (std::size_t w = 0; w < workers; ++w) {
        for (std::size_t i = 0; i < sinks[w].size(); ++i) {
          if (sinks[w][i].size() == 0) continue;
          Tensor& g = params[i]->grad;
          for (std::size_t j = 0; j < g.size(); ++j) g[j] += sinks[w][i][j];
        }
      }
      adam_step(model.store(), lr);
      ++batch_index;
    }

    double mean_loss = epoch_loss / static_cast<double>(n);
    log.epoch_loss.push_back(mean_loss);
    if (progress)
      *progress << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss "
                << format_double(mean_loss) << "\n";

    if (!cfg.checkpoint_dir.empty()) {
      bool due = cfg.checkpoint_every > 0 &&
                 (epoch + 1) % cfg.checkpoint_every == 0;
      if (due || epoch + 1 == cfg.epochs) {
        std::string path = (fs::path(cfg.checkpoint_dir) /
                            ("epoch_" + std::to_string(epoch + 1) + ".ckpt"))
                               .string();
        model.save(path);
        log.checkpoints.push_back(path);
      }
    }
    lr *= cfg.lr_decay;
  }
  return log;
}

void write_loss_curve(const std::vector<double>& epoch_loss,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "epoch,mean_loss\n";
  for (std::size_t i = 0; i < epoch_loss.size(); ++i)
    out << i + 1 << ',' << format_double(epoch_loss[i]) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<std::vector<SequenceMask>> fixed_eval_masks(
    const SceneDataset& data, double lo_pct, double hi_pct,
    std::uint64_t seed) {
  check_interval(lo_pct, hi_pct);
  std::vector<std::vector<SequenceMask>> out;
  out.reserve(data.scenes.size());
  for (const TrajectoryScene& scene : data.scenes)
    out.push_back(sample_scene_masks(scene, lo_pct, hi_pct, seed));
  return out;
}

MetricReport evaluate(const Model& model, const SceneDataset& data,
                      const std::vector<std::vector<SequenceMask>>& masks,
                      const std::vector<double>& horizons) {
  if (data.scenes.empty()) fail("evaluate: dataset is empty");
  if (!masks.empty() && masks.size() != data.scenes.size())
    fail("evaluate: one mask set per scene required");
  std::vector<Tensor> preds, truths;
  preds.reserve(data.scenes.size());
  truths.reserve(data.scenes.size());
  static const std::vector<SequenceMask> none;
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    SceneView view = make_view(data.scenes[i], masks.empty() ? none : masks[i]);
    preds.push_back(model.predict(view).value());
    truths.push_back(view.future);
  }
  return compute_metrics(preds, truths, data.manifest.hz, horizons);
}

std::pair<double, double> parse_interval(const std::string& tag) {
  auto dash = tag.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 >= tag.size())
    fail("interval '" + tag + "' must look like lo-hi, e.g. 60-90");
  double lo, hi;
  try {
    lo = std::stod(tag.substr(0, dash));
    hi = std::stod(tag.substr(dash + 1));
  } catch (const std::exception&) {
    fail("interval '" + tag + "' must look like lo-hi, e.g. 60-90");
  }
  check_interval(lo, hi);
  return {lo, hi};
}

std::string interval_tag(double lo, double hi) {
  return format_double(lo) + "-" + format_double(hi);
}

std::vector<AblationRow> run_ablation(const SceneDataset& train_data,
                                      const SceneDataset& eval_data,
                                      const AblateConfig& cfg,
                                      std::ostream* progress,
                                      const std::string& loss_curve_dir) {
  if (cfg.variants.empty()) fail("ablate: no variants");
  if (cfg.intervals.empty()) fail("ablate: no intervals");
  if (cfg.seeds.empty()) fail("ablate: no seeds");
  if (!loss_curve_dir.empty()) fs::create_directories(loss_curve_dir);

  std::vector<AblationRow> rows;
  for (Variant variant : cfg.variants) {
    for (const auto& [lo, hi] : cfg.intervals) {
      for (std::uint64_t seed : cfg.seeds) {
        ModelConfig mc = cfg.base;
        mc.variant = variant;
        Model model(mc, seed);
        TrainConfig tc = cfg.train_cfg;
        tc.seed = seed;
        tc.mask_lo = lo;
        tc.mask_hi = hi;
        tc.checkpoint_dir.clear();
        if (progress)
          *progress << "ablate " << to_string(variant) << " ("
                    << interval_tag(lo, hi) << "] seed " << seed << "\n";
        TrainLog tl = train(model, train_data, tc, progress);
        if (!loss_curve_dir.empty())
          write_loss_curve(tl.epoch_loss,
                           (fs::path(loss_curve_dir) /
                            ("loss_" + to_string(variant) + "_" +
                             interval_tag(lo, hi) + "_s" +
                             std::to_string(seed) + ".csv"))
                               .string());
        MetricReport rep = evaluate(
            model, eval_data, fixed_eval_masks(eval_data, lo, hi, seed));

        AblationRow row;
        row.variant = to_string(variant);
        row.interval = interval_tag(lo, hi);
        row.horizon = rep.rmse_at.rbegin()->first;
        row.rmse = rep.rmse_at.rbegin()->second;
        row.ade = rep.ade;
        row.fde = rep.fde;
        row.mr = rep.mr;
        row.seed = seed;
        rows.push_back(row);
        if (progress)
          *progress << "  ade " << format_double(row.ade) << " fde "
                    << format_double(row.fde) << " rmse "
                    << format_double(row.rmse) << "\n";
      }
    }
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "variant,interval,horizon,rmse,ade,fde,mr,seed\n";
  for (const AblationRow& r : rows)
    out << r.variant << ',' << r.interval << ',' << format_double(r.horizon)
        << ',' << format_double(r.rmse) << ',' << format_double(r.ade) << ','
        << format_double(r.fde) << ',' << format_double(r.mr) << ',' << r.seed
        << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace mtft
