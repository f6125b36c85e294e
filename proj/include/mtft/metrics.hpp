#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "mtft/tensor.hpp"

namespace mtft {

struct MetricReport {
  std::map<double, double> rmse_at;  // horizon seconds -> RMSE at that step
  double rmse_all = 0.0;             // all future steps pooled
  double ade = 0.0;                  // mean displacement over samples and steps
  double fde = 0.0;                  // mean final-step displacement
  double mr = 0.0;                   // fraction of samples with FDE > 2 m
  std::size_t samples = 0;
};

/// Whole-second horizons reachable within t_f steps at this rate; falls back
/// to the single final-step horizon when t_f is shorter than one second.
std::vector<double> default_horizons(std::size_t t_f, double hz);

/// pred and truth are matching lists of [t_f, 2] position tensors in a
/// shared frame. Horizon h seconds maps to step round(h*hz) - 1.
MetricReport compute_metrics(const std::vector<Tensor>& pred,
                             const std::vector<Tensor>& truth, double hz,
                             const std::vector<double>& horizons = {});

}  // namespace mtft
