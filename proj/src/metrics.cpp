#include "mtft/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("compute_metrics: " + msg);
}

}  // namespace

std::vector<double> default_horizons(std::size_t t_f, double hz) {
  std::vector<double> out;
  for (long s = 1;; ++s) {
    long idx = std::lround(static_cast<double>(s) * hz) - 1;
    if (idx < 0 || idx >= static_cast<long>(t_f)) break;
    out.push_back(static_cast<double>(s));
  }
  if (out.empty()) out.push_back(static_cast<double>(t_f) / hz);
  return out;
}

MetricReport compute_metrics(const std::vector<Tensor>& pred,
                             const std::vector<Tensor>& truth, double hz,
                             const std::vector<double>& horizons) {
  if (pred.empty()) fail("no samples");
  if (pred.size() != truth.size()) fail("prediction/truth count mismatch");
  if (hz <= 0.0) fail("hz must be positive");
  std::size_t t_f = pred[0].dim(0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].rank() != 2 || pred[i].dim(1) != 2 || pred[i].dim(0) != t_f)
      fail("sample " + std::to_string(i) + " prediction is not t_f x 2");
    if (!pred[i].same_shape(truth[i]))
      fail("sample " + std::to_string(i) + " shape mismatch");
  }

  std::vector<double> hs = horizons.empty() ? default_horizons(t_f, hz)
                                            : horizons;
  MetricReport r;
  r.samples = pred.size();

  auto dist = [&](std::size_t i, std::size_t t) {
    double dx = pred[i](t, 0) - truth[i](t, 0);
    double dy = pred[i](t, 1) - truth[i](t, 1);
    return std::hypot(dx, dy);
  };

  for (double h : hs) {
    long idx = std::lround(h * hz) - 1;
    if (idx < 0 || idx >= static_cast<long>(t_f))
      fail("horizon " + std::to_string(h) + " s is outside the future window");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      double d = dist(i, static_cast<std::size_t>(idx));
      acc += d * d;
    }
    r.rmse_at[h] = std::sqrt(acc / static_cast<double>(pred.size()));
  }

  double sq = 0.0, lin = 0.0, fin = 0.0;
  std::size_t missed = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t t = 0; t < t_f; ++t) {
      double d = dist(i, t);
      sq += d * d;
      lin += d;
    }
    double df = dist(i, t_f - 1);
    fin += df;
    if (df > 2.0) ++missed;
  }
  double nt = static_cast<double>(pred.size() * t_f);
  r.rmse_all = std::sqrt(sq / nt);
  r.ade = lin / nt;
  r.fde = fin / static_cast<double>(pred.size());
  r.mr = static_cast<double>(missed) / static_cast<double>(pred.size());
  return r;
}

}  // namespace mtft
