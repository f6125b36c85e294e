#include "mtft/masking.hpp"

#include <cmath>
#include <stdexcept>

#include "mtft/rng.hpp"

namespace mtft {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

int SequenceMask::observed_count() const {
  int n = 0;
  for (int b : bits) n += b;
  return n;
}

bool SequenceMask::all_observed() const {
  return observed_count() == static_cast<int>(bits.size());
}

bool SequenceMask::any_observed() const { return observed_count() > 0; }

SequenceMask gen_sequence_mask(std::size_t len, double lo_pct, double hi_pct,
                               std::uint64_t seed, bool* clamped) {
  if (clamped) *clamped = false;
  if (len < 2) fail("gen_sequence_mask: len must be >= 2");
  bool degenerate = lo_pct == 0.0 && hi_pct == 0.0;
  if (!degenerate && !(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 90.0))
    fail("gen_sequence_mask: invalid interval (" + std::to_string(lo_pct) +
         "," + std::to_string(hi_pct) + "]");

  SequenceMask mask;
  mask.bits.assign(len, 1);
  if (degenerate) return mask;

  Rng rng(seed);
  double p = rng.uniform_open_closed(lo_pct, hi_pct);
  auto count = static_cast<long long>(
      std::llround(static_cast<double>(len) * p / 100.0));

  // Keep the realized count inside the interval's own feasible range when
  // one exists, so e.g. len=10 at (60,90] always lands on 7..9 zeros.
  auto lo_floor = static_cast<long long>(
      std::floor(static_cast<double>(len) * lo_pct / 100.0 + 1e-9));
  auto hi_floor = static_cast<long long>(
      std::floor(static_cast<double>(len) * hi_pct / 100.0 + 1e-9));
  long long feas_lo = lo_floor + 1;
  long long feas_hi = hi_floor;
  if (feas_lo <= feas_hi) {
    if (count < feas_lo) count = feas_lo;
    if (count > feas_hi) count = feas_hi;
  }
  if (count >= static_cast<long long>(len)) {
    count = static_cast<long long>(len) - 1;
    if (clamped) *clamped = true;
  }
  if (count < 0) count = 0;

  for (std::size_t idx :
       rng.sample_indices(len, static_cast<std::size_t>(count)))
    mask.bits[idx] = 0;
  return mask;
}

Tensor apply_sequence_mask(const Tensor& traj, const SequenceMask& mask) {
  if (traj.rank() != 2 || traj.dim(1) != 2)
    fail("apply_sequence_mask: expected len x 2 trajectory, got " +
         traj.shape_str());
  if (traj.dim(0) != mask.len())
    fail("apply_sequence_mask: trajectory length " +
         std::to_string(traj.dim(0)) + " vs mask length " +
         std::to_string(mask.len()));
  Tensor out = traj;
  for (std::size_t t = 0; t < mask.len(); ++t) {
    if (mask.bits[t] == 0) {
      out(t, 0) = 0.0;
      out(t, 1) = 0.0;
    }
  }
  return out;
}

ScaleMaskSet build_scale_masks(std::size_t len, std::size_t n) {
  if (len < 1 || n < 1) fail("build_scale_masks: len and n must be >= 1");
  ScaleMaskSet set;
  set.len = len;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t scale = i + 1;
    Tensor m = Tensor::zeros({len, len});
    for (std::size_t a = 0; a < len; ++a)
      for (std::size_t b = 0; b < len; ++b)
        if ((a >= b ? a - b : b - a) % scale == 0) m(a, b) = 1.0;
    set.masks.push_back(std::move(m));
  }
  return set;
}

ScaleMaskSet build_full_masks(std::size_t len, std::size_t n) {
  if (len < 1 || n < 1) fail("build_full_masks: len and n must be >= 1");
  ScaleMaskSet set;
  set.len = len;
  for (std::size_t i = 0; i < n; ++i)
    set.masks.push_back(Tensor::full({len, len}, 1.0));
  return set;
}

std::vector<ObservationMatrix> build_observation_matrices(
    const SequenceMask& seqmask, const ScaleMaskSet& scalemasks) {
  if (seqmask.len() != scalemasks.len)
    fail("build_observation_matrices: mask length " +
         std::to_string(seqmask.len()) + " vs scale mask side " +
         std::to_string(scalemasks.len));
  std::size_t len = scalemasks.len;
  std::vector<ObservationMatrix> out;
  out.reserve(scalemasks.scales());
  for (const Tensor& sm : scalemasks.masks) {
    ObservationMatrix om;
    om.cells = Tensor::zeros({len, len});
    om.increments.assign(len, 0);
    for (std::size_t j = 0; j < len; ++j) {
      for (std::size_t l = 0; l < len; ++l) {
        if (seqmask.bits[l] == 1 && sm(j, l) == 1.0) {
          om.cells(j, l) = 1.0;
          om.increments[j] += 1;
        }
      }
    }
    out.push_back(std::move(om));
  }
  return out;
}

std::string mask_csv_row(const SequenceMask& mask) {
  std::string row;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (i) row += ',';
    row += mask.bits[i] ? '1' : '0';
  }
  return row;
}

}  // namespace mtft
