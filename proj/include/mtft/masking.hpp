#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtft/tensor.hpp"

namespace mtft {

/// Per-vehicle observation indicator, one bit per history step;
/// 1 = observed, 0 = missing.
struct SequenceMask {
  std::vector<int> bits;

  std::size_t len() const { return bits.size(); }
  int observed_count() const;
  bool all_observed() const;
  bool any_observed() const;
};

/// The n fixed len×len binary attention patterns; masks[i] keeps entry (a,b)
/// iff a-b is a multiple of scale i+1. Every diagonal entry is 1 and each
/// mask is symmetric, so no attention row can end up empty.
struct ScaleMaskSet {
  std::vector<Tensor> masks;
  std::size_t len = 0;

  std::size_t scales() const { return masks.size(); }
};

/// Per-scale visibility of observed steps: cells(j,l) = seqmask[l] AND
/// scalemask(j,l); increments[j] is the row sum — how many observed values
/// step j sees at this scale.
struct ObservationMatrix {
  Tensor cells;
  std::vector<int> increments;
};

/// Draws a missing percentage p uniformly from (lo, hi] percent and zeroes
/// round(len*p/100) positions chosen uniformly without replacement. The
/// count is clamped into the interval's feasible range so short sequences
/// still land inside (lo, hi]; lo == hi == 0 means no missing. If everything
/// would go missing the count drops to len-1 and *clamped (when non-null)
/// is set.
SequenceMask gen_sequence_mask(std::size_t len, double lo_pct, double hi_pct,
                               std::uint64_t seed, bool* clamped = nullptr);

/// Zero-fill: out[t] = traj[t] when mask.bits[t] == 1, else (0,0).
Tensor apply_sequence_mask(const Tensor& traj, const SequenceMask& mask);

ScaleMaskSet build_scale_masks(std::size_t len, std::size_t n);

/// All-ones masks of the same shape, for the plain-attention baseline.
ScaleMaskSet build_full_masks(std::size_t len, std::size_t n);

std::vector<ObservationMatrix> build_observation_matrices(
    const SequenceMask& seqmask, const ScaleMaskSet& scalemasks);

/// Bits joined with commas, for CSV dumps.
std::string mask_csv_row(const SequenceMask& mask);

}  // namespace mtft
