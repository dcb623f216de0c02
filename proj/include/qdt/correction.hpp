#pragma once

#include <vector>

#include "qdt/states.hpp"

namespace qdt {

struct CorrectionResult {
  Povm corrected;
  double distance = 0.0;      // sum_i ||Phat_i - raw_i||_F
  double clipped_mass = 0.0;  // total negative eigenvalue magnitude removed
  int passes = 0;
};

// Project raw Hermitian estimates onto the POVM set: symmetrize, clip
// negative eigenvalues, repair completeness by distributing I - sum(P)
// proportionally to traces (uniformly when traces vanish), re-clip; the
// clip/repair pair repeats until the invariants hold (sum residual <= 1e-10,
// min eigenvalue >= -1e-10).
CorrectionResult correct_to_povm(const std::vector<CMat>& raw);

// Zero out off-block entries and correct each block independently.
CorrectionResult correct_blockwise(const std::vector<CMat>& raw,
                                   const std::vector<int>& block_structure);

}  // namespace qdt
