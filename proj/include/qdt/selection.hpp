#pragma once

#include <random>
#include <vector>

#include "qdt/estimators.hpp"

namespace qdt {

// Two-step adaptive regularization: estimate theta^0 with the step-1 kernel
// on the full data, then re-estimate with S = theta^0 theta^0T (rank1) or
// S = theta^0 theta^0T + S_step1 (fullrank).
Estimate adaptive_estimate(const WeightedData& wd, const KernelSpec& step1,
                           KernelKind mode, const HermitianBasis& basis);

// Dispatch a KernelSpec to the right estimator: none -> AWLS with
// pseudo-inverse fallback, adaptive kinds -> adaptive_estimate with their
// base kernel, everything else -> rwls_estimate.
Estimate estimate_kernel(const WeightedData& wd, const KernelSpec& spec,
                         const HermitianBasis& basis);

struct CvResult {
  KernelSpec selected;
  int selected_index = -1;
  std::vector<double> scores;  // validation residual per grid candidate
  Estimate final_estimate;     // selected kernel re-estimated on all probes
};

// Hyper-parameter selection by random-split cross-validation: fit each grid
// candidate on n_estimation probes, score sum_i ||ybar_val - X_val theta||^2
// on the rest, pick the argmin (ties to the earliest candidate), then
// re-estimate on all probes.
CvResult cross_validate(const ProbeSet& probes, const MeasurementRecord& rec,
                        const std::vector<KernelSpec>& grid, int n_estimation,
                        std::mt19937_64& rng, const HermitianBasis& basis);

}  // namespace qdt
