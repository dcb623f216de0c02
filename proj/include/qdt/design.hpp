#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qdt/states.hpp"

namespace qdt {

struct ResourceDistribution {
  RVec eta;
  double objective = 0.0;
  double certificate = 0.0;  // KKT gap eta.g - min_j g_j
  int iterations = 0;
  bool converged = false;
};

// Thrown when the optimizer cannot certify first-order optimality; carries
// the best iterate found so callers can still use it.
struct ConvergenceFailure : std::runtime_error {
  ResourceDistribution best;
  ConvergenceFailure(const std::string& msg, ResourceDistribution b)
      : std::runtime_error(msg), best(std::move(b)) {}
};

struct DesignOptions {
  double tol = 1e-8;
  int max_iter = 100000;
};

// A-optimal resource allocation: minimize
//   f(eta) = sum_i Tr[(sum_j eta_j w_ij phi_j phi_j^T)^{-1}]
// over the probability simplex. weights is the n x M matrix w_ij (pass an
// all-ones matrix when no prior information exists).
//
// Two-phase solver: projected gradient with Armijo backtracking globally,
// switching to an equality-constrained Newton step on the active support
// once line-search progress falls below the f-evaluation noise floor. The
// certificate uses only the gradient, so the tolerance is meaningful down
// to 1e-8 and below.
ResourceDistribution optimize_distribution(const ProbeSet& probes, const RMat& weights,
                                           DesignOptions opts = {});

// Largest-remainder rounding; sums to N exactly, each |N_j - eta_j N| < 1.
std::vector<std::int64_t> round_shots(const RVec& eta, std::int64_t N);

}  // namespace qdt
