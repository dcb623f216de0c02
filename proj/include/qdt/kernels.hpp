#pragma once

#include <optional>
#include <memory>
#include <string>
#include <vector>

#include "qdt/basis.hpp"

namespace qdt {

enum class KernelKind {
  none,
  tikhonov,
  di,
  tc,
  dc,
  rank1_adaptive,
  fullrank_adaptive,
  best_oracle,
};

// Regularization choice. c >= 0; mu, mu2 in [0,1]; mu1 in [-1,1].
// base_kernel supplies the step-1 kernel for the adaptive kinds;
// oracle_theta supplies the true theta_i for best_oracle.
struct KernelSpec {
  KernelKind kind = KernelKind::none;
  double c = 0.0;
  double mu = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
  std::shared_ptr<KernelSpec> base_kernel;
  std::optional<std::vector<RVec>> oracle_theta;  // one per outcome

  std::string describe() const;
};

KernelKind kernel_kind_from_string(const std::string& s);
std::string kernel_kind_to_string(KernelKind k);

// Materialized regularizer for one outcome. Either the prior covariance S
// (S-form solve, valid for singular S) or the regularization matrix
// D = sigma^2 S^{-1} (Tikhonov). kind none materializes to D = 0.
struct Regularizer {
  bool is_S = true;
  RMat mat;
};

// Context for kernels that depend on estimates: rough_theta is the step-1
// estimate (adaptive kinds), oracle index selects the outcome's oracle_theta.
struct KernelContext {
  const RVec* rough_theta = nullptr;
  int outcome = 0;
};

Regularizer materialize(const KernelSpec& spec, int d2, const KernelContext& ctx = {});

// Entry formulas, exposed for direct verification. Indices are 1-based and
// tied to the frozen basis ordering.
double di_entry(double c, double mu, int k);
double tc_entry(double c, double mu, int j, int k);
double dc_entry(double c, double mu1, double mu2, int j, int k);

}  // namespace qdt
