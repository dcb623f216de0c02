#pragma once

#include <string>
#include <vector>

#include "qdt/kernels.hpp"
#include "qdt/measurement.hpp"

namespace qdt {

enum class SolveMode { strict, pseudo_inverse };

struct Estimate {
  std::vector<RVec> theta_hat;   // per outcome
  std::vector<RVec> lambda_hat;  // theta + dvec/n
  std::vector<CMat> E_hat;       // deparameterized, pre-correction
  std::string method;
  std::string kernel_used;
};

struct MsemReport {
  RMat msem;
  RVec bias;
  double trace = 0.0;
};

// theta_hat = (X^T X)^{-1} X^T ybar per outcome. strict mode refuses
// condition numbers above 1e12 (not-identifiable); pseudo_inverse mode uses
// the Moore-Penrose inverse of X^T X.
Estimate ls_estimate(const ProbeSet& probes, const std::vector<RVec>& ybar,
                     const HermitianBasis& basis, SolveMode mode = SolveMode::strict);

// theta_hat = (X^T W X)^{-1} X^T W ybar with the estimated weights.
Estimate awls_estimate(const WeightedData& wd, const HermitianBasis& basis,
                       SolveMode mode = SolveMode::strict);

// Regularized WLS. D-form: theta = (R + D)^{-1} Xt^T yt. S-form:
// theta = (S R + sigma^2 I)^{-1} S F with F = Xt^T yt, valid for singular S.
// Adaptive kernel kinds must go through adaptive_estimate (they need a
// step-1 pass); passing them here throws missing-context.
Estimate rwls_estimate(const WeightedData& wd, const KernelSpec& kernel,
                       const HermitianBasis& basis);

// Unweighted Tikhonov baseline: theta = (X^T X + (c/N) I)^{-1} X^T ybar.
Estimate wangtik_estimate(const ProbeSet& probes, const std::vector<RVec>& ybar,
                          const HermitianBasis& basis, double c, double total_shots);

// Exact MSE matrix for the Gaussian surrogate model. D-form:
//   MSEM = (R+D)^{-1} (sigma^2 R + D theta theta^T D^T) (R+D)^{-1},
// bias = -(R+D)^{-1} D theta; D = 0 reduces to sigma^2 R^{-1}.
// S-form (valid for singular S):
//   MSEM = (SR+s2 I)^{-1} (s2 S R S + s2^2 theta theta^T) (RS+s2 I)^{-1},
// bias = -s2 (SR+s2 I)^{-1} theta, s2 = sigma^2.
MsemReport msem_closed_form(const RMat& R, const Regularizer& reg, const RVec& theta_true,
                            double sigma = 1.0);

double total_ls_mse(const std::vector<MsemReport>& reports);

// Shared solve helper: symmetric PSD solve with the 1e12 condition guard
// (strict) or Moore-Penrose pseudo-inverse (pseudo_inverse).
RVec guarded_solve(const RMat& A, const RVec& b, SolveMode mode, const char* who);

// One-outcome regularized solve on already-transformed data.
RVec rwls_solve_one(const RMat& Xtilde, const RVec& ytilde, const Regularizer& reg,
                    double sigma);

}  // namespace qdt
