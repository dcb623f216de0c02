#include "qdt/correction.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qdt {

namespace {

// clip negative eigenvalues to zero; returns removed magnitude
double clip_psd(CMat& P) {
  Eigen::SelfAdjointEigenSolver<CMat> es(P);
  const RVec& ev = es.eigenvalues();
  if (ev.minCoeff() >= 0) return 0.0;
  double removed = 0.0;
  RVec clipped = ev;
  for (int i = 0; i < ev.size(); ++i)
    if (clipped(i) < 0) {
      removed += -clipped(i);
      clipped(i) = 0;
    }
  P = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().adjoint();
  return removed;
}

}  // namespace

CorrectionResult correct_to_povm(const std::vector<CMat>& raw) {
  if (raw.empty()) throw std::invalid_argument("correct_to_povm: empty input");
  const int d = static_cast<int>(raw[0].rows());
  const int n = static_cast<int>(raw.size());
  std::vector<CMat> P;
  P.reserve(n);
  for (const auto& E : raw) {
    if (E.rows() != d || E.cols() != d)
      throw std::invalid_argument("correct_to_povm: shape-error");
    if ((E - E.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
      throw std::invalid_argument("correct_to_povm: symmetry-violation");
    P.push_back(0.5 * (E + E.adjoint()));
  }

  CorrectionResult res;
  // geometric convergence at roughly 0.65/pass; large perturbations of d = 8
  // inputs need ~60 passes to reach 1e-10, so leave generous headroom
  constexpr int kMaxPasses = 200;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    res.passes = pass + 1;
    for (auto& Pi : P) res.clipped_mass += clip_psd(Pi);

    CMat Delta = CMat::Identity(d, d);
    for (const auto& Pi : P) Delta -= Pi;
    const double residual = Delta.norm();

    double min_eig = 0.0;
    for (const auto& Pi : P) {
      Eigen::SelfAdjointEigenSolver<CMat> es(Pi, Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    if (residual <= 1e-10 && min_eig >= -1e-10) break;

    std::vector<double> tr(n);
    double tr_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      tr[i] = std::max(P[i].trace().real(), 0.0);
      tr_sum += tr[i];
    }
    for (int i = 0; i < n; ++i) {
      const double w = (tr_sum < 1e-12) ? 1.0 / n : tr[i] / tr_sum;
      P[i] += w * Delta;
    }
  }

  CMat check = CMat::Identity(d, d);
  for (const auto& Pi : P) check -= Pi;
  double final_min_eig = 0.0;
  for (const auto& Pi : P) {
    Eigen::SelfAdjointEigenSolver<CMat> es(Pi, Eigen::EigenvaluesOnly);
    final_min_eig = std::min(final_min_eig, es.eigenvalues().minCoeff());
  }
  if (check.norm() > 1e-10 || final_min_eig < -1e-10)
    throw std::runtime_error("correct_to_povm: invariants not reached within pass limit");

  for (int i = 0; i < n; ++i) res.distance += (P[i] - raw[i]).norm();
  res.corrected.elements = std::move(P);
  return res;
}

CorrectionResult correct_blockwise(const std::vector<CMat>& raw,
                                   const std::vector<int>& block_structure) {
  if (raw.empty()) throw std::invalid_argument("correct_blockwise: empty input");
  const int d = static_cast<int>(raw[0].rows());
  const int total = std::accumulate(block_structure.begin(), block_structure.end(), 0);
  if (total != d)
    throw std::invalid_argument("correct_blockwise: shape-error (block sizes must sum to d)");
  const int n = static_cast<int>(raw.size());

  std::vector<CMat> out(n, CMat::Zero(d, d));
  CorrectionResult res;
  int offset = 0;
  for (int b : block_structure) {
    std::vector<CMat> blocks;
    blocks.reserve(n);
    for (const auto& E : raw) blocks.push_back(E.block(offset, offset, b, b));
    CorrectionResult sub = correct_to_povm(blocks);
    for (int i = 0; i < n; ++i)
      out[i].block(offset, offset, b, b) = sub.corrected.elements[i];
    res.clipped_mass += sub.clipped_mass;
    res.passes = std::max(res.passes, sub.passes);
    offset += b;
  }
  for (int i = 0; i < n; ++i) res.distance += (out[i] - raw[i]).norm();
  res.corrected.elements = std::move(out);
  res.corrected.block_structure = block_structure;
  return res;
}

}  // namespace qdt
