#include "qdt/selection.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qdt {

namespace {

Estimate finish(std::vector<RVec> thetas, const HermitianBasis& basis, int n,
                std::string method, std::string kernel) {
  Estimate est;
  est.method = std::move(method);
  est.kernel_used = std::move(kernel);
  est.theta_hat = std::move(thetas);
  for (const auto& th : est.theta_hat) {
    RVec lam = lambda_from_theta(th, n, basis.dim);
    est.lambda_hat.push_back(lam);
    est.E_hat.push_back(deparameterize(lam, basis));
  }
  return est;
}

}  // namespace

Estimate adaptive_estimate(const WeightedData& wd, const KernelSpec& step1,
                           KernelKind mode, const HermitianBasis& basis) {
  if (mode != KernelKind::rank1_adaptive && mode != KernelKind::fullrank_adaptive)
    throw std::invalid_argument("adaptive_estimate: mode must be rank1 or fullrank");
  if (step1.kind == KernelKind::rank1_adaptive || step1.kind == KernelKind::fullrank_adaptive)
    throw std::invalid_argument("adaptive_estimate: step-1 kernel cannot itself be adaptive");
  const int d2 = static_cast<int>(wd.X.cols());

  Estimate rough = estimate_kernel(wd, step1, basis);

  Regularizer base;
  if (mode == KernelKind::fullrank_adaptive) {
    base = materialize(step1, d2, KernelContext{});
    if (!base.is_S)
      throw std::invalid_argument(
          "adaptive_estimate: fullrank mode needs an S-form step-1 kernel");
  }

  std::vector<RVec> thetas;
  thetas.reserve(wd.n_outcomes);
  for (int i = 0; i < wd.n_outcomes; ++i) {
    const RVec& t0 = rough.theta_hat[i];
    Regularizer reg;
    reg.is_S = true;
    reg.mat = t0 * t0.transpose();
    if (mode == KernelKind::fullrank_adaptive) reg.mat += base.mat;
    thetas.push_back(rwls_solve_one(wd.Xtilde[i], wd.ytilde[i], reg, wd.sigma));
  }
  const char* name =
      (mode == KernelKind::rank1_adaptive) ? "rank1_adaptive" : "fullrank_adaptive";
  return finish(std::move(thetas), basis, wd.n_outcomes, "adaptive",
                std::string(name) + "[" + step1.describe() + "]");
}

Estimate estimate_kernel(const WeightedData& wd, const KernelSpec& spec,
                         const HermitianBasis& basis) {
  switch (spec.kind) {
    case KernelKind::none:
      return awls_estimate(wd, basis, SolveMode::pseudo_inverse);
    case KernelKind::rank1_adaptive:
    case KernelKind::fullrank_adaptive: {
      if (!spec.base_kernel)
        throw std::invalid_argument("estimate_kernel: missing-context (no base kernel)");
      return adaptive_estimate(wd, *spec.base_kernel, spec.kind, basis);
    }
    default:
      return rwls_estimate(wd, spec, basis);
  }
}

CvResult cross_validate(const ProbeSet& probes, const MeasurementRecord& rec,
                        const std::vector<KernelSpec>& grid, int n_estimation,
                        std::mt19937_64& rng, const HermitianBasis& basis) {
  if (grid.empty()) throw std::invalid_argument("cross_validate: invalid-config (empty grid)");
  const int M = probes.count();
  if (n_estimation < 1 || n_estimation >= M)
    throw std::invalid_argument("cross_validate: invalid-config (validation part empty)");

  std::vector<int> idx(M);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> est_idx(idx.begin(), idx.begin() + n_estimation);
  std::vector<int> val_idx(idx.begin() + n_estimation, idx.end());

  auto subset_probes = [&](const std::vector<int>& which) {
    std::vector<DensityMatrix> states;
    states.reserve(which.size());
    for (int j : which) states.push_back(probes.states[j]);
    return build_probe_set(states, basis);
  };
  auto subset_record = [&](const std::vector<int>& which) {
    MeasurementRecord sub;
    const int n = rec.n_outcomes();
    sub.counts.resize(n, which.size());
    sub.freqs.resize(n, which.size());
    sub.shots.resize(which.size());
    sub.total_shots = 0;
    for (std::size_t c = 0; c < which.size(); ++c) {
      sub.counts.col(c) = rec.counts.col(which[c]);
      sub.freqs.col(c) = rec.freqs.col(which[c]);
      sub.shots[c] = rec.shots[which[c]];
      sub.total_shots += sub.shots[c];
    }
    return sub;
  };

  ProbeSet probes_est = subset_probes(est_idx);
  ProbeSet probes_val = subset_probes(val_idx);
  MeasurementRecord rec_est = subset_record(est_idx);
  MeasurementRecord rec_val = subset_record(val_idx);
  WeightedData wd_est = build_weighted_data(rec_est, probes_est);
  WeightedData wd_val = build_weighted_data(rec_val, probes_val);

  CvResult out;
  out.scores.resize(grid.size(), std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    Estimate e = estimate_kernel(wd_est, grid[g], basis);
    double score = 0.0;
    for (int i = 0; i < wd_val.n_outcomes; ++i)
      score += (wd_val.ybar[i] - probes_val.X * e.theta_hat[i]).squaredNorm();
    out.scores[g] = score;
    if (score < best) {  // strict: ties keep the earliest candidate
      best = score;
      out.selected_index = static_cast<int>(g);
    }
  }
  out.selected = grid[out.selected_index];

  WeightedData wd_all = build_weighted_data(rec, probes);
  out.final_estimate = estimate_kernel(wd_all, out.selected, basis);
  return out;
}

}  // namespace qdt
