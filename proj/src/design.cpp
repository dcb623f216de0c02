#include "qdt/design.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace qdt {

namespace {

struct Problem {
  RMat X;        // M x d2
  RMat w;        // n x M
  int n_out;
  int M;
  int d2;

  std::vector<RMat> info_mats(const RVec& eta) const {
    std::vector<RMat> As;
    As.reserve(n_out);
    for (int i = 0; i < n_out; ++i) {
      RMat A = RMat::Zero(d2, d2);
      for (int j = 0; j < M; ++j)
        if (eta(j) != 0.0) A += (eta(j) * w(i, j)) * (X.row(j).transpose() * X.row(j));
      As.push_back(std::move(A));
    }
    return As;
  }

  // f = sum_i Tr(A_i^{-1}); +inf when singular
  double objective(const std::vector<RMat>& As) const {
    double f = 0.0;
    for (const auto& A : As) {
      Eigen::PartialPivLU<RMat> lu(A);
      const RMat inv = lu.inverse();
      const double t = inv.trace();
      if (!std::isfinite(t) || (A * inv - RMat::Identity(d2, d2)).cwiseAbs().maxCoeff() > 1e-6)
        return std::numeric_limits<double>::infinity();
      f += t;
    }
    return f;
  }

  // g_j = -sum_i w_ij phi_j^T A_i^{-2} phi_j
  RVec gradient(const std::vector<RMat>& As) const {
    RVec g = RVec::Zero(M);
    for (int i = 0; i < n_out; ++i) {
      Eigen::PartialPivLU<RMat> lu(As[i]);
      const RMat Ainv = lu.inverse();
      const RMat A2 = Ainv * Ainv;
      for (int j = 0; j < M; ++j)
        g(j) -= w(i, j) * X.row(j) * A2 * X.row(j).transpose();
    }
    return g;
  }

  // exact Delta f via the resolvent identity:
  //   Tr((A+D)^{-1}) - Tr(A^{-1}) = -Tr(A^{-1} D (A+D)^{-1})
  double delta_f(const std::vector<RMat>& As, const RVec& deta) const {
    double total = 0.0;
    for (int i = 0; i < n_out; ++i) {
      RMat D = RMat::Zero(d2, d2);
      for (int j = 0; j < M; ++j)
        if (deta(j) != 0.0) D += (deta(j) * w(i, j)) * (X.row(j).transpose() * X.row(j));
      Eigen::PartialPivLU<RMat> lu_a(As[i]);
      Eigen::PartialPivLU<RMat> lu_ad(As[i] + D);
      const RMat Y = lu_a.solve(D);
      const RMat Z = lu_ad.solve(Y.transpose()).transpose();  // A^{-1} D (A+D)^{-1}
      const double t = Z.trace();
      if (!std::isfinite(t)) return std::numeric_limits<double>::infinity();
      total -= t;
    }
    return total;
  }

  // H_jk = 2 sum_i w_ij w_ik (phi_j A_i^{-1} phi_k)(phi_j A_i^{-2} phi_k)
  RMat hessian(const std::vector<RMat>& As) const {
    RMat H = RMat::Zero(M, M);
    for (int i = 0; i < n_out; ++i) {
      Eigen::PartialPivLU<RMat> lu(As[i]);
      const RMat Ainv = lu.inverse();
      const RMat A2 = Ainv * Ainv;
      const RMat U = X * Ainv * X.transpose();
      const RMat V = X * A2 * X.transpose();
      H += 2.0 * (w.row(i).transpose() * w.row(i)).cwiseProduct(U.cwiseProduct(V));
    }
    return H;
  }
};

// simplex projection step: deta such that eta + deta = proj(eta - t g)
RVec projection_step(const RVec& eta, const RVec& g, double t) {
  const int M = static_cast<int>(eta.size());
  RVec v = eta - t * g;
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v(a) > v(b); });
  const double sum_eta = eta.sum();
  double cum_eta = 0.0, cum_g = 0.0, tau = 0.0;
  int m = 0;
  for (int k = 0; k < M; ++k) {
    const int j = order[k];
    cum_eta += eta(j);
    cum_g += g(j);
    const double inactive = sum_eta - cum_eta;
    const double tau_k = (-inactive - t * cum_g + (sum_eta - 1.0)) / (k + 1);
    if (v(j) - tau_k > 0) {
      m = k + 1;
      tau = tau_k;
    } else {
      break;
    }
  }
  RVec deta(M);
  for (int k = 0; k < M; ++k) {
    const int j = order[k];
    deta(j) = (k < m) ? (-t * g(j) - tau) : -eta(j);
  }
  return deta;
}

}  // namespace

ResourceDistribution optimize_distribution(const ProbeSet& probes, const RMat& weights,
                                           DesignOptions opts) {
  Problem pb;
  pb.X = probes.X;
  pb.w = weights;
  pb.n_out = static_cast<int>(weights.rows());
  pb.M = static_cast<int>(probes.X.rows());
  pb.d2 = static_cast<int>(probes.X.cols());
  if (weights.cols() != pb.M)
    throw std::invalid_argument("optimize_distribution: weights shape mismatch");
  if (weights.minCoeff() <= 0)
    throw std::invalid_argument("optimize_distribution: weights must be positive");

  RVec eta = RVec::Constant(pb.M, 1.0 / pb.M);
  {
    auto As = pb.info_mats(eta);
    if (!std::isfinite(pb.objective(As)))
      throw std::runtime_error(
          "optimize_distribution: not-identifiable (information matrix singular at uniform eta)");
  }

  ResourceDistribution out;
  double t_ws = 1e-6;
  RVec prev_eta, prev_g;
  bool have_prev = false;
  bool newton_mode = false;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    auto As = pb.info_mats(eta);
    RVec g = pb.gradient(As);
    const double gap = eta.dot(g) - g.minCoeff();
    if (gap <= opts.tol) {
      out.converged = true;
      break;
    }

    if (!newton_mode) {
      double t = t_ws * 2.0;
      if (have_prev) {
        const RVec s = eta - prev_eta;
        const RVec y = g - prev_g;
        const double sy = s.dot(y);
        if (sy > 0 && std::isfinite(sy))
          t = std::min(std::max(s.dot(s) / sy, 1e-12), 1e3);
      }
      bool moved = false;
      RVec deta;
      const double g_mean = g.mean();
      for (int bt = 0; bt < 60; ++bt) {
        deta = projection_step(eta, g, t);
        // deviation form: the mean gradient component cancels on the simplex
        double gbar = 0.0;
        for (int j = 0; j < pb.M; ++j) gbar += (g(j) - g_mean) * deta(j);
        if (gbar >= 0) {
          t *= 0.5;
          continue;
        }
        const double df = pb.delta_f(As, deta);
        if (df <= 1e-4 * gbar) {
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (moved) {
        prev_eta = eta;
        prev_g = g;
        have_prev = true;
        eta += deta;
        eta = eta.cwiseMax(0.0);
        eta /= eta.sum();
        t_ws = t;
        continue;
      }
      // line search hit the f-evaluation noise floor; finish with Newton
      newton_mode = true;
    }

    // equality-constrained Newton on the current support
    std::vector<int> support;
    for (int j = 0; j < pb.M; ++j)
      if (eta(j) > 1e-14) support.push_back(j);
    const int m = static_cast<int>(support.size());
    const RMat H = pb.hessian(As);
    RMat K = RMat::Zero(m + 1, m + 1);
    RVec rhs = RVec::Zero(m + 1);
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) K(a, b) = H(support[a], support[b]);
      K(a, m) = 1.0;
      K(m, a) = 1.0;
      rhs(a) = -g(support[a]);
    }
    Eigen::PartialPivLU<RMat> lu(K);
    const RVec sol = lu.solve(rhs);
    if (!sol.allFinite()) break;
    RVec d = RVec::Zero(pb.M);
    for (int a = 0; a < m; ++a) d(support[a]) = sol(a);

    double alpha = 1.0;
    for (int j = 0; j < pb.M; ++j)
      if (d(j) < 0) alpha = std::min(alpha, 0.99 * (-eta(j) / d(j)));
    RVec cand = (eta + alpha * d).cwiseMax(0.0);
    cand /= cand.sum();
    auto As_c = pb.info_mats(cand);
    if (!std::isfinite(pb.objective(As_c))) break;
    const RVec g_c = pb.gradient(As_c);
    const double gap_c = cand.dot(g_c) - g_c.minCoeff();
    if (gap_c < gap) {
      eta = cand;
    } else {
      break;  // no further certified progress available
    }
  }

  auto As = pb.info_mats(eta);
  const RVec g = pb.gradient(As);
  out.eta = eta;
  out.objective = pb.objective(As);
  out.certificate = eta.dot(g) - g.minCoeff();
  out.iterations = it;
  out.converged = out.certificate <= opts.tol;
  if (!out.converged)
    throw ConvergenceFailure("optimize_distribution: convergence-failure (certificate " +
                                 std::to_string(out.certificate) + " > tol)",
                             out);
  return out;
}

std::vector<std::int64_t> round_shots(const RVec& eta, std::int64_t N) {
  const int M = static_cast<int>(eta.size());
  std::vector<std::int64_t> shots(M);
  std::vector<std::pair<double, int>> rema(M);
  std::int64_t assigned = 0;
  for (int j = 0; j < M; ++j) {
    const double target = eta(j) * double(N);
    shots[j] = static_cast<std::int64_t>(std::floor(target));
    assigned += shots[j];
    rema[j] = {target - double(shots[j]), j};
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::int64_t left = N - assigned;
  for (std::int64_t k = 0; k < left; ++k) shots[rema[static_cast<std::size_t>(k)].second] += 1;
  return shots;
}

}  // namespace qdt
