#include "qdt/estimators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

namespace qdt {

namespace {

constexpr double kCondLimit = 1e12;

Estimate finish_estimate(std::vector<RVec> thetas, const HermitianBasis& basis,
                         int n_outcomes, std::string method, std::string kernel) {
  Estimate est;
  est.method = std::move(method);
  est.kernel_used = std::move(kernel);
  est.theta_hat = std::move(thetas);
  est.lambda_hat.reserve(est.theta_hat.size());
  est.E_hat.reserve(est.theta_hat.size());
  for (const auto& th : est.theta_hat) {
    RVec lam = lambda_from_theta(th, n_outcomes, basis.dim);
    est.lambda_hat.push_back(lam);
    est.E_hat.push_back(deparameterize(lam, basis));
  }
  return est;
}

}  // namespace

RVec guarded_solve(const RMat& A, const RVec& b, SolveMode mode, const char* who) {
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (A + A.transpose()));
  const RVec& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  if (mode == SolveMode::strict) {
    const double emin = ev.minCoeff();
    if (emax <= 0 || emin <= 0 || emax / emin > kCondLimit)
      throw std::runtime_error(std::string(who) +
                               ": not-identifiable (condition number above 1e12)");
    return es.eigenvectors() * (es.eigenvectors().transpose() * b).cwiseQuotient(ev);
  }
  const double tol = emax * 1e-12;
  RVec inv_ev(ev.size());
  for (int i = 0; i < ev.size(); ++i) inv_ev(i) = (ev(i) > tol) ? 1.0 / ev(i) : 0.0;
  return es.eigenvectors() *
         inv_ev.cwiseProduct(es.eigenvectors().transpose() * b);
}

Estimate ls_estimate(const ProbeSet& probes, const std::vector<RVec>& ybar,
                     const HermitianBasis& basis, SolveMode mode) {
  const int n = static_cast<int>(ybar.size());
  const RMat R = probes.X.transpose() * probes.X;
  std::vector<RVec> thetas;
  thetas.reserve(n);
  for (int i = 0; i < n; ++i)
    thetas.push_back(guarded_solve(R, probes.X.transpose() * ybar[i], mode, "ls_estimate"));
  return finish_estimate(std::move(thetas), basis, n, "ls", "none");
}

Estimate awls_estimate(const WeightedData& wd, const HermitianBasis& basis,
                       SolveMode mode) {
  std::vector<RVec> thetas;
  thetas.reserve(wd.n_outcomes);
  for (int i = 0; i < wd.n_outcomes; ++i) {
    const RMat R = wd.Xtilde[i].transpose() * wd.Xtilde[i];
    thetas.push_back(
        guarded_solve(R, wd.Xtilde[i].transpose() * wd.ytilde[i], mode, "awls_estimate"));
  }
  return finish_estimate(std::move(thetas), basis, wd.n_outcomes, "awls", "none");
}

RVec rwls_solve_one(const RMat& Xtilde, const RVec& ytilde, const Regularizer& reg,
                    double sigma) {
  const int d2 = static_cast<int>(Xtilde.cols());
  const double s2 = sigma * sigma;
  Eigen::SelfAdjointEigenSolver<RMat> check(0.5 * (reg.mat + reg.mat.transpose()));
  if (check.eigenvalues().size() && check.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("rwls_solve_one: invalid-kernel (indefinite)");
  const RMat R = Xtilde.transpose() * Xtilde;
  const RVec F = Xtilde.transpose() * ytilde;
  if (reg.is_S) {
    const RMat A = reg.mat * R + s2 * RMat::Identity(d2, d2);
    return Eigen::PartialPivLU<RMat>(A).solve(reg.mat * F);
  }
  return guarded_solve(R + reg.mat, F, SolveMode::strict, "rwls_solve_one");
}

Estimate rwls_estimate(const WeightedData& wd, const KernelSpec& kernel,
                       const HermitianBasis& basis) {
  const int d2 = static_cast<int>(wd.X.cols());
  std::vector<RVec> thetas;
  thetas.reserve(wd.n_outcomes);
  for (int i = 0; i < wd.n_outcomes; ++i) {
    KernelContext ctx;
    ctx.outcome = i;
    Regularizer reg = materialize(kernel, d2, ctx);
    thetas.push_back(rwls_solve_one(wd.Xtilde[i], wd.ytilde[i], reg, wd.sigma));
  }
  return finish_estimate(std::move(thetas), basis, wd.n_outcomes, "rwls", kernel.describe());
}

Estimate wangtik_estimate(const ProbeSet& probes, const std::vector<RVec>& ybar,
                          const HermitianBasis& basis, double c, double total_shots) {
  if (total_shots <= 0) throw std::invalid_argument("wangtik_estimate: N must be positive");
  const int n = static_cast<int>(ybar.size());
  const int d2 = static_cast<int>(probes.X.cols());
  const RMat A = probes.X.transpose() * probes.X + (c / total_shots) * RMat::Identity(d2, d2);
  std::vector<RVec> thetas;
  thetas.reserve(n);
  for (int i = 0; i < n; ++i)
    thetas.push_back(guarded_solve(A, probes.X.transpose() * ybar[i], SolveMode::strict,
                                   "wangtik_estimate"));
  return finish_estimate(std::move(thetas), basis, n, "wangtik", "tikhonov_scaled");
}

MsemReport msem_closed_form(const RMat& R, const Regularizer& reg, const RVec& theta_true,
                            double sigma) {
  const int d2 = static_cast<int>(R.rows());
  const double s2 = sigma * sigma;
  MsemReport rep;
  if (!reg.is_S) {
    const RMat& D = reg.mat;
    if (D.cwiseAbs().maxCoeff() == 0.0) {
      // unregularized: MSEM = sigma^2 R^{-1}, unbiased
      Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (R + R.transpose()));
      if (es.eigenvalues().minCoeff() <= 0)
        throw std::runtime_error("msem_closed_form: not-computable (singular R, D = 0)");
      RMat Rinv = es.eigenvectors() *
                  es.eigenvalues().cwiseInverse().asDiagonal() *
                  es.eigenvectors().transpose();
      rep.msem = s2 * Rinv;
      rep.bias = RVec::Zero(d2);
    } else {
      const RMat RD = R + D;
      Eigen::PartialPivLU<RMat> lu(RD);
      const RMat inner = s2 * R + D * theta_true * theta_true.transpose() * D.transpose();
      const RMat tmp = lu.solve(inner);
      rep.msem = lu.solve(tmp.transpose()).transpose();
      rep.bias = -lu.solve(D * theta_true);
    }
  } else {
    const RMat& S = reg.mat;
    const RMat A = S * R + s2 * RMat::Identity(d2, d2);
    Eigen::PartialPivLU<RMat> lu(A);
    const RMat inner = s2 * S * R * S + s2 * s2 * theta_true * theta_true.transpose();
    const RMat tmp = lu.solve(inner);           // A^{ -1} inner
    rep.msem = lu.solve(tmp.transpose()).transpose();  // ... (RS + s2 I)^{-1} via transpose
    rep.bias = -s2 * lu.solve(theta_true);
  }
  rep.msem = 0.5 * (rep.msem + rep.msem.transpose()).eval();
  rep.trace = rep.msem.trace();
  return rep;
}

double total_ls_mse(const std::vector<MsemReport>& reports) {
  double t = 0.0;
  for (const auto& r : reports) t += r.trace;
  return t;
}

}  // namespace qdt
