#include "qdt/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "qdt/correction.hpp"
#include "qdt/design.hpp"
#include "qdt/estimators.hpp"
#include "qdt/rng.hpp"
#include "qdt/selection.hpp"

namespace qdt {

namespace {

constexpr double kProbClamp = 1e-12;

void pinv_and_rank(const RMat& B, RMat& pinv, int& rank) {
  Eigen::SelfAdjointEigenSolver<RMat> es(B);
  const RVec& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  const double tol = 1e-9 * emax;
  const int d2 = static_cast<int>(B.rows());
  RVec inv = RVec::Zero(d2);
  rank = 0;
  if (emax > 0) {
    for (int a = 0; a < d2; ++a) {
      if (ev(a) > tol) {
        inv(a) = 1.0 / ev(a);
        ++rank;
      }
    }
  }
  pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

std::vector<InfoMatrix> compute_B(const ProbeSet& probes, const Povm& povm_true,
                                  const RVec& shot_fractions) {
  const int M = probes.count();
  if (shot_fractions.size() != M)
    throw std::invalid_argument("compute_B: shape-error (shot_fractions length)");
  if (shot_fractions.minCoeff() < 0 || std::abs(shot_fractions.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("compute_B: shot_fractions must be a distribution");

  const RMat p = born_probabilities(povm_true, probes);
  const int n = static_cast<int>(p.rows());
  const int d2 = static_cast<int>(probes.X.cols());

  std::vector<InfoMatrix> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    InfoMatrix& im = out[static_cast<std::size_t>(i)];
    im.B = RMat::Zero(d2, d2);
    for (int j = 0; j < M; ++j) {
      double pij = p(i, j);
      if (pij < kProbClamp || pij > 1.0 - kProbClamp) {
        pij = std::clamp(pij, kProbClamp, 1.0 - kProbClamp);
        ++im.clamped;
      }
      if (shot_fractions(j) == 0.0) continue;
      const double w = shot_fractions(j) / (pij - pij * pij);
      im.B += w * (probes.X.row(j).transpose() * probes.X.row(j));
    }
    im.B = 0.5 * (im.B + im.B.transpose()).eval();
    pinv_and_rank(im.B, im.B_pinv, im.rank);
  }
  return out;
}

RangeVerdict range_condition(const RVec& theta, const RMat& S, const RMat& B, double rtol) {
  RangeVerdict v;
  const double tnorm = theta.norm();
  if (tnorm == 0.0) {
    v.in_range = true;
    v.residual = 0.0;
    return v;
  }
  const RMat T = S * B;
  Eigen::JacobiSVD<RMat> svd(T, Eigen::ComputeThinU);
  const RVec& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  RVec proj = RVec::Zero(theta.size());
  if (smax > 0) {
    const double tol = rtol * smax;
    int r = 0;
    for (int a = 0; a < sv.size(); ++a)
      if (sv(a) > tol) ++r;
    const RMat Ur = svd.matrixU().leftCols(r);
    proj = Ur * (Ur.transpose() * theta);
  }
  v.residual = (theta - proj).norm() / tnorm;
  v.in_range = v.residual <= rtol;
  return v;
}

bool gamma_membership(const RMat& S, const RVec& theta, const RMat& B, double tol) {
  RMat Bp;
  int rank = 0;
  pinv_and_rank(0.5 * (B + B.transpose()), Bp, rank);
  const double id_resid = (theta - B * (Bp * theta)).norm();
  if (id_resid > 1e-8 * (1.0 + theta.norm()))
    throw std::runtime_error(
        "gamma_membership: not-applicable (theta outside range(B), identifiability violated)");

  const double snorm = S.norm();
  if ((S - S.transpose()).norm() > 1e-8 * (1.0 + snorm)) return false;
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (S + S.transpose()));
  const double emax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-8 * (1.0 + emax)) return false;

  const double resid = (Bp * B * S - theta * theta.transpose()).norm();
  return resid <= tol * (1.0 + theta.squaredNorm());
}

double min_mse_value(const RVec& theta, const RMat& B, double N) {
  const int d2 = static_cast<int>(theta.size());
  const RMat A = N * (B * (theta * theta.transpose())) + RMat::Identity(d2, d2);
  Eigen::PartialPivLU<RMat> lu(A);
  return theta.dot(lu.solve(theta));
}

bool similarity_check(const RMat& S, const RMat& B) {
  const RMat T = S * B;
  Eigen::EigenSolver<RMat> es(T);
  if (es.info() != Eigen::Success) return false;
  const auto& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int a = 0; a < ev.size(); ++a) {
    if (std::abs(ev(a).imag()) > 1e-8 * scale) return false;
    if (ev(a).real() < -1e-8 * scale) return false;
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(es.eigenvectors());
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin <= 0 || sv(0) / smin >= 1e10) return false;
  return true;
}

namespace {

std::vector<RVec> true_thetas(const Povm& povm, const HermitianBasis& basis) {
  const int n = povm.n_outcomes();
  std::vector<RVec> thetas;
  thetas.reserve(static_cast<std::size_t>(n));
  for (const auto& P : povm.elements) {
    const RVec lam = parameterize(P, basis);
    thetas.push_back(theta_from_lambda(lam, n, povm.dim()));
  }
  return thetas;
}

std::string format_g12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace

RMat surrogate_S(const KernelSpec& spec, int d2, const RVec& theta_true, const RVec& rough0) {
  switch (spec.kind) {
    case KernelKind::none:
    case KernelKind::tikhonov:
      return RMat::Identity(d2, d2);
    case KernelKind::di:
    case KernelKind::tc:
    case KernelKind::dc: {
      Regularizer reg = materialize(spec, d2);
      return reg.mat;
    }
    case KernelKind::rank1_adaptive:
      return rough0 * rough0.transpose();
    case KernelKind::fullrank_adaptive: {
      if (!spec.base_kernel)
        throw std::runtime_error("scaling_study: missing-context (adaptive base kernel)");
      Regularizer base = materialize(*spec.base_kernel, d2);
      if (!base.is_S)
        throw std::runtime_error("scaling_study: invalid-kernel (adaptive base must be S-form)");
      return rough0 * rough0.transpose() + base.mat;
    }
    case KernelKind::best_oracle:
      return theta_true * theta_true.transpose();
  }
  return RMat::Identity(d2, d2);
}

ScalingTable scaling_study(const ScalingConfig& cfg, const ProbeSet& probes,
                           const Povm& detector, const HermitianBasis& basis) {
  const int M = probes.count();
  const int nN = static_cast<int>(cfg.N_grid.size());
  const int nK = static_cast<int>(cfg.kernels.size());
  if (nN == 0 || nK == 0 || cfg.trials <= 0)
    throw std::invalid_argument("scaling_study: empty grid, kernel list, or trial count");

  RVec h = cfg.shot_fractions;
  if (h.size() == 0) h = RVec::Constant(M, 1.0 / M);
  if (h.size() != M) throw std::invalid_argument("scaling_study: shape-error (shot_fractions)");

  const RMat p_true = born_probabilities(detector, probes);
  const int d2 = static_cast<int>(probes.X.cols());
  const std::vector<RVec> thetas = true_thetas(detector, basis);
  const int n_out = detector.n_outcomes();

  std::vector<KernelSpec> kernels = cfg.kernels;
  for (auto& k : kernels)
    if (k.kind == KernelKind::best_oracle && !k.oracle_theta) k.oracle_theta = thetas;

  // noiseless rough estimate for the adaptive-kernel verdict tags
  std::vector<RVec> ybar0(static_cast<std::size_t>(n_out));
  for (int i = 0; i < n_out; ++i)
    ybar0[static_cast<std::size_t>(i)] =
        p_true.row(i).transpose().array() - 1.0 / double(n_out);
  const Estimate rough0 = ls_estimate(probes, ybar0, basis, SolveMode::pseudo_inverse);

  const auto infos = compute_B(probes, detector, h);
  std::vector<std::string> verdicts(static_cast<std::size_t>(nK));
  for (int k = 0; k < nK; ++k) {
    bool all_hold = true;
    for (int i = 0; i < n_out; ++i) {
      const RMat S = surrogate_S(kernels[static_cast<std::size_t>(k)], d2,
                                 thetas[static_cast<std::size_t>(i)],
                                 rough0.theta_hat[static_cast<std::size_t>(i)]);
      const auto rv = range_condition(thetas[static_cast<std::size_t>(i)], S,
                                      infos[static_cast<std::size_t>(i)].B, 1e-8);
      if (!rv.in_range) all_hold = false;
    }
    verdicts[static_cast<std::size_t>(k)] = all_hold ? "holds" : "fails";
  }

  // one result slot per (kernel, N, trial); tasks enumerate (N, trial)
  std::vector<double> mse(static_cast<std::size_t>(nK) * nN * cfg.trials, 0.0);
  std::vector<double> runtime(static_cast<std::size_t>(nK) * nN, 0.0);
  std::mutex runtime_mu;
  std::atomic<int> next_task{0};
  const int n_tasks = nN * cfg.trials;
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&]() {
    for (;;) {
      const int task = next_task.fetch_add(1);
      if (task >= n_tasks) return;
      try {
        const int n_index = task / cfg.trials;
        const int trial = task % cfg.trials;
        const std::int64_t N = cfg.N_grid[static_cast<std::size_t>(n_index)];
        auto rng = make_stream(cfg.seed, static_cast<std::uint64_t>(trial),
                               stage::counts + static_cast<std::uint64_t>(n_index));
        const auto shots_all = round_shots(h, N);
        // probes rounded to zero shots carry no data; sample the support only
        std::vector<std::int64_t> shots;
        ProbeSet sub;
        RMat psub;
        const ProbeSet* pp = &probes;
        const RMat* pm = &p_true;
        int M_act = 0;
        for (auto s : shots_all)
          if (s > 0) ++M_act;
        if (M_act < M) {
          sub.dim = probes.dim;
          sub.X.resize(M_act, d2);
          psub.resize(p_true.rows(), M_act);
          int r = 0;
          for (int j = 0; j < M; ++j) {
            if (shots_all[static_cast<std::size_t>(j)] <= 0) continue;
            sub.states.push_back(probes.states[static_cast<std::size_t>(j)]);
            sub.X.row(r) = probes.X.row(j);
            psub.col(r) = p_true.col(j);
            shots.push_back(shots_all[static_cast<std::size_t>(j)]);
            ++r;
          }
          pp = &sub;
          pm = &psub;
        } else {
          shots = shots_all;
        }
        const MeasurementRecord rec = sample_counts(*pm, shots, rng);
        const WeightedData wd = build_weighted_data(rec, *pp);
        std::vector<double> local_rt(static_cast<std::size_t>(nK), 0.0);
        for (int k = 0; k < nK; ++k) {
          const auto t0 = std::chrono::steady_clock::now();
          const Estimate est = estimate_kernel(wd, kernels[static_cast<std::size_t>(k)], basis);
          const CorrectionResult corr =
              detector.block_structure.empty()
                  ? correct_to_povm(est.E_hat)
                  : correct_blockwise(est.E_hat, detector.block_structure);
          double m = 0.0;
          for (int i = 0; i < n_out; ++i)
            m += (corr.corrected.elements[static_cast<std::size_t>(i)] -
                  detector.elements[static_cast<std::size_t>(i)])
                     .squaredNorm();
          mse[(static_cast<std::size_t>(k) * nN + n_index) * cfg.trials + trial] = m;
          const auto t1 = std::chrono::steady_clock::now();
          local_rt[static_cast<std::size_t>(k)] =
              std::chrono::duration<double>(t1 - t0).count();
        }
        std::lock_guard<std::mutex> lk(runtime_mu);
        for (int k = 0; k < nK; ++k)
          runtime[static_cast<std::size_t>(k) * nN + n_index] +=
              local_rt[static_cast<std::size_t>(k)];
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int n_threads = cfg.threads;
  if (n_threads <= 0) n_threads = static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, n_tasks));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  ScalingTable table;
  for (int k = 0; k < nK; ++k) {
    std::vector<double> means(static_cast<std::size_t>(nN), 0.0);
    for (int ni = 0; ni < nN; ++ni) {
      double sum = 0.0;
      for (int t = 0; t < cfg.trials; ++t)
        sum += mse[(static_cast<std::size_t>(k) * nN + ni) * cfg.trials + t];
      means[static_cast<std::size_t>(ni)] = sum / cfg.trials;
    }
    const double slope = fit_top_decade_slope(cfg.N_grid, means);
    for (int ni = 0; ni < nN; ++ni) {
      ScalingRow row;
      row.kernel = kernels[static_cast<std::size_t>(k)].describe();
      row.N = cfg.N_grid[static_cast<std::size_t>(ni)];
      row.trials = cfg.trials;
      row.mean_mse = means[static_cast<std::size_t>(ni)];
      double var = 0.0;
      for (int t = 0; t < cfg.trials; ++t) {
        const double d =
            mse[(static_cast<std::size_t>(k) * nN + ni) * cfg.trials + t] - row.mean_mse;
        var += d * d;
      }
      row.std_mse = cfg.trials > 1 ? std::sqrt(var / (cfg.trials - 1)) : 0.0;
      row.slope = slope;
      row.range_condition = verdicts[static_cast<std::size_t>(k)];
      row.runtime_s = runtime[static_cast<std::size_t>(k) * nN + ni];
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

double fit_top_decade_slope(const std::vector<std::int64_t>& Ns,
                            const std::vector<double>& mses) {
  if (Ns.size() != mses.size() || Ns.empty())
    return std::numeric_limits<double>::quiet_NaN();
  const double nmax = double(*std::max_element(Ns.begin(), Ns.end()));
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (double(Ns[i]) >= nmax / 10.0 - 0.5 && mses[i] > 0) {
      xs.push_back(std::log10(double(Ns[i])));
      ys.push_back(std::log10(mses[i]));
    }
  }
  const std::size_t m = xs.size();
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = m * sxx - sx * sx;
  if (denom == 0) return std::numeric_limits<double>::quiet_NaN();
  return (m * sxy - sx * sy) / denom;
}

std::string scaling_table_to_csv(const ScalingTable& table) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    q += '"';
    return q;
  };
  std::ostringstream os;
  os << "kernel,N,trials,mean_mse,std_mse,slope,range_condition,runtime_s\n";
  for (const auto& r : table.rows) {
    os << quote(r.kernel) << ',' << r.N << ',' << r.trials << ',' << format_g12(r.mean_mse)
       << ',' << format_g12(r.std_mse) << ',' << format_g12(r.slope) << ','
       << r.range_condition << ',' << format_g12(r.runtime_s) << '\n';
  }
  return os.str();
}

}  // namespace qdt
