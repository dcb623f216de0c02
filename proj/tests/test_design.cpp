#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "qdt/basis.hpp"
#include "qdt/design.hpp"
#include "qdt/measurement.hpp"
#include "qdt/rng.hpp"
#include "qdt/states.hpp"

using namespace qdt;

namespace {

ProbeSet haar_probes(int d, int M, std::uint64_t seed) {
  const HermitianBasis b = build_basis(d, BasisOrdering::gellmann_default);
  std::vector<DensityMatrix> states;
  for (int j = 0; j < M; ++j) {
    auto rng = make_stream(seed, j, stage::probes);
    states.push_back(random_pure_state(d, rng));
  }
  return build_probe_set(states, b);
}

double design_objective(const ProbeSet& probes, const RMat& w, const RVec& eta) {
  double f = 0.0;
  const int d2 = static_cast<int>(probes.X.cols());
  for (int i = 0; i < w.rows(); ++i) {
    RMat A = RMat::Zero(d2, d2);
    for (int j = 0; j < probes.count(); ++j)
      A += eta(j) * w(i, j) * probes.X.row(j).transpose() * probes.X.row(j);
    f += A.inverse().trace();
  }
  return f;
}

}  // namespace

TEST_CASE("symmetric two-probe problem splits evenly") {
  // X = I2: two orthogonal probes, equal weights -> eta = (1/2, 1/2)
  ProbeSet probes;
  probes.X = RMat::Identity(2, 2);
  probes.dim = 0;
  const RMat w = RMat::Ones(1, 2);
  const ResourceDistribution res = optimize_distribution(probes, w);
  CHECK(res.converged);
  CHECK(res.eta(0) == Catch::Approx(0.5).margin(1e-9));
  CHECK(res.eta(1) == Catch::Approx(0.5).margin(1e-9));
  CHECK(res.certificate <= 1e-8);
}

TEST_CASE("asymmetric weights tilt the optimum as sqrt of the weight ratio") {
  // f = 1/(4 eta1) + 1/eta2 -> eta = (1/3, 2/3)
  ProbeSet probes;
  probes.X = RMat::Identity(2, 2);
  RMat w(1, 2);
  w << 4.0, 1.0;
  const ResourceDistribution res = optimize_distribution(probes, w);
  CHECK(res.eta(0) == Catch::Approx(1.0 / 3.0).margin(1e-6));
  CHECK(res.eta(1) == Catch::Approx(2.0 / 3.0).margin(1e-6));
  CHECK(res.objective == Catch::Approx(2.25).margin(1e-6));
}

TEST_CASE("full detector problem converges with a certificate") {
  const ProbeSet probes = haar_probes(4, 20, 71);
  const Povm P = example_detector("paper_d4");
  const RMat p = born_probabilities(P, probes);
  RMat w(3, 20);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 20; ++j) {
      const double pij = std::min(std::max(p(i, j), 1e-12), 1.0 - 1e-12);
      w(i, j) = 1.0 / (pij - pij * pij);
    }
  const ResourceDistribution res = optimize_distribution(probes, w);
  CHECK(res.converged);
  CHECK(res.certificate <= 1e-8);
  CHECK(res.eta.minCoeff() >= 0.0);
  CHECK(res.eta.sum() == Catch::Approx(1.0).margin(1e-10));
  const RVec uniform = RVec::Constant(20, 1.0 / 20);
  CHECK(res.objective < design_objective(probes, w, uniform));
  CHECK(res.objective == Catch::Approx(design_objective(probes, w, res.eta)).epsilon(1e-8));
}

TEST_CASE("rank-deficient probe sets are rejected") {
  ProbeSet probes;
  probes.X = RMat::Zero(2, 4);  // 2 probes cannot span d^2 = 4
  probes.X(0, 0) = 1.0;
  probes.X(1, 1) = 1.0;
  const RMat w = RMat::Ones(1, 2);
  CHECK_THROWS_WITH(optimize_distribution(probes, w),
                    Catch::Matchers::ContainsSubstring("not-identifiable"));
}

TEST_CASE("weight matrix shape and positivity are validated") {
  ProbeSet probes;
  probes.X = RMat::Identity(2, 2);
  CHECK_THROWS(optimize_distribution(probes, RMat::Ones(1, 3)));
  RMat neg = RMat::Ones(1, 2);
  neg(0, 1) = -1.0;
  CHECK_THROWS(optimize_distribution(probes, neg));
}

TEST_CASE("iteration cap raises a failure carrying the best iterate") {
  const ProbeSet probes = haar_probes(3, 12, 73);
  const RMat w = RMat::Ones(2, 12);
  DesignOptions opts;
  opts.max_iter = 0;
  try {
    optimize_distribution(probes, w, opts);
    FAIL("expected ConvergenceFailure");
  } catch (const ConvergenceFailure& e) {
    CHECK(e.best.eta.size() == 12);
    CHECK(e.best.eta.sum() == Catch::Approx(1.0).margin(1e-10));
    CHECK_FALSE(e.best.converged);
  }
}

TEST_CASE("largest-remainder rounding") {
  RVec eta(2);
  eta << 0.5, 0.5;
  CHECK(round_shots(eta, 100) == std::vector<std::int64_t>{50, 50});
  RVec eta3(3);
  eta3 << 0.4, 0.35, 0.25;
  const auto s = round_shots(eta3, 10);
  CHECK(std::accumulate(s.begin(), s.end(), std::int64_t{0}) == 10);
  // property check across odd totals and irrational fractions
  auto rng = make_stream(74, 0, stage::perturb);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    RVec e(7);
    for (int j = 0; j < 7; ++j) e(j) = u(rng);
    e /= e.sum();
    const std::int64_t N = 999 + rep * 13;
    const auto shots = round_shots(e, N);
    CHECK(std::accumulate(shots.begin(), shots.end(), std::int64_t{0}) == N);
    for (int j = 0; j < 7; ++j) CHECK(std::abs(shots[j] - e(j) * N) < 1.0);
  }
}
