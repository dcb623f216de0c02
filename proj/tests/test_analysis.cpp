#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "qdt/analysis.hpp"
#include "qdt/basis.hpp"
#include "qdt/estimators.hpp"
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

RMat random_psd(int n, int r, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  RMat G(n, r);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < r; ++j) G(i, j) = g(rng);
  return G * G.transpose();
}

}  // namespace

TEST_CASE("information matrix of a constant-variance detector") {
  // half/half detector: p = 1/2 everywhere, so B = (XtX/M) / 0.25
  Povm P;
  P.elements = {0.5 * CMat::Identity(2, 2), 0.5 * CMat::Identity(2, 2)};
  const ProbeSet probes = haar_probes(2, 6, 81);
  const RVec h = RVec::Constant(6, 1.0 / 6);
  const auto Bs = compute_B(probes, P, h);
  REQUIRE(Bs.size() == 2);
  const RMat want = (probes.X.transpose() * probes.X) / 6.0 / 0.25;
  for (const auto& ib : Bs) {
    CHECK((ib.B - want).norm() < 1e-10);
    CHECK(ib.clamped == 0);
    CHECK(ib.rank == 4);
    CHECK((ib.B * ib.B_pinv * ib.B - ib.B).norm() < 1e-8 * ib.B.norm());
  }
}

TEST_CASE("information matrix rank is bounded by the probe count") {
  const Povm P = example_detector("paper_d4");
  const ProbeSet few = haar_probes(4, 3, 82);
  const auto Bs = compute_B(few, P, RVec::Constant(3, 1.0 / 3));
  for (const auto& ib : Bs) CHECK(ib.rank <= 3);
  const ProbeSet many = haar_probes(4, 20, 83);
  const auto Bs2 = compute_B(many, P, RVec::Constant(20, 1.0 / 20));
  for (const auto& ib : Bs2) CHECK(ib.rank == 16);
}

TEST_CASE("shot fractions are validated") {
  const Povm P = example_detector("paper_d4");
  const ProbeSet probes = haar_probes(4, 5, 84);
  CHECK_THROWS(compute_B(probes, P, RVec::Constant(5, 0.3)));  // sums to 1.5
  RVec neg = RVec::Constant(5, 0.3);
  neg(0) = -0.2;
  CHECK_THROWS(compute_B(probes, P, neg));
  CHECK_THROWS(compute_B(probes, P, RVec::Constant(4, 0.25)));  // wrong length
}

TEST_CASE("range condition on full-rank, projected, and excluded cases") {
  RVec th(3);
  th << 1, 2, 3;
  const RMat I3 = RMat::Identity(3, 3);
  CHECK(range_condition(th, I3, I3).in_range);
  // S = theta theta^T: range is span(theta), which contains theta
  CHECK(range_condition(th, th * th.transpose(), I3).in_range);
  // S projects onto e1, theta = e2: excluded
  RMat S = RMat::Zero(3, 3);
  S(0, 0) = 1.0;
  RVec e2 = RVec::Zero(3);
  e2(1) = 1.0;
  const RangeVerdict v = range_condition(e2, S, I3);
  CHECK_FALSE(v.in_range);
  CHECK(v.residual == Catch::Approx(1.0).margin(1e-12));
  CHECK(range_condition(RVec::Zero(3), S, I3).in_range);  // vacuous
}

TEST_CASE("gamma membership for exact and perturbed priors") {
  RVec th(4);
  th << 0.3, -0.2, 0.9, 0.1;
  const RMat I4 = RMat::Identity(4, 4);
  CHECK(gamma_membership(th * th.transpose(), th, I4));
  // additive psd perturbation breaks the defining identity
  RVec v = RVec::Zero(4);
  v(0) = 1.0;
  CHECK_FALSE(gamma_membership(th * th.transpose() + 1e-2 * v * v.transpose(), th, I4));
  // non-symmetric S is rejected outright
  RMat asym = th * th.transpose();
  asym(0, 1) += 1e-3;
  CHECK_FALSE(gamma_membership(asym, th, I4));
}

TEST_CASE("gamma membership handles singular information matrices") {
  // B projects onto span(e1, e2); theta in that span stays decidable
  RMat B = RMat::Zero(3, 3);
  B(0, 0) = 2.0;
  B(1, 1) = 1.0;
  RVec th(3);
  th << 1.0, -0.5, 0.0;
  // S must satisfy B_pinv B S = theta theta^T; with theta in range(B),
  // B_pinv B is the projector onto span(e1,e2) and S = theta theta^T works
  CHECK(gamma_membership(th * th.transpose(), th, B));
  // theta outside range(B) is not decidable
  RVec out(3);
  out << 1.0, 0.0, 1.0;
  CHECK_THROWS_WITH(gamma_membership(out * out.transpose(), out, B),
                    Catch::Matchers::ContainsSubstring("not-applicable"));
}

TEST_CASE("minimum mse value closed form") {
  RVec th(1);
  th << 2.0;
  RMat B(1, 1);
  B << 1.0;
  // Tr[tt^T (N B tt^T + I)^{-1}] with tt^T = 4: 4/(4N+1)
  CHECK(min_mse_value(th, B, 0.0) == Catch::Approx(4.0).margin(1e-12));
  CHECK(min_mse_value(th, B, 1.0) == Catch::Approx(0.8).margin(1e-12));
  CHECK(min_mse_value(th, B, 100.0) == Catch::Approx(4.0 / 401.0).margin(1e-14));
  // monotone decreasing in N
  auto rng = make_stream(85, 0, stage::perturb);
  const RMat Bm = random_psd(5, 5, rng) + 0.1 * RMat::Identity(5, 5);
  RVec t5(5);
  t5 << 0.4, -1.0, 0.2, 0.0, 0.7;
  double prev = min_mse_value(t5, Bm, 0.0);
  CHECK(prev == Catch::Approx(t5.squaredNorm()).margin(1e-10));
  for (double N : {1.0, 10.0, 100.0, 1e4}) {
    const double cur = min_mse_value(t5, Bm, N);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("minimum mse equals the oracle prior's closed-form mse") {
  auto rng = make_stream(86, 0, stage::perturb);
  for (int rep = 0; rep < 10; ++rep) {
    const int d2 = 6;
    const RMat B = random_psd(d2, d2, rng) + 0.05 * RMat::Identity(d2, d2);
    RVec th(d2);
    std::normal_distribution<double> g;
    for (int i = 0; i < d2; ++i) th(i) = g(rng);
    const double N = 50.0;
    Regularizer oracle{true, th * th.transpose()};
    const MsemReport rep_o = msem_closed_form(N * B, oracle, th);
    CHECK(rep_o.trace == Catch::Approx(min_mse_value(th, B, N)).margin(1e-10));
  }
}

TEST_CASE("similarity check accepts psd products and flags violations") {
  const RMat I2 = RMat::Identity(2, 2);
  CHECK(similarity_check(I2, I2));
  auto rng = make_stream(87, 0, stage::perturb);
  for (int rep = 0; rep < 100; ++rep) {
    const RMat S = random_psd(6, 3, rng);
    const RMat B = random_psd(6, 6, rng) + 0.01 * RMat::Identity(6, 6);
    CHECK(similarity_check(S, B));
  }
  // an indefinite factor produces a negative eigenvalue of the product
  RMat Bneg = RMat::Identity(2, 2);
  Bneg(0, 0) = -1.0;
  CHECK_FALSE(similarity_check(I2, Bneg));
}

TEST_CASE("top-decade slope fit") {
  const std::vector<std::int64_t> Ns = {1000, 10000, 100000, 1000000};
  std::vector<double> mses;
  for (auto N : Ns) mses.push_back(5.0 / double(N));
  CHECK(fit_top_decade_slope(Ns, mses) == Catch::Approx(-1.0).margin(1e-12));
  // only the top decade participates: corrupt the low-N points
  std::vector<double> bent = mses;
  bent[0] = 100.0;
  bent[1] = 50.0;
  CHECK(fit_top_decade_slope(Ns, bent) == Catch::Approx(-1.0).margin(1e-12));
  CHECK(std::isnan(fit_top_decade_slope({1000}, {1.0})));
}

TEST_CASE("surrogate prior construction") {
  RVec th(4), rough(4);
  th << 1, 0, 0, 0;
  rough << 0.5, 0.5, 0, 0;
  KernelSpec none;
  CHECK((surrogate_S(none, 4, th, rough) - RMat::Identity(4, 4)).norm() == 0.0);
  KernelSpec tik;
  tik.kind = KernelKind::tikhonov;
  tik.c = 10;
  CHECK((surrogate_S(tik, 4, th, rough) - RMat::Identity(4, 4)).norm() == 0.0);
  KernelSpec di;
  di.kind = KernelKind::di;
  di.c = 0.1;
  di.mu = 0.9;
  CHECK(surrogate_S(di, 4, th, rough)(1, 1) == Catch::Approx(0.081));
  KernelSpec r1;
  r1.kind = KernelKind::rank1_adaptive;
  CHECK((surrogate_S(r1, 4, th, rough) - rough * rough.transpose()).norm() < 1e-15);
  KernelSpec oracle;
  oracle.kind = KernelKind::best_oracle;
  CHECK((surrogate_S(oracle, 4, th, rough) - th * th.transpose()).norm() < 1e-15);
}

TEST_CASE("scaling study is deterministic and thread-invariant") {
  const Povm P = example_detector("paper_d4");
  const HermitianBasis b = build_basis(4, BasisOrdering::gellmann_default);
  const ProbeSet probes = haar_probes(4, 20, 88);
  ScalingConfig cfg;
  cfg.N_grid = {10000, 100000};
  cfg.trials = 4;
  KernelSpec none;
  KernelSpec tik;
  tik.kind = KernelKind::tikhonov;
  tik.c = 10.0;
  cfg.kernels = {none, tik};
  cfg.seed = 99;
  cfg.threads = 1;
  const ScalingTable t1 = scaling_study(cfg, probes, P, b);
  REQUIRE(t1.rows.size() == 4);
  for (const auto& row : t1.rows) {
    CHECK(row.trials == 4);
    CHECK(row.mean_mse > 0.0);
    CHECK(row.std_mse >= 0.0);
    CHECK((row.range_condition == "holds" || row.range_condition == "fails"));
  }
  // larger N must help at these scales
  CHECK(t1.rows[1].mean_mse < t1.rows[0].mean_mse);
  cfg.threads = 4;
  const ScalingTable t4 = scaling_study(cfg, probes, P, b);
  for (size_t r = 0; r < t1.rows.size(); ++r) {
    CHECK(t1.rows[r].mean_mse == t4.rows[r].mean_mse);
    CHECK(t1.rows[r].std_mse == t4.rows[r].std_mse);
    CHECK(t1.rows[r].slope == t4.rows[r].slope);
  }
  const std::string csv = scaling_table_to_csv(t1);
  CHECK(csv.find("kernel") != std::string::npos);
  CHECK(csv.find("mean_mse") != std::string::npos);
}
