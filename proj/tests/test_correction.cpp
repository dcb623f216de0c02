#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "qdt/correction.hpp"
#include "qdt/rng.hpp"
#include "qdt/states.hpp"

using namespace qdt;

namespace {

double min_eig(const CMat& H) {
  Eigen::SelfAdjointEigenSolver<CMat> es(H);
  return es.eigenvalues().minCoeff();
}

void check_povm_invariants(const Povm& P) {
  const int d = P.dim();
  CMat sum = CMat::Zero(d, d);
  for (const auto& E : P.elements) {
    CHECK((E - E.adjoint()).norm() < 1e-12);
    CHECK(min_eig(E) >= -1e-10);
    sum += E;
  }
  CHECK((sum - CMat::Identity(d, d)).norm() <= 1e-10);
}

std::vector<CMat> perturbed_povm(const Povm& base, double eps, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<CMat> raw;
  for (const auto& E : base.elements) {
    CMat noise(E.rows(), E.cols());
    for (int i = 0; i < E.rows(); ++i)
      for (int j = 0; j < E.cols(); ++j) noise(i, j) = Cplx(g(rng), g(rng));
    noise = 0.5 * (noise + noise.adjoint()).eval();
    raw.push_back(E + eps * noise);
  }
  return raw;
}

}  // namespace

TEST_CASE("a valid povm passes through unchanged") {
  const Povm P = example_detector("paper_d4");
  const CorrectionResult res = correct_to_povm(P.elements);
  CHECK(res.distance <= 1e-12);
  CHECK(res.clipped_mass <= 1e-12);
  for (int i = 0; i < 3; ++i)
    CHECK((res.corrected.elements[i] - P.elements[i]).norm() < 1e-12);
}

TEST_CASE("single-outcome completeness repair") {
  // raw = 0.9 I must be pulled back to I (distance 0.1 * sqrt(d))
  const CMat raw = 0.9 * CMat::Identity(2, 2);
  const CorrectionResult res = correct_to_povm({raw});
  CHECK((res.corrected.elements[0] - CMat::Identity(2, 2)).norm() < 1e-12);
  CHECK(res.distance == Catch::Approx(0.1 * std::sqrt(2.0)).margin(1e-10));
}

TEST_CASE("correction is idempotent") {
  const Povm base = example_detector("paper_d4");
  auto rng = make_stream(30, 0, stage::perturb);
  const auto raw = perturbed_povm(base, 0.05, rng);
  const CorrectionResult once = correct_to_povm(raw);
  const CorrectionResult twice = correct_to_povm(once.corrected.elements);
  CHECK(twice.distance <= 1e-10);
  for (int i = 0; i < 3; ++i)
    CHECK((twice.corrected.elements[i] - once.corrected.elements[i]).norm() < 1e-10);
}

TEST_CASE("randomized perturbations always land on a valid povm") {
  const Povm d4 = example_detector("paper_d4");
  const Povm d8 = example_detector("paper_d8", 3);
  auto rng = make_stream(31, 0, stage::perturb);
  std::uniform_real_distribution<double> u(0.001, 0.3);
  for (int rep = 0; rep < 100; ++rep) {
    const Povm& base = (rep % 2 == 0) ? d4 : d8;
    const auto raw = perturbed_povm(base, u(rng), rng);
    const CorrectionResult res = correct_to_povm(raw);
    check_povm_invariants(res.corrected);
    // geometric convergence: worst observed ~60 passes at the largest
    // perturbations, far below the 200-pass cap
    CHECK(res.passes <= 100);
    CHECK(res.distance >= 0.0);
  }
}

TEST_CASE("vanishing traces trigger the uniform repair") {
  const std::vector<CMat> raw = {-0.5 * CMat::Identity(2, 2),
                                 -0.5 * CMat::Identity(2, 2)};
  const CorrectionResult res = correct_to_povm(raw);
  check_povm_invariants(res.corrected);
  // symmetric input, symmetric output
  CHECK((res.corrected.elements[0] - res.corrected.elements[1]).norm() < 1e-10);
  CHECK((res.corrected.elements[0] - 0.5 * CMat::Identity(2, 2)).norm() < 1e-10);
}

TEST_CASE("correction rejects malformed input") {
  CHECK_THROWS(correct_to_povm({}));
  CMat notherm(2, 2);
  notherm << 1.0, Cplx(0.5, 0.1), Cplx(0.5, -0.2), 1.0;
  CHECK_THROWS_WITH(correct_to_povm({notherm}),
                    Catch::Matchers::ContainsSubstring("symmetry-violation"));
  CHECK_THROWS_WITH(correct_to_povm({CMat::Identity(2, 2), CMat::Identity(3, 3)}),
                    Catch::Matchers::ContainsSubstring("shape-error"));
}

TEST_CASE("blockwise correction zeroes off-block entries and fixes blocks") {
  const Povm base = example_detector("group_I");
  auto rng = make_stream(32, 0, stage::perturb);
  std::normal_distribution<double> g;
  // perturb densely so off-block entries are nonzero going in
  std::vector<CMat> raw;
  for (const auto& E : base.elements) {
    CMat noise(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) noise(i, j) = Cplx(g(rng), g(rng));
    noise = 0.5 * (noise + noise.adjoint()).eval();
    raw.push_back(E + 0.02 * noise);
  }
  REQUIRE(std::abs(raw[0](0, 3)) > 0.0);
  const CorrectionResult res = correct_blockwise(raw, {1, 2, 3});
  check_povm_invariants(res.corrected);
  CHECK(res.corrected.block_structure == std::vector<int>{1, 2, 3});
  for (const auto& E : res.corrected.elements) {
    CHECK(std::abs(E(0, 1)) == 0.0);
    CHECK(std::abs(E(0, 3)) == 0.0);
    CHECK(std::abs(E(1, 3)) == 0.0);
    CHECK(std::abs(E(2, 5)) == 0.0);
  }
  CHECK_THROWS_WITH(correct_blockwise(raw, {1, 2}),
                    Catch::Matchers::ContainsSubstring("shape-error"));
}

TEST_CASE("blockwise distance includes the discarded off-block mass") {
  const Povm base = example_detector("group_I");
  // pure off-block perturbation: corrected == base, distance > 0
  std::vector<CMat> raw = base.elements;
  raw[0](0, 3) += Cplx(0.01, 0.0);
  raw[0](3, 0) += Cplx(0.01, 0.0);
  const CorrectionResult res = correct_blockwise(raw, {1, 2, 3});
  CHECK(res.distance > 0.01);
  for (int i = 0; i < 2; ++i)
    CHECK((res.corrected.elements[i] - base.elements[i]).norm() < 1e-10);
}
