#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "qdt/basis.hpp"
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

}  // namespace

TEST_CASE("born probabilities columns sum to one, deficit in last row") {
  const Povm P = example_detector("group_I");
  const HermitianBasis b = build_basis(6, BasisOrdering::gellmann_default);
  // truncated probe: trace < 1, deficit must land in the last outcome row
  std::vector<DensityMatrix> states = {two_mode_coherent(0.4, 0.3, 0.5)};
  REQUIRE(states[0].trace_deficit > 1e-6);
  const ProbeSet probes = build_probe_set(states, b);
  const RMat p = born_probabilities(P, probes);
  REQUIRE(p.rows() == 2);
  REQUIRE(p.cols() == 1);
  CHECK(p.col(0).sum() == Catch::Approx(1.0).margin(1e-12));
  const double raw_last = (P.elements[1] * states[0].mat).trace().real();
  CHECK(p(1, 0) == Catch::Approx(raw_last + states[0].trace_deficit).margin(1e-12));
  CHECK(p.minCoeff() >= 0.0);
}

TEST_CASE("born probabilities for an exact probe set need no folding") {
  const Povm P = example_detector("paper_d4");
  const ProbeSet probes = haar_probes(4, 6, 21);
  const RMat p = born_probabilities(P, probes);
  for (int j = 0; j < 6; ++j) {
    CHECK(p.col(j).sum() == Catch::Approx(1.0).margin(1e-12));
    for (int i = 0; i < 3; ++i) {
      const double direct = (P.elements[i] * probes.states[j].mat).trace().real();
      CHECK(p(i, j) == Catch::Approx(direct).margin(1e-12));
    }
  }
}

TEST_CASE("sampling is exact on degenerate distributions") {
  RMat p(3, 1);
  p << 1.0, 0.0, 0.0;
  auto rng = make_stream(4, 0, stage::counts);
  const MeasurementRecord rec = sample_counts(p, {50}, rng);
  CHECK(rec.counts(0, 0) == 50);
  CHECK(rec.counts(1, 0) == 0);
  CHECK(rec.counts(2, 0) == 0);
  CHECK(rec.freqs(0, 0) == 1.0);
  CHECK(rec.total_shots == 50);
}

TEST_CASE("sampled counts sum to the requested shots and are reproducible") {
  RMat p(3, 2);
  p << 0.2, 0.5, 0.3, 0.25, 0.5, 0.25;
  auto rng = make_stream(9, 1, stage::counts);
  const MeasurementRecord rec = sample_counts(p, {1000, 2000}, rng);
  CHECK(rec.counts.col(0).sum() == 1000);
  CHECK(rec.counts.col(1).sum() == 2000);
  CHECK(rec.shots == std::vector<std::int64_t>{1000, 2000});
  CHECK(rec.total_shots == 3000);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 3; ++i)
      CHECK(rec.freqs(i, j) == Catch::Approx(double(rec.counts(i, j)) / rec.shots[j]));
  auto rng2 = make_stream(9, 1, stage::counts);
  const MeasurementRecord rec2 = sample_counts(p, {1000, 2000}, rng2);
  CHECK((rec.counts - rec2.counts).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("sampling validates its inputs") {
  RMat p(2, 1);
  p << 0.6, 0.3;  // column sums to 0.9
  auto rng = make_stream(1, 0, stage::counts);
  CHECK_THROWS_WITH(sample_counts(p, {10}, rng),
                    Catch::Matchers::ContainsSubstring("invalid-distribution"));
  RMat q(2, 1);
  q << 0.5, 0.5;
  CHECK_THROWS_WITH(sample_counts(q, {0}, rng),
                    Catch::Matchers::ContainsSubstring("invalid-shots"));
  CHECK_THROWS_WITH(sample_counts(q, {10, 10}, rng),
                    Catch::Matchers::ContainsSubstring("shape-error"));
}

TEST_CASE("sampled frequency variance matches the binomial law") {
  RMat p(2, 1);
  p << 0.3, 0.7;
  const int N = 10000, reps = 2000;
  auto rng = make_stream(77, 0, stage::counts);
  double mean = 0.0, m2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const MeasurementRecord rec = sample_counts(p, {N}, rng);
    const double f = rec.freqs(0, 0);
    mean += f;
    m2 += f * f;
  }
  mean /= reps;
  const double var = m2 / reps - mean * mean;
  const double expect = 0.3 * 0.7 / N;
  CHECK(mean == Catch::Approx(0.3).margin(5e-4));
  CHECK(var == Catch::Approx(expect).epsilon(0.15));
}

TEST_CASE("weighted data applies the documented clamp to weights only") {
  const ProbeSet probes = haar_probes(2, 3, 5);
  MeasurementRecord rec;
  rec.counts.resize(2, 3);
  rec.counts << 0, 50, 100, 100, 50, 0;
  rec.shots = {100, 100, 100};
  rec.total_shots = 300;
  rec.freqs.resize(2, 3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 2; ++i) rec.freqs(i, j) = rec.counts(i, j) / 100.0;
  const WeightedData wd = build_weighted_data(rec, probes);
  REQUIRE(wd.n_outcomes == 2);
  REQUIRE(wd.weights[0].size() == 3);
  // phat = 0 clamps to 1/(2N) = 0.005 for the weight: N/(p - p^2)
  const double eps = 0.005;
  CHECK(wd.weights[0](0) == Catch::Approx(100.0 / (eps - eps * eps)).epsilon(1e-12));
  CHECK(wd.weights[0](1) == Catch::Approx(100.0 / 0.25).epsilon(1e-12));
  CHECK(wd.weights[1](2) == Catch::Approx(100.0 / (eps - eps * eps)).epsilon(1e-12));
  // ybar keeps the raw frequency: phat - 1/n
  CHECK(wd.ybar[0](0) == Catch::Approx(-0.5).margin(1e-15));
  CHECK(wd.ybar[0](2) == Catch::Approx(0.5).margin(1e-15));
  CHECK(wd.sigma == 1.0);
}

TEST_CASE("whitened design reproduces the weighted normal matrix") {
  const Povm P = example_detector("paper_d4");
  const ProbeSet probes = haar_probes(4, 20, 31);
  const RMat p = born_probabilities(P, probes);
  auto rng = make_stream(8, 0, stage::counts);
  const MeasurementRecord rec = sample_counts(p, std::vector<std::int64_t>(20, 500), rng);
  const WeightedData wd = build_weighted_data(rec, probes);
  for (int i = 0; i < wd.n_outcomes; ++i) {
    const RMat R1 = wd.Xtilde[i].transpose() * wd.Xtilde[i];
    const RMat R2 = wd.X.transpose() * wd.weights[i].asDiagonal() * wd.X;
    CHECK((R1 - R2).norm() < 1e-10 * R2.norm());
    const RVec F1 = wd.Xtilde[i].transpose() * wd.ytilde[i];
    const RVec F2 = wd.X.transpose() * (wd.weights[i].array() * wd.ybar[i].array()).matrix();
    CHECK((F1 - F2).norm() < 1e-10 * F2.norm());
  }
}

TEST_CASE("measurement record csv round trip") {
  RMat p(3, 2);
  p << 0.2, 0.5, 0.3, 0.25, 0.5, 0.25;
  auto rng = make_stream(3, 2, stage::counts);
  const MeasurementRecord rec = sample_counts(p, {123, 456}, rng);
  std::stringstream ss;
  record_to_csv(rec, ss);
  const MeasurementRecord back = record_from_csv(ss);
  CHECK((rec.counts - back.counts).cwiseAbs().maxCoeff() == 0);
  CHECK(rec.shots == back.shots);
  CHECK(rec.total_shots == back.total_shots);
  CHECK((rec.freqs - back.freqs).norm() < 1e-12);
  std::stringstream bad("outcome_index,probe_index,count,shots\n0,0,5,x\n");
  CHECK_THROWS(record_from_csv(bad));
}
