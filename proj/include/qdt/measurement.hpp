#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "qdt/states.hpp"

namespace qdt {

struct MeasurementRecord {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;  // n x M
  std::vector<std::int64_t> shots;                                     // N_j
  RMat freqs;                                                          // phat
  std::int64_t total_shots = 0;

  int n_outcomes() const { return static_cast<int>(counts.rows()); }
  int n_probes() const { return static_cast<int>(counts.cols()); }
};

// p_ij = Tr(P_i rho_j); each probe's trace deficit is folded into the last
// row so columns sum to 1.
RMat born_probabilities(const Povm& povm, const ProbeSet& probes);

// Multinomial per column via sequential binomial decomposition (keeps the
// draw count independent of N, so N = 1e8+ stays cheap and streams stay
// reproducible).
MeasurementRecord sample_counts(const RMat& p, const std::vector<std::int64_t>& shots,
                                std::mt19937_64& rng);

// Weighted regression data per outcome. ybar is the raw centered response
// (phat_i - 1/n); weights use phat clamped to [1/(2N_j), 1 - 1/(2N_j)], the
// clamp never touches ybar. sigma = 1 throughout.
struct WeightedData {
  int n_outcomes = 0;
  double sigma = 1.0;
  RMat X;                     // raw design, M x d^2
  std::vector<RVec> weights;  // W_i, length M
  std::vector<RVec> ybar;
  std::vector<RVec> ytilde;   // sqrt(W_i) ybar / sigma
  std::vector<RMat> Xtilde;   // diag(sqrt(W_i)) X / sigma
};

WeightedData build_weighted_data(const MeasurementRecord& rec, const ProbeSet& probes);

// CSV columns: outcome_index, probe_index, count, shots.
void record_to_csv(const MeasurementRecord& rec, std::ostream& os);
MeasurementRecord record_from_csv(std::istream& is);

}  // namespace qdt
