#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qdt/basis.hpp"

namespace qdt {

struct DensityMatrix {
  CMat mat;
  double trace_deficit = 0.0;  // mass lost to truncation, 0 for exact states

  int dim() const { return static_cast<int>(mat.rows()); }
};

struct Povm {
  std::vector<CMat> elements;
  std::vector<int> block_structure;  // empty unless block-diagonal

  int dim() const { return elements.empty() ? 0 : static_cast<int>(elements[0].rows()); }
  int n_outcomes() const { return static_cast<int>(elements.size()); }
};

struct ProbeSet {
  std::vector<DensityMatrix> states;
  RMat X;  // M x d^2, row j = phi_j^T
  bool informationally_complete = false;
  int dim = 0;

  int count() const { return static_cast<int>(states.size()); }
};

// Haar-random pure state |psi><psi| (normalized complex Gaussian vector).
DensityMatrix random_pure_state(int d, std::mt19937_64& rng);

// Haar-random unitary via phase-fixed QR of a complex Gaussian matrix.
CMat random_unitary(int d, std::mt19937_64& rng);

// d-dimensional truncation of the coherent state |alpha>; trace_deficit is
// the truncated tail mass.
DensityMatrix coherent_state_truncated(Cplx alpha, int d);

// Two-mode coherent state |alpha, beta e^{i delta}> truncated to total photon
// number <= tmax. Basis order is total-photon-number major: within photon
// number t the states (j, t-j) are listed with j descending, giving
// {|00>, |10>, |01>, |20>, |11>, |02>} for tmax = 2.
DensityMatrix two_mode_coherent(double alpha, double beta, double delta, int tmax = 2);

ProbeSet build_probe_set(const std::vector<DensityMatrix>& states,
                         const HermitianBasis& basis);

// Fixed example detectors: "paper_d4" (4-dim, 3 outcomes), "paper_d8"
// (8-dim random construction from two seeded unitaries), "group_I" and
// "group_II" (6-dim binary block-diagonal, blocks 1+2+3).
Povm example_detector(const std::string& name, std::uint64_t seed = 0);

// The 19 two-mode probe amplitude/phase combinations used with the group
// detectors (amplitudes from the published set, phases a documented
// convention; see README).
std::vector<DensityMatrix> group_probe_states();

// JSON detector schema: {"dim": d, "elements": [[[re, im], ...], ...],
// "block_structure": [d1, ...]?}; elements row-major.
Povm povm_from_json_text(const std::string& text);
std::string povm_to_json_text(const Povm& povm);

}  // namespace qdt
