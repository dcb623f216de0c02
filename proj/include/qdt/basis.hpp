#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace qdt {

using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Cplx = std::complex<double>;

enum class BasisOrdering { gellmann_default, pauli_tensor };

// Orthonormal Hermitian operator basis {Omega_a}, a = 1..d^2, under the
// Hilbert-Schmidt inner product Tr(A^dag B). Omega_1 = I/sqrt(d); the rest
// are traceless. The index order is frozen (kernels depend on it):
//   gellmann_default: identity, real-symmetric pairs (j<k) row-major,
//     imaginary-antisymmetric pairs (j<k) row-major, diagonal traceless.
//   pauli_tensor (d = 2^k): normalized k-fold tensor products of
//     {I, sigma_z, sigma_x, sigma_y}, tuples sorted by (number of
//     off-diagonal letters, lexicographic I < z < x < y).
struct HermitianBasis {
  int dim = 0;
  std::vector<CMat> ops;
  std::string ordering_tag;

  int size() const { return static_cast<int>(ops.size()); }
};

HermitianBasis build_basis(int d, BasisOrdering ordering);

// lambda_a = Tr(Omega_a H). Input must be Hermitian within 1e-10; it is
// symmetrized before projection.
RVec parameterize(const CMat& H, const HermitianBasis& basis);

// sum_a v_a Omega_a.
CMat deparameterize(const RVec& v, const HermitianBasis& basis);

// theta = lambda - dvec/n with dvec = (sqrt(d), 0, ..., 0)^T.
RVec theta_from_lambda(const RVec& lambda, int n_outcomes, int d);
RVec lambda_from_theta(const RVec& theta, int n_outcomes, int d);

}  // namespace qdt
