#include "qdt/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qdt {

namespace {

std::vector<CMat> gellmann_ops(int d) {
  std::vector<CMat> ops;
  ops.reserve(static_cast<std::size_t>(d) * d);
  ops.push_back(CMat::Identity(d, d) / std::sqrt(double(d)));
  const double r = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      CMat m = CMat::Zero(d, d);
      m(j, k) = r;
      m(k, j) = r;
      ops.push_back(m);
    }
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      CMat m = CMat::Zero(d, d);
      m(j, k) = Cplx(0, -r);
      m(k, j) = Cplx(0, r);
      ops.push_back(m);
    }
  for (int l = 1; l < d; ++l) {
    CMat m = CMat::Zero(d, d);
    for (int j = 0; j < l; ++j) m(j, j) = 1.0;
    m(l, l) = -double(l);
    m /= std::sqrt(double(l) * (l + 1));
    ops.push_back(m);
  }
  return ops;
}

std::vector<CMat> pauli_tensor_ops(int d) {
  int k = 0;
  while ((1 << k) < d) ++k;
  CMat id(2, 2), sz(2, 2), sx(2, 2), sy(2, 2);
  id << 1, 0, 0, 1;
  sz << 1, 0, 0, -1;
  sx << 0, 1, 1, 0;
  sy << 0, Cplx(0, -1), Cplx(0, 1), 0;
  const CMat letters[4] = {id, sz, sx, sy};
  const int offdiag[4] = {0, 0, 1, 1};

  std::vector<std::vector<int>> tuples;
  std::vector<int> cur(k, 0);
  for (;;) {
    tuples.push_back(cur);
    int pos = k - 1;
    while (pos >= 0 && cur[pos] == 3) cur[pos--] = 0;
    if (pos < 0) break;
    ++cur[pos];
  }
  std::stable_sort(tuples.begin(), tuples.end(),
                   [&](const std::vector<int>& a, const std::vector<int>& b) {
                     int na = 0, nb = 0;
                     for (int x : a) na += offdiag[x];
                     for (int x : b) nb += offdiag[x];
                     if (na != nb) return na < nb;
                     return a < b;
                   });

  std::vector<CMat> ops;
  ops.reserve(tuples.size());
  const double norm = 1.0 / std::sqrt(double(d));
  for (const auto& t : tuples) {
    CMat m = CMat::Ones(1, 1);
    for (int x : t) {
      CMat next(m.rows() * 2, m.cols() * 2);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          next.block(a * m.rows(), b * m.cols(), m.rows(), m.cols()) =
              letters[x](a, b) * m;
      m = next;
    }
    ops.push_back(norm * m);
  }
  return ops;
}

}  // namespace

HermitianBasis build_basis(int d, BasisOrdering ordering) {
  if (d < 2) throw std::invalid_argument("build_basis: invalid-dimension d=" + std::to_string(d));
  HermitianBasis b;
  b.dim = d;
  if (ordering == BasisOrdering::gellmann_default) {
    b.ops = gellmann_ops(d);
    b.ordering_tag = "gellmann_default";
  } else {
    if ((d & (d - 1)) != 0)
      throw std::invalid_argument(
          "build_basis: unsupported-ordering pauli_tensor needs d a power of 2, got " +
          std::to_string(d));
    b.ops = pauli_tensor_ops(d);
    b.ordering_tag = "pauli_tensor";
  }
  return b;
}

RVec parameterize(const CMat& H, const HermitianBasis& basis) {
  if (H.rows() != basis.dim || H.cols() != basis.dim)
    throw std::invalid_argument("parameterize: shape-error");
  const double herm_err = (H - H.adjoint()).cwiseAbs().maxCoeff();
  if (herm_err > 1e-10)
    throw std::invalid_argument("parameterize: symmetry-violation, ||H - H^dag||_max = " +
                                std::to_string(herm_err));
  CMat Hs = 0.5 * (H + H.adjoint());
  RVec v(basis.size());
  for (int a = 0; a < basis.size(); ++a)
    v(a) = (basis.ops[a].adjoint() * Hs).trace().real();
  return v;
}

CMat deparameterize(const RVec& v, const HermitianBasis& basis) {
  if (v.size() != basis.size())
    throw std::invalid_argument("deparameterize: shape-error, expected length " +
                                std::to_string(basis.size()));
  CMat H = CMat::Zero(basis.dim, basis.dim);
  for (int a = 0; a < basis.size(); ++a) H += v(a) * basis.ops[a];
  return H;
}

RVec theta_from_lambda(const RVec& lambda, int n_outcomes, int d) {
  if (n_outcomes < 1) throw std::invalid_argument("theta_from_lambda: n must be >= 1");
  RVec theta = lambda;
  theta(0) -= std::sqrt(double(d)) / n_outcomes;
  return theta;
}

RVec lambda_from_theta(const RVec& theta, int n_outcomes, int d) {
  if (n_outcomes < 1) throw std::invalid_argument("lambda_from_theta: n must be >= 1");
  RVec lambda = theta;
  lambda(0) += std::sqrt(double(d)) / n_outcomes;
  return lambda;
}

}  // namespace qdt
