#include "qdt/states.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <array>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "qdt/rng.hpp"

namespace qdt {

DensityMatrix random_pure_state(int d, std::mt19937_64& rng) {
  if (d < 2) throw std::invalid_argument("random_pure_state: invalid-dimension");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXcd v(d);
  for (int i = 0; i < d; ++i) {
    double re = gauss(rng);
    double im = gauss(rng);
    v(i) = Cplx(re, im);
  }
  v /= v.norm();
  DensityMatrix rho;
  rho.mat = v * v.adjoint();
  rho.trace_deficit = 0.0;
  return rho;
}

CMat random_unitary(int d, std::mt19937_64& rng) {
  if (d < 1) throw std::invalid_argument("random_unitary: invalid-dimension");
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMat G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double re = gauss(rng);
      double im = gauss(rng);
      G(i, j) = Cplx(re, im);
    }
  Eigen::HouseholderQR<CMat> qr(G);
  CMat Q = qr.householderQ();
  CMat R = qr.matrixQR().triangularView<Eigen::Upper>();
  // fix phases so the distribution is Haar, not QR-convention-dependent
  for (int j = 0; j < d; ++j) {
    Cplx r = R(j, j);
    Cplx phase = (std::abs(r) > 0) ? r / std::abs(r) : Cplx(1, 0);
    Q.col(j) *= phase;
  }
  return Q;
}

DensityMatrix coherent_state_truncated(Cplx alpha, int d) {
  if (d < 1) throw std::invalid_argument("coherent_state_truncated: invalid-dimension");
  Eigen::VectorXcd amp(d);
  const double a2 = std::norm(alpha);
  double log_fact = 0.0;
  for (int i = 0; i < d; ++i) {
    if (i > 0) log_fact += std::log(double(i));
    amp(i) = std::exp(-0.5 * a2) * std::pow(alpha, i) * std::exp(-0.5 * log_fact);
  }
  DensityMatrix rho;
  rho.mat = amp * amp.adjoint();
  rho.trace_deficit = 1.0 - rho.mat.trace().real();
  if (rho.trace_deficit < 0) rho.trace_deficit = 0;  // guard rounding
  return rho;
}

DensityMatrix two_mode_coherent(double alpha, double beta, double delta, int tmax) {
  if (alpha < 0 || beta < 0)
    throw std::invalid_argument("two_mode_coherent: invalid-amplitude (negative)");
  if (tmax < 0) throw std::invalid_argument("two_mode_coherent: invalid truncation");
  std::vector<std::pair<int, int>> modes;
  for (int t = 0; t <= tmax; ++t)
    for (int j = t; j >= 0; --j) modes.emplace_back(j, t - j);
  const int dim = static_cast<int>(modes.size());
  Eigen::VectorXcd amp(dim);
  const double pref = std::exp(-0.5 * (alpha * alpha + beta * beta));
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  for (int s = 0; s < dim; ++s) {
    auto [j, k] = modes[s];
    amp(s) = pref * std::pow(alpha, j) * std::pow(beta, k) *
             std::exp(Cplx(0, k * delta)) / std::sqrt(fact(j) * fact(k));
  }
  DensityMatrix rho;
  rho.mat = amp * amp.adjoint();
  rho.trace_deficit = 1.0 - rho.mat.trace().real();
  if (rho.trace_deficit < 0) rho.trace_deficit = 0;
  return rho;
}

ProbeSet build_probe_set(const std::vector<DensityMatrix>& states,
                         const HermitianBasis& basis) {
  if (states.empty()) throw std::invalid_argument("build_probe_set: empty state list");
  const int d = basis.dim;
  for (const auto& s : states)
    if (s.dim() != d) throw std::invalid_argument("build_probe_set: shape-error");
  ProbeSet ps;
  ps.states = states;
  ps.dim = d;
  const int M = static_cast<int>(states.size());
  ps.X.resize(M, basis.size());
  for (int j = 0; j < M; ++j) ps.X.row(j) = parameterize(states[j].mat, basis).transpose();
  Eigen::JacobiSVD<RMat> svd(ps.X);
  const auto& sv = svd.singularValues();
  const double tol = sv.size() ? sv(0) * 1e-9 * std::max(ps.X.rows(), ps.X.cols()) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  ps.informationally_complete = (rank == basis.size());
  return ps;
}

namespace {

Povm paper_d4_detector() {
  CMat P1(4, 4), P2(4, 4);
  P1 << 0.1, 0, Cplx(0.002, -0.005), Cplx(0.003, 0.007),
        0, 0.2, 0, 0,
        Cplx(0.002, 0.005), 0, 0.3, 0,
        Cplx(0.003, -0.007), 0, 0, 0.4;
  P2 << 0.2, Cplx(0.001, 0.002), 0, 0,
        Cplx(0.001, -0.002), 0.2, 0, 0,
        0, 0, 0.3, 0,
        0, 0, 0, 0.4;
  Povm p;
  p.elements = {P1, P2, CMat::Identity(4, 4) - P1 - P2};
  return p;
}

Povm paper_d8_detector(std::uint64_t seed) {
  Povm base = paper_d4_detector();
  for (int attempt = 0; attempt < 64; ++attempt) {
    auto rng = make_stream(seed, attempt, stage::unitary);
    CMat U1 = random_unitary(8, rng);
    CMat U2 = random_unitary(8, rng);
    CMat D1 = CMat::Zero(8, 8), D2 = CMat::Zero(8, 8);
    D1.block(0, 0, 4, 4) = base.elements[0];
    D1.block(4, 4, 4, 4) = base.elements[0];
    D2.block(0, 0, 4, 4) = base.elements[1];
    D2.block(4, 4, 4, 4) = base.elements[1];
    CMat P1 = U1 * D1 * U1.adjoint();
    CMat P2 = U2 * D2 * U2.adjoint();
    CMat P3 = CMat::Identity(8, 8) - P1 - P2;
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (P3 + P3.adjoint()));
    if (es.eigenvalues().minCoeff() >= -1e-12) {
      Povm p;
      p.elements = {P1, P2, P3};
      return p;
    }
  }
  throw std::runtime_error("example_detector: paper_d8 PSD redraw cap exceeded");
}

Povm group_detector(bool group_one) {
  CMat L1(1, 1), L2(2, 2), L3(3, 3);
  if (group_one) {
    L1 << 2.91e-4;
    L2 << 0.202, Cplx(0, 0.00109),
          Cplx(0, -0.00109), 0.202;
    L3 << 0.363, Cplx(0, 0.00123), 1.20e-6,
          Cplx(0, -0.00123), 0.363, Cplx(0, 0.00123),
          1.20e-6, Cplx(0, -0.00123), 0.363;
  } else {
    L1 << 1.27e-4;
    L2 << 0.0763, Cplx(-0.0440, 0.0879),
          Cplx(-0.0440, -0.0879), 0.127;
    L3 << 0.147, Cplx(-0.0574, 0.115), Cplx(0.00580, 0.00773),
          Cplx(-0.0574, -0.115), 0.184, Cplx(-0.0543, 0.109),
          Cplx(0.00580, -0.00773), Cplx(-0.0543, -0.109), 0.238;
  }
  CMat P1 = CMat::Zero(6, 6);
  P1.block(0, 0, 1, 1) = L1;
  P1.block(1, 1, 2, 2) = L2;
  P1.block(3, 3, 3, 3) = L3;
  Povm p;
  p.elements = {P1, CMat::Identity(6, 6) - P1};
  p.block_structure = {1, 2, 3};
  return p;
}

}  // namespace

Povm example_detector(const std::string& name, std::uint64_t seed) {
  if (name == "paper_d4") return paper_d4_detector();
  if (name == "paper_d8") return paper_d8_detector(seed);
  if (name == "group_I") return group_detector(true);
  if (name == "group_II") return group_detector(false);
  throw std::invalid_argument("example_detector: unknown-detector '" + name + "'");
}

std::vector<DensityMatrix> group_probe_states() {
  const double pi = 3.14159265358979323846;
  std::vector<std::array<double, 3>> table;
  table.push_back({0.0, 0.0, 0.0});
  table.push_back({0.447, 0.0, 0.0});
  table.push_back({0.0, 0.447, 0.0});
  for (int k = 0; k < 8; ++k) table.push_back({0.316, 0.316, k * pi / 4});
  for (int k = 0; k < 4; ++k) table.push_back({0.194, 0.112, k * pi / 2});
  for (int k = 0; k < 4; ++k) table.push_back({0.112, 0.194, k * pi / 2});
  std::vector<DensityMatrix> out;
  out.reserve(table.size());
  for (const auto& [a, b, dl] : table) out.push_back(two_mode_coherent(a, b, dl, 2));
  return out;
}

Povm povm_from_json_text(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    const int d = j.at("dim").get<int>();
    Povm p;
    for (const auto& el : j.at("elements")) {
      if (static_cast<int>(el.size()) != d * d)
        throw std::invalid_argument("povm_from_json_text: shape-error in element");
      CMat m(d, d);
      int idx = 0;
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
          const auto& pair = el.at(idx++);
          m(r, c) = Cplx(pair.at(0).get<double>(), pair.at(1).get<double>());
        }
      p.elements.push_back(m);
    }
    if (j.contains("block_structure"))
      p.block_structure = j.at("block_structure").get<std::vector<int>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("povm_from_json_text: schema-error (") +
                                e.what() + ")");
  }
}

std::string povm_to_json_text(const Povm& povm) {
  nlohmann::json j;
  j["dim"] = povm.dim();
  nlohmann::json els = nlohmann::json::array();
  for (const auto& P : povm.elements) {
    nlohmann::json el = nlohmann::json::array();
    for (int r = 0; r < P.rows(); ++r)
      for (int c = 0; c < P.cols(); ++c)
        el.push_back({P(r, c).real(), P(r, c).imag()});
    els.push_back(el);
  }
  j["elements"] = els;
  if (!povm.block_structure.empty()) j["block_structure"] = povm.block_structure;
  return j.dump(2);
}

}  // namespace qdt
