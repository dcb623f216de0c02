#include "qdt/kernels.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qdt {

std::string kernel_kind_to_string(KernelKind k) {
  switch (k) {
    case KernelKind::none: return "none";
    case KernelKind::tikhonov: return "tikhonov";
    case KernelKind::di: return "di";
    case KernelKind::tc: return "tc";
    case KernelKind::dc: return "dc";
    case KernelKind::rank1_adaptive: return "rank1_adaptive";
    case KernelKind::fullrank_adaptive: return "fullrank_adaptive";
    case KernelKind::best_oracle: return "best_oracle";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "none") return KernelKind::none;
  if (s == "tikhonov") return KernelKind::tikhonov;
  if (s == "di") return KernelKind::di;
  if (s == "tc") return KernelKind::tc;
  if (s == "dc") return KernelKind::dc;
  if (s == "rank1_adaptive") return KernelKind::rank1_adaptive;
  if (s == "fullrank_adaptive") return KernelKind::fullrank_adaptive;
  if (s == "best_oracle") return KernelKind::best_oracle;
  throw std::invalid_argument("kernel_kind_from_string: invalid-kernel '" + s + "'");
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os << kernel_kind_to_string(kind);
  switch (kind) {
    case KernelKind::tikhonov: os << "(c=" << c << ")"; break;
    case KernelKind::di: os << "(c=" << c << ",mu=" << mu << ")"; break;
    case KernelKind::tc: os << "(c=" << c << ",mu=" << mu << ")"; break;
    case KernelKind::dc: os << "(c=" << c << ",mu1=" << mu1 << ",mu2=" << mu2 << ")"; break;
    case KernelKind::rank1_adaptive:
    case KernelKind::fullrank_adaptive:
      if (base_kernel) os << "[" << base_kernel->describe() << "]";
      break;
    default: break;
  }
  return os.str();
}

double di_entry(double c, double mu, int k) { return c * std::pow(mu, k); }

double tc_entry(double c, double mu, int j, int k) {
  return c * std::pow(mu, std::max(j, k));
}

double dc_entry(double c, double mu1, double mu2, int j, int k) {
  return c * std::pow(mu1, std::abs(k - j)) * std::pow(mu2, 0.5 * (k + j));
}

namespace {

void check_params(const KernelSpec& s) {
  auto bad = [&](const std::string& what) {
    throw std::invalid_argument("materialize: invalid-kernel (" + what + ") in " +
                                kernel_kind_to_string(s.kind));
  };
  switch (s.kind) {
    case KernelKind::tikhonov:
      if (s.c < 0) bad("c < 0");
      break;
    case KernelKind::di:
    case KernelKind::tc:
      if (s.c < 0) bad("c < 0");
      if (s.mu < 0 || s.mu > 1) bad("mu outside [0,1]");
      break;
    case KernelKind::dc:
      if (s.c < 0) bad("c < 0");
      if (s.mu1 < -1 || s.mu1 > 1) bad("mu1 outside [-1,1]");
      if (s.mu2 < 0 || s.mu2 > 1) bad("mu2 outside [0,1]");
      break;
    default:
      break;
  }
}

}  // namespace

Regularizer materialize(const KernelSpec& spec, int d2, const KernelContext& ctx) {
  if (d2 < 1) throw std::invalid_argument("materialize: invalid-kernel (d2 must be positive)");
  check_params(spec);
  Regularizer reg;
  switch (spec.kind) {
    case KernelKind::none:
      reg.is_S = false;
      reg.mat = RMat::Zero(d2, d2);
      return reg;
    case KernelKind::tikhonov:
      reg.is_S = false;
      reg.mat = spec.c * RMat::Identity(d2, d2);
      return reg;
    case KernelKind::di: {
      reg.mat = RMat::Zero(d2, d2);
      for (int k = 1; k <= d2; ++k) reg.mat(k - 1, k - 1) = di_entry(spec.c, spec.mu, k);
      return reg;
    }
    case KernelKind::tc: {
      reg.mat.resize(d2, d2);
      for (int j = 1; j <= d2; ++j)
        for (int k = 1; k <= d2; ++k) reg.mat(j - 1, k - 1) = tc_entry(spec.c, spec.mu, j, k);
      return reg;
    }
    case KernelKind::dc: {
      reg.mat.resize(d2, d2);
      for (int j = 1; j <= d2; ++j)
        for (int k = 1; k <= d2; ++k)
          reg.mat(j - 1, k - 1) = dc_entry(spec.c, spec.mu1, spec.mu2, j, k);
      return reg;
    }
    case KernelKind::rank1_adaptive: {
      if (!ctx.rough_theta)
        throw std::invalid_argument("materialize: missing-context (rank1 needs rough theta)");
      const RVec& t0 = *ctx.rough_theta;
      reg.mat = t0 * t0.transpose();
      return reg;
    }
    case KernelKind::fullrank_adaptive: {
      if (!ctx.rough_theta)
        throw std::invalid_argument("materialize: missing-context (fullrank needs rough theta)");
      if (!spec.base_kernel)
        throw std::invalid_argument("materialize: missing-context (fullrank needs base kernel)");
      Regularizer base = materialize(*spec.base_kernel, d2, KernelContext{});
      if (!base.is_S)
        throw std::invalid_argument("materialize: invalid-kernel (fullrank base must be an S kernel)");
      const RVec& t0 = *ctx.rough_theta;
      reg.mat = t0 * t0.transpose() + base.mat;
      return reg;
    }
    case KernelKind::best_oracle: {
      if (!spec.oracle_theta)
        throw std::invalid_argument("materialize: missing-context (best_oracle needs oracle theta)");
      const auto& thetas = *spec.oracle_theta;
      if (ctx.outcome < 0 || ctx.outcome >= static_cast<int>(thetas.size()))
        throw std::invalid_argument("materialize: missing-context (oracle outcome out of range)");
      const RVec& t = thetas[ctx.outcome];
      reg.mat = t * t.transpose();
      return reg;
    }
  }
  throw std::invalid_argument("materialize: invalid-kernel (unknown kind)");
}

}  // namespace qdt
