#include "qdt/measurement.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qdt {

RMat born_probabilities(const Povm& povm, const ProbeSet& probes) {
  if (povm.dim() != probes.dim)
    throw std::invalid_argument("born_probabilities: shape-error (dim mismatch)");
  const int n = povm.n_outcomes();
  const int M = probes.count();
  RMat p(n, M);
  for (int j = 0; j < M; ++j) {
    for (int i = 0; i < n; ++i)
      p(i, j) = (povm.elements[i] * probes.states[j].mat).trace().real();
    p(n - 1, j) += probes.states[j].trace_deficit;
  }
  return p;
}

MeasurementRecord sample_counts(const RMat& p, const std::vector<std::int64_t>& shots,
                                std::mt19937_64& rng) {
  const int n = static_cast<int>(p.rows());
  const int M = static_cast<int>(p.cols());
  if (static_cast<int>(shots.size()) != M)
    throw std::invalid_argument("sample_counts: shape-error (shots length mismatch)");
  if (p.minCoeff() < -1e-9)
    throw std::invalid_argument("sample_counts: invalid-distribution (negative probability)");
  MeasurementRecord rec;
  rec.counts.resize(n, M);
  rec.freqs.resize(n, M);
  rec.shots = shots;
  rec.total_shots = 0;
  for (int j = 0; j < M; ++j) {
    if (shots[j] < 1) throw std::invalid_argument("sample_counts: invalid-shots (must be >= 1)");
    rec.total_shots += shots[j];
    RVec col = p.col(j).cwiseMax(0.0);
    const double colsum = col.sum();
    if (std::abs(colsum - 1.0) > 1e-9)
      throw std::invalid_argument("sample_counts: invalid-distribution (column does not sum to 1)");
    col /= colsum;
    std::int64_t remaining = shots[j];
    double mass = 1.0;
    for (int i = 0; i < n; ++i) {
      if (remaining == 0) {
        rec.counts(i, j) = 0;
        continue;
      }
      if (i == n - 1) {
        rec.counts(i, j) = remaining;
        remaining = 0;
        continue;
      }
      double q = (mass > 0) ? col(i) / mass : 0.0;
      q = std::min(std::max(q, 0.0), 1.0);
      std::binomial_distribution<std::int64_t> bin(remaining, q);
      const std::int64_t c = bin(rng);
      rec.counts(i, j) = c;
      remaining -= c;
      mass -= col(i);
    }
  }
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < n; ++i)
      rec.freqs(i, j) = double(rec.counts(i, j)) / double(rec.shots[j]);
  return rec;
}

WeightedData build_weighted_data(const MeasurementRecord& rec, const ProbeSet& probes) {
  const int n = rec.n_outcomes();
  const int M = rec.n_probes();
  if (M != probes.count())
    throw std::invalid_argument("build_weighted_data: invalid-record (probe count mismatch)");
  for (int j = 0; j < M; ++j)
    if (rec.shots[j] < 1)
      throw std::invalid_argument("build_weighted_data: invalid-record (zero shots)");
  WeightedData wd;
  wd.n_outcomes = n;
  wd.sigma = 1.0;
  wd.X = probes.X;
  wd.weights.resize(n);
  wd.ybar.resize(n);
  wd.ytilde.resize(n);
  wd.Xtilde.resize(n);
  for (int i = 0; i < n; ++i) {
    RVec W(M), yb(M);
    for (int j = 0; j < M; ++j) {
      const double eps = 0.5 / double(rec.shots[j]);
      double pc = std::min(std::max(rec.freqs(i, j), eps), 1.0 - eps);
      W(j) = double(rec.shots[j]) / (pc - pc * pc);
      yb(j) = rec.freqs(i, j) - 1.0 / n;
    }
    RVec sq = W.cwiseSqrt() / wd.sigma;
    wd.weights[i] = W;
    wd.ybar[i] = yb;
    wd.ytilde[i] = sq.cwiseProduct(yb);
    wd.Xtilde[i] = sq.asDiagonal() * probes.X;
  }
  return wd;
}

void record_to_csv(const MeasurementRecord& rec, std::ostream& os) {
  os << "outcome_index,probe_index,count,shots\n";
  for (int i = 0; i < rec.n_outcomes(); ++i)
    for (int j = 0; j < rec.n_probes(); ++j)
      os << i << "," << j << "," << rec.counts(i, j) << "," << rec.shots[j] << "\n";
}

MeasurementRecord record_from_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw std::invalid_argument("record_from_csv: empty input");
  std::map<std::pair<int, int>, std::int64_t> entries;
  std::map<int, std::int64_t> shots;
  int max_i = -1, max_j = -1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    int vals_i[2];
    std::int64_t vals_l[2];
    for (int k = 0; k < 4; ++k) {
      if (!std::getline(ss, tok, ','))
        throw std::invalid_argument("record_from_csv: malformed row");
      if (k < 2)
        vals_i[k] = std::stoi(tok);
      else
        vals_l[k - 2] = std::stoll(tok);
    }
    entries[{vals_i[0], vals_i[1]}] = vals_l[0];
    shots[vals_i[1]] = vals_l[1];
    max_i = std::max(max_i, vals_i[0]);
    max_j = std::max(max_j, vals_i[1]);
  }
  if (max_i < 0) throw std::invalid_argument("record_from_csv: no data rows");
  MeasurementRecord rec;
  rec.counts.setZero(max_i + 1, max_j + 1);
  rec.freqs.setZero(max_i + 1, max_j + 1);
  rec.shots.assign(max_j + 1, 0);
  for (const auto& [k, v] : entries) rec.counts(k.first, k.second) = v;
  rec.total_shots = 0;
  for (const auto& [j, nj] : shots) {
    rec.shots[j] = nj;
    rec.total_shots += nj;
  }
  for (int i = 0; i <= max_i; ++i)
    for (int j = 0; j <= max_j; ++j)
      rec.freqs(i, j) = rec.shots[j] ? double(rec.counts(i, j)) / double(rec.shots[j]) : 0.0;
  return rec;
}

}  // namespace qdt
