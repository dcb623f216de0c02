#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qdt/analysis.hpp"
#include "qdt/correction.hpp"
#include "qdt/design.hpp"
#include "qdt/experiment.hpp"
#include "qdt/rng.hpp"
#include "qdt/selection.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kUsage =
    "usage: qdt <subcommand> --config <path> [--seed <u64>] [--out <dir>] [--threads <k>]\n"
    "subcommands:\n"
    "  run                 full pipeline: simulate, estimate, correct, report\n"
    "  simulate            draw measurement counts, write record.csv\n"
    "  estimate            reconstruct a POVM from a count record, write estimate.json\n"
    "  optimize-resources  A-optimal shot allocation, write eta.json\n"
    "  cross-validate      select a kernel on a validation split, write cv.json\n"
    "  scaling-study       MSE vs N sweep, write scaling.csv\n"
    "  check-theory        range/membership/similarity verdicts, write theory.json\n"
    "QDT_THREADS is used when --threads is not given.\n";

struct CommonFlags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

qdt::ExperimentConfig resolve(const CommonFlags& flags) {
  qdt::ExperimentConfig cfg = qdt::load_config(flags.config);
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  if (flags.threads >= 0) {
    cfg.threads = flags.threads;
  } else if (const char* env = std::getenv("QDT_THREADS")) {
    cfg.threads = std::atoi(env);
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  std::cout << "wrote " << path.string() << '\n';
}

json povm_json(const qdt::Povm& p) { return json::parse(qdt::povm_to_json_text(p)); }

int cmd_simulate(const qdt::ExperimentConfig& cfg) {
  qdt::Instance inst = qdt::build_instance(cfg);
  if (inst.shots.empty()) throw std::runtime_error("config: shots.total required for simulate");
  const qdt::RMat p = qdt::born_probabilities(inst.detector, inst.probes);
  auto rng = qdt::make_stream(cfg.seed, 0, qdt::stage::counts);
  const qdt::MeasurementRecord rec = qdt::sample_counts(p, inst.shots, rng);
  std::ostringstream os;
  qdt::record_to_csv(rec, os);
  write_text(fs::path(cfg.output_dir) / "record.csv", os.str());
  return 0;
}

int cmd_estimate(const qdt::ExperimentConfig& cfg) {
  if (cfg.record_file.empty())
    throw std::runtime_error("config: record_file required for estimate");
  qdt::Instance inst = qdt::build_instance(cfg, false);
  std::ifstream in(cfg.record_file);
  if (!in) throw std::runtime_error("config: cannot open record_file " + cfg.record_file);
  const qdt::MeasurementRecord rec = qdt::record_from_csv(in);
  const qdt::WeightedData wd = qdt::build_weighted_data(rec, inst.probes);
  const qdt::Estimate est = qdt::estimate_with_config(cfg, inst, wd);
  qdt::Povm raw;
  raw.elements = est.E_hat;
  const qdt::CorrectionResult corr =
      inst.detector.block_structure.empty()
          ? qdt::correct_to_povm(est.E_hat)
          : qdt::correct_blockwise(est.E_hat, inst.detector.block_structure);

  json out;
  out["schema_version"] = 1;
  out["estimator"] = cfg.estimator;
  out["method"] = est.method;
  out["kernel"] = est.kernel_used;
  out["raw"] = povm_json(raw);
  out["corrected"] = povm_json(corr.corrected);
  out["correction_distance"] = corr.distance;
  double mr = 0.0, mc = 0.0;
  for (int i = 0; i < inst.detector.n_outcomes(); ++i) {
    mr += (est.theta_hat[i] - inst.theta_true[i]).squaredNorm();
    mc += (corr.corrected.elements[i] - inst.detector.elements[i]).squaredNorm();
  }
  out["mse_raw"] = mr;
  out["mse_corrected"] = mc;
  write_text(fs::path(cfg.output_dir) / "estimate.json", out.dump(2) + "\n");
  return 0;
}

int cmd_optimize_resources(const qdt::ExperimentConfig& cfg) {
  qdt::Instance inst = qdt::build_instance(cfg, false);
  const qdt::RMat p = qdt::born_probabilities(inst.detector, inst.probes);
  qdt::RMat w(p.rows(), p.cols());
  for (int i = 0; i < p.rows(); ++i)
    for (int j = 0; j < p.cols(); ++j) {
      const double pc = std::clamp(p(i, j), 1e-12, 1.0 - 1e-12);
      w(i, j) = 1.0 / (pc - pc * pc);
    }
  const qdt::ResourceDistribution rd = qdt::optimize_distribution(inst.probes, w);

  json out;
  out["schema_version"] = 1;
  out["eta"] = std::vector<double>(rd.eta.data(), rd.eta.data() + rd.eta.size());
  out["objective"] = rd.objective;
  out["certificate"] = rd.certificate;
  out["iterations"] = rd.iterations;
  out["converged"] = rd.converged;
  if (cfg.total_shots > 0) out["shots"] = qdt::round_shots(rd.eta, cfg.total_shots);
  write_text(fs::path(cfg.output_dir) / "eta.json", out.dump(2) + "\n");
  return 0;
}

int cmd_cross_validate(const qdt::ExperimentConfig& cfg) {
  if (cfg.cv_grid.empty()) throw std::runtime_error("config: cv.grid required for cross-validate");
  qdt::Instance inst = qdt::build_instance(cfg);
  if (inst.shots.empty())
    throw std::runtime_error("config: shots.total required for cross-validate");
  const qdt::RMat p = qdt::born_probabilities(inst.detector, inst.probes);
  auto rng = qdt::make_stream(cfg.seed, 0, qdt::stage::counts);
  const qdt::MeasurementRecord rec = qdt::sample_counts(p, inst.shots, rng);
  auto rng_cv = qdt::make_stream(cfg.seed, 0, qdt::stage::cv_split);
  std::vector<qdt::KernelSpec> grid = cfg.cv_grid;
  for (auto& k : grid)
    if (k.kind == qdt::KernelKind::best_oracle && !k.oracle_theta) k.oracle_theta = inst.theta_true;
  const qdt::CvResult cv =
      qdt::cross_validate(inst.probes, rec, grid, cfg.cv_estimation, rng_cv, inst.basis);

  json out;
  out["schema_version"] = 1;
  out["selected_index"] = cv.selected_index;
  out["selected"] = cv.selected.describe();
  out["scores"] = cv.scores;
  out["kernel"] = cv.final_estimate.kernel_used;
  write_text(fs::path(cfg.output_dir) / "cv.json", out.dump(2) + "\n");
  return 0;
}

int cmd_scaling_study(const qdt::ExperimentConfig& cfg) {
  if (cfg.N_grid.empty())
    throw std::runtime_error("config: N_grid required for scaling-study");
  qdt::Instance inst = qdt::build_instance(cfg, cfg.total_shots > 0);
  qdt::ScalingConfig sc;
  sc.N_grid = cfg.N_grid;
  sc.trials = cfg.trials;
  sc.kernels = cfg.kernels.empty() ? std::vector<qdt::KernelSpec>{cfg.kernel} : cfg.kernels;
  if (!inst.shots.empty()) {
    double total = 0.0;
    for (auto s : inst.shots) total += double(s);
    qdt::RVec h(inst.probes.count());
    for (int j = 0; j < inst.probes.count(); ++j) h(j) = double(inst.shots[j]) / total;
    sc.shot_fractions = h;
  }
  sc.seed = cfg.seed;
  sc.threads = cfg.threads;
  const qdt::ScalingTable table = qdt::scaling_study(sc, inst.probes, inst.detector, inst.basis);
  write_text(fs::path(cfg.output_dir) / "scaling.csv", qdt::scaling_table_to_csv(table));
  return 0;
}

int cmd_run(const qdt::ExperimentConfig& cfg) {
  const qdt::RunResult res = qdt::run_pipeline(cfg);
  for (const auto& f : res.files_written) std::cout << "wrote " << f << '\n';
  return 0;
}

int cmd_check_theory(const qdt::ExperimentConfig& cfg) {
  qdt::Instance inst = qdt::build_instance(cfg, false);
  const int M = inst.probes.count();
  const int n = inst.detector.n_outcomes();
  const int d2 = static_cast<int>(inst.probes.X.cols());
  const qdt::RVec h = qdt::RVec::Constant(M, 1.0 / M);
  const auto infos = qdt::compute_B(inst.probes, inst.detector, h);

  const qdt::RMat p = qdt::born_probabilities(inst.detector, inst.probes);
  std::vector<qdt::RVec> ybar0(n);
  for (int i = 0; i < n; ++i)
    ybar0[i] = p.row(i).transpose().array() - 1.0 / double(n);
  const qdt::Estimate rough0 =
      qdt::ls_estimate(inst.probes, ybar0, inst.basis, qdt::SolveMode::pseudo_inverse);

  const double N = cfg.total_shots > 0 ? double(cfg.total_shots) : 1e6;
  json outcomes = json::array();
  for (int i = 0; i < n; ++i) {
    const qdt::RMat S =
        qdt::surrogate_S(cfg.kernel, d2, inst.theta_true[i], rough0.theta_hat[i]);
    const auto rv = qdt::range_condition(inst.theta_true[i], S, infos[i].B, 1e-8);
    json rec;
    rec["outcome"] = i;
    rec["rank_B"] = infos[i].rank;
    rec["range_condition"] = rv.in_range;
    rec["range_residual"] = rv.residual;
    try {
      rec["gamma_member"] = qdt::gamma_membership(S, inst.theta_true[i], infos[i].B, 1e-8);
    } catch (const std::exception&) {
      rec["gamma_member"] = "not-applicable";
    }
    rec["similarity"] = qdt::similarity_check(S, infos[i].B);
    rec["min_mse"] = qdt::min_mse_value(inst.theta_true[i], infos[i].B, N);
    outcomes.push_back(rec);
  }
  json out;
  out["schema_version"] = 1;
  out["kernel"] = cfg.kernel.describe();
  out["N"] = N;
  out["outcomes"] = outcomes;
  write_text(fs::path(cfg.output_dir) / "theory.json", out.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> subs = {"run",           "simulate",       "estimate",
                                         "optimize-resources", "cross-validate", "scaling-study",
                                         "check-theory"};
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }
  const std::string first = argv[1];
  if (first != "-h" && first != "--help" &&
      std::find(subs.begin(), subs.end(), first) == subs.end()) {
    std::cerr << kUsage;
    return 2;
  }

  CLI::App app{"quantum detector tomography workbench"};
  app.require_subcommand(1);
  CommonFlags flags;
  for (const auto& name : subs) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config, "experiment config JSON")->required();
    sub->add_option("--seed", flags.seed, "override config seed")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    sub->add_option("--out", flags.out, "override output directory");
    sub->add_option("--threads", flags.threads, "worker threads (0 = hardware)");
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const qdt::ExperimentConfig cfg = resolve(flags);
    const std::string sub = app.get_subcommands().at(0)->get_name();
    if (sub == "run") return cmd_run(cfg);
    if (sub == "simulate") return cmd_simulate(cfg);
    if (sub == "estimate") return cmd_estimate(cfg);
    if (sub == "optimize-resources") return cmd_optimize_resources(cfg);
    if (sub == "cross-validate") return cmd_cross_validate(cfg);
    if (sub == "scaling-study") return cmd_scaling_study(cfg);
    if (sub == "check-theory") return cmd_check_theory(cfg);
    std::cerr << kUsage;
    return 2;
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << '\n';
    return 1;
  }
}
