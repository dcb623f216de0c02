#include "qdt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "qdt/correction.hpp"
#include "qdt/design.hpp"
#include "qdt/rng.hpp"
#include "qdt/selection.hpp"

namespace qdt {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) {
  throw std::runtime_error("config: " + what);
}

KernelSpec kernel_from_json(const json& j) {
  if (!j.is_object()) config_error("kernel must be an object");
  KernelSpec spec;
  if (!j.contains("kind")) config_error("kernel.kind missing");
  spec.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
  spec.c = j.value("c", 0.0);
  spec.mu = j.value("mu", 0.0);
  spec.mu1 = j.value("mu1", 0.0);
  spec.mu2 = j.value("mu2", 0.0);
  if (j.contains("base_kernel"))
    spec.base_kernel = std::make_shared<KernelSpec>(kernel_from_json(j.at("base_kernel")));
  return spec;
}

json kernel_to_json(const KernelSpec& spec) {
  json j;
  j["kind"] = kernel_kind_to_string(spec.kind);
  switch (spec.kind) {
    case KernelKind::tikhonov: j["c"] = spec.c; break;
    case KernelKind::di:
    case KernelKind::tc:
      j["c"] = spec.c;
      j["mu"] = spec.mu;
      break;
    case KernelKind::dc:
      j["c"] = spec.c;
      j["mu1"] = spec.mu1;
      j["mu2"] = spec.mu2;
      break;
    default: break;
  }
  if (spec.base_kernel) j["base_kernel"] = kernel_to_json(*spec.base_kernel);
  return j;
}

std::string format_g12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["seed"] = cfg.seed;
  json det;
  if (!cfg.detector_file.empty())
    det["file"] = cfg.detector_file;
  else
    det["name"] = cfg.detector_name;
  if (cfg.detector_seed != 0) det["seed"] = cfg.detector_seed;
  j["detector"] = det;
  json pr;
  pr["class"] = cfg.probe_class;
  if (cfg.probe_count > 0) pr["count"] = cfg.probe_count;
  if (cfg.dim > 0) pr["dim"] = cfg.dim;
  if (cfg.probe_seed_set) pr["seed"] = cfg.probe_seed;
  if (!cfg.alphas.empty()) {
    json arr = json::array();
    for (const auto& a : cfg.alphas) arr.push_back({a.first, a.second});
    pr["alphas"] = arr;
  }
  if (!cfg.two_mode_params.empty()) {
    json arr = json::array();
    for (const auto& t : cfg.two_mode_params) arr.push_back({t[0], t[1], t[2]});
    pr["two_mode"] = arr;
  }
  j["probes"] = pr;
  json sh;
  sh["total"] = cfg.total_shots;
  if (cfg.allocation == "explicit")
    sh["allocation"] = cfg.explicit_shots;
  else
    sh["allocation"] = cfg.allocation;
  j["shots"] = sh;
  j["estimator"] = cfg.estimator;
  if (cfg.estimator == "wangtik") j["wangtik_c"] = cfg.wangtik_c;
  j["kernel"] = kernel_to_json(cfg.kernel);
  if (!cfg.kernels.empty()) {
    json arr = json::array();
    for (const auto& k : cfg.kernels) arr.push_back(kernel_to_json(k));
    j["kernels"] = arr;
  }
  j["trials"] = cfg.trials;
  if (!cfg.N_grid.empty()) j["N_grid"] = cfg.N_grid;
  return j;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("invalid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) config_error("top level must be an object");

  ExperimentConfig cfg;
  cfg.schema_version = j.value("schema_version", 1);
  if (cfg.schema_version != 1) config_error("unsupported schema_version");
  cfg.seed = j.value("seed", std::uint64_t{0});

  if (j.contains("detector")) {
    const json& det = j.at("detector");
    if (det.is_string()) {
      cfg.detector_name = det.get<std::string>();
    } else if (det.is_object()) {
      cfg.detector_name = det.value("name", "");
      cfg.detector_file = det.value("file", "");
      cfg.detector_seed = det.value("seed", std::uint64_t{0});
    } else {
      config_error("detector must be a string or object");
    }
  }
  if (cfg.detector_name.empty() && cfg.detector_file.empty())
    config_error("detector missing");

  if (j.contains("probes")) {
    const json& pr = j.at("probes");
    if (!pr.is_object()) config_error("probes must be an object");
    cfg.probe_class = pr.value("class", "haar_pure");
    cfg.probe_count = pr.value("count", 0);
    cfg.dim = pr.value("dim", 0);
    cfg.probe_seed_set = pr.contains("seed");
    cfg.probe_seed = pr.value("seed", cfg.seed);
    if (pr.contains("alphas")) {
      for (const auto& a : pr.at("alphas")) {
        if (!a.is_array() || a.size() != 2) config_error("probes.alphas entries must be [re, im]");
        cfg.alphas.emplace_back(a[0].get<double>(), a[1].get<double>());
      }
    }
    if (pr.contains("two_mode")) {
      for (const auto& t : pr.at("two_mode")) {
        if (!t.is_array() || t.size() != 3)
          config_error("probes.two_mode entries must be [alpha, beta, delta]");
        cfg.two_mode_params.push_back({t[0].get<double>(), t[1].get<double>(), t[2].get<double>()});
      }
    }
  } else if (cfg.probe_class != "group") {
    config_error("probes missing");
  }

  if (j.contains("shots")) {
    const json& sh = j.at("shots");
    if (sh.is_number()) {
      cfg.total_shots = sh.get<std::int64_t>();
    } else if (sh.is_object()) {
      cfg.total_shots = sh.value("total", std::int64_t{0});
      if (sh.contains("allocation")) {
        const json& al = sh.at("allocation");
        if (al.is_string()) {
          cfg.allocation = al.get<std::string>();
          if (cfg.allocation != "uniform" && cfg.allocation != "optimized")
            config_error("shots.allocation must be uniform, optimized, or a list");
        } else if (al.is_array()) {
          cfg.allocation = "explicit";
          for (const auto& v : al) cfg.explicit_shots.push_back(v.get<std::int64_t>());
        } else {
          config_error("shots.allocation must be uniform, optimized, or a list");
        }
      }
    } else {
      config_error("shots must be a number or object");
    }
  }

  cfg.estimator = j.value("estimator", "rwls");
  if (cfg.estimator != "ls" && cfg.estimator != "awls" && cfg.estimator != "rwls" &&
      cfg.estimator != "wangtik")
    config_error("estimator must be one of ls, awls, rwls, wangtik");
  cfg.wangtik_c = j.value("wangtik_c", 1000.0);
  if (j.contains("kernel")) cfg.kernel = kernel_from_json(j.at("kernel"));
  if (j.contains("kernels"))
    for (const auto& k : j.at("kernels")) cfg.kernels.push_back(kernel_from_json(k));

  cfg.trials = j.value("trials", 1);
  if (cfg.trials < 1) config_error("trials must be >= 1");
  if (j.contains("N_grid"))
    for (const auto& v : j.at("N_grid")) cfg.N_grid.push_back(v.get<std::int64_t>());
  cfg.output_dir = j.value("output", std::string("."));
  cfg.threads = j.value("threads", 0);

  if (j.contains("cv")) {
    const json& cv = j.at("cv");
    if (!cv.contains("grid")) config_error("cv.grid missing");
    for (const auto& k : cv.at("grid")) cfg.cv_grid.push_back(kernel_from_json(k));
    cfg.cv_estimation = cv.value("estimation_count", 16);
  }
  cfg.record_file = j.value("record_file", "");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

KernelSpec kernel_spec_from_json_text(const std::string& json_text) {
  return kernel_from_json(json::parse(json_text));
}

Instance build_instance(const ExperimentConfig& cfg, bool allocate_shots) {
  Instance inst;

  if (!cfg.detector_file.empty()) {
    std::ifstream in(cfg.detector_file);
    if (!in) config_error("cannot open detector file " + cfg.detector_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    inst.detector = povm_from_json_text(ss.str());
  } else {
    const std::uint64_t dseed = cfg.detector_seed ? cfg.detector_seed : cfg.seed;
    inst.detector = example_detector(cfg.detector_name, dseed);
  }
  const int d = inst.detector.dim();
  if (cfg.dim > 0 && cfg.dim != d)
    config_error("probes.dim does not match the detector dimension");

  inst.basis = build_basis(d, BasisOrdering::gellmann_default);

  std::vector<DensityMatrix> states;
  if (cfg.probe_class == "haar_pure") {
    if (cfg.probe_count <= 0) config_error("probes.count must be positive for haar_pure");
    const std::uint64_t pseed = cfg.probe_seed_set ? cfg.probe_seed : cfg.seed;
    for (int jj = 0; jj < cfg.probe_count; ++jj) {
      auto rng = make_stream(pseed, static_cast<std::uint64_t>(jj), stage::probes);
      states.push_back(random_pure_state(d, rng));
    }
  } else if (cfg.probe_class == "coherent") {
    if (cfg.alphas.empty()) config_error("probes.alphas required for coherent probes");
    for (const auto& a : cfg.alphas)
      states.push_back(coherent_state_truncated(Cplx(a.first, a.second), d));
  } else if (cfg.probe_class == "two_mode") {
    if (cfg.two_mode_params.empty())
      config_error("probes.two_mode required for two_mode probes");
    for (const auto& t : cfg.two_mode_params)
      states.push_back(two_mode_coherent(t[0], t[1], t[2]));
  } else if (cfg.probe_class == "group") {
    states = group_probe_states();
  } else {
    config_error("unknown probe class " + cfg.probe_class);
  }
  if (!states.empty() && states[0].dim() != d)
    config_error("probe dimension does not match the detector dimension");
  inst.probes = build_probe_set(states, inst.basis);

  const int n = inst.detector.n_outcomes();
  inst.theta_true.reserve(static_cast<std::size_t>(n));
  for (const auto& P : inst.detector.elements) {
    const RVec lam = parameterize(P, inst.basis);
    inst.theta_true.push_back(theta_from_lambda(lam, n, d));
  }

  if (allocate_shots && cfg.total_shots > 0) {
    const int M = inst.probes.count();
    if (cfg.allocation == "uniform") {
      inst.shots = round_shots(RVec::Constant(M, 1.0 / M), cfg.total_shots);
    } else if (cfg.allocation == "optimized") {
      const RMat p = born_probabilities(inst.detector, inst.probes);
      RMat w(p.rows(), p.cols());
      for (int i = 0; i < p.rows(); ++i)
        for (int jj = 0; jj < p.cols(); ++jj) {
          const double pc = std::clamp(p(i, jj), 1e-12, 1.0 - 1e-12);
          w(i, jj) = 1.0 / (pc - pc * pc);
        }
      const ResourceDistribution rd = optimize_distribution(inst.probes, w);
      inst.shots = round_shots(rd.eta, cfg.total_shots);
    } else if (cfg.allocation == "explicit") {
      if (static_cast<int>(cfg.explicit_shots.size()) != M)
        config_error("explicit shot list length does not match probe count");
      for (auto s : cfg.explicit_shots)
        if (s < 0) config_error("explicit shot counts must be nonnegative");
      inst.shots = cfg.explicit_shots;
    } else {
      config_error("unknown allocation " + cfg.allocation);
    }
    // probes allocated zero shots carry no data; keep the sampled support only
    bool any_zero = false;
    std::int64_t sum = 0;
    for (auto s : inst.shots) {
      if (s == 0) any_zero = true;
      sum += s;
    }
    if (sum <= 0) config_error("shot allocation must include a positive entry");
    if (any_zero) {
      std::vector<DensityMatrix> kept;
      std::vector<std::int64_t> kept_shots;
      for (std::size_t jj = 0; jj < inst.shots.size(); ++jj) {
        if (inst.shots[jj] == 0) continue;
        kept.push_back(states[jj]);
        kept_shots.push_back(inst.shots[jj]);
      }
      inst.probes = build_probe_set(kept, inst.basis);
      inst.shots = std::move(kept_shots);
    }
  }
  return inst;
}

Estimate estimate_with_config(const ExperimentConfig& cfg, const Instance& inst,
                              const WeightedData& wd) {
  if (cfg.estimator == "ls")
    return ls_estimate(inst.probes, wd.ybar, inst.basis, SolveMode::pseudo_inverse);
  if (cfg.estimator == "awls")
    return awls_estimate(wd, inst.basis, SolveMode::pseudo_inverse);
  if (cfg.estimator == "wangtik") {
    double total = 0.0;
    for (auto s : inst.shots) total += double(s);
    if (total <= 0) total = double(cfg.total_shots);
    return wangtik_estimate(inst.probes, wd.ybar, inst.basis, cfg.wangtik_c, total);
  }
  KernelSpec spec = cfg.kernel;
  if (spec.kind == KernelKind::best_oracle && !spec.oracle_theta)
    spec.oracle_theta = inst.theta_true;
  return estimate_kernel(wd, spec, inst.basis);
}

RunResult run_pipeline(const ExperimentConfig& cfg) {
  Instance inst = build_instance(cfg);
  if (inst.shots.empty()) config_error("shots.total must be positive for run_pipeline");
  const RMat p_true = born_probabilities(inst.detector, inst.probes);
  const int n = inst.detector.n_outcomes();

  RunResult result;
  result.trials.resize(static_cast<std::size_t>(cfg.trials));
  std::vector<Estimate> estimates(static_cast<std::size_t>(cfg.trials));
  std::vector<Povm> corrected(static_cast<std::size_t>(cfg.trials));

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&]() {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= cfg.trials) return;
      TrialResult& tr = result.trials[static_cast<std::size_t>(t)];
      try {
        auto rng = make_stream(cfg.seed, static_cast<std::uint64_t>(t), stage::counts);
        const MeasurementRecord rec = sample_counts(p_true, inst.shots, rng);
        const WeightedData wd = build_weighted_data(rec, inst.probes);
        try {
          Estimate est = estimate_with_config(cfg, inst, wd);
          const CorrectionResult corr =
              inst.detector.block_structure.empty()
                  ? correct_to_povm(est.E_hat)
                  : correct_blockwise(est.E_hat, inst.detector.block_structure);
          double mr = 0.0, mc = 0.0;
          for (int i = 0; i < n; ++i) {
            mr += (est.theta_hat[static_cast<std::size_t>(i)] -
                   inst.theta_true[static_cast<std::size_t>(i)])
                      .squaredNorm();
            mc += (corr.corrected.elements[static_cast<std::size_t>(i)] -
                   inst.detector.elements[static_cast<std::size_t>(i)])
                      .squaredNorm();
          }
          tr.mse_raw = mr;
          tr.mse_corrected = mc;
          estimates[static_cast<std::size_t>(t)] = std::move(est);
          corrected[static_cast<std::size_t>(t)] = corr.corrected;
        } catch (const std::exception& e) {
          tr.error = e.what();
          tr.mse_raw = std::numeric_limits<double>::quiet_NaN();
          tr.mse_corrected = std::numeric_limits<double>::quiet_NaN();
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  int n_threads = cfg.threads;
  if (n_threads <= 0) n_threads = static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, cfg.trials));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  result.first_estimate = estimates[0];
  result.first_corrected = corrected[0];

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  {
    json est;
    est["schema_version"] = 1;
    est["estimator"] = cfg.estimator;
    est["method"] = result.first_estimate.method;
    est["kernel"] = result.first_estimate.kernel_used;
    if (result.trials[0].error.empty()) {
      est["raw"] = json::parse(povm_to_json_text([&] {
        Povm p;
        p.elements = result.first_estimate.E_hat;
        return p;
      }()));
      est["corrected"] = json::parse(povm_to_json_text(result.first_corrected));
      est["mse_raw"] = result.trials[0].mse_raw;
      est["mse_corrected"] = result.trials[0].mse_corrected;
    } else {
      est["error"] = result.trials[0].error;
    }
    const fs::path path = fs::path(cfg.output_dir) / "estimate.json";
    std::ofstream out(path);
    out << est.dump(2) << '\n';
    result.files_written.push_back(path.string());
  }

  {
    std::ostringstream os;
    os << "trial,mse_raw,mse_corrected,error\n";
    double sr = 0.0, sc = 0.0;
    int ok = 0;
    for (int t = 0; t < cfg.trials; ++t) {
      const TrialResult& tr = result.trials[static_cast<std::size_t>(t)];
      os << t << ',' << format_g12(tr.mse_raw) << ',' << format_g12(tr.mse_corrected) << ','
         << tr.error << '\n';
      if (tr.error.empty()) {
        sr += tr.mse_raw;
        sc += tr.mse_corrected;
        ++ok;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    os << "mean," << format_g12(ok ? sr / ok : nan) << ',' << format_g12(ok ? sc / ok : nan)
       << ",\n";
    const fs::path path = fs::path(cfg.output_dir) / "mse.csv";
    std::ofstream out(path);
    out << os.str();
    result.files_written.push_back(path.string());
  }

  if (!cfg.N_grid.empty()) {
    ScalingConfig sc;
    sc.N_grid = cfg.N_grid;
    sc.trials = cfg.trials;
    sc.kernels = cfg.kernels.empty() ? std::vector<KernelSpec>{cfg.kernel} : cfg.kernels;
    double total = 0.0;
    for (auto s : inst.shots) total += double(s);
    RVec h(inst.probes.count());
    for (int jj = 0; jj < inst.probes.count(); ++jj)
      h(jj) = double(inst.shots[static_cast<std::size_t>(jj)]) / total;
    sc.shot_fractions = h;
    sc.seed = cfg.seed;
    sc.threads = cfg.threads;
    const ScalingTable table = scaling_study(sc, inst.probes, inst.detector, inst.basis);
    const fs::path path = fs::path(cfg.output_dir) / "scaling.csv";
    std::ofstream out(path);
    out << scaling_table_to_csv(table);
    result.files_written.push_back(path.string());
  }

  {
    json man;
    man["schema_version"] = 1;
    man["tool"] = "qdt";
    man["version"] = "1.0.0";
    man["seed"] = cfg.seed;
    man["config"] = config_to_json(cfg);
    json files = json::array();
    for (const auto& f : result.files_written) files.push_back(fs::path(f).filename().string());
    man["outputs"] = files;
    const fs::path path = fs::path(cfg.output_dir) / "manifest.json";
    std::ofstream out(path);
    out << man.dump(2) << '\n';
    result.files_written.push_back(path.string());
  }

  return result;
}

}  // namespace qdt
