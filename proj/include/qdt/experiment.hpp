#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qdt/analysis.hpp"
#include "qdt/estimators.hpp"
#include "qdt/kernels.hpp"
#include "qdt/measurement.hpp"
#include "qdt/states.hpp"

namespace qdt {

// JSON experiment configuration. See README for the schema; every field
// maps 1:1 onto a key. Invalid configs throw std::runtime_error with a
// "config:" prefix.
struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;

  std::string detector_name;  // paper_d4 | paper_d8 | group_I | group_II
  std::string detector_file;  // overrides detector_name when set
  std::uint64_t detector_seed = 0;

  std::string probe_class = "haar_pure";  // haar_pure | coherent | two_mode | group
  int probe_count = 0;
  int dim = 0;
  std::uint64_t probe_seed = 0;  // used only when probe_seed_set, else follows seed
  bool probe_seed_set = false;
  std::vector<std::pair<double, double>> alphas;         // coherent: re, im
  std::vector<std::array<double, 3>> two_mode_params;    // alpha, beta, delta

  std::int64_t total_shots = 0;
  std::string allocation = "uniform";  // uniform | optimized | explicit
  std::vector<std::int64_t> explicit_shots;

  std::string estimator = "rwls";  // ls | awls | rwls | wangtik
  double wangtik_c = 1000.0;
  KernelSpec kernel;
  std::vector<KernelSpec> kernels;  // scaling studies; falls back to {kernel}

  int trials = 1;
  std::vector<std::int64_t> N_grid;
  std::string output_dir = ".";
  int threads = 0;

  std::vector<KernelSpec> cv_grid;  // cross-validate subcommand
  int cv_estimation = 16;
  std::string record_file;  // estimate subcommand input
};

ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

KernelSpec kernel_spec_from_json_text(const std::string& json_text);

// Resolved simulation instance shared by the subcommands.
struct Instance {
  HermitianBasis basis;
  Povm detector;
  ProbeSet probes;
  std::vector<std::int64_t> shots;  // per probe, empty until allocated
  std::vector<RVec> theta_true;
};

Instance build_instance(const ExperimentConfig& cfg, bool allocate_shots = true);

struct TrialResult {
  double mse_raw = 0.0;        // sum_i ||theta_hat - theta||^2, NaN on failure
  double mse_corrected = 0.0;  // sum_i ||P_corrected - P_true||_F^2
  std::string error;           // empty on success
};

struct RunResult {
  std::vector<TrialResult> trials;
  Estimate first_estimate;       // trial 0, pre-correction
  Povm first_corrected;          // trial 0, after POVM correction
  std::vector<std::string> files_written;
};

// simulate -> estimate -> correct -> report. Writes estimate.json, mse.csv,
// scaling.csv (when N_grid is set), and manifest.json into output_dir.
// Byte-identical outputs for identical (config, seed), except the
// runtime_s column of scaling.csv.
RunResult run_pipeline(const ExperimentConfig& cfg);

Estimate estimate_with_config(const ExperimentConfig& cfg, const Instance& inst,
                              const WeightedData& wd);

}  // namespace qdt
