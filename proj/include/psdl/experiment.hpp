#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "psdl/io.hpp"
#include "psdl/metrics.hpp"
#include "psdl/noise.hpp"
#include "psdl/solvers.hpp"

namespace psdl {

// Deterministic well-spread image subset: greedy farthest-point sampling on
// the light sphere, seeded start, lowest-index tie break. Returned indices
// are sorted ascending.
std::vector<int> select_light_subset(const LightSet& lights, int count,
                                     std::uint64_t seed);

struct RunResult {
  NormalField normals;
  SolveReport report;
  Eigen::VectorXd error_map;  // empty when no truth was available
  double mae_deg = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

// Runs one estimator ("ls", "dlpi" or "dlnv"); unknown names are a contract
// violation. MAE is computed against truth when given.
RunResult run_method(const std::string& method, const ImageStack& stack, const Mask& mask,
                     const NormalField* truth, const SolverConfig& cfg);

// Truth for scoring: the dataset's ground truth, else the least-squares
// solution of the clean stack (so noise-robustness is measured against the
// uncorrupted model fit).
NormalField reference_truth(const Dataset& dataset, std::vector<std::string>* notes);

struct SweepOptions {
  std::uint64_t seed = 0;
  int realizations = 5;
  int jobs = 1;
  std::string csv_path;   // appended when non-empty
  std::string dataset_name;
};

struct SummaryRow {
  std::string method;
  double x = 0.0;  // swept coordinate (snr or image count)
  double mean_mae = 0.0;
  double std_mae = 0.0;
};

struct SweepOutcome {
  std::vector<CsvRow> rows;         // deterministic cell order
  std::vector<SummaryRow> summary;  // per (coordinate, method) over realizations
  // sweep_params only:
  double best_lambda = std::numeric_limits<double>::quiet_NaN();
  double best_mu = std::numeric_limits<double>::quiet_NaN();
  double best_mae = std::numeric_limits<double>::quiet_NaN();
};

// Fig.1/2-style protocol: subsample subset_count images, corrupt at each SNR
// for each realization, run every method on the same corrupted stack.
SweepOutcome sweep_snr(const Dataset& dataset, const std::vector<std::string>& methods,
                       const std::vector<double>& snr_list_db, int subset_count,
                       const SolverConfig& cfg, const SweepOptions& opt);

// Table-1-style protocol: fixed SNR, varying image count.
SweepOutcome sweep_nimages(const Dataset& dataset, const std::vector<std::string>& methods,
                           const std::vector<int>& counts, double snr_db,
                           const SolverConfig& cfg, const SweepOptions& opt);

// (lambda, mu) grid for one method at a fixed noise spec; emits ls reference
// rows per realization and reports the best cell by mean MAE.
SweepOutcome sweep_params(const Dataset& dataset, const std::string& method,
                          const std::vector<double>& lambdas,
                          const std::vector<double>& mus, double snr_db,
                          const SolverConfig& cfg, const SweepOptions& opt);

void print_summary(std::ostream& os, const SweepOutcome& outcome, const std::string& x_name);

}  // namespace psdl
