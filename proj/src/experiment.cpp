#include "psdl/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "psdl/rng.hpp"

namespace psdl {

namespace {

constexpr std::uint64_t kSubsetSalt = 0x7375627365ULL;

void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string dims_string(const PatchDims& p) {
  std::ostringstream os;
  os << p.x << 'x' << p.y << 'x' << p.z;
  return os.str();
}

std::string dims_string(const PatchStride& s) {
  std::ostringstream os;
  os << s.x << 'x' << s.y << 'x' << s.z;
  return os.str();
}

// CSV parameter columns with the method's effective patch defaults filled in.
CsvRow base_row(const std::string& method, const std::string& dataset, int n_images,
                double snr_db, int realization, std::uint64_t seed,
                const SolverConfig& cfg, int d) {
  CsvRow row;
  row.method = method;
  row.dataset = dataset;
  row.n_images = n_images;
  row.snr_db = snr_db;
  row.realization = realization;
  row.seed = seed;
  if (method == "ls") return row;
  PatchDims p = cfg.patch;
  if (p.z == 0) p.z = method == "dlnv" ? 3 : std::min(d, 5);
  PatchStride s = cfg.stride;
  if (s.z == 0) s.z = p.z;
  row.lambda = cfg.lambda;
  row.mu = cfg.dict.mu;
  row.atoms = cfg.dict.atom_count;
  row.patch = dims_string(p);
  row.stride = dims_string(s);
  row.outer_iters = cfg.outer_iterations;
  row.inner_iters = cfg.dict.inner_iterations;
  row.prox_steps = method == "dlnv" ? cfg.prox_steps : 0;
  row.tau = method == "dlnv" ? cfg.tau : std::numeric_limits<double>::quiet_NaN();
  return row;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (v.size() - 1));
}

}  // namespace

std::vector<int> select_light_subset(const LightSet& lights, int count, std::uint64_t seed) {
  const int d = lights.count();
  if (count < 3) throw ContractError("select_light_subset: need at least 3 images");
  if (count > d) {
    throw ContractError("select_light_subset: requested " + std::to_string(count) +
                        " of " + std::to_string(d) + " images");
  }
  if (count == d) {
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  Rng rng = Rng::stream(seed, kSubsetSalt);
  std::vector<int> chosen{static_cast<int>(rng.integer(d))};
  std::vector<char> used(d, 0);
  used[chosen[0]] = 1;
  while (static_cast<int>(chosen.size()) < count) {
    int best = -1;
    double best_closest = std::numeric_limits<double>::infinity();
    for (int c = 0; c < d; ++c) {
      if (used[c]) continue;
      double closest = -1.0;  // max dot = angularly closest chosen direction
      for (int s : chosen) {
        closest = std::max(closest, lights.direction(c).dot(lights.direction(s)));
      }
      if (closest < best_closest) {
        best_closest = closest;
        best = c;
      }
    }
    chosen.push_back(best);
    used[best] = 1;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

RunResult run_method(const std::string& method, const ImageStack& stack, const Mask& mask,
                     const NormalField* truth, const SolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult out{NormalField(stack.rows(), stack.cols(),
                            Eigen::MatrixXd::Zero(stack.pixel_count(), 3)),
                SolveReport{}, Eigen::VectorXd(), std::numeric_limits<double>::quiet_NaN(),
                0.0};
  if (method == "ls") {
    out.normals = least_squares(stack);
    out.report.method = "ls";
  } else if (method == "dlpi") {
    auto [normals, report] = dlpi(stack, cfg);
    out.normals = std::move(normals);
    out.report = std::move(report);
  } else if (method == "dlnv") {
    auto [normals, report] = dlnv(stack, cfg);
    out.normals = std::move(normals);
    out.report = std::move(report);
  } else {
    throw ContractError("unknown method '" + method + "' (expected ls, dlpi or dlnv)");
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  if (truth) {
    out.error_map = angular_error_map(out.normals, *truth, mask);
    out.mae_deg = mean_angular_error(out.error_map, mask);
  }
  return out;
}

NormalField reference_truth(const Dataset& dataset, std::vector<std::string>* notes) {
  if (dataset.truth) return *dataset.truth;
  if (notes) {
    notes->push_back("dataset has no ground truth; scoring against least squares on the "
                     "clean stack");
  }
  return least_squares(dataset.stack);
}

namespace {

struct Cell {
  int coord_index = 0;   // index into the swept axis
  int realization = 0;
};

SweepOutcome run_grid(const Dataset& dataset, const std::vector<std::string>& methods,
                      const std::vector<double>& coords, bool coord_is_snr,
                      const std::vector<int>& counts, double fixed_snr,
                      const SolverConfig& cfg, const SweepOptions& opt) {
  std::vector<std::string> notes;
  const NormalField truth = reference_truth(dataset, &notes);
  SweepOutcome outcome;

  const int n_coords = static_cast<int>(coords.size());
  std::vector<Cell> cells;
  for (int ci = 0; ci < n_coords; ++ci)
    for (int r = 0; r < opt.realizations; ++r) cells.push_back({ci, r});

  // Subset indices depend only on (lights, count, seed): one per coordinate.
  std::vector<std::vector<int>> subsets(n_coords);
  for (int ci = 0; ci < n_coords; ++ci) {
    const int count = coord_is_snr ? counts[0] : counts[ci];
    subsets[ci] = select_light_subset(dataset.stack.lights(), count, opt.seed);
  }

  std::vector<std::vector<CsvRow>> cell_rows(cells.size());
  parallel_for(static_cast<int>(cells.size()), opt.jobs, [&](int idx) {
    const Cell& cell = cells[idx];
    const double snr = coord_is_snr ? coords[cell.coord_index] : fixed_snr;
    const ImageStack sub = dataset.stack.subset(subsets[cell.coord_index]);
    const ImageStack noisy =
        apply_poisson(sub, NoiseSpec{snr, opt.seed, cell.realization}, &dataset.mask);
    for (const auto& method : methods) {
      RunResult res = run_method(method, noisy, dataset.mask, &truth, cfg);
      CsvRow row = base_row(method, opt.dataset_name, noisy.image_count(), snr,
                            cell.realization, opt.seed, cfg, noisy.image_count());
      row.mae_deg = res.mae_deg;
      row.wall_ms = res.wall_ms;
      cell_rows[idx].push_back(std::move(row));
    }
  });

  for (auto& rows : cell_rows)
    for (auto& row : rows) outcome.rows.push_back(std::move(row));

  // Summaries from the flattened rows.
  for (int ci = 0; ci < n_coords; ++ci) {
    const double coord = coord_is_snr ? coords[ci] : static_cast<double>(counts[ci]);
    for (const auto& method : methods) {
      std::vector<double> maes;
      for (const auto& row : outcome.rows) {
        const double row_coord = coord_is_snr ? row.snr_db : row.n_images;
        if (row.method == method && row_coord == coord) maes.push_back(row.mae_deg);
      }
      if (maes.empty()) continue;
      const double mean = mean_of(maes);
      outcome.summary.push_back({method, coord, mean, std_of(maes, mean)});
    }
  }

  if (!opt.csv_path.empty()) append_csv(opt.csv_path, outcome.rows);
  return outcome;
}

}  // namespace

SweepOutcome sweep_snr(const Dataset& dataset, const std::vector<std::string>& methods,
                       const std::vector<double>& snr_list_db, int subset_count,
                       const SolverConfig& cfg, const SweepOptions& opt) {
  if (snr_list_db.empty()) throw ContractError("sweep_snr: empty SNR list");
  return run_grid(dataset, methods, snr_list_db, true, {subset_count}, 0.0, cfg, opt);
}

SweepOutcome sweep_nimages(const Dataset& dataset, const std::vector<std::string>& methods,
                           const std::vector<int>& counts, double snr_db,
                           const SolverConfig& cfg, const SweepOptions& opt) {
  if (counts.empty()) throw ContractError("sweep_nimages: empty count list");
  std::vector<double> coords(counts.begin(), counts.end());
  return run_grid(dataset, methods, coords, false, counts, snr_db, cfg, opt);
}

SweepOutcome sweep_params(const Dataset& dataset, const std::string& method,
                          const std::vector<double>& lambdas,
                          const std::vector<double>& mus, double snr_db,
                          const SolverConfig& cfg, const SweepOptions& opt) {
  if (lambdas.empty() || mus.empty()) throw ContractError("sweep_params: empty grid");
  if (method != "dlpi" && method != "dlnv") {
    throw ContractError("sweep_params: method must be dlpi or dlnv");
  }
  std::vector<std::string> notes;
  const NormalField truth = reference_truth(dataset, &notes);

  // Noise depends only on the realization; all grid cells see the same data.
  std::vector<ImageStack> noisy;
  noisy.reserve(opt.realizations);
  for (int r = 0; r < opt.realizations; ++r) {
    noisy.push_back(apply_poisson(dataset.stack, NoiseSpec{snr_db, opt.seed, r},
                                  &dataset.mask));
  }

  SweepOutcome outcome;

  // Reference ls rows, one per realization.
  std::vector<CsvRow> ls_rows(opt.realizations);
  std::vector<std::pair<int, int>> grid;  // (lambda index, mu index)
  for (std::size_t li = 0; li < lambdas.size(); ++li)
    for (std::size_t mi = 0; mi < mus.size(); ++mi)
      grid.emplace_back(static_cast<int>(li), static_cast<int>(mi));

  struct CellOut {
    std::vector<CsvRow> rows;
    double mean_mae = 0.0;
  };
  std::vector<CellOut> cell_out(grid.size());

  const int d = dataset.stack.image_count();
  parallel_for(opt.realizations, opt.jobs, [&](int r) {
    RunResult res = run_method("ls", noisy[r], dataset.mask, &truth, cfg);
    CsvRow row = base_row("ls", opt.dataset_name, d, snr_db, r, opt.seed, cfg, d);
    row.mae_deg = res.mae_deg;
    row.wall_ms = res.wall_ms;
    ls_rows[r] = std::move(row);
  });

  parallel_for(static_cast<int>(grid.size()), opt.jobs, [&](int g) {
    SolverConfig cell_cfg = cfg;
    cell_cfg.lambda = lambdas[grid[g].first];
    cell_cfg.dict.mu = mus[grid[g].second];
    double acc = 0.0;
    for (int r = 0; r < opt.realizations; ++r) {
      RunResult res = run_method(method, noisy[r], dataset.mask, &truth, cell_cfg);
      CsvRow row = base_row(method, opt.dataset_name, d, snr_db, r, opt.seed, cell_cfg, d);
      row.mae_deg = res.mae_deg;
      row.wall_ms = res.wall_ms;
      cell_out[g].rows.push_back(std::move(row));
      acc += res.mae_deg;
    }
    cell_out[g].mean_mae = acc / opt.realizations;
  });

  for (auto& row : ls_rows) outcome.rows.push_back(std::move(row));
  double ls_mean = 0.0;
  for (const auto& row : outcome.rows) ls_mean += row.mae_deg;
  ls_mean /= opt.realizations;
  outcome.summary.push_back({"ls", snr_db, ls_mean, 0.0});

  int best = -1;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (auto& row : cell_out[g].rows) outcome.rows.push_back(std::move(row));
    if (best < 0 || cell_out[g].mean_mae < cell_out[best].mean_mae) {
      best = static_cast<int>(g);
    }
  }
  outcome.best_lambda = lambdas[grid[best].first];
  outcome.best_mu = mus[grid[best].second];
  outcome.best_mae = cell_out[best].mean_mae;
  outcome.summary.push_back({method + " (best cell)", snr_db, outcome.best_mae, 0.0});

  if (!opt.csv_path.empty()) append_csv(opt.csv_path, outcome.rows);
  return outcome;
}

void print_summary(std::ostream& os, const SweepOutcome& outcome, const std::string& x_name) {
  os << std::left << std::setw(10) << x_name << std::setw(20) << "method"
     << std::setw(14) << "mean MAE" << "std MAE\n";
  for (const auto& s : outcome.summary) {
    os << std::left << std::setw(10) << s.x << std::setw(20) << s.method << std::setw(14)
       << std::setprecision(6) << s.mean_mae << std::setprecision(6) << s.std_mae << "\n";
  }
  if (!std::isnan(outcome.best_lambda)) {
    os << "best cell: lambda=" << outcome.best_lambda << " mu=" << outcome.best_mu
       << " mean MAE=" << outcome.best_mae << "\n";
  }
}

}  // namespace psdl
