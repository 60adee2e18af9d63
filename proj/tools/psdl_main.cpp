// psdl: photometric stereo with dictionary-learning regularization.
//
// Subcommands: estimate, sweep-snr, sweep-nimages, sweep-params,
// render-sphere. Every run appends machine-readable rows to results.csv in
// the output directory; reruns with the same seed are byte-identical except
// for the trailing wall_ms column.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "psdl/experiment.hpp"
#include "psdl/io.hpp"

namespace fs = std::filesystem;
using namespace psdl;

namespace {

struct CommonFlags {
  std::string dataset;
  std::string out = "psdl_out";
  std::string config_file;
  double lambda = 0.25;
  double mu = 0.05;
  double code_bound = 1e6;
  int atoms = 0;
  std::vector<int> patch{8, 8, 0};
  std::vector<int> stride{1, 1, 0};
  int outer_iters = 20;
  int inner_iters = 5;
  int prox_steps = 10;
  std::string tau = "auto";
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
  int realizations = 5;
  int jobs = 1;
  bool use_intensities = false;
};

void add_common(CLI::App* cmd, CommonFlags* f, bool needs_dataset) {
  if (needs_dataset) {
    cmd->add_option("--dataset", f->dataset, "dataset directory")->required();
  }
  cmd->add_option("--out", f->out, "output directory");
  cmd->add_option("--lambda", f->lambda, "dictionary term weight");
  cmd->add_option("--mu", f->mu, "l0 threshold");
  cmd->add_option("--code-bound", f->code_bound, "l-inf code bound");
  cmd->add_option("--atoms", f->atoms, "dictionary atoms (0 = 2 x patch length)");
  cmd->add_option("--patch", f->patch, "patch extents cx,cy,cz (cz 0 = method default)")
      ->expected(3);
  cmd->add_option("--stride", f->stride, "patch strides sx,sy,sz (sz 0 = cz)")->expected(3);
  cmd->add_option("--outer-iters", f->outer_iters, "outer iterations");
  cmd->add_option("--inner-iters", f->inner_iters, "dictionary sweeps per outer iteration");
  cmd->add_option("--prox-steps", f->prox_steps, "proximal steps per outer iteration");
  cmd->add_option("--tau", f->tau, "proximal step size or 'auto'");
  cmd->add_option("--tolerance", f->tolerance, "relative-change stop");
  cmd->add_option("--seed", f->seed, "global seed");
  cmd->add_option("--realizations", f->realizations, "noise realizations");
  cmd->add_option("--jobs", f->jobs, "parallel sweep workers");
  cmd->add_flag("--light-intensities", f->use_intensities,
                "divide images by published light intensities");
  cmd->add_option("--config", f->config_file,
                  "key-value file; entries override the flags");
}

// "key value" or "key=value" lines; keys are the long flag names.
void apply_config_file(CommonFlags* f) {
  if (f->config_file.empty()) return;
  std::ifstream is(f->config_file);
  if (!is) throw IoError("cannot open config file " + f->config_file);
  std::string line;
  int lineno = 0;
  auto parse_triplet = [&](const std::string& value, std::vector<int>* out) {
    std::vector<int> v;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stoi(tok));
    if (v.size() != 3) throw std::invalid_argument("expected 3 comma-separated ints");
    *out = v;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::string key, value;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      key = line.substr(0, eq);
      value = line.substr(eq + 1);
    } else {
      std::istringstream ls(line);
      ls >> key;
      std::getline(ls, value);
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    key = trim(key);
    value = trim(value);
    try {
      if (key == "lambda") f->lambda = std::stod(value);
      else if (key == "mu") f->mu = std::stod(value);
      else if (key == "code-bound") f->code_bound = std::stod(value);
      else if (key == "atoms") f->atoms = std::stoi(value);
      else if (key == "patch") parse_triplet(value, &f->patch);
      else if (key == "stride") parse_triplet(value, &f->stride);
      else if (key == "outer-iters") f->outer_iters = std::stoi(value);
      else if (key == "inner-iters") f->inner_iters = std::stoi(value);
      else if (key == "prox-steps") f->prox_steps = std::stoi(value);
      else if (key == "tau") f->tau = value;
      else if (key == "tolerance") f->tolerance = std::stod(value);
      else if (key == "seed") f->seed = std::stoull(value);
      else if (key == "realizations") f->realizations = std::stoi(value);
      else if (key == "jobs") f->jobs = std::stoi(value);
      else throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::exception& e) {
      throw ContractError("config file " + f->config_file + ":" + std::to_string(lineno) +
                          ": " + e.what());
    }
  }
}

SolverConfig to_solver_config(const CommonFlags& f) {
  SolverConfig cfg;
  cfg.lambda = f.lambda;
  cfg.dict.mu = f.mu;
  cfg.dict.code_bound = f.code_bound;
  cfg.dict.atom_count = f.atoms;
  cfg.dict.inner_iterations = f.inner_iters;
  cfg.dict.seed = f.seed;
  cfg.patch = {f.patch[0], f.patch[1], f.patch[2]};
  cfg.stride = {f.stride[0], f.stride[1], f.stride[2]};
  cfg.outer_iterations = f.outer_iters;
  cfg.prox_steps = f.prox_steps;
  cfg.tolerance = f.tolerance;
  if (f.tau == "auto") {
    cfg.tau = 0.0;
  } else {
    try {
      cfg.tau = std::stod(f.tau);
    } catch (const std::exception&) {
      throw ContractError("--tau expects a number or 'auto', got '" + f.tau + "'");
    }
  }
  cfg.validate();
  return cfg;
}

Dataset load(const CommonFlags& f) {
  LoadOptions opt;
  opt.apply_light_intensities = f.use_intensities;
  Dataset ds = load_dataset(f.dataset, opt);
  std::cout << "loaded " << ds.name << ": " << ds.stack.rows() << "x" << ds.stack.cols()
            << ", " << ds.stack.image_count() << " images, mask " << ds.mask.count()
            << " px" << (ds.truth ? ", ground truth" : "") << "\n";
  return ds;
}

SweepOptions to_sweep_options(const CommonFlags& f, const Dataset& ds) {
  SweepOptions opt;
  opt.seed = f.seed;
  opt.realizations = f.realizations;
  opt.jobs = f.jobs;
  opt.dataset_name = ds.name;
  fs::create_directories(f.out);
  opt.csv_path = (fs::path(f.out) / "results.csv").string();
  return opt;
}

int cmd_estimate(const CommonFlags& f, const std::string& method, double snr_db,
                 int realization) {
  const Dataset ds = load(f);
  const SolverConfig cfg = to_solver_config(f);
  ImageStack stack = ds.stack;
  if (!std::isnan(snr_db)) {
    stack = apply_poisson(stack, NoiseSpec{snr_db, f.seed, realization}, &ds.mask);
    std::cout << "injected poisson noise at " << snr_db << " dB (achieved "
              << empirical_snr_db(ds.stack, stack, &ds.mask) << " dB)\n";
  }
  std::optional<NormalField> truth;
  if (ds.truth) truth = ds.truth;
  const RunResult res =
      run_method(method, stack, ds.mask, truth ? &*truth : nullptr, cfg);

  CsvRow row;
  row.method = method;
  row.dataset = ds.name;
  row.n_images = stack.image_count();
  row.snr_db = snr_db;
  row.realization = realization;
  row.seed = f.seed;
  if (method != "ls") {
    row.lambda = cfg.lambda;
    row.mu = cfg.dict.mu;
    row.atoms = cfg.dict.atom_count;
    std::ostringstream p, s;
    p << f.patch[0] << 'x' << f.patch[1] << 'x' << f.patch[2];
    s << f.stride[0] << 'x' << f.stride[1] << 'x' << f.stride[2];
    row.patch = p.str();
    row.stride = s.str();
    row.outer_iters = cfg.outer_iterations;
    row.inner_iters = cfg.dict.inner_iterations;
    if (method == "dlnv") {
      row.prox_steps = cfg.prox_steps;
      row.tau = res.report.tau_used;
    }
  }
  row.mae_deg = res.mae_deg;
  row.wall_ms = res.wall_ms;

  save_results(f.out, res.normals, truth ? &res.error_map : nullptr,
               truth ? &ds.mask : nullptr, res.report, {row});
  if (!std::isnan(res.mae_deg)) {
    std::cout << method << " mean angular error: " << res.mae_deg << " deg\n";
  }
  std::cout << "results written to " << f.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"photometric stereo via adaptive dictionary learning"};
  app.require_subcommand(1);

  // estimate
  CommonFlags ef;
  std::string method = "ls";
  double est_snr = std::numeric_limits<double>::quiet_NaN();
  int est_realization = 0;
  auto* est = app.add_subcommand("estimate", "run one estimator on a dataset");
  add_common(est, &ef, true);
  est->add_option("--method", method, "ls | dlpi | dlnv")
      ->check(CLI::IsMember({"ls", "dlpi", "dlnv"}))
      ->required();
  est->add_option("--snr", est_snr, "inject poisson noise at this SNR (dB) first");
  est->add_option("--realization", est_realization, "noise realization index");

  // sweep-snr
  CommonFlags sf;
  std::vector<double> snr_list;
  std::vector<std::string> snr_methods{"ls", "dlpi", "dlnv"};
  int subset_count = 0;
  auto* ssnr = app.add_subcommand("sweep-snr", "sweep noise level at fixed image count");
  add_common(ssnr, &sf, true);
  ssnr->add_option("--snr-list", snr_list, "SNR values in dB")->required();
  ssnr->add_option("--methods", snr_methods, "methods to compare");
  ssnr->add_option("--nimages", subset_count, "image subset size (0 = all)");

  // sweep-nimages
  CommonFlags nf;
  std::vector<int> count_list;
  std::vector<std::string> nim_methods{"ls", "dlpi", "dlnv"};
  double nim_snr = 10.0;
  auto* snim = app.add_subcommand("sweep-nimages", "sweep image count at fixed SNR");
  add_common(snim, &nf, true);
  snim->add_option("--nimages-list", count_list, "image counts")->required();
  snim->add_option("--methods", nim_methods, "methods to compare");
  snim->add_option("--snr", nim_snr, "noise level in dB");

  // sweep-params
  CommonFlags pf;
  std::vector<double> lambda_list, mu_list;
  std::string grid_method = "dlpi";
  double grid_snr = 10.0;
  auto* spar = app.add_subcommand("sweep-params", "grid over lambda and mu");
  add_common(spar, &pf, true);
  spar->add_option("--method", grid_method, "dlpi | dlnv")
      ->check(CLI::IsMember({"dlpi", "dlnv"}));
  spar->add_option("--lambda-list", lambda_list, "lambda grid")->required();
  spar->add_option("--mu-list", mu_list, "mu grid")->required();
  spar->add_option("--snr", grid_snr, "noise level in dB");

  // render-sphere
  CommonFlags rf;
  int sphere_size = 64, sphere_lights = 10;
  double sphere_tilt = 30.0, sphere_radius = 0.8;
  std::string sphere_albedo = "rings", sphere_encoding = "float";
  auto* rs = app.add_subcommand("render-sphere", "write a synthetic Lambertian dataset");
  rs->add_option("--out", rf.out, "output directory")->required();
  rs->add_option("--size", sphere_size, "image resolution");
  rs->add_option("--nlights", sphere_lights, "number of light directions");
  rs->add_option("--tilt", sphere_tilt, "max light tilt from the view axis (deg)");
  rs->add_option("--radius", sphere_radius, "disc radius in (0,1]");
  rs->add_option("--albedo", sphere_albedo, "uniform | rings")
      ->check(CLI::IsMember({"uniform", "rings"}));
  rs->add_option("--encoding", sphere_encoding, "png8 | png16 | float")
      ->check(CLI::IsMember({"png8", "png16", "float"}));
  rs->add_option("--seed", rf.seed, "light spiral seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
  }

  try {
    if (est->parsed()) {
      apply_config_file(&ef);
      return cmd_estimate(ef, method, est_snr, est_realization);
    }
    if (ssnr->parsed()) {
      apply_config_file(&sf);
      const Dataset ds = load(sf);
      if (subset_count == 0) subset_count = ds.stack.image_count();
      const SweepOutcome out = sweep_snr(ds, snr_methods, snr_list, subset_count,
                                         to_solver_config(sf), to_sweep_options(sf, ds));
      print_summary(std::cout, out, "snr_db");
      return 0;
    }
    if (snim->parsed()) {
      apply_config_file(&nf);
      const Dataset ds = load(nf);
      const SweepOutcome out = sweep_nimages(ds, nim_methods, count_list, nim_snr,
                                             to_solver_config(nf), to_sweep_options(nf, ds));
      print_summary(std::cout, out, "n_images");
      return 0;
    }
    if (spar->parsed()) {
      apply_config_file(&pf);
      const Dataset ds = load(pf);
      const SweepOutcome out = sweep_params(ds, grid_method, lambda_list, mu_list, grid_snr,
                                            to_solver_config(pf), to_sweep_options(pf, ds));
      print_summary(std::cout, out, "snr_db");
      return 0;
    }
    if (rs->parsed()) {
      const LightSet lights = well_spread_lights(sphere_lights, sphere_tilt, rf.seed);
      const Dataset ds = generate_sphere(
          sphere_size, lights,
          sphere_albedo == "rings" ? AlbedoPattern::kRings : AlbedoPattern::kUniform,
          sphere_radius);
      const StackEncoding enc = sphere_encoding == "png8"    ? StackEncoding::kPng8
                                : sphere_encoding == "png16" ? StackEncoding::kPng16
                                                             : StackEncoding::kFloat;
      save_dataset(rf.out, ds, enc);
      std::cout << "wrote " << ds.stack.image_count() << "-image sphere dataset to "
                << rf.out << " (" << ds.clamped_shadow_count
                << " attached-shadow samples)\n";
      return 0;
    }
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
