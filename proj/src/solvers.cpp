#include "psdl/solvers.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace psdl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string echo_config(const SolverConfig& cfg, const PatchDims& p, const PatchStride& s,
                        int atoms) {
  std::ostringstream os;
  os << "lambda=" << cfg.lambda << " mu=" << cfg.dict.mu << " a=" << cfg.dict.code_bound
     << " atoms=" << atoms << " patch=" << p.x << "x" << p.y << "x" << p.z
     << " stride=" << s.x << "x" << s.y << "x" << s.z
     << " outer=" << cfg.outer_iterations << " inner=" << cfg.dict.inner_iterations
     << " prox_steps=" << cfg.prox_steps << " tau=" << cfg.tau
     << " tol=" << cfg.tolerance << " seed=" << cfg.dict.seed;
  return os.str();
}

double relative_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev) {
  const double denom = prev.norm();
  if (denom == 0.0) return next.norm() == 0.0 ? 0.0 : 1.0;
  return (next - prev).norm() / denom;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda > 0.0)) throw ContractError("SolverConfig: lambda must be > 0");
  if (outer_iterations < 1) throw ContractError("SolverConfig: outer_iterations must be >= 1");
  if (prox_steps < 1) throw ContractError("SolverConfig: prox_steps must be >= 1");
  if (tau < 0.0 || !std::isfinite(tau)) throw ContractError("SolverConfig: tau must be >= 0");
  if (!(tolerance >= 0.0)) throw ContractError("SolverConfig: tolerance must be >= 0");
  if (patch.x < 1 || patch.y < 1 || patch.z < 0)
    throw ContractError("SolverConfig: patch extents must be positive (z may be 0 = default)");
  if (stride.x < 1 || stride.y < 1 || stride.z < 0)
    throw ContractError("SolverConfig: strides must be positive (z may be 0 = default)");
  // mu/code_bound/inner checked when the dictionary config is finalized.
}

double spectral_norm(const Eigen::Matrix3Xd& lights) {
  const Eigen::Matrix3d m = lights * lights.transpose();
  Eigen::Vector3d v = Eigen::Vector3d::Constant(1.0 / std::sqrt(3.0));
  double value = 0.0;
  for (int it = 0; it < 50; ++it) {
    Eigen::Vector3d w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(norm - value) <= 1e-10 * std::max(norm, 1.0)) {
      value = norm;
      break;
    }
    value = norm;
  }
  return std::sqrt(value);
}

Eigen::MatrixXd data_term_gradient(const Eigen::MatrixXd& normals,
                                   const Eigen::MatrixXd& observations,
                                   const Eigen::Matrix3Xd& lights) {
  return (normals * lights - observations) * lights.transpose();
}

Eigen::VectorXd regularized_diagonal_solve(const Eigen::VectorXd& base,
                                           const Eigen::VectorXd& recon_adjoint,
                                           const Eigen::VectorXd& coverage, double weight) {
  if (base.size() != recon_adjoint.size() || base.size() != coverage.size()) {
    throw ContractError("regularized_diagonal_solve: size mismatch");
  }
  return (base + weight * recon_adjoint).cwiseQuotient(
      Eigen::VectorXd::Ones(coverage.size()) + weight * coverage);
}

NormalField least_squares(const ImageStack& stack) {
  const Eigen::Matrix3Xd& lights = stack.lights().matrix();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(lights);
  const double smax = svd.singularValues()[0];
  const double smin = svd.singularValues()[2];
  if (!(smin > 1e-8 * smax)) {
    std::ostringstream os;
    os << "least_squares: light matrix is rank-deficient (singular values "
       << svd.singularValues()[0] << ", " << svd.singularValues()[1] << ", "
       << svd.singularValues()[2] << " over " << stack.image_count()
       << " directions); normals are not identifiable";
    throw IllPosedError(os.str());
  }
  // N = Y L^T (L L^T)^{-1}, the closed-form minimizer.
  const Eigen::Matrix3d gram = lights * lights.transpose();
  const Eigen::MatrixXd pinv_t = gram.ldlt().solve(lights).transpose();  // d x 3
  return NormalField(stack.rows(), stack.cols(), stack.matrix() * pinv_t);
}

std::pair<ImageStack, SolveReport> dlpi_preprocess(const ImageStack& stack,
                                                   const SolverConfig& cfg) {
  cfg.validate();
  const auto t_start = Clock::now();
  const int d = stack.image_count();

  PatchDims pdims = cfg.patch;
  if (pdims.z == 0) pdims.z = std::min(d, 5);
  PatchStride pstride = cfg.stride;
  if (pstride.z == 0) pstride.z = pdims.z;
  const PatchGeometry geom(pdims, pstride, stack.rows(), stack.cols(), d);

  DictLearnConfig dcfg = cfg.dict;
  if (dcfg.atom_count == 0) dcfg.atom_count = 2 * geom.patch_len();
  dcfg.validate();

  SolveReport report;
  report.method = "dlpi";
  report.seed = dcfg.seed;
  report.config_echo = echo_config(cfg, pdims, pstride, dcfg.atom_count);

  const Eigen::VectorXd y = stack_to_volume(stack).data();
  const Eigen::VectorXd coverage = gram_diagonal(geom);
  const double weight = 2.0 * cfg.lambda;

  Volume v(stack.rows(), stack.cols(), d, y);
  Dictionary dict;
  SparseCodes codes;
  bool warm = false;

  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    auto t_learn = Clock::now();
    const Eigen::MatrixXd patches = extract_patches(v, geom);
    DictLearnResult res = learn(patches, dcfg, warm ? &dict : nullptr,
                                warm ? &codes : nullptr);
    dict = std::move(res.dictionary);
    codes = std::move(res.codes);
    warm = true;
    report.learn_seconds += seconds_since(t_learn);

    auto t_update = Clock::now();
    const Eigen::MatrixXd recon = dict.atoms * codes.codes;
    const Volume recon_adj = adjoint_patches(recon, geom);
    Eigen::VectorXd v_next =
        regularized_diagonal_solve(y, recon_adj.data(), coverage, weight);
    report.final_relative_change = relative_change(v_next, v.data());
    v.data() = std::move(v_next);
    report.update_seconds += seconds_since(t_update);

    // Objective of the full model at (v, D, B).
    const double fit = (extract_patches(v, geom) - recon).squaredNorm();
    const double data = 0.5 * (y - v.data()).squaredNorm();
    const double nnz = static_cast<double>(codes.nonzero_count());
    report.objective_trace.push_back(
        data + cfg.lambda * (fit + dcfg.mu * dcfg.mu * nnz));
    report.outer_iterations_run = outer + 1;
    if (report.final_relative_change < cfg.tolerance) break;
  }

  report.dictionary_atoms = std::move(dict.atoms);
  report.sparse_codes = std::move(codes.codes);
  report.total_seconds = seconds_since(t_start);
  return {volume_to_stack(v, stack.lights()), std::move(report)};
}

std::pair<NormalField, SolveReport> dlpi(const ImageStack& stack, const SolverConfig& cfg) {
  const auto t0 = Clock::now();
  auto [cleaned, report] = dlpi_preprocess(stack, cfg);
  NormalField normals = least_squares(cleaned);
  report.total_seconds = seconds_since(t0);
  return {std::move(normals), std::move(report)};
}

std::pair<NormalField, SolveReport> dlnv(const ImageStack& stack, const SolverConfig& cfg) {
  cfg.validate();
  const auto t_start = Clock::now();
  const int pixels = stack.pixel_count();

  PatchDims pdims = cfg.patch;
  if (pdims.z == 0) pdims.z = 3;
  PatchStride pstride = cfg.stride;
  if (pstride.z == 0) pstride.z = pdims.z;
  const PatchGeometry geom(pdims, pstride, stack.rows(), stack.cols(), 3);

  DictLearnConfig dcfg = cfg.dict;
  if (dcfg.atom_count == 0) dcfg.atom_count = 2 * geom.patch_len();
  dcfg.validate();

  SolveReport report;
  report.method = "dlnv";
  report.seed = dcfg.seed;
  report.config_echo = echo_config(cfg, pdims, pstride, dcfg.atom_count);

  const Eigen::Matrix3Xd& lights = stack.lights().matrix();
  const Eigen::MatrixXd& y = stack.matrix();

  const double sigma = spectral_norm(lights);
  const double lipschitz = sigma * sigma;
  double tau = cfg.tau;
  if (tau == 0.0) {
    tau = 0.99 / lipschitz;
  } else if (tau > 2.0 / lipschitz) {
    std::ostringstream os;
    os << "tau=" << tau << " exceeds 2/sigma_max(L)^2=" << 2.0 / lipschitz
       << "; the proximal gradient iteration may diverge";
    report.warnings.push_back(os.str());
  }
  report.tau_used = tau;

  Eigen::MatrixXd normals = least_squares(stack).matrix();  // m x 3 iterate

  const Eigen::VectorXd coverage = gram_diagonal(geom);
  const double weight = 2.0 * tau * cfg.lambda;

  Dictionary dict;
  SparseCodes codes;
  bool warm = false;

  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    auto t_learn = Clock::now();
    // The m x 3 column-major iterate is exactly the 3-slice volume layout.
    const Volume nvol(stack.rows(), stack.cols(), 3,
                      Eigen::Map<const Eigen::VectorXd>(normals.data(), normals.size()));
    const Eigen::MatrixXd patches = extract_patches(nvol, geom);
    DictLearnResult res = learn(patches, dcfg, warm ? &dict : nullptr,
                                warm ? &codes : nullptr);
    dict = std::move(res.dictionary);
    codes = std::move(res.codes);
    warm = true;
    report.learn_seconds += seconds_since(t_learn);

    auto t_update = Clock::now();
    const Eigen::MatrixXd recon = dict.atoms * codes.codes;
    const Eigen::VectorXd recon_adj = adjoint_patches(recon, geom).data();

    const Eigen::MatrixXd normals_prev = normals;
    for (int step = 0; step < cfg.prox_steps; ++step) {
      const Eigen::MatrixXd tilde =
          normals - tau * data_term_gradient(normals, y, lights);
      const Eigen::VectorXd solved = regularized_diagonal_solve(
          Eigen::Map<const Eigen::VectorXd>(tilde.data(), tilde.size()), recon_adj,
          coverage, weight);
      normals = Eigen::Map<const Eigen::MatrixXd>(solved.data(), pixels, 3);
    }
    report.final_relative_change =
        relative_change(Eigen::Map<const Eigen::VectorXd>(normals.data(), normals.size()),
                        Eigen::Map<const Eigen::VectorXd>(normals_prev.data(),
                                                          normals_prev.size()));
    report.update_seconds += seconds_since(t_update);

    const Volume nvol_next(stack.rows(), stack.cols(), 3,
                           Eigen::Map<const Eigen::VectorXd>(normals.data(), normals.size()));
    const double fit = (extract_patches(nvol_next, geom) - recon).squaredNorm();
    const double data = 0.5 * (y - normals * lights).squaredNorm();
    const double nnz = static_cast<double>(codes.nonzero_count());
    report.objective_trace.push_back(
        data + cfg.lambda * (fit + dcfg.mu * dcfg.mu * nnz));
    report.outer_iterations_run = outer + 1;
    if (report.final_relative_change < cfg.tolerance) break;
  }

  report.dictionary_atoms = std::move(dict.atoms);
  report.sparse_codes = std::move(codes.codes);
  report.total_seconds = seconds_since(t_start);
  RowNormalization rn =
      normalize_rows(NormalField(stack.rows(), stack.cols(), std::move(normals)));
  return {std::move(rn.unit), std::move(report)};
}

}  // namespace psdl
