#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "psdl/dictlearn.hpp"
#include "psdl/patch.hpp"
#include "psdl/types.hpp"

namespace psdl {

struct SolverConfig {
  // Weight of the dictionary term relative to data fidelity.
  double lambda = 0.25;

  DictLearnConfig dict;

  // Patch extents / strides; z = 0 picks the method default (images: min(d,5)
  // with non-overlapping slices, normals: all 3 components).
  PatchDims patch{8, 8, 0};
  PatchStride stride{1, 1, 0};

  int outer_iterations = 20;
  int prox_steps = 10;     // gradient/prox pairs per outer iteration (DLNV)
  double tau = 0.0;        // proximal step; 0 -> 0.99 / sigma_max(L)^2
  double tolerance = 1e-5; // relative iterate change for early stop

  void validate() const;
};

struct SolveReport {
  std::string method;
  std::vector<double> objective_trace;  // one entry per completed outer iteration
  double final_relative_change = std::numeric_limits<double>::infinity();
  int outer_iterations_run = 0;
  double tau_used = 0.0;  // DLNV only
  double learn_seconds = 0.0;
  double update_seconds = 0.0;
  double total_seconds = 0.0;
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;
  std::string config_echo;
  // Final learned state, persisted in the result bundle so runs can be
  // audited or warm-started; empty for plain least squares.
  Eigen::MatrixXd dictionary_atoms;  // patch_len x K
  Eigen::MatrixXd sparse_codes;      // K x patch_count
};

// Closed-form estimate Y L-pseudoinverse; the exact minimizer of
// ||Y - N L||_F^2. Throws IllPosedError when the light matrix has rank < 3.
NormalField least_squares(const ImageStack& stack);

// Removes non-idealities from the stack by alternating dictionary learning
// on 3-D image patches with the exact diagonal update of the denoised stack.
std::pair<ImageStack, SolveReport> dlpi_preprocess(const ImageStack& stack,
                                                   const SolverConfig& cfg);

// dlpi_preprocess followed by least_squares.
std::pair<NormalField, SolveReport> dlpi(const ImageStack& stack, const SolverConfig& cfg);

// Estimates normals directly under a dictionary prior on the normal field:
// least-squares initialization, then alternating dictionary learning with
// proximal gradient steps on the data term. Output rows are unit normals.
std::pair<NormalField, SolveReport> dlnv(const ImageStack& stack, const SolverConfig& cfg);

// --- building blocks, exposed for verification ---

// sigma_max(L) by power iteration on the 3x3 matrix L L^T.
double spectral_norm(const Eigen::Matrix3Xd& lights);

// Gradient of 0.5 ||Y - N L||_F^2 in N: (N L - Y) L^T, one 3xd product per
// pixel; the Kronecker operator L^T (x) I is never materialized.
Eigen::MatrixXd data_term_gradient(const Eigen::MatrixXd& normals,
                                   const Eigen::MatrixXd& observations,
                                   const Eigen::Matrix3Xd& lights);

// Solves (I + weight * diag(coverage)) x = base + weight * recon_adjoint
// elementwise; the shared diagonal update of both alternating solvers.
Eigen::VectorXd regularized_diagonal_solve(const Eigen::VectorXd& base,
                                           const Eigen::VectorXd& recon_adjoint,
                                           const Eigen::VectorXd& coverage, double weight);

}  // namespace psdl
