#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "psdl/errors.hpp"

namespace psdl {

// Learned basis over a patch space; atoms are the unit-norm columns.
struct Dictionary {
  Eigen::MatrixXd atoms;  // patch_len x atom_count

  int patch_len() const { return static_cast<int>(atoms.rows()); }
  int atom_count() const { return static_cast<int>(atoms.cols()); }
  void validate() const;
};

// Code matrix B, one column per patch; entries bounded by the l-inf box.
struct SparseCodes {
  Eigen::MatrixXd codes;  // atom_count x patch_count

  std::int64_t nonzero_count() const;
  Eigen::VectorXi nonzeros_per_column() const;
};

struct DictLearnConfig {
  int atom_count = 0;       // K; solvers default this to 2 * patch_len when 0
  double mu = 0.05;         // l0 threshold, in patch intensity units
  double code_bound = 1e6;  // a; the box |b| <= a, rarely active
  int inner_iterations = 5; // full (code, atom) sweeps per learn call
  std::uint64_t seed = 0;   // initialization stream

  // Requires atom_count >= 1, mu > 0, code_bound > 0, mu <= code_bound (so
  // the clamped hard threshold stays the exact row minimizer).
  void validate() const;
};

// First min(p, K) atoms are the canonical basis, the rest unit-norm Gaussian
// draws; deterministic for a fixed seed.
Dictionary init_dictionary(int patch_len, int atom_count, std::uint64_t seed);

// Exact minimizer over one code row of ||E - d b^T||_F^2 + mu^2 ||b||_0 with
// |b_j| <= bound (requires mu <= bound): per column, the inner product with
// the atom, hard-thresholded at mu, clamped to the box.
Eigen::RowVectorXd sparse_code_atom(const Eigen::MatrixXd& residual,
                                    const Eigen::VectorXd& atom, double mu, double bound);

// Exact minimizer over one unit atom of ||E - d b^T||_F^2: the normalized
// rank-one projection E b^T / ||E b^T||. Returns e_1 when the projection is
// exactly zero (e.g. an all-zero code row) to keep runs reproducible.
Eigen::VectorXd update_atom(const Eigen::MatrixXd& residual,
                            const Eigen::RowVectorXd& code_row);

struct DictLearnResult {
  Dictionary dictionary;
  SparseCodes codes;
  // Objective ||X - D B||_F^2 + mu^2 ||B||_0 after each sweep; non-increasing.
  std::vector<double> objective_trace;
};

// Block coordinate descent on (D, B) for a fixed patch matrix: each sweep
// visits atoms in order, re-coding the atom's row against the current
// residual and then re-fitting the atom. Warm starts continue from a
// previous (dictionary, codes) pair.
DictLearnResult learn(const Eigen::MatrixXd& patches, const DictLearnConfig& cfg,
                      const Dictionary* warm_dictionary = nullptr,
                      const SparseCodes* warm_codes = nullptr);

}  // namespace psdl
