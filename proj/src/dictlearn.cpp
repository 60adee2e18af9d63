#include "psdl/dictlearn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "psdl/rng.hpp"

namespace psdl {

namespace {
constexpr std::uint64_t kInitSalt = 0x64696374696e6974ULL;  // stream tag
}

void Dictionary::validate() const {
  for (int i = 0; i < atom_count(); ++i) {
    const double norm = atoms.col(i).norm();
    if (std::abs(norm - 1.0) > 1e-9) {
      throw ContractError("Dictionary: atom " + std::to_string(i) +
                          " has norm " + std::to_string(norm) + ", expected 1");
    }
  }
}

std::int64_t SparseCodes::nonzero_count() const {
  std::int64_t n = 0;
  for (Eigen::Index j = 0; j < codes.cols(); ++j)
    for (Eigen::Index i = 0; i < codes.rows(); ++i) n += (codes(i, j) != 0.0);
  return n;
}

Eigen::VectorXi SparseCodes::nonzeros_per_column() const {
  Eigen::VectorXi n = Eigen::VectorXi::Zero(codes.cols());
  for (Eigen::Index j = 0; j < codes.cols(); ++j)
    for (Eigen::Index i = 0; i < codes.rows(); ++i) n[j] += (codes(i, j) != 0.0);
  return n;
}

void DictLearnConfig::validate() const {
  if (atom_count < 1) throw ContractError("DictLearnConfig: atom_count must be >= 1");
  if (!(mu > 0.0)) throw ContractError("DictLearnConfig: mu must be > 0");
  if (!(code_bound > 0.0)) throw ContractError("DictLearnConfig: code_bound must be > 0");
  if (mu > code_bound) {
    throw ContractError("DictLearnConfig: mu must not exceed code_bound (" +
                        std::to_string(mu) + " > " + std::to_string(code_bound) + ")");
  }
  if (inner_iterations < 1) {
    throw ContractError("DictLearnConfig: inner_iterations must be >= 1");
  }
}

Dictionary init_dictionary(int patch_len, int atom_count, std::uint64_t seed) {
  if (patch_len < 1) throw ContractError("init_dictionary: patch_len must be >= 1");
  if (atom_count < 1) throw ContractError("init_dictionary: atom_count must be >= 1");
  Eigen::MatrixXd atoms = Eigen::MatrixXd::Zero(patch_len, atom_count);
  const int canonical = std::min(patch_len, atom_count);
  for (int i = 0; i < canonical; ++i) atoms(i, i) = 1.0;
  Rng rng = Rng::stream(seed, kInitSalt);
  for (int i = canonical; i < atom_count; ++i) {
    double norm = 0.0;
    while (norm <= 0.0) {
      for (int r = 0; r < patch_len; ++r) atoms(r, i) = rng.normal();
      norm = atoms.col(i).norm();
    }
    atoms.col(i) /= norm;
  }
  return Dictionary{std::move(atoms)};
}

Eigen::RowVectorXd sparse_code_atom(const Eigen::MatrixXd& residual,
                                    const Eigen::VectorXd& atom, double mu, double bound) {
  if (atom.size() != residual.rows()) {
    throw ContractError("sparse_code_atom: atom length " + std::to_string(atom.size()) +
                        " vs residual rows " + std::to_string(residual.rows()));
  }
  if (std::abs(atom.norm() - 1.0) > 1e-9) {
    throw ContractError("sparse_code_atom: atom must be unit norm");
  }
  Eigen::RowVectorXd row = atom.transpose() * residual;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    const double t = row[j];
    row[j] = (std::abs(t) > mu) ? std::clamp(t, -bound, bound) : 0.0;
  }
  return row;
}

Eigen::VectorXd update_atom(const Eigen::MatrixXd& residual,
                            const Eigen::RowVectorXd& code_row) {
  if (code_row.size() != residual.cols()) {
    throw ContractError("update_atom: code row length " + std::to_string(code_row.size()) +
                        " vs residual cols " + std::to_string(residual.cols()));
  }
  Eigen::VectorXd u = residual * code_row.transpose();
  const double norm = u.norm();
  if (norm == 0.0) {
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(residual.rows());
    e1[0] = 1.0;
    return e1;
  }
  return u / norm;
}

DictLearnResult learn(const Eigen::MatrixXd& patches, const DictLearnConfig& cfg,
                      const Dictionary* warm_dictionary, const SparseCodes* warm_codes) {
  cfg.validate();
  const int p = static_cast<int>(patches.rows());
  const int c = static_cast<int>(patches.cols());
  const int K = cfg.atom_count;

  Dictionary dict = warm_dictionary ? *warm_dictionary
                                    : init_dictionary(p, K, cfg.seed);
  if (dict.patch_len() != p || dict.atom_count() != K) {
    throw ContractError("learn: warm dictionary is " + std::to_string(dict.patch_len()) +
                        "x" + std::to_string(dict.atom_count()) + ", expected " +
                        std::to_string(p) + "x" + std::to_string(K));
  }
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(K, c);
  if (warm_codes) {
    if (warm_codes->codes.rows() != K || warm_codes->codes.cols() != c) {
      throw ContractError("learn: warm codes shape mismatch");
    }
    B = warm_codes->codes;
  }

  // Residual X - D B, kept current with rank-one updates per atom visit.
  Eigen::MatrixXd R = patches - dict.atoms * B;

  std::vector<double> trace;
  trace.reserve(cfg.inner_iterations);
  for (int sweep = 0; sweep < cfg.inner_iterations; ++sweep) {
    for (int i = 0; i < K; ++i) {
      R.noalias() += dict.atoms.col(i) * B.row(i);  // R now holds E_i
      const Eigen::RowVectorXd row = sparse_code_atom(R, dict.atoms.col(i), cfg.mu,
                                                      cfg.code_bound);
      const Eigen::VectorXd atom = update_atom(R, row);
      dict.atoms.col(i) = atom;
      B.row(i) = row;
      R.noalias() -= atom * row;
    }
    std::int64_t nnz = 0;
    for (Eigen::Index j = 0; j < B.cols(); ++j)
      for (Eigen::Index i2 = 0; i2 < B.rows(); ++i2) nnz += (B(i2, j) != 0.0);
    trace.push_back(R.squaredNorm() + cfg.mu * cfg.mu * static_cast<double>(nnz));
  }

  return DictLearnResult{std::move(dict), SparseCodes{std::move(B)}, std::move(trace)};
}

}  // namespace psdl
