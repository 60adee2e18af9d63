#pragma once

#include <Eigen/Dense>
#include <vector>

#include "psdl/types.hpp"

namespace psdl {

struct PatchDims {
  int x = 8, y = 8, z = 1;
};

struct PatchStride {
  int x = 1, y = 1, z = 1;
};

// Grid of axis-aligned 3-D patches covering a volume.
//
// Patches are anchored at (0,0,0) and advance by the stride along each axis;
// when the stride does not land flush on the far boundary an extra final
// patch is placed against it, so every voxel is covered at least once and
// the gram operator stays diagonal. No wrap-around.
//
// Canonical orders (the single source of truth for every vectorization):
//  * patch grid traversal: z slowest, then x, then y fastest;
//  * within a patch: x fastest, then y, then z, i.e. the standard
//    column-stacking vec of the c_x x c_y x c_z block.
class PatchGeometry {
 public:
  PatchGeometry(PatchDims patch, PatchStride stride, int m1, int m2, int depth);

  int patch_len() const { return patch_.x * patch_.y * patch_.z; }
  int patch_count() const {
    return static_cast<int>(xs_.size() * ys_.size() * zs_.size());
  }

  const PatchDims& patch() const { return patch_; }
  const PatchStride& stride() const { return stride_; }
  int m1() const { return m1_; }
  int m2() const { return m2_; }
  int depth() const { return depth_; }

  const std::vector<int>& starts_x() const { return xs_; }
  const std::vector<int>& starts_y() const { return ys_; }
  const std::vector<int>& starts_z() const { return zs_; }

  // Anchor voxel of patch j in grid traversal order.
  void patch_origin(int j, int* x0, int* y0, int* z0) const;

  // Explicit index map of patch j: global voxel index of each local entry,
  // in within-patch order. Length patch_len().
  std::vector<int> patch_indices(int j) const;

 private:
  PatchDims patch_;
  PatchStride stride_;
  int m1_, m2_, depth_;
  std::vector<int> xs_, ys_, zs_;
};

// Forward operator: column j holds the vectorized patch P_j v.
Eigen::MatrixXd extract_patches(const Volume& volume, const PatchGeometry& geom);

// Adjoint: scatters each column back to its source voxels and sums,
// returning sum_j P_j^T p_j. Accumulation order is fixed, so results are
// bit-reproducible.
Volume adjoint_patches(const Eigen::MatrixXd& patches, const PatchGeometry& geom);

// Diagonal of sum_j P_j^T P_j: per-voxel patch coverage count. Strictly
// positive everywhere by the flush-placement rule.
Eigen::VectorXd gram_diagonal(const PatchGeometry& geom);

}  // namespace psdl
