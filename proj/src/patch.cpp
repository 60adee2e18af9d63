#include "psdl/patch.hpp"

#include <string>

namespace psdl {

namespace {

// Anchor positions along one axis: 0, s, 2s, ... plus a flush final patch
// when (dim - patch) is not a multiple of the stride.
std::vector<int> axis_starts(int dim, int patch, int stride, const char* axis) {
  if (patch < 1 || patch > dim) {
    throw ContractError(std::string("PatchGeometry: patch extent ") + std::to_string(patch) +
                        " along " + axis + " must be in [1, " + std::to_string(dim) + "]");
  }
  if (stride < 1) {
    throw ContractError(std::string("PatchGeometry: stride along ") + axis +
                        " must be positive");
  }
  if (stride > patch) {
    // A gap between consecutive patches would leave voxels uncovered and
    // break the diagonal-inverse update.
    throw ContractError(std::string("PatchGeometry: stride ") + std::to_string(stride) +
                        " along " + axis + " exceeds the patch extent " +
                        std::to_string(patch));
  }
  std::vector<int> starts;
  for (int s = 0; s + patch <= dim; s += stride) starts.push_back(s);
  if (starts.back() != dim - patch) starts.push_back(dim - patch);
  return starts;
}

}  // namespace

PatchGeometry::PatchGeometry(PatchDims patch, PatchStride stride, int m1, int m2, int depth)
    : patch_(patch), stride_(stride), m1_(m1), m2_(m2), depth_(depth) {
  if (m1 < 1 || m2 < 1 || depth < 1) {
    throw ContractError("PatchGeometry: volume dimensions must be positive");
  }
  xs_ = axis_starts(m1, patch.x, stride.x, "x");
  ys_ = axis_starts(m2, patch.y, stride.y, "y");
  zs_ = axis_starts(depth, patch.z, stride.z, "z");
}

void PatchGeometry::patch_origin(int j, int* x0, int* y0, int* z0) const {
  const int ny = static_cast<int>(ys_.size());
  const int nx = static_cast<int>(xs_.size());
  if (j < 0 || j >= patch_count()) {
    throw ContractError("PatchGeometry: patch index " + std::to_string(j) + " out of range");
  }
  *y0 = ys_[j % ny];
  *x0 = xs_[(j / ny) % nx];
  *z0 = zs_[j / (ny * nx)];
}

std::vector<int> PatchGeometry::patch_indices(int j) const {
  int x0, y0, z0;
  patch_origin(j, &x0, &y0, &z0);
  std::vector<int> map(patch_len());
  int t = 0;
  for (int lz = 0; lz < patch_.z; ++lz)
    for (int ly = 0; ly < patch_.y; ++ly)
      for (int lx = 0; lx < patch_.x; ++lx)
        map[t++] = (z0 + lz) * m1_ * m2_ + pixel_index(x0 + lx, y0 + ly, m2_);
  return map;
}

namespace {

void check_volume(const Volume& v, const PatchGeometry& g, const char* who) {
  if (v.m1() != g.m1() || v.m2() != g.m2() || v.depth() != g.depth()) {
    throw ContractError(std::string(who) + ": volume " + std::to_string(v.m1()) + "x" +
                        std::to_string(v.m2()) + "x" + std::to_string(v.depth()) +
                        " does not match geometry " + std::to_string(g.m1()) + "x" +
                        std::to_string(g.m2()) + "x" + std::to_string(g.depth()));
  }
}

}  // namespace

Eigen::MatrixXd extract_patches(const Volume& volume, const PatchGeometry& geom) {
  check_volume(volume, geom, "extract_patches");
  const PatchDims& p = geom.patch();
  Eigen::MatrixXd out(geom.patch_len(), geom.patch_count());
  const double* v = volume.data().data();
  const int m1 = geom.m1(), m2 = geom.m2();
  int j = 0;
  for (int z0 : geom.starts_z())
    for (int x0 : geom.starts_x())
      for (int y0 : geom.starts_y()) {
        double* col = out.col(j).data();
        int t = 0;
        for (int lz = 0; lz < p.z; ++lz)
          for (int ly = 0; ly < p.y; ++ly) {
            const double* src = v + (z0 + lz) * m1 * m2 + pixel_index(x0, y0 + ly, m2);
            for (int lx = 0; lx < p.x; ++lx) col[t++] = src[lx * m2];
          }
        ++j;
      }
  return out;
}

Volume adjoint_patches(const Eigen::MatrixXd& patches, const PatchGeometry& geom) {
  if (patches.rows() != geom.patch_len() || patches.cols() != geom.patch_count()) {
    throw ContractError("adjoint_patches: patch matrix " + std::to_string(patches.rows()) +
                        "x" + std::to_string(patches.cols()) + " does not match geometry (" +
                        std::to_string(geom.patch_len()) + "x" +
                        std::to_string(geom.patch_count()) + ")");
  }
  const PatchDims& p = geom.patch();
  Volume out(geom.m1(), geom.m2(), geom.depth());
  double* v = out.data().data();
  const int m1 = geom.m1(), m2 = geom.m2();
  int j = 0;
  for (int z0 : geom.starts_z())
    for (int x0 : geom.starts_x())
      for (int y0 : geom.starts_y()) {
        const double* col = patches.col(j).data();
        int t = 0;
        for (int lz = 0; lz < p.z; ++lz)
          for (int ly = 0; ly < p.y; ++ly) {
            double* dst = v + (z0 + lz) * m1 * m2 + pixel_index(x0, y0 + ly, m2);
            for (int lx = 0; lx < p.x; ++lx) dst[lx * m2] += col[t++];
          }
        ++j;
      }
  return out;
}

Eigen::VectorXd gram_diagonal(const PatchGeometry& geom) {
  const PatchDims& p = geom.patch();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(geom.m1()) * geom.m2() * geom.depth());
  const int m1 = geom.m1(), m2 = geom.m2();
  for (int z0 : geom.starts_z())
    for (int x0 : geom.starts_x())
      for (int y0 : geom.starts_y())
        for (int lz = 0; lz < p.z; ++lz)
          for (int ly = 0; ly < p.y; ++ly) {
            double* dst =
                counts.data() + (z0 + lz) * m1 * m2 + pixel_index(x0, y0 + ly, m2);
            for (int lx = 0; lx < p.x; ++lx) dst[lx * m2] += 1.0;
          }
  return counts;
}

}  // namespace psdl
