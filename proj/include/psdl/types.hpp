#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "psdl/errors.hpp"

namespace psdl {

// Rows with Euclidean norm at or below this are treated as carrying no
// direction information (zero albedo).
inline constexpr double kAlbedoEps = 1e-12;

// Pixels are addressed by (x, y) with x the row in [0, m1) and y the column
// in [0, m2); the canonical linear index scans row by row:
//   q = x * m2 + y.
// Every vectorized quantity in the library (image columns, normal rows,
// volume slices) uses this map.
inline int pixel_index(int x, int y, int m2) { return x * m2 + y; }

// Unit illumination directions, one per image; the matrix L is 3 x d.
class LightSet {
 public:
  // Directions must already be unit length (1e-9 relative) and d >= 3.
  explicit LightSet(Eigen::Matrix3Xd directions);

  // Rescales each direction to unit length before validating; zero-length
  // directions are a contract violation.
  static LightSet normalized(Eigen::Matrix3Xd directions);

  const Eigen::Matrix3Xd& matrix() const { return dirs_; }
  int count() const { return static_cast<int>(dirs_.cols()); }
  Eigen::Vector3d direction(int k) const { return dirs_.col(k); }
  LightSet subset(const std::vector<int>& indices) const;

 private:
  Eigen::Matrix3Xd dirs_;
};

// d vectorized images side by side: Y(q, k) is the intensity of image k at
// pixel q. Intensities are nonnegative, finite doubles in linear radiometric
// units; integer sources are normalized to [0, 1] on load (io module).
class ImageStack {
 public:
  // Negative entries are clamped to zero and counted; non-finite entries are
  // a contract violation, as is any dimension mismatch.
  ImageStack(int m1, int m2, Eigen::MatrixXd intensities, LightSet lights);

  int rows() const { return m1_; }
  int cols() const { return m2_; }
  int pixel_count() const { return m1_ * m2_; }
  int image_count() const { return static_cast<int>(data_.cols()); }
  const Eigen::MatrixXd& matrix() const { return data_; }
  const LightSet& lights() const { return lights_; }
  std::int64_t clamped_negative_count() const { return clamped_; }

  // Same geometry and lights, new intensities.
  ImageStack with_matrix(Eigen::MatrixXd intensities) const;

  // Keeps only the given images (and their light directions).
  ImageStack subset(const std::vector<int>& image_indices) const;

 private:
  int m1_, m2_;
  Eigen::MatrixXd data_;
  LightSet lights_;
  std::int64_t clamped_ = 0;
};

// Boolean object mask over the pixel grid (true = evaluate this pixel).
class Mask {
 public:
  Mask(int m1, int m2, std::vector<std::uint8_t> inside);
  static Mask full(int m1, int m2);

  int rows() const { return m1_; }
  int cols() const { return m2_; }
  int pixel_count() const { return m1_ * m2_; }
  bool at(int x, int y) const { return inside_[pixel_index(x, y, m2_)] != 0; }
  bool at(int q) const { return inside_[q] != 0; }
  int count() const { return count_; }
  const std::vector<std::uint8_t>& flags() const { return inside_; }

 private:
  int m1_, m2_;
  std::vector<std::uint8_t> inside_;
  int count_ = 0;
};

// Scaled per-pixel surface normals rho(x,y) * n(x,y), one row per pixel in
// canonical pixel order. Unit directions and albedo are derived views
// (normalize_rows); rows of (near) zero norm are degenerate.
class NormalField {
 public:
  NormalField(int m1, int m2, Eigen::MatrixXd scaled_normals);

  int rows() const { return m1_; }
  int cols() const { return m2_; }
  int pixel_count() const { return m1_ * m2_; }
  const Eigen::MatrixXd& matrix() const { return n_; }

 private:
  int m1_, m2_;
  Eigen::MatrixXd n_;  // m1*m2 x 3
};

struct RowNormalization {
  NormalField unit;                      // unit rows; degenerate rows are 0
  Eigen::VectorXd albedo;                // per-pixel row norm
  std::vector<std::uint8_t> degenerate;  // 1 where albedo <= kAlbedoEps
  int degenerate_count = 0;
};

// Splits scaled normals into unit directions and albedo. Degenerate rows are
// returned as (0,0,0) and flagged rather than normalized.
RowNormalization normalize_rows(const NormalField& field);

// Dense 3-D grid over (x, y, z), stored slice-major:
//   data[z * m1 * m2 + pixel_index(x, y, m2)].
// Slice z of an image volume is image z; slice z of a normal volume is
// normal component z.
class Volume {
 public:
  Volume(int m1, int m2, int depth);
  Volume(int m1, int m2, int depth, Eigen::VectorXd data);

  int m1() const { return m1_; }
  int m2() const { return m2_; }
  int depth() const { return depth_; }
  int size() const { return m1_ * m2_ * depth_; }

  int index(int x, int y, int z) const {
    return z * m1_ * m2_ + pixel_index(x, y, m2_);
  }
  double at(int x, int y, int z) const { return data_[index(x, y, z)]; }
  double& at(int x, int y, int z) { return data_[index(x, y, z)]; }

  const Eigen::VectorXd& data() const { return data_; }
  Eigen::VectorXd& data() { return data_; }

 private:
  int m1_, m2_, depth_;
  Eigen::VectorXd data_;
};

// volume(x, y, k) = I_k(x, y); the exact inverse of volume_to_stack.
Volume stack_to_volume(const ImageStack& stack);
ImageStack volume_to_stack(const Volume& volume, const LightSet& lights);

// Normal field as an m1 x m2 x 3 volume (slice = component) and back.
Volume normals_to_volume(const NormalField& field);
NormalField volume_to_normals(const Volume& volume);

}  // namespace psdl
