#include "psdl/types.hpp"

#include <cmath>
#include <string>

namespace psdl {

namespace {

void check_dims(int m1, int m2, const char* who) {
  if (m1 < 1 || m2 < 1) {
    throw ContractError(std::string(who) + ": grid dimensions must be positive, got " +
                        std::to_string(m1) + " x " + std::to_string(m2));
  }
}

}  // namespace

LightSet::LightSet(Eigen::Matrix3Xd directions) : dirs_(std::move(directions)) {
  if (dirs_.cols() < 3) {
    throw ContractError("LightSet: need at least 3 light directions, got " +
                        std::to_string(dirs_.cols()));
  }
  for (int k = 0; k < dirs_.cols(); ++k) {
    const double norm = dirs_.col(k).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-9) {
      throw ContractError("LightSet: direction " + std::to_string(k) +
                          " is not unit length (norm " + std::to_string(norm) + ")");
    }
  }
}

LightSet LightSet::normalized(Eigen::Matrix3Xd directions) {
  for (int k = 0; k < directions.cols(); ++k) {
    const double norm = directions.col(k).norm();
    if (norm <= 0.0 || !std::isfinite(norm)) {
      throw ContractError("LightSet: direction " + std::to_string(k) +
                          " has zero or non-finite length");
    }
    directions.col(k) /= norm;
  }
  return LightSet(std::move(directions));
}

LightSet LightSet::subset(const std::vector<int>& indices) const {
  Eigen::Matrix3Xd out(3, indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= count()) {
      throw ContractError("LightSet::subset: index " + std::to_string(indices[i]) +
                          " out of range");
    }
    out.col(i) = dirs_.col(indices[i]);
  }
  return LightSet(std::move(out));
}

ImageStack::ImageStack(int m1, int m2, Eigen::MatrixXd intensities, LightSet lights)
    : m1_(m1), m2_(m2), data_(std::move(intensities)), lights_(std::move(lights)) {
  check_dims(m1, m2, "ImageStack");
  if (data_.rows() != static_cast<Eigen::Index>(m1_) * m2_) {
    throw ContractError("ImageStack: intensity matrix has " + std::to_string(data_.rows()) +
                        " rows, expected m1*m2 = " + std::to_string(m1_ * m2_));
  }
  if (data_.cols() != lights_.count()) {
    throw ContractError("ImageStack: " + std::to_string(data_.cols()) +
                        " image columns vs " + std::to_string(lights_.count()) +
                        " light directions");
  }
  if (!data_.allFinite()) {
    throw ContractError("ImageStack: intensities must be finite");
  }
  for (Eigen::Index j = 0; j < data_.cols(); ++j) {
    for (Eigen::Index i = 0; i < data_.rows(); ++i) {
      if (data_(i, j) < 0.0) {
        data_(i, j) = 0.0;
        ++clamped_;
      }
    }
  }
}

ImageStack ImageStack::with_matrix(Eigen::MatrixXd intensities) const {
  return ImageStack(m1_, m2_, std::move(intensities), lights_);
}

ImageStack ImageStack::subset(const std::vector<int>& image_indices) const {
  Eigen::MatrixXd sub(data_.rows(), image_indices.size());
  for (std::size_t i = 0; i < image_indices.size(); ++i) {
    if (image_indices[i] < 0 || image_indices[i] >= image_count()) {
      throw ContractError("ImageStack::subset: image index " +
                          std::to_string(image_indices[i]) + " out of range");
    }
    sub.col(i) = data_.col(image_indices[i]);
  }
  return ImageStack(m1_, m2_, std::move(sub), lights_.subset(image_indices));
}

Mask::Mask(int m1, int m2, std::vector<std::uint8_t> inside)
    : m1_(m1), m2_(m2), inside_(std::move(inside)) {
  check_dims(m1, m2, "Mask");
  if (inside_.size() != static_cast<std::size_t>(m1_) * m2_) {
    throw ContractError("Mask: flag vector size " + std::to_string(inside_.size()) +
                        " does not match " + std::to_string(m1_ * m2_) + " pixels");
  }
  for (auto f : inside_) count_ += (f != 0);
}

Mask Mask::full(int m1, int m2) {
  return Mask(m1, m2, std::vector<std::uint8_t>(static_cast<std::size_t>(m1) * m2, 1));
}

NormalField::NormalField(int m1, int m2, Eigen::MatrixXd scaled_normals)
    : m1_(m1), m2_(m2), n_(std::move(scaled_normals)) {
  check_dims(m1, m2, "NormalField");
  if (n_.rows() != static_cast<Eigen::Index>(m1_) * m2_ || n_.cols() != 3) {
    throw ContractError("NormalField: expected " + std::to_string(m1_ * m2_) +
                        " x 3 matrix, got " + std::to_string(n_.rows()) + " x " +
                        std::to_string(n_.cols()));
  }
  if (!n_.allFinite()) {
    throw ContractError("NormalField: entries must be finite");
  }
}

RowNormalization normalize_rows(const NormalField& field) {
  const Eigen::MatrixXd& n = field.matrix();
  Eigen::MatrixXd unit(n.rows(), 3);
  Eigen::VectorXd albedo(n.rows());
  std::vector<std::uint8_t> degenerate(n.rows(), 0);
  int degenerate_count = 0;
  for (Eigen::Index i = 0; i < n.rows(); ++i) {
    const double norm = n.row(i).norm();
    albedo[i] = norm;
    if (norm > kAlbedoEps) {
      unit.row(i) = n.row(i) / norm;
    } else {
      unit.row(i).setZero();
      degenerate[i] = 1;
      ++degenerate_count;
    }
  }
  return RowNormalization{NormalField(field.rows(), field.cols(), std::move(unit)),
                          std::move(albedo), std::move(degenerate), degenerate_count};
}

Volume::Volume(int m1, int m2, int depth)
    : m1_(m1), m2_(m2), depth_(depth),
      data_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m1) * m2 * depth)) {
  check_dims(m1, m2, "Volume");
  if (depth < 1) throw ContractError("Volume: depth must be positive");
}

Volume::Volume(int m1, int m2, int depth, Eigen::VectorXd data)
    : m1_(m1), m2_(m2), depth_(depth), data_(std::move(data)) {
  check_dims(m1, m2, "Volume");
  if (depth < 1) throw ContractError("Volume: depth must be positive");
  if (data_.size() != static_cast<Eigen::Index>(m1_) * m2_ * depth_) {
    throw ContractError("Volume: data size " + std::to_string(data_.size()) +
                        " does not match " + std::to_string(m1_ * m2_ * depth_));
  }
}

Volume stack_to_volume(const ImageStack& stack) {
  // Column k of Y is already slice k in canonical order.
  const Eigen::MatrixXd& y = stack.matrix();
  Eigen::VectorXd data(y.size());
  Eigen::Map<Eigen::MatrixXd>(data.data(), y.rows(), y.cols()) = y;
  return Volume(stack.rows(), stack.cols(), stack.image_count(), std::move(data));
}

ImageStack volume_to_stack(const Volume& volume, const LightSet& lights) {
  if (volume.depth() != lights.count()) {
    throw ContractError("volume_to_stack: depth " + std::to_string(volume.depth()) +
                        " vs " + std::to_string(lights.count()) + " lights");
  }
  const int pixels = volume.m1() * volume.m2();
  Eigen::MatrixXd y =
      Eigen::Map<const Eigen::MatrixXd>(volume.data().data(), pixels, volume.depth());
  return ImageStack(volume.m1(), volume.m2(), std::move(y), lights);
}

Volume normals_to_volume(const NormalField& field) {
  const Eigen::MatrixXd& n = field.matrix();
  Eigen::VectorXd data(n.size());
  Eigen::Map<Eigen::MatrixXd>(data.data(), n.rows(), 3) = n;
  return Volume(field.rows(), field.cols(), 3, std::move(data));
}

NormalField volume_to_normals(const Volume& volume) {
  if (volume.depth() != 3) {
    throw ContractError("volume_to_normals: depth must be 3, got " +
                        std::to_string(volume.depth()));
  }
  const int pixels = volume.m1() * volume.m2();
  Eigen::MatrixXd n = Eigen::Map<const Eigen::MatrixXd>(volume.data().data(), pixels, 3);
  return NormalField(volume.m1(), volume.m2(), std::move(n));
}

}  // namespace psdl
