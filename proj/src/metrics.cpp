#include "psdl/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace psdl {

Eigen::VectorXd angular_error_map(const NormalField& estimate, const NormalField& truth,
                                  const Mask& mask) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() ||
      estimate.rows() != mask.rows() || estimate.cols() != mask.cols()) {
    throw ContractError("angular_error_map: estimate " + std::to_string(estimate.rows()) +
                        "x" + std::to_string(estimate.cols()) + ", truth " +
                        std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) +
                        ", mask " + std::to_string(mask.rows()) + "x" +
                        std::to_string(mask.cols()) + " must all match");
  }
  const Eigen::MatrixXd& e = estimate.matrix();
  const Eigen::MatrixXd& t = truth.matrix();
  const double rad2deg = 180.0 / M_PI;
  Eigen::VectorXd map =
      Eigen::VectorXd::Constant(e.rows(), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index q = 0; q < e.rows(); ++q) {
    if (!mask.at(static_cast<int>(q))) continue;
    const double en = e.row(q).norm();
    const double tn = t.row(q).norm();
    if (en <= kAlbedoEps || tn <= kAlbedoEps) {
      map[q] = 90.0;  // no directional information
      continue;
    }
    const double c = std::clamp(e.row(q).dot(t.row(q)) / (en * tn), -1.0, 1.0);
    map[q] = std::acos(c) * rad2deg;
  }
  return map;
}

double mean_angular_error(const Eigen::VectorXd& error_map, const Mask& mask) {
  if (error_map.size() != mask.pixel_count()) {
    throw ContractError("mean_angular_error: map size " + std::to_string(error_map.size()) +
                        " vs mask " + std::to_string(mask.pixel_count()));
  }
  if (mask.count() == 0) {
    throw ContractError("mean_angular_error: mask selects no pixels");
  }
  double sum = 0.0;
  for (int q = 0; q < mask.pixel_count(); ++q) {
    if (mask.at(q)) sum += error_map[q];
  }
  return sum / mask.count();
}

}  // namespace psdl
