#pragma once

#include <Eigen/Dense>

#include "psdl/types.hpp"

namespace psdl {

// Per-pixel angle in degrees between the unit views of estimate and truth.
// Pixels where either field is degenerate (albedo ~ 0) score 90; unmasked
// pixels carry quiet NaN as a sentinel. Result is in canonical pixel order.
Eigen::VectorXd angular_error_map(const NormalField& estimate, const NormalField& truth,
                                  const Mask& mask);

// Arithmetic mean of the map over masked pixels. Throws on an empty mask.
double mean_angular_error(const Eigen::VectorXd& error_map, const Mask& mask);

}  // namespace psdl
