#include "psdl/noise.hpp"

#include <cmath>

#include "psdl/rng.hpp"

namespace psdl {

namespace {

constexpr std::uint64_t kNoiseSalt = 0x706f6973736f6eULL;  // stream tag

void masked_sums(const ImageStack& stack, const Mask* mask, double* sum, double* sum_sq) {
  const Eigen::MatrixXd& y = stack.matrix();
  *sum = 0.0;
  *sum_sq = 0.0;
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    for (Eigen::Index q = 0; q < y.rows(); ++q) {
      if (mask && !mask->at(static_cast<int>(q))) continue;
      const double v = y(q, k);
      *sum += v;
      *sum_sq += v * v;
    }
  }
}

void check_mask(const ImageStack& stack, const Mask* mask, const char* who) {
  if (mask && (mask->rows() != stack.rows() || mask->cols() != stack.cols())) {
    throw ContractError(std::string(who) + ": mask dimensions do not match the stack");
  }
}

}  // namespace

double calibrate_scale(const ImageStack& stack, double snr_db, const Mask* mask) {
  if (!std::isfinite(snr_db)) throw ContractError("calibrate_scale: snr_db must be finite");
  check_mask(stack, mask, "calibrate_scale");
  double sum, sum_sq;
  masked_sums(stack, mask, &sum, &sum_sq);
  if (sum <= 0.0) {
    throw CalibrationError(
        "calibrate_scale: stack has no positive intensity under the mask; "
        "the SNR target cannot be met");
  }
  return std::pow(10.0, snr_db / 10.0) * sum / sum_sq;
}

ImageStack apply_poisson(const ImageStack& stack, const NoiseSpec& spec, const Mask* mask) {
  const double alpha = calibrate_scale(stack, spec.snr_db, mask);
  Rng rng = Rng::stream(spec.seed, kNoiseSalt, static_cast<std::uint64_t>(spec.realization));
  const Eigen::MatrixXd& y = stack.matrix();
  Eigen::MatrixXd out(y.rows(), y.cols());
  // Fixed draw order (image by image, pixels in canonical order) so results
  // are reproducible regardless of how callers parallelize around this.
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    for (Eigen::Index q = 0; q < y.rows(); ++q) {
      out(q, k) = rng.poisson(alpha * y(q, k)) / alpha;
    }
  }
  return stack.with_matrix(std::move(out));
}

double empirical_snr_db(const ImageStack& clean, const ImageStack& noisy, const Mask* mask) {
  if (clean.rows() != noisy.rows() || clean.cols() != noisy.cols() ||
      clean.image_count() != noisy.image_count()) {
    throw ContractError("empirical_snr_db: stack dimensions do not match");
  }
  check_mask(clean, mask, "empirical_snr_db");
  const Eigen::MatrixXd& y = clean.matrix();
  const Eigen::MatrixXd& z = noisy.matrix();
  double signal = 0.0, noise = 0.0;
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    for (Eigen::Index q = 0; q < y.rows(); ++q) {
      if (mask && !mask->at(static_cast<int>(q))) continue;
      signal += y(q, k) * y(q, k);
      const double e = y(q, k) - z(q, k);
      noise += e * e;
    }
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

}  // namespace psdl
