#pragma once

#include <cstdint>

#include "psdl/types.hpp"

namespace psdl {

struct NoiseSpec {
  double snr_db = 10.0;
  std::uint64_t seed = 0;
  int realization = 0;  // index into independent noise streams for one seed
};

// Scale alpha such that Poisson(alpha * y) hits the target SNR:
// 10 log10(alpha * sum(y^2) / sum(y)) = snr_db, i.e.
// alpha = 10^(snr/10) * sum(y) / sum(y^2). Sums run over masked pixels when
// a mask is given. Throws CalibrationError when the stack is all zero.
double calibrate_scale(const ImageStack& stack, double snr_db, const Mask* mask = nullptr);

// Poisson(alpha * y) / alpha elementwise; unbiased, nonnegative, and
// bit-reproducible for a fixed (seed, realization). Zero pixels stay zero.
ImageStack apply_poisson(const ImageStack& stack, const NoiseSpec& spec,
                         const Mask* mask = nullptr);

// Measured 10 log10(sum(y^2) / sum((y - noisy)^2)) over masked pixels;
// reported per run so the calibration stays auditable.
double empirical_snr_db(const ImageStack& clean, const ImageStack& noisy,
                        const Mask* mask = nullptr);

}  // namespace psdl
