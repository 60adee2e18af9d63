#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "psdl/io.hpp"
#include "psdl/noise.hpp"
#include "psdl/rng.hpp"

using namespace psdl;

namespace {

ImageStack constant_stack(int m1, int m2, int d, double value) {
  return ImageStack(m1, m2, Eigen::MatrixXd::Constant(m1 * m2, d, value),
                    well_spread_lights(d, 30.0, 0));
}

// Chi-square statistic of sampled counts against the Poisson pmf, with tail
// bins merged so every expected count is at least 5.
double poisson_chi_square(double mean, int draws, std::uint64_t seed, int* dof) {
  Rng rng(seed);
  std::map<int, int> counts;
  for (int i = 0; i < draws; ++i) counts[static_cast<int>(rng.poisson(mean))]++;

  // pmf by recurrence, spanning far enough to cover the tail mass.
  const int span = static_cast<int>(mean + 12.0 * std::sqrt(mean) + 12.0);
  std::vector<double> pmf(span + 1);
  pmf[0] = std::exp(-mean);
  for (int k = 1; k <= span; ++k) pmf[k] = pmf[k - 1] * mean / k;

  double chi = 0.0;
  int bins = 0;
  double obs_acc = 0.0, exp_acc = 0.0;
  for (int k = 0; k <= span; ++k) {
    obs_acc += counts.count(k) ? counts[k] : 0;
    exp_acc += draws * pmf[k];
    const bool last = (k == span);
    if (exp_acc >= 5.0 || last) {
      if (last) {
        // Remaining tail mass beyond span.
        double tail = 1.0;
        for (double p : pmf) tail -= p;
        exp_acc += draws * std::max(tail, 0.0);
        for (const auto& [kk, cnt] : counts)
          if (kk > span) obs_acc += cnt;
      }
      if (exp_acc > 0.0) {
        chi += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
        ++bins;
      }
      obs_acc = exp_acc = 0.0;
    }
  }
  *dof = bins - 1;
  return chi;
}

}  // namespace

TEST_CASE("calibration closed form") {
  // y == 1 everywhere: sum y^2 / sum y = 1, so 0 dB needs alpha = 1.
  CHECK(calibrate_scale(constant_stack(10, 10, 3, 1.0), 0.0) == 1.0);
  // y == 4: alpha = 1 * sum y / sum y^2 = 1/4.
  CHECK(calibrate_scale(constant_stack(10, 10, 3, 4.0), 0.0) == 0.25);
  // 10 dB on y == 1: alpha = 10.
  CHECK(calibrate_scale(constant_stack(10, 10, 3, 1.0), 10.0) ==
        doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("calibration failure cases") {
  CHECK_THROWS_AS(calibrate_scale(constant_stack(4, 4, 3, 0.0), 10.0), CalibrationError);
  CHECK_THROWS_AS(
      calibrate_scale(constant_stack(4, 4, 3, 1.0), std::numeric_limits<double>::infinity()),
      ContractError);
  // Mask with no positive pixel under it.
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 3);
  y(0, 0) = 1.0;
  const ImageStack stack(2, 2, y, well_spread_lights(3, 30.0, 0));
  std::vector<std::uint8_t> inside{0, 0, 0, 1};
  const Mask mask(2, 2, inside);
  CHECK_THROWS_AS(calibrate_scale(stack, 10.0, &mask), CalibrationError);
}

TEST_CASE("achieved SNR is within half a dB of target") {
  Rng rng(5);
  Eigen::MatrixXd y(128 * 128, 3);
  for (int i = 0; i < y.size(); ++i) y(i % y.rows(), i / y.rows()) = 0.05 + 0.95 * rng.uniform();
  const ImageStack stack(128, 128, y, well_spread_lights(3, 30.0, 0));
  for (const double target : {1.0, 10.0, 30.0}) {
    const ImageStack noisy = apply_poisson(stack, NoiseSpec{target, 99, 0});
    CHECK(std::abs(empirical_snr_db(stack, noisy) - target) <= 0.5);
  }
}

TEST_CASE("vanishing noise limit returns the input") {
  Rng rng(6);
  Eigen::MatrixXd y(16 * 16, 3);
  for (int i = 0; i < y.size(); ++i) y(i % y.rows(), i / y.rows()) = 0.1 + 0.9 * rng.uniform();
  const ImageStack stack(16, 16, y, well_spread_lights(3, 30.0, 0));
  const ImageStack out = apply_poisson(stack, NoiseSpec{300.0, 1, 0});
  const Eigen::MatrixXd rel =
      (out.matrix() - stack.matrix()).cwiseQuotient(stack.matrix()).cwiseAbs();
  CHECK(rel.maxCoeff() <= 1e-3);
}

TEST_CASE("zero pixels stay exactly zero") {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(9, 3);
  y(4, 1) = 1.0;
  const ImageStack stack(3, 3, y, well_spread_lights(3, 30.0, 0));
  const ImageStack out = apply_poisson(stack, NoiseSpec{5.0, 3, 0});
  for (int q = 0; q < 9; ++q)
    for (int k = 0; k < 3; ++k)
      if (y(q, k) == 0.0) CHECK(out.matrix()(q, k) == 0.0);
}

TEST_CASE("poisson corruption is unbiased (monte carlo)") {
  const ImageStack stack = constant_stack(1, 1, 3, 1.0);
  const int realizations = 10000;
  double acc = 0.0;
  for (int r = 0; r < realizations; ++r) {
    acc += apply_poisson(stack, NoiseSpec{10.0, 2024, r}).matrix().sum();
  }
  const double mean = acc / (3.0 * realizations);
  // alpha = 10, per-draw variance 10/100; 3e4 draws.
  const double se = std::sqrt(0.1 / (3.0 * realizations));
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("noise is bit-reproducible per (seed, realization)") {
  Rng rng(7);
  Eigen::MatrixXd y(8 * 8, 3);
  for (int i = 0; i < y.size(); ++i) y(i % y.rows(), i / y.rows()) = rng.uniform();
  const ImageStack stack(8, 8, y, well_spread_lights(3, 30.0, 0));
  const NoiseSpec spec{10.0, 42, 1};
  CHECK(apply_poisson(stack, spec).matrix() == apply_poisson(stack, spec).matrix());
  CHECK(apply_poisson(stack, NoiseSpec{10.0, 42, 2}).matrix() !=
        apply_poisson(stack, spec).matrix());
  CHECK(apply_poisson(stack, NoiseSpec{10.0, 43, 1}).matrix() !=
        apply_poisson(stack, spec).matrix());
}

TEST_CASE("poisson sampler passes chi-square goodness of fit") {
  // Critical values at p = 0.001; generous margins, fixed seeds.
  int dof = 0;
  const double chi_inversion = poisson_chi_square(3.5, 20000, 11, &dof);
  INFO("inversion: chi=" << chi_inversion << " dof=" << dof);
  CHECK(chi_inversion < dof + 3.09 * std::sqrt(2.0 * dof) + 10.0);

  const double chi_ptrs = poisson_chi_square(25.0, 20000, 13, &dof);
  INFO("ptrs: chi=" << chi_ptrs << " dof=" << dof);
  CHECK(chi_ptrs < dof + 3.09 * std::sqrt(2.0 * dof) + 10.0);
}

TEST_CASE("poisson sampler mean/variance sanity across the branch cut") {
  for (const double mean : {0.5, 9.9, 10.1, 400.0}) {
    Rng rng(17);
    double acc = 0.0, acc2 = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      const double x = rng.poisson(mean);
      acc += x;
      acc2 += x * x;
    }
    const double sample_mean = acc / n;
    const double sample_var = acc2 / n - sample_mean * sample_mean;
    CHECK(std::abs(sample_mean - mean) <= 5.0 * std::sqrt(mean / n));
    CHECK(std::abs(sample_var - mean) <= 0.1 * mean);
  }
}
