#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "psdl/rng.hpp"
#include "psdl/types.hpp"

using namespace psdl;

namespace {

LightSet axis_lights() {
  Eigen::Matrix3Xd dirs(3, 3);
  dirs << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  return LightSet(dirs);
}

}  // namespace

TEST_CASE("light set validates unit norms and count") {
  Eigen::Matrix3Xd two(3, 2);
  two << 1, 0, 0, 1, 0, 0;
  CHECK_THROWS_AS((void)LightSet(two), ContractError);

  Eigen::Matrix3Xd bad(3, 3);
  bad << 2, 0, 0, 0, 1, 0, 0, 0, 1;
  CHECK_THROWS_AS((void)LightSet(bad), ContractError);

  const LightSet fixed = LightSet::normalized(bad);
  CHECK(fixed.direction(0).isApprox(Eigen::Vector3d(1, 0, 0)));
}

TEST_CASE("image stack invariants") {
  const LightSet lights = axis_lights();

  SUBCASE("column count must match lights") {
    CHECK_THROWS_AS(ImageStack(1, 1, Eigen::MatrixXd::Zero(1, 2), lights), ContractError);
  }
  SUBCASE("non-finite intensities rejected") {
    Eigen::MatrixXd y(1, 3);
    y << 1, std::numeric_limits<double>::quiet_NaN(), 0;
    CHECK_THROWS_AS(ImageStack(1, 1, y, lights), ContractError);
  }
  SUBCASE("negatives clamped and counted") {
    Eigen::MatrixXd y(2, 3);
    y << -1, 0.5, 0.25, 0.125, -0.5, 1;
    const ImageStack stack(2, 1, y, lights);
    CHECK(stack.clamped_negative_count() == 2);
    CHECK(stack.matrix().minCoeff() == 0.0);
    CHECK(stack.matrix()(0, 1) == 0.5);
  }
}

TEST_CASE("stack_to_volume places image k at slice k") {
  // Smallest constructible stack (three lights); slice content must match
  // the image columns exactly.
  Eigen::MatrixXd y(1, 3);
  y << 3, 5, 7;
  const ImageStack stack(1, 1, y, axis_lights());
  const Volume vol = stack_to_volume(stack);
  CHECK(vol.m1() == 1);
  CHECK(vol.m2() == 1);
  CHECK(vol.depth() == 3);
  CHECK(vol.at(0, 0, 0) == 3);
  CHECK(vol.at(0, 0, 1) == 5);
  CHECK(vol.at(0, 0, 2) == 7);
}

TEST_CASE("stack/volume round trip is the identity (direct index oracle)") {
  const int m1 = 4, m2 = 5, d = 3;
  Rng rng(42);
  Eigen::MatrixXd y(m1 * m2, d);
  for (int k = 0; k < d; ++k)
    for (int q = 0; q < m1 * m2; ++q) y(q, k) = rng.uniform();
  const ImageStack stack(m1, m2, y, axis_lights());

  const Volume vol = stack_to_volume(stack);
  for (int x = 0; x < m1; ++x)
    for (int yy = 0; yy < m2; ++yy)
      for (int k = 0; k < d; ++k) CHECK(vol.at(x, yy, k) == y(x * m2 + yy, k));

  const ImageStack back = volume_to_stack(vol, stack.lights());
  CHECK(back.matrix() == stack.matrix());
}

TEST_CASE("normal field volume round trip") {
  Rng rng(7);
  Eigen::MatrixXd n(6, 3);
  for (int i = 0; i < n.size(); ++i) n(i / 3, i % 3) = rng.normal();
  const NormalField field(2, 3, n);
  const Volume vol = normals_to_volume(field);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 3; ++y)
      for (int c = 0; c < 3; ++c) CHECK(vol.at(x, y, c) == n(x * 3 + y, c));
  CHECK(volume_to_normals(vol).matrix() == n);
}

TEST_CASE("normalize_rows splits direction and albedo") {
  Eigen::MatrixXd n(3, 3);
  n << 0, 0, 2,  // unit (0,0,1), albedo 2
      0, 0, 0,   // degenerate
      1, 2, 2;   // unit (1/3, 2/3, 2/3), albedo 3 since 1+4+4=9
  const RowNormalization rn = normalize_rows(NormalField(3, 1, n));

  CHECK(rn.albedo[0] == 2.0);
  CHECK(rn.unit.matrix().row(0).isApprox(Eigen::RowVector3d(0, 0, 1)));

  CHECK(rn.degenerate[1] == 1);
  CHECK(rn.albedo[1] == 0.0);
  CHECK(rn.unit.matrix().row(1).norm() == 0.0);
  CHECK(rn.degenerate_count == 1);

  CHECK(rn.albedo[2] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(rn.unit.matrix().row(2).isApprox(Eigen::RowVector3d(1.0 / 3, 2.0 / 3, 2.0 / 3)));
}

TEST_CASE("normalize_rows output norms within 1e-12 of 1") {
  Rng rng(3);
  Eigen::MatrixXd n(50, 3);
  for (int i = 0; i < 50; ++i)
    for (int c = 0; c < 3; ++c) n(i, c) = 10.0 * rng.normal();
  const RowNormalization rn = normalize_rows(NormalField(50, 1, n));
  for (int i = 0; i < 50; ++i) {
    if (rn.degenerate[i]) continue;
    CHECK(std::abs(rn.unit.matrix().row(i).norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("stack subset keeps selected images and lights") {
  Eigen::Matrix3Xd dirs(3, 4);
  dirs << 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 1, 0;
  dirs.col(3) = Eigen::Vector3d(0, 1, 0);
  const LightSet lights{LightSet::normalized(dirs)};
  Eigen::MatrixXd y(2, 4);
  y << 0, 1, 2, 3, 4, 5, 6, 7;
  const ImageStack stack(1, 2, y, lights);
  const ImageStack sub = stack.subset({0, 2, 3});
  CHECK(sub.image_count() == 3);
  CHECK(sub.matrix().col(1) == y.col(2));
  CHECK(sub.lights().direction(2) == lights.direction(3));
  CHECK_THROWS_AS(stack.subset({0, 1, 9}), ContractError);
}
