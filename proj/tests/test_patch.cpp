#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "psdl/patch.hpp"
#include "psdl/rng.hpp"

using namespace psdl;

namespace {

// [[1,2],[3,4]] with row x, column y.
Volume two_by_two() {
  Volume v(2, 2, 1);
  v.at(0, 0, 0) = 1;
  v.at(0, 1, 0) = 2;
  v.at(1, 0, 0) = 3;
  v.at(1, 1, 0) = 4;
  return v;
}

Volume random_volume(int m1, int m2, int depth, Rng& rng) {
  Volume v(m1, m2, depth);
  for (int i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
  return v;
}

PatchGeometry random_geometry(Rng& rng, int* m1, int* m2, int* depth) {
  *m1 = 1 + static_cast<int>(rng.integer(6));
  *m2 = 1 + static_cast<int>(rng.integer(6));
  *depth = 1 + static_cast<int>(rng.integer(4));
  PatchDims p{1 + static_cast<int>(rng.integer(*m1)), 1 + static_cast<int>(rng.integer(*m2)),
              1 + static_cast<int>(rng.integer(*depth))};
  PatchStride s{1 + static_cast<int>(rng.integer(p.x)), 1 + static_cast<int>(rng.integer(p.y)),
                1 + static_cast<int>(rng.integer(p.z))};
  return PatchGeometry(p, s, *m1, *m2, *depth);
}

}  // namespace

TEST_CASE("1x1x1 patches enumerate pixels in canonical order") {
  const PatchGeometry geom({1, 1, 1}, {1, 1, 1}, 2, 2, 1);
  const Eigen::MatrixXd patches = extract_patches(two_by_two(), geom);
  REQUIRE(patches.rows() == 1);
  REQUIRE(patches.cols() == 4);
  CHECK(patches(0, 0) == 1);
  CHECK(patches(0, 1) == 2);
  CHECK(patches(0, 2) == 3);
  CHECK(patches(0, 3) == 4);
}

TEST_CASE("within-patch order is the column-stacking vec") {
  const PatchGeometry geom({2, 2, 1}, {1, 1, 1}, 2, 2, 1);
  const Eigen::MatrixXd patches = extract_patches(two_by_two(), geom);
  REQUIRE(patches.rows() == 4);
  REQUIRE(patches.cols() == 1);
  CHECK(patches.col(0) == Eigen::Vector4d(1, 3, 2, 4));
}

TEST_CASE("non-overlapping extract/adjoint is a partition of the volume") {
  Rng rng(11);
  const Volume v = random_volume(4, 4, 2, rng);
  const PatchGeometry geom({2, 2, 2}, {2, 2, 2}, 4, 4, 2);
  const Eigen::MatrixXd patches = extract_patches(v, geom);
  CHECK(patches.cols() == 4);
  const Volume back = adjoint_patches(patches, geom);
  CHECK(back.data() == v.data());
  CHECK(gram_diagonal(geom) == Eigen::VectorXd::Ones(v.size()));
}

TEST_CASE("adjoint scatters a single patch to its voxels") {
  const PatchGeometry geom({1, 1, 1}, {1, 1, 1}, 2, 2, 1);
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(1, 4);
  patches(0, 0) = 7;  // patch anchored at (0,0,0)
  const Volume out = adjoint_patches(patches, geom);
  CHECK(out.at(0, 0, 0) == 7);
  CHECK(out.data().sum() == 7);
}

TEST_CASE("all-ones patches aggregate to coverage counts") {
  const PatchGeometry geom({2, 2, 1}, {1, 1, 1}, 3, 3, 1);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(geom.patch_len(), geom.patch_count());
  const Volume cover = adjoint_patches(ones, geom);

  // Hand-enumerated membership for the 4 overlapping 2x2 patches.
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 2, 1, 2, 4, 2, 1, 2, 1;
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y) CHECK(cover.at(x, y, 0) == expected(x, y));

  CHECK(gram_diagonal(geom) == cover.data());
}

TEST_CASE("adjoint identity <extract(v), P> == <v, adjoint(P)>") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    int m1, m2, depth;
    const PatchGeometry geom = random_geometry(rng, &m1, &m2, &depth);
    const Volume v = random_volume(m1, m2, depth, rng);
    Eigen::MatrixXd p(geom.patch_len(), geom.patch_count());
    for (int i = 0; i < p.size(); ++i) p(i % p.rows(), i / p.rows()) = rng.normal();

    const double lhs = (extract_patches(v, geom).array() * p.array()).sum();
    const double rhs = (v.data().array() * adjoint_patches(p, geom).data().array()).sum();
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (v.data().norm() * p.norm() + 1.0));
  }
}

TEST_CASE("gram diagonal matches extract-then-adjoint of ones and is positive") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    int m1, m2, depth;
    const PatchGeometry geom = random_geometry(rng, &m1, &m2, &depth);
    Volume ones(m1, m2, depth);
    ones.data().setOnes();
    const Eigen::VectorXd diag = gram_diagonal(geom);
    CHECK(diag == adjoint_patches(extract_patches(ones, geom), geom).data());
    CHECK(diag.minCoeff() >= 1.0);
  }
}

TEST_CASE("extract-then-adjoint of a one-hot volume stays one-hot") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    int m1, m2, depth;
    const PatchGeometry geom = random_geometry(rng, &m1, &m2, &depth);
    Volume v(m1, m2, depth);
    const int hot = static_cast<int>(rng.integer(v.size()));
    v.data()[hot] = 1.0;
    const Eigen::VectorXd out = adjoint_patches(extract_patches(v, geom), geom).data();
    const Eigen::VectorXd diag = gram_diagonal(geom);
    for (int i = 0; i < out.size(); ++i) {
      CHECK(out[i] == (i == hot ? diag[hot] : 0.0));
    }
  }
}

TEST_CASE("flush boundary patch covers the remainder") {
  const PatchGeometry geom({2, 1, 1}, {2, 1, 1}, 5, 1, 1);
  CHECK(geom.starts_x() == std::vector<int>{0, 2, 3});
  CHECK(gram_diagonal(geom).minCoeff() >= 1.0);
}

TEST_CASE("patch_indices is the canonical map") {
  const PatchGeometry geom({2, 2, 1}, {1, 1, 1}, 2, 2, 1);
  // Single patch: locals in x-fastest order -> voxels (0,0),(1,0),(0,1),(1,1).
  CHECK(geom.patch_indices(0) == std::vector<int>{0, 2, 1, 3});
}

TEST_CASE("dimension mismatches are contract violations") {
  const PatchGeometry geom({2, 2, 1}, {1, 1, 1}, 3, 3, 1);
  const Volume wrong(4, 3, 1);
  CHECK_THROWS_AS(extract_patches(wrong, geom), ContractError);
  CHECK_THROWS_AS(adjoint_patches(Eigen::MatrixXd::Zero(3, 4), geom), ContractError);
  CHECK_THROWS_AS(PatchGeometry({4, 1, 1}, {1, 1, 1}, 3, 3, 1), ContractError);
  CHECK_THROWS_AS(PatchGeometry({1, 1, 1}, {0, 1, 1}, 3, 3, 1), ContractError);
  // Strides beyond the patch extent would leave coverage gaps.
  CHECK_THROWS_AS(PatchGeometry({1, 1, 1}, {3, 1, 1}, 5, 3, 1), ContractError);
}
