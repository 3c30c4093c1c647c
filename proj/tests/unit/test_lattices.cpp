#include "cuspflow/error.hpp"
#include "cuspflow/lattices.hpp"
#include "cuspflow/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace cuspflow;
using namespace cuspflow::lattices;

namespace {

// Shortest nonzero B c over the box |c_i| <= r, by exhaustive listing.
double box_oracle(const Mat& b, int r) {
  const int m = static_cast<int>(b.cols());
  std::vector<int> c(static_cast<size_t>(m), -r);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    Vec v = Vec::Zero(m);
    bool zero = true;
    for (int k = 0; k < m; ++k) {
      v += c[static_cast<size_t>(k)] * b.col(k);
      zero = zero && c[static_cast<size_t>(k)] == 0;
    }
    if (!zero) best = std::min(best, v.norm());
    int k = 0;
    while (k < m && ++c[static_cast<size_t>(k)] > r) c[static_cast<size_t>(k++)] = -r;
    if (k == m) return best;
  }
}

}  // namespace

TEST_CASE("standard and hexagonal lattices") {
  CHECK(systole(UnimodularLattice::standard(4)) == doctest::Approx(1.0));
  CHECK(depth(UnimodularLattice::standard(3)) == 0.0);
  Mat hex(2, 2);
  hex << 1.0, 0.5, 0.0, std::sqrt(3.0) / 2.0;
  CHECK(systole(UnimodularLattice::from_basis(hex)) == doctest::Approx(std::sqrt(2.0 / std::sqrt(3.0))).epsilon(1e-12));
  Mat thin(2, 2);
  thin << 0.01, 0.0, 0.0, 100.0;
  CHECK(depth(UnimodularLattice::from_basis(thin)) == doctest::Approx(-std::log(0.01)));
}

TEST_CASE("from_basis rescales and rejects bad determinants") {
  Mat b(3, 3);
  b << 2, 0, 0, 0, 2, 0, 0, 0, 2;
  const auto l = UnimodularLattice::from_basis(b);
  CHECK(l.basis().determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(systole(l) == doctest::Approx(1.0));
  Mat neg = Mat::Identity(2, 2);
  neg(0, 0) = -1;
  CHECK_THROWS_AS(UnimodularLattice::from_basis(neg), Error);
  CHECK_THROWS_AS(UnimodularLattice::from_basis(Mat::Zero(2, 2)), Error);
}

TEST_CASE("reduction is unimodular and spans the same lattice") {
  CounterRng rng(21, 0, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + trial % 5;
    const auto l = sample_uniform_entries(m, rng);
    const double det = l.change().cast<double>().determinant();
    CHECK(std::fabs(std::fabs(det) - 1.0) < 1e-9);
    CHECK((l.basis() * l.change().cast<double>() - l.reduced()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("enumeration matches the coefficient-box oracle") {
  CounterRng rng(22, 0, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + trial % 2;
    const auto l = sample_uniform_entries(m, rng);
    const auto sv = shortest_vector(l);
    CHECK(sv.length == doctest::Approx(box_oracle(l.basis(), m == 2 ? 40 : 12)).epsilon(1e-9));
    CHECK((l.basis() * sv.coefficients.cast<double>()).norm() == doctest::Approx(sv.length).epsilon(1e-9));
    CHECK(sv.length <= hermite_bound(m));
  }
}

TEST_CASE("ball counts") {
  // Nonzero (a, b) with a^2 + b^2 <= 6.25.
  long long direct = 0;
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b) direct += (a || b) && a * a + b * b <= 6.25;
  CHECK(count_vectors_in_ball(UnimodularLattice::standard(2), 2.5) == direct);
  CHECK(enumerate_short_vectors(UnimodularLattice::standard(3), 1.0, true).size() == 3);
  CHECK(enumerate_short_vectors(UnimodularLattice::standard(3), 1.0, false).size() == 6);
}

TEST_CASE("sublattice covolumes") {
  CounterRng rng(23, 0, 0);
  const auto l = sample_uniform_entries(3, rng);
  Sublattice full;
  for (int k = 0; k < 3; ++k) full.vectors.push_back(IntVec::Unit(3, k));
  CHECK(sublattice_covolume(l, full) == doctest::Approx(1.0).epsilon(1e-9));
  Sublattice one{{IntVec::Unit(3, 1)}};
  CHECK(sublattice_covolume(l, one) == doctest::Approx(l.basis().col(1).norm()).epsilon(1e-12));
  IntVec twice = 2 * IntVec::Unit(3, 0);
  CHECK_THROWS_AS(sublattice_covolume(l, Sublattice{{IntVec::Unit(3, 0), twice}}), Error);
}

TEST_CASE("enumeration budget") {
  CHECK_THROWS_AS(shortest_vector(UnimodularLattice::from_basis(Mat::Identity(6, 6)), 1), Error);
}
