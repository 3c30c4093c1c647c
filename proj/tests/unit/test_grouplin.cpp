#include "cuspflow/error.hpp"
#include "cuspflow/grouplin.hpp"
#include "cuspflow/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace cuspflow;
using namespace cuspflow::grouplin;

namespace {

// Random element of SL(m,R) with entries of scale e^{spread}.
RealGroupElement random_element(int m, CounterRng& rng, double spread = 1.0) {
  Mat a(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) a(r, c) = rng.normal();
  if (a.determinant() < 0) a.col(0) *= -1.0;
  Vec t(m);
  for (int k = 0; k < m; ++k) t(k) = spread * rng.normal();
  t.array() -= t.mean();
  return RealGroupElement::from_matrix(a) * cartan_element(CartanVector(t)) * RealGroupElement::from_matrix(a.transpose());
}

}  // namespace

TEST_CASE("integer elements: exact determinant and inverse") {
  const auto g = IntegerGroupElement::from_int64(3, {2, 3, 1, 1, 2, 1, 0, 0, 1});
  CHECK(determinant(3, g.entries()) == 1);
  CHECK((g * g.inverse()).is_identity());
  CHECK_THROWS_AS(IntegerGroupElement::from_int64(2, {2, 0, 0, 1}), Error);
  const auto e = elementary(4, 2, 4, 5);
  CHECK(e.at(1, 3) == 5);
  CHECK((e * elementary(4, 2, 4, -5)).is_identity());
}

TEST_CASE("big entries stay exact and log_norm stays finite") {
  IntegerGroupElement g = IntegerGroupElement::identity(3);
  for (int k = 0; k < 400; ++k) g = g * elementary(3, 1 + k % 3, 1 + (k + 1) % 3, 3);
  CHECK(determinant(3, g.entries()) == 1);
  CHECK(std::isfinite(g.log_norm()));
  CHECK(g.log_norm() > 300.0);
  CHECK((g.inverse() * g).is_identity());
}

TEST_CASE("flows and generators") {
  const auto a = a_flow(2, 2.0).matrix();
  CHECK(a(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  CHECK(a(1, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  const auto b = b_flow(3, 1.0).matrix();
  CHECK(b(0, 0) == doctest::Approx(std::exp(1.0)));
  CHECK(b(1, 1) == doctest::Approx(std::exp(1.0)));
  CHECK(b(2, 2) == doctest::Approx(std::exp(-2.0)));
  for (int m = 3; m <= 6; ++m) {
    std::vector<Vec> gens{a_generator_log(m), b_generator_log(m)};
    for (int k = 1; k <= m - 3; ++k) gens.push_back(c_generator_log(m, k));
    for (std::size_t i = 0; i < gens.size(); ++i) {
      CHECK(std::fabs(gens[i].sum()) < 1e-12);
      for (std::size_t j = 0; j < i; ++j) CHECK(std::fabs(gens[i].dot(gens[j])) < 1e-12);
    }
    for (int k = 1; k <= m - 3; ++k) CHECK(c_generator_log(m, k)(m - 1) == 0.0);
  }
}

TEST_CASE("sl2_embed places the block") {
  const auto p = sl2_embed(4, 0, -1, 1, 0, 2, 3).matrix();
  CHECK(p.determinant() == doctest::Approx(1.0));
  CHECK(p(1, 2) == -1.0);
  CHECK(p(2, 1) == 1.0);
  CHECK(p(0, 0) == 1.0);
  CHECK((sl2_embed(2, 1, 1, 0, 1, 1, 2).matrix() - elementary(2, 1, 2, 1).to_real()).norm() == 0.0);
  CHECK_THROWS_AS(sl2_embed(3, 1, 1, 1, 1, 1, 2), Error);
}

TEST_CASE("distance normalization") {
  CHECK(symmetric_distance(RealGroupElement::identity(3)) == doctest::Approx(0.0));
  CHECK(symmetric_distance(a_flow(2, 3.0)) == doctest::Approx(3.0).epsilon(1e-12));
  // Largest singular value of [[1,1],[0,1]] is the golden ratio.
  CHECK(symmetric_distance(RealGroupElement::from_matrix(elementary(2, 1, 2, 1).to_real())) ==
        doctest::Approx(2.0 * std::log(std::numbers::phi)).epsilon(1e-12));
}

TEST_CASE("log singular values match a direct SVD") {
  CounterRng rng(11, 0, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + trial % 4;
    const auto g = random_element(m, rng);
    const Vec ls = log_singular_values(g);
    Eigen::JacobiSVD<Mat> svd(g.matrix());
    const Vec direct = svd.singularValues().array().log();
    CHECK((ls - direct).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::fabs(ls.sum()) < 1e-9);
  }
}

TEST_CASE("norm and conorm agree with direct inversion") {
  const auto d = norm_conorm(RealGroupElement::from_matrix((Mat(2, 2) << 2, 0, 0, 0.5).finished()));
  CHECK(d.norm == doctest::Approx(2.0));
  CHECK(d.conorm == doctest::Approx(0.5));
  CounterRng rng(12, 0, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto g = random_element(2 + trial % 4, rng);
    const auto nc = norm_conorm(g);
    Eigen::JacobiSVD<Mat> svd(g.matrix().inverse());
    CHECK(nc.conorm == doctest::Approx(1.0 / svd.singularValues()(0)).epsilon(1e-9));
    CHECK(nc.conorm <= nc.norm * (1 + 1e-12));
  }
}

TEST_CASE("distance: triangle inequality and invariances") {
  CounterRng rng(13, 0, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + trial % 4;
    const auto g = random_element(m, rng), h = random_element(m, rng), k = random_element(m, rng);
    CHECK(symmetric_distance(g, k) <= symmetric_distance(g, h) + symmetric_distance(h, k) + 1e-9);
    const auto rot = rotation(m, 1, m, rng.uniform(0, 2 * std::numbers::pi));
    CHECK(symmetric_distance(rot * g) == doctest::Approx(symmetric_distance(g)).epsilon(1e-9));
    CHECK(symmetric_distance(g * h, h) == doctest::Approx(symmetric_distance(g)).epsilon(1e-7));
  }
}

TEST_CASE("metric inequalities on random samples") {
  CounterRng rng(14, 0, 0);
  // Embedded SL(2,R): |d - 2 log ||A||| stays below 1.2.
  double c1 = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    Mat a = random_element(2, rng, 2.0).matrix();
    a /= std::sqrt(a.determinant());
    const auto g = sl2_embed(4, a(0, 0), a(0, 1), a(1, 0), a(1, 1), 1 + trial % 3, 4);
    c1 = std::max(c1, std::fabs(symmetric_distance(g) - 2.0 * std::log(norm_conorm(g).norm)));
  }
  CHECK(c1 <= 1.2);
  // kappa = sqrt(2) m, C0 = 2 for the operator norm.
  int violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int m = 2 + trial % 4;
    const auto g = random_element(m, rng, 2.0);
    const double kappa = std::sqrt(2.0) * m, d = symmetric_distance(g), ln = std::log(norm_conorm(g).norm);
    if (d < ln / kappa - 2.0 || d > kappa * ln + 2.0) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("elementary matrices grow logarithmically") {
  for (long long k = 2; k <= 1'000'000'000; k = k * 3 + 1) {
    const double d = symmetric_distance(RealGroupElement::from_matrix(elementary(3, 1, 3, k).to_real()));
    CHECK(d <= 2.1 * std::log(double(k)) + 1.0);
  }
}

TEST_CASE("roots and invalid inputs") {
  CHECK(highest_root(4) == Root(1, 4));
  CHECK(simple_root(2) == Root(2, 3));
  Vec t(3);
  t << 1.0, 0.5, -1.5;
  CHECK(Root(1, 3).evaluate(t) == doctest::Approx(2.5));
  CHECK_THROWS_AS(Root(2, 2), Error);
  CHECK_THROWS_AS(RealGroupElement::from_matrix((Mat(2, 2) << 1, 0, 0, -1).finished()), Error);
  Vec bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(CartanVector{bad}, Error);
}
