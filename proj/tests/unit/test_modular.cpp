#include "cuspflow/error.hpp"
#include "cuspflow/measures.hpp"
#include "cuspflow/modular.hpp"
#include "cuspflow/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace cuspflow;
using namespace cuspflow::modular;

namespace {

Mat2 random_sl2(CounterRng& rng, double spread) {
  const double t = spread * rng.normal();
  Mat2 k1, k2, a;
  const double p = rng.uniform(0, 2 * std::numbers::pi), q = rng.uniform(0, 2 * std::numbers::pi);
  k1 << std::cos(p), -std::sin(p), std::sin(p), std::cos(p);
  k2 << std::cos(q), -std::sin(q), std::sin(q), std::cos(q);
  a << std::exp(t / 2), 0, 0, std::exp(-t / 2);
  return k1 * a * k2;
}

Int2 random_gamma(CounterRng& rng, int letters) {
  Int2 g;
  for (int i = 0; i < letters; ++i) {
    const long long k = rng.uniform_int(-3, 3);
    g = g * (rng.uniform() < 0.5 ? Int2{1, k, 0, 1} : Int2{1, 0, k, 1});
  }
  return g;
}

bool in_domain(const ModularPoint& x) {
  const auto z = x.z();
  return std::fabs(z.real()) <= 0.5 + 1e-9 && std::abs(z) >= 1.0 - 1e-9;
}

}  // namespace

TEST_CASE("reduction lands in the standard domain and tracks the deck") {
  CounterRng rng(31, 0, 0);
  for (int trial = 0; trial < 2000; ++trial) {
    const Mat2 g = random_sl2(rng, 4.0);
    const auto r = reduce_matrix(g);
    CHECK(in_domain(ModularPoint(r.rep, r.deck.to_group())));
    CHECK((r.rep * r.deck.to_real() - g).cwiseAbs().maxCoeff() < 1e-8 * (1 + g.norm()));
    CHECK(r.rep.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    // The second column is a shortest lattice vector.
    for (int a = -4; a <= 4; ++a)
      for (int b = -4; b <= 4; ++b)
        if (a || b) CHECK((g * Eigen::Vector2d(a, b)).norm() >= r.rep.col(1).norm() * (1 - 1e-9));
  }
}

TEST_CASE("the reduced representative depends only on the coset") {
  CounterRng rng(32, 0, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Mat2 g = random_sl2(rng, 3.0);
    const Int2 gamma = random_gamma(rng, 6);
    const Mat2 a = reduce_matrix(g).rep, b = reduce_matrix(g * gamma.to_real()).rep;
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("return cocycle identity") {
  CounterRng rng(33, 0, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = haar_point(rng);
    const Mat2 g = random_sl2(rng, 1.0), h = random_sl2(rng, 1.0);
    const Int2 bh = return_cocycle_small(h, x.rep());
    const Mat2 hx = reduce_matrix(h * x.rep()).rep;
    const Int2 bg = return_cocycle_small(g, hx);
    CHECK(return_cocycle_small(g * h, x.rep()) == bg * bh);
  }
}

TEST_CASE("Haar points follow the depth law") {
  std::vector<double> d;
  for (std::size_t i = 0; i < 20000; ++i) {
    CounterRng rng(34, streams::haar_modular, i);
    d.push_back(haar_point(rng).depth());
  }
  // 1.95 / sqrt(n) is the 0.001 critical value of the one-sample KS statistic.
  CHECK(measures::ks_distance(d, measures::haar_depth_cdf, measures::haar_depth_cdf_left) < 1.95 / std::sqrt(20000.0));
}

TEST_CASE("lattice ball count against brute force") {
  for (double r : {0.5, 2.0, 3.0, 3.5}) {
    const double bound = 2 * std::cosh(r);
    const int lim = static_cast<int>(std::sqrt(bound));
    long long n = 0;
    for (int a = -lim; a <= lim; ++a)
      for (int b = -lim; b <= lim; ++b)
        for (int c = -lim; c <= lim; ++c)
          for (int d = -lim; d <= lim; ++d) n += a * d - b * c == 1 && a * a + b * b + c * c + d * d <= bound;
    CHECK(count_lattice_ball(r) == n);
  }
  CHECK(hyperbolic_ball_volume(1.0) == doctest::Approx(4 * std::numbers::pi * (std::cosh(1.0) - 1)));
}

TEST_CASE("orbit segments carry the exact deck") {
  CounterRng rng(35, 0, 0);
  for (Flow f : {Flow::geodesic, Flow::horocycle}) {
    const auto x = haar_point(rng);
    const auto seg = flow_orbit(x, f, 25.0, 0.05);
    const Mat2 lhs = flow_matrix(f, seg.duration()) * x.rep();
    const Mat2 rhs = seg.end().rep() * seg.total_deck().to_real();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-6 * (1 + lhs.norm()));
    CHECK(seg.samples().size() == 501);
  }
  CHECK_THROWS_AS(flow_orbit(point_from_z(0, 2), Flow::geodesic, 1.0, 0.5), Error);
}

TEST_CASE("excursion pieces alternate and tile the segment") {
  CounterRng rng(36, 0, 0);
  const auto seg = flow_orbit(haar_point(rng), Flow::geodesic, 200.0, 0.05);
  const auto dec = decompose_excursions(seg, 1.5);
  REQUIRE(!dec.pieces.empty());
  CHECK(dec.pieces.front().first == 0);
  CHECK(dec.pieces.back().last == seg.samples().size() - 1);
  for (std::size_t k = 1; k < dec.pieces.size(); ++k) {
    CHECK(dec.pieces[k].cusp != dec.pieces[k - 1].cusp);
    CHECK(dec.pieces[k].first == dec.pieces[k - 1].last);
  }
  for (const auto& p : dec.omegas())
    for (std::size_t s = p.first + 1; s < p.last; ++s) CHECK(seg.samples()[s].depth >= 1.5);
}

TEST_CASE("deck class of parabolic increments") {
  const Int2 p{1, 1, 0, 1};
  auto v = deck_class({Int2::identity(), p, p * p * p, p.negated()});
  CHECK(v.single_parabolic);
  CHECK(v.parabolic == p);
  CHECK(v.exponents == std::vector<long long>{1, 3, 1});
  CHECK(v.monotone);
  const Int2 conj = Int2{2, 1, 1, 1} * p * Int2{2, 1, 1, 1}.inverse();
  CHECK_FALSE(deck_class({p, conj}).single_parabolic);
  CHECK_FALSE(deck_class({Int2{2, 1, 1, 1}}).single_parabolic);
  CHECK_FALSE(deck_class({p, p.inverse()}).monotone);
}

TEST_CASE("points from z") {
  const auto x = point_from_z(0.3, 2.0);
  CHECK(x.z().real() == doctest::Approx(0.3));
  CHECK(x.z().imag() == doctest::Approx(2.0));
  CHECK(point_from_z(0.0, 10.0).depth() == doctest::Approx(0.5 * std::log(10.0)));
  CHECK_THROWS_AS(point_from_z(0, -1), Error);
  CHECK(default_thick_depth() == doctest::Approx(0.5 * std::log(17.0) + 0.05));
}
