#include "cuspflow/error.hpp"
#include "cuspflow/measures.hpp"
#include "cuspflow/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace cuspflow;
using namespace cuspflow::measures;

namespace {

// (3/pi) dx dy / y^2 over the standard domain of f(depth), depth = max(0, log(y)/2),
// by the substitution y = Y/w^2 on (0, 1] and midpoint sums.
double domain_integral(const std::function<double(double)>& f) {
  const int nx = 400, nu = 4000;
  double total = 0.0;
  for (int i = 0; i < nx; ++i) {
    const double x = -0.5 + (i + 0.5) / nx;
    const double y0 = std::sqrt(1.0 - x * x);
    // int_{y0}^inf g(y) / y^2 dy = (1/y0) int_0^1 g(y0/w^2) 2w dw
    double inner = 0.0;
    for (int k = 0; k < nu; ++k) {
      const double w = (k + 0.5) / nu;
      inner += 2.0 * w * f(std::max(0.0, 0.5 * std::log(y0 / (w * w))));
    }
    total += inner / nu / y0 / nx;
  }
  return 3.0 / std::numbers::pi * total;
}

}  // namespace

TEST_CASE("Haar depth law against direct quadrature") {
  CHECK(domain_integral([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(haar_mean_depth() == doctest::Approx(domain_integral([](double d) { return d; })).epsilon(1e-3));
  for (double eta : {0.25, 0.5, 1.0})
    CHECK(haar_exp_moment(eta) == doctest::Approx(domain_integral([eta](double d) { return std::exp(eta * d); })).epsilon(2e-3));
  for (double D : {0.1, 0.5, 1.0})
    CHECK(1.0 - haar_depth_cdf(D) == doctest::Approx(domain_integral([D](double d) { return d > D ? 1.0 : 0.0; })).epsilon(2e-3));
  CHECK(std::isinf(haar_exp_moment(2.0)));
  CHECK(haar_depth_cdf_left(0.0) == 0.0);
  CHECK(haar_depth_cdf(0.0) == doctest::Approx(1.0 - 3.0 / std::numbers::pi));
}

TEST_CASE("weighted mean and KS distances") {
  const auto e = weighted_mean({1.0, 3.0}, {0.25, 0.75});
  CHECK(e.value == doctest::Approx(2.5));
  std::vector<double> q;
  for (int i = 0; i < 1000; ++i) q.push_back((i + 0.5) / 1000.0);
  auto cdf = [](double v) { return std::clamp(v, 0.0, 1.0); };
  CHECK(ks_distance(q, cdf, cdf) == doctest::Approx(0.0005).epsilon(1e-6));
  CHECK(ks_two_sample({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_two_sample({1, 2}, {3, 4}) == 1.0);
}

TEST_CASE("empirical measures: weights, mixtures and CSV round trip") {
  const auto a = EmpiricalMeasure::point_mass(Mat::Identity(2, 2));
  Mat b = Mat::Identity(2, 2);
  b(0, 1) = 0.5;
  const auto mix = EmpiricalMeasure::mixture({a, EmpiricalMeasure::point_mass(b)}, {0.3, 0.7});
  CHECK(mix.size() == 2);
  CHECK(mix.integrate([](const Atom& at) { return at.basis(0, 1); }) == doctest::Approx(0.35));
  CHECK_THROWS_AS(EmpiricalMeasure({Atom{Mat::Identity(2, 2), 0.5, {}}}, {}), Error);
  std::stringstream ss;
  write_measure_csv(ss, mix);
  const auto back = read_measure_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK((back.atoms()[1].basis - b).norm() < 1e-15);
  CHECK(back.atoms()[1].weight == doctest::Approx(0.7));
}

TEST_CASE("KM fractions are nested in eps") {
  const auto x = modular::point_from_z(std::numbers::phi - 1.5, 1.1, 0.4).rep();
  const auto r = km_fractions(x, 500.0, {0.05, 0.1, 0.2, 0.4});
  for (std::size_t k = 1; k < r.fraction.size(); ++k) CHECK(r.fraction[k - 1] <= r.fraction[k]);
  CHECK(r.fraction.back() > 0.0);
  // From the identity the highest-root orbit stays in the thick part.
  const auto id = km_fractions(Mat::Identity(2, 2), 500.0, {0.4});
  CHECK(id.fraction[0] == 0.0);
  CHECK_THROWS_AS(km_fractions(x, 100.0, {0.1}, 0.5), Error);
}

TEST_CASE("box coordinates round trip") {
  CounterRng rng(41, 0, 0);
  for (int m = 3; m <= 6; ++m) {
    const FolnerBox box{m, 10.0, 0.2, 2.0};
    for (int trial = 0; trial < 50; ++trial) {
      const auto p = sample_box(box, rng);
      CHECK(in_box(box, p));
      const Vec v = box_log_diagonal(box, p.t, p.s, p.s_c);
      CHECK(std::fabs(v.sum()) < 1e-12);
      double t, s;
      std::vector<double> sc;
      decompose_log_diagonal(m, v, t, s, sc);
      CHECK(t == doctest::Approx(p.t));
      CHECK(s == doctest::Approx(p.s));
      for (std::size_t k = 0; k < sc.size(); ++k) CHECK(sc[k] == doctest::Approx(p.s_c[k]));
    }
  }
}

TEST_CASE("Folner defect under a^1 and averaged atoms") {
  const FolnerBox box{3, 10.0, 0.2, 2.0};
  const auto d = folner_defect(box, SolvableElement{grouplin::a_generator_log(3), Vec()}, 20000, 1);
  CHECK(d.value <= 2.0 / 10.0 + 3.0 * d.std_error);
  CHECK(d.value > 0.0);
  const auto none = folner_defect(box, SolvableElement{Vec::Zero(3), Vec()}, 1000, 1);
  CHECK(none.value == 0.0);
  const auto mu = folner_average(Mat::Identity(2, 2), box, 200, 3);
  CHECK(mu.size() == 200);
  for (const auto& a : mu.atoms()) CHECK(a.basis.determinant() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("Tc profile is non-increasing in c") {
  TcParams p;
  p.s_c = {1.0};
  const auto prof = tc_profile(Mat::Identity(3, 3), p, {0.5, 1.0, 1.5, 2.0}, 5000, 2);
  for (std::size_t k = 1; k < prof.rows.size(); ++k) CHECK(prof.rows[k].fraction <= prof.rows[k - 1].fraction);
  TcParams bad = p;
  bad.t = 20.0;
  CHECK_THROWS_AS(tc_profile(Mat::Identity(3, 3), bad, {1.0}, 10, 1), Error);
}

TEST_CASE("Siegel mean count under Haar") {
  const auto mu = haar_measure(4000, 5, streams::haar_reference);
  const auto st = siegel_statistic(mu, 1.5);
  CHECK(st.ball_volume == doctest::Approx(std::numbers::pi * 2.25));
  CHECK(std::fabs(st.mean_count.value - st.ball_volume) <= 4.0 * st.mean_count.std_error);
}

TEST_CASE("cusp mass of a point mass") {
  Mat thin = Mat::Identity(2, 2);
  thin(0, 0) = 4.0;
  thin(1, 1) = 0.25;
  const auto r = cusp_mass(EmpiricalMeasure::point_mass(thin), {0.5, 1.0});
  CHECK(r.exp_mass[1].value == doctest::Approx(4.0));
  CHECK(r.sys_mass[0].value == doctest::Approx(2.0));
}
