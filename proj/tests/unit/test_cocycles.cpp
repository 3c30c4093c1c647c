#include "cuspflow/cocycles.hpp"
#include "cuspflow/error.hpp"
#include "cuspflow/lattices.hpp"
#include "cuspflow/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace cuspflow;
using namespace cuspflow::cocycles;

namespace {

std::vector<Mat> haar_starts(int n, std::uint64_t seed) {
  std::vector<Mat> out;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, streams::starts, static_cast<std::uint64_t>(i));
    out.push_back(modular::haar_point(rng).rep());
  }
  return out;
}

}  // namespace

TEST_CASE("identity cocycle has zero exponent") {
  const IdentityCocycle id(2, 3);
  const auto est = top_lyapunov(id, modular::flow_matrix(modular::Flow::geodesic, 1.0), haar_starts(2, 1), 1000);
  CHECK(est.value == 0.0);
  CHECK(est.finite);
}

TEST_CASE("cocycle identity for the return cocycle") {
  const ReturnCocycleLinear a;
  CounterRng rng(51, 0, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const Mat x = modular::haar_point(rng).rep();
    const Mat g = sample_sl2_ball(1.0, rng), h = sample_sl2_ball(1.0, rng);
    const Mat lhs = a.eval(g * h, x);
    const Mat rhs = a.eval(g, a.act(h, x)) * a.eval(h, x);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("normalized products keep an exact log-norm ledger") {
  const ReturnCocycleLinear a;
  const Mat s = modular::flow_matrix(modular::Flow::geodesic, 1.0);
  const Mat x = haar_starts(1, 2).front();
  const std::vector<Mat> path(40, s);
  const auto p = cocycle_product(a, path, x);
  const auto exact = return_product_exact(path, x);
  CHECK(p.log_norm() == doctest::Approx(std::log(operator_norm(exact.to_real()))).epsilon(1e-9));
}

TEST_CASE("return cocycle exponent along the geodesic flow") {
  const ReturnCocycleLinear a;
  const auto est = top_lyapunov(a, modular::flow_matrix(modular::Flow::geodesic, 1.0), haar_starts(4, 3), 20000);
  CHECK(std::fabs(est.value - 0.5) < 0.05);
  for (const auto& r : est.subadditivity) CHECK(r.mean <= 3.0 * r.std_error + 1e-12);
}

TEST_CASE("diagonal test cocycle rates are recovered") {
  const int m = 3;
  const std::vector<Vec> gens{grouplin::a_generator_log(m), grouplin::b_generator_log(m)};
  const std::vector<std::vector<double>> rates{{0.7, -0.2, 0.1}, {-0.3, 0.5, 0.25}};
  const auto coc = diagonal_test_cocycle(m, gens, rates, true);
  CounterRng rng(52, 0, 0);
  const Mat x = lattices::sample_uniform_entries(m, rng).reduced();
  const Mat step = grouplin::cartan_element(grouplin::CartanVector(gens[0])).matrix();
  const Vec e = qr_exponents(*coc, step, x, 5000);
  CHECK(e(0) == doctest::Approx(0.7).epsilon(0.02));
  CHECK(e(1) == doctest::Approx(0.1).epsilon(0.02));
  CHECK(e(2) == doctest::Approx(-0.2).epsilon(0.02));

  const FlowGenerator g1{"a", step};
  const FlowGenerator g2{"b", grouplin::cartan_element(grouplin::CartanVector(gens[1])).matrix()};
  const auto rep = oseledets_functionals(*coc, g1, g2, x, 5000);
  REQUIRE(rep.functionals.size() == 3);
  // Sorted by the rate along a*b: 0.4, 0.35, 0.3.
  CHECK(rep.functionals[0].values.at("a") == doctest::Approx(0.7).epsilon(0.02));
  CHECK(rep.functionals[1].values.at("b") == doctest::Approx(0.25).epsilon(0.02));
  CHECK(rep.functionals[2].values.at("a") == doctest::Approx(-0.2).epsilon(0.02));
  for (const auto& f : rep.functionals) CHECK(f.relative_residual < 0.02);
}

TEST_CASE("twisting does not change the cocycle class") {
  const int m = 3;
  const std::vector<Vec> gens{grouplin::a_generator_log(m), grouplin::b_generator_log(m)};
  const auto plain = diagonal_test_cocycle(m, gens, {{0.4, -0.4}, {0.1, -0.1}}, false);
  const auto twisted = diagonal_test_cocycle(m, gens, {{0.4, -0.4}, {0.1, -0.1}}, true);
  CounterRng rng(53, 0, 0);
  const Mat x = lattices::sample_uniform_entries(m, rng).reduced();
  const Mat g = grouplin::cartan_element(grouplin::CartanVector(Vec(gens[0] * 0.3))).matrix();
  const Mat gx = twisted->act(g, x);
  const Mat conj = twisted->twist(gx).inverse() * twisted->eval(g, x) * twisted->twist(x);
  CHECK((conj - plain->eval(g, x)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(plain->eval(sample_sl2_ball(1.0, rng), Mat::Identity(2, 2)), Error);
}

TEST_CASE("temperedness fit separates tempered from untempered") {
  CounterRng rng(54, 0, 0);
  std::vector<TemperedSample> samples;
  for (int i = 0; i < 3000; ++i) {
    const auto x = modular::haar_point(rng);
    samples.push_back({sample_sl2_ball(1.0, rng), x.rep(), x.depth()});
  }
  const auto ret = temperedness_fit(ReturnCocycleLinear{}, samples);
  const auto bad = temperedness_fit(SyntheticUntempered{}, samples);
  CHECK(ret.k < 3.0);
  CHECK(bad.violation_rate > ret.violation_rate);
}
