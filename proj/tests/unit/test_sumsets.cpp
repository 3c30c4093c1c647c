#include "cuspflow/error.hpp"
#include "cuspflow/rng.hpp"
#include "cuspflow/sumsets.hpp"

#include <doctest.h>

#include <cmath>
#include <deque>
#include <sstream>

using namespace cuspflow;
using namespace cuspflow::sumsets;

namespace {

// Breadth-first distance from the box F in steps drawn from S, on a box large
// enough to hold every partial sum of a path of length <= cap.
std::optional<long long> naive_minimal_k(const SymmetricSet& s, int f, int cap) {
  const int n = s.radius();
  const int R = f + cap * n;
  const int W = 2 * R + 1;
  std::vector<int> dist(static_cast<size_t>(W) * W, -1);
  auto at = [&](int a, int b) -> int& { return dist[static_cast<size_t>(a + R) * W + (b + R)]; };
  std::deque<Point> q;
  for (int a = -f; a <= f; ++a)
    for (int b = -f; b <= f; ++b) {
      at(a, b) = 0;
      q.push_back({a, b});
    }
  const auto steps = s.points();
  while (!q.empty()) {
    const Point p = q.front();
    q.pop_front();
    if (at(p.a, p.b) >= cap) continue;
    for (const auto& st : steps) {
      const Point r = p + st;
      if (std::abs(r.a) > R || std::abs(r.b) > R || at(r.a, r.b) >= 0) continue;
      at(r.a, r.b) = at(p.a, p.b) + 1;
      q.push_back(r);
    }
  }
  long long worst = 1;
  for (int a = -n; a <= n; ++a)
    for (int b = -n; b <= n; ++b) {
      if (at(a, b) < 0) return std::nullopt;
      worst = std::max<long long>(worst, at(a, b));
    }
  return worst;
}

SymmetricSet even_rows(int n) {
  SymmetricSet s(n);
  for (int a = -n; a <= n; a += 2)
    for (int b = -n; b <= n; ++b) s.insert({a, b});
  return s;
}

}  // namespace

TEST_CASE("cover constants") {
  const auto c = cover_constants(0.5);
  CHECK(c.M == 3);
  CHECK(c.N == 24);
  CHECK(c.k == 96);
  CHECK(c.F.n == 24);
  const auto d = cover_constants(0.2);
  CHECK(d.M == 6);
  CHECK(d.N == 5040);
  CHECK(d.k == 4 * 5040);
  CHECK(cover_constants(0.34).M == 3);
  CHECK_THROWS_AS(cover_constants(1.0), Error);
  CHECK_THROWS_AS(cover_constants(0.0), Error);
}

TEST_CASE("symmetric set invariants") {
  CounterRng rng(71, streams::sumset_sets, 0);
  const auto s = SymmetricSet::random(12, 0.4, rng);
  for (const auto& p : s.points()) CHECK(s.contains(-p));
  CHECK(SymmetricSet::full(3).count() == 49);
  CHECK_THROWS_AS(SymmetricSet::from_points(3, {{1, 0}}), Error);
  CHECK_THROWS_AS(SymmetricSet::from_points(3, {{4, 0}, {-4, 0}}), Error);
  CHECK(SymmetricSet::from_points(3, {{1, 2}, {-1, -2}}).count() == 2);
}

TEST_CASE("minimal k agrees with breadth-first search") {
  for (std::uint64_t i = 0; i < 40; ++i) {
    CounterRng rng(72, streams::sumset_sets, i);
    const int n = 3 + static_cast<int>(i % 3);
    const double p = 0.15 + 0.02 * static_cast<double>(i);
    const auto s = SymmetricSet::random(n, p, rng);
    for (int f : {0, 1, 2}) {
      const auto got = minimal_k_oracle(s, LatticeBall{f}, 30);
      const auto want = naive_minimal_k(s, f, 30);
      CHECK(got.has_value() == want.has_value());
      if (got && want) CHECK(*got == *want);
    }
  }
}

TEST_CASE("verify cover on dense and parity-restricted sets") {
  CounterRng rng(73, streams::sumset_sets, 0);
  const auto dense = SymmetricSet::random(30, 0.7, rng);
  REQUIRE(dense.density() > 0.5);
  const auto ok = verify_cover(dense, 0.5);
  CHECK(ok.covered);
  const auto k = minimal_k_oracle(dense, LatticeBall{24}, 96);
  REQUIRE(k.has_value());
  CHECK(*k <= 96);

  // Even first coordinates only: a box of radius >= 1 fills the odd rows, the
  // origin alone never does.
  const auto even = even_rows(30);
  REQUIRE(even.density() > 0.5);
  CHECK(verify_cover(even, 0.5).covered);
  CHECK_FALSE(minimal_k_oracle(even, LatticeBall{0}).has_value());
  CHECK(minimal_k_oracle(even, LatticeBall{1}).has_value());

  CHECK_THROWS_AS(verify_cover(SymmetricSet(30), 0.5), Error);
}

TEST_CASE("certificates sum to their targets") {
  CounterRng rng(74, streams::sumset_sets, 1);
  const auto s = SymmetricSet::random(6, 0.5, rng);
  const auto k = minimal_k_oracle(s, LatticeBall{1}, 50);
  REQUIRE(k.has_value());
  const auto certs = cover_certificates(s, LatticeBall{1}, *k);
  CHECK(certs.size() == static_cast<size_t>(LatticeBall{6}.size()));
  for (const auto& c : certs) {
    Point sum = c.f;
    CHECK(LatticeBall{1}.contains(c.f));
    CHECK(static_cast<long long>(c.summands.size()) <= *k);
    for (const auto& x : c.summands) {
      CHECK(s.contains(x));
      sum = sum + x;
    }
    CHECK(sum == c.target);
  }
}

TEST_CASE("class pairs") {
  for (std::uint64_t i = 0; i < 30; ++i) {
    CounterRng rng(75, streams::sumset_sets, i);
    const auto s = SymmetricSet::random(8, 0.3 + 0.02 * static_cast<double>(i), rng);
    const Point v{1 + static_cast<int>(i % 3), static_cast<int>(i % 4) - 2};
    const int M = 3;
    bool exists = false;
    for (const auto& a : s.points())
      for (int j = -M; j <= M; ++j)
        if (j != 0 && s.contains({a.a + j * v.a, a.b + j * v.b})) exists = true;
    const auto cp = class_pair(s, v, M);
    CHECK(cp.has_value() == exists);
    if (cp) {
      CHECK(s.contains(cp->a));
      CHECK(s.contains(cp->b));
      CHECK(cp->i != 0);
      CHECK(std::abs(cp->i) <= M);
      CHECK(cp->b - cp->a == Point{cp->i * v.a, cp->i * v.b});
    }
    if (class_pair_forced(s, v, M)) CHECK(cp.has_value());
  }
}

TEST_CASE("subadditivity check") {
  const auto norm = [](const Point& p) { return std::hypot(double(p.a), double(p.b)); };
  const auto r1 = check_subadditive(norm, 5);
  CHECK(r1.pairs > 0);
  CHECK(r1.violations == 0);
  CHECK(r1.asymmetric == 0);
  const auto sq = [](const Point& p) { return double(p.a * p.a + p.b * p.b); };
  const auto r2 = check_subadditive(sq, 5);
  CHECK(r2.violations > 0);
  CHECK(r2.worst_excess > 0.0);
  const auto skew = [](const Point& p) { return std::abs(double(p.a)) + (p.b > 0 ? 1.0 : 0.0); };
  CHECK(check_subadditive(skew, 3).asymmetric > 0);
}

TEST_CASE("good set propagation") {
  const auto h = [](const Point& p) { return 0.5 * std::log1p(double(std::max(std::abs(p.a), std::abs(p.b)))); };
  const auto rep = good_set_propagation(h, 20, 0.5, 0.5);
  CHECK(rep.good_density > 0.5);
  CHECK(rep.f.n == 24);
  CHECK(rep.rows.size() == static_cast<size_t>(LatticeBall{20}.size()));
  CHECK(rep.bound_failures == 0);
  CHECK(rep.chain_failures == 0);
  const double lim = 0.5 * std::log(20.0);
  for (const auto& row : rep.rows) {
    Point sum = row.certificate.f;
    for (const auto& x : row.certificate.summands) {
      CHECK(h(x) <= lim + 1e-12);
      sum = sum + x;
    }
    CHECK(sum == row.certificate.target);
    CHECK(row.certified_cost <= rep.bound + 1e-9);
  }
  const auto flat = [](const Point& p) { return double(std::abs(p.a) + std::abs(p.b)); };
  CHECK_THROWS_AS(good_set_propagation(flat, 20, 0.1, 0.5), Error);
}

TEST_CASE("binary set roundtrip") {
  CounterRng rng(76, streams::sumset_sets, 2);
  const auto s = SymmetricSet::random(17, 0.37, rng);
  std::stringstream buf;
  write_set(buf, s);
  CHECK(read_set(buf) == s);
  std::stringstream bad("XXXX\x01\x00\x00\x00");
  CHECK_THROWS_AS(read_set(bad), Error);
  std::stringstream empty;
  write_set(empty, SymmetricSet(0));
  CHECK(read_set(empty).count() == 0);
}
