#include "cuspflow/error.hpp"
#include "cuspflow/modular.hpp"
#include "cuspflow/rng.hpp"
#include "cuspflow/wordgeom.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

using namespace cuspflow;
using namespace cuspflow::wordgeom;
using grouplin::elementary;

namespace {

double fixture_constant() {
  std::ifstream in(CUSPFLOW_FIXTURE_DIR "/uniword_constant.txt");
  double c = 0.0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') c = std::stod(line);
  return c;
}

}  // namespace

TEST_CASE("parse, print and invert") {
  const auto w = GroupWord::parse("# comment\n1 2 3\n\n2 3 -1\n", 3);
  CHECK(w.letter_count() == 2);
  CHECK(GroupWord::parse(w.to_string(), 3) == w);
  CHECK(word_eval(w.concat(w.inverse())).is_identity());
  CHECK(word_eval(w) == elementary(3, 1, 2, 3) * elementary(3, 2, 3, -1));
  CHECK(w.log_cost() == doctest::Approx(2.0 + std::log2(4.0) + std::log2(2.0)));
  CHECK_THROWS_AS(GroupWord::parse("1 1 2\n", 3), Error);
  CHECK_THROWS_AS(GroupWord::parse("1 2 x\n", 3), Error);
  CHECK_THROWS_AS(GroupWord::parse("1 4 1\n", 3), Error);
}

TEST_CASE("factor count merges runs on one pair") {
  const auto w = GroupWord::parse("1 2 1\n2 1 4\n1 2 -2\n1 3 1\n3 1 1\n2 3 5\n", 3);
  CHECK(w.factor_count() == 3);
}

TEST_CASE("decomposition reconstructs random products exactly") {
  for (int m = 3; m <= 5; ++m) {
    for (std::uint64_t i = 0; i < 60; ++i) {
      CounterRng rng(61, streams::word_corpus, i);
      const auto g = word_eval(random_word(m, 40, 1 + static_cast<long long>(i % 6), rng));
      const auto rep = lmr_decompose(g);
      CHECK(word_eval(rep.word) == g);
      CHECK(rep.factor_count == rep.word.factor_count());
      CHECK(rep.factor_count <= lmr_factor_budget(m));
      CHECK(rep.log_cost == doctest::Approx(rep.word.log_cost()));
    }
  }
}

TEST_CASE("decomposition of the identity and of single letters") {
  CHECK(lmr_decompose(grouplin::IntegerGroupElement::identity(4)).word.letter_count() == 0);
  const auto e = elementary(4, 3, 1, -7);
  CHECK(word_eval(lmr_decompose(e).word) == e);
  CHECK_THROWS_AS(lmr_decompose(grouplin::IntegerGroupElement::identity(2)), Error);
}

TEST_CASE("short unipotent words are exact and use unit letters") {
  for (long long k : {1LL, 2LL, 3LL, 17LL, 1000LL, -12345LL, (1LL << 30), (1LL << 30) - 1}) {
    const auto w = unipotent_short_word(1, 3, k, 3);
    CHECK(word_eval(w) == elementary(3, 1, 3, k));
    for (const auto& l : w.letters()) CHECK(std::llabs(l.k) == 1);
  }
  CHECK_THROWS_AS(unipotent_short_word(1, 2, 5, 2), Error);
}

TEST_CASE("short word length against the frozen constant") {
  const double c = fixture_constant();
  REQUIRE(c > 0.0);
  for (int b = 1; b <= 30; ++b)
    for (long long k : {(1LL << b) - 1, 1LL << b}) {
      if (k < 2) continue;
      const double l2 = std::log2(double(k));
      CHECK(double(unipotent_short_word(1, 2, k, 4).letter_count()) <= c * l2 * l2);
    }
}

TEST_CASE("semidirect conjugation") {
  const auto a = grouplin::IntegerGroupElement::from_int64(2, {2, 1, 1, 1});
  const auto v = semidirect_conjugate(a, {3, -4});
  CHECK(v.first == 2);
  CHECK(v.second == -1);
}

TEST_CASE("return cocycle word-length proxy") {
  std::vector<ReturnSample> samples;
  CounterRng rng(62, 0, 0);
  for (int i = 0; i < 500; ++i) {
    const auto x = modular::haar_point(rng);
    const double t = rng.uniform(0, 3);
    samples.push_back({modular::flow_matrix(modular::Flow::geodesic, t), x.rep()});
  }
  const auto r = fromlmr_check(samples);
  CHECK(r.C > 0.0);
  CHECK(r.C < 2.0);
  CHECK(r.proxy.size() == 500);
}
