#pragma once

// Words in elementary matrices of SL(m,Z): exact evaluation, decomposition by
// integer row reduction, short words for large unipotents and the word-length
// proxy checks for the return cocycle.

#include "cuspflow/grouplin.hpp"
#include "cuspflow/rng.hpp"

#include <gmpxx.h>

#include <string>
#include <utility>
#include <vector>

namespace cuspflow::wordgeom {

using grouplin::IntegerGroupElement;
using grouplin::Letter;

class GroupWord {
 public:
  explicit GroupWord(int m = 2, std::vector<Letter> letters = {});

  int dim() const { return m_; }
  const std::vector<Letter>& letters() const { return letters_; }
  std::size_t letter_count() const { return letters_.size(); }
  // sum over letters of 1 + log2(1 + |k|)
  double log_cost() const;

  void push_back(const Letter& l);
  GroupWord concat(const GroupWord& rhs) const;
  GroupWord inverse() const;
  // Maximal runs of consecutive letters acting on the same unordered pair {i, j}.
  int factor_count() const;

  // One "i j k" line per letter; blank lines and '#' comments are ignored.
  static GroupWord parse(const std::string& text, int m);
  std::string to_string() const;

  bool operator==(const GroupWord&) const = default;

 private:
  int m_;
  std::vector<Letter> letters_;
};

IntegerGroupElement word_eval(const GroupWord& w);

struct DecompositionReport {
  GroupWord word;
  int factor_count = 0;
  double log_cost = 0.0;
  double input_log_norm = 0.0;
};

// Default factor budget 4(m^2 - 1); 60 for m = 4.
constexpr int lmr_factor_budget(int m) { return 4 * (m * m - 1); }

// Row reduction of gamma to the identity. Greedy pairwise Lagrange reduction of
// the rows first, then nearest-integer Euclid down the columns, sign repair on
// pairs of rows and clearing of the upper triangle. When the full pair phase
// would exceed lmr_factor_budget(m) factors it is cut short so the total fits
// (as long as every column quotient fits in 64 bits). The word is the product of
// the inverse row operations and evaluates to gamma.
DecompositionReport lmr_decompose(const IntegerGroupElement& gamma);

// Word in unit letters for E_{i,j}^k via commutators [E_{i,l}^a, E_{l,j}^b].
// Length is O((1 + log2 |k|)^2). Rejects m = 2.
GroupWord unipotent_short_word(int i, int j, long long k, int m);

// Product of n random letters E_{i,j}^k with 1 <= |k| <= kmax.
GroupWord random_word(int m, int n, long long kmax, CounterRng& rng);

struct FromLmrReport {
  double C = 0.0;
  std::size_t saturating = 0;
  std::vector<double> proxy;  // log(1 + ||beta(g, x)||)
  std::vector<double> scale;  // d(g, Id) + depth(x) + 1
};

struct ReturnSample {
  Mat g;  // 2 x 2, det 1
  Mat x;  // reduced representative
};

// Smallest C with log(1 + ||beta(g,x)||) <= C (d(g,Id) + depth(x) + 1) on all samples.
FromLmrReport fromlmr_check(const std::vector<ReturnSample>& samples);

// A.v, after checking sl3(A) u_v sl3(A)^{-1} = u_{A v} exactly in SL(3,Z).
std::pair<mpz_class, mpz_class> semidirect_conjugate(const IntegerGroupElement& a, const std::pair<mpz_class, mpz_class>& v);

}  // namespace cuspflow::wordgeom
