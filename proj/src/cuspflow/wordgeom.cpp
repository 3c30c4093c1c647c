#include "cuspflow/wordgeom.hpp"

#include "cuspflow/error.hpp"
#include "cuspflow/modular.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cuspflow::wordgeom {

namespace {

void check_letter(int m, const Letter& l) {
  require(l.i >= 1 && l.i <= m && l.j >= 1 && l.j <= m && l.i != l.j, ErrorCode::invalid_argument,
          "letter indices must satisfy 1 <= i != j <= m");
}

// Square matrix of big integers, row-major, used for in-place row operations.
class Work {
 public:
  explicit Work(const IntegerGroupElement& g) : m_(g.dim()), e_(g.entries()) {}
  mpz_class& at(int r, int c) { return e_[static_cast<size_t>(r * m_ + c)]; }
  // row r += q * row s, i.e. left multiplication by E_{r+1,s+1}^q. The inverse
  // of that factor is appended to `inverse_letters`; quotients beyond 64 bits
  // become a short word in unit letters.
  void add_row(int r, int s, const mpz_class& q, std::vector<Letter>& inverse_letters);
  mpz_class dot(int r, int s) const {
    mpz_class acc = 0;
    for (int c = 0; c < m_; ++c) acc += e_[static_cast<size_t>(r * m_ + c)] * e_[static_cast<size_t>(s * m_ + c)];
    return acc;
  }

  // Subtracting the rounded projection of row r onto the other rows; returns
  // the decrease of |r|^2 (zero when it would not shorten the row).
  mpz_class reduce_against_rest(int r, bool apply, std::vector<Letter>& inverse_letters);

  // Lagrange reduction of rows r and s; returns the decrease of |r|^2 + |s|^2.
  // With `apply` false the rows are left untouched.
  mpz_class reduce_pair(int r, int s, bool apply, std::vector<Letter>& inverse_letters);

 private:
  int m_;
  std::vector<mpz_class> e_;
};

// Nearest integer to a / b, ties away from zero.
mpz_class nearest_quotient(const mpz_class& a, const mpz_class& b) {
  mpz_class q, r;
  mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  // a = q b + r with r having the sign of b; round up when 2|r| >= |b|.
  if (2 * abs(r) >= abs(b)) q += 1;
  return q;
}

GroupWord commutator(const GroupWord& x, const GroupWord& y) { return x.concat(y).concat(x.inverse()).concat(y.inverse()); }

int auxiliary(int m, int i, int j) {
  for (int l = 1; l <= m; ++l)
    if (l != i && l != j) return l;
  fail(ErrorCode::invalid_argument, "no auxiliary index available");
}

GroupWord repeated(int m, int i, int j, long long k) {
  GroupWord w(m);
  const long long unit = k > 0 ? 1 : -1;
  for (long long n = 0; n < std::llabs(k); ++n) w.push_back({i, j, unit});
  return w;
}

// E_{i,j}^{2^h} by balanced commutators.
GroupWord power_of_two(int m, int i, int j, int h) {
  if (h <= 1) return repeated(m, i, j, 1LL << h);
  const int l = auxiliary(m, i, j);
  const int h1 = h / 2;
  return commutator(power_of_two(m, i, l, h1), power_of_two(m, l, j, h - h1));
}

GroupWord short_word(int m, int i, int j, const mpz_class& k) {
  if (k < 0) return short_word(m, i, j, mpz_class(-k)).inverse();
  if (k <= 4) return repeated(m, i, j, k.get_si());
  const auto bits = static_cast<int>(mpz_sizeinbase(k.get_mpz_t(), 2));
  const int h = (bits + 1) / 2;
  const mpz_class high = k >> h;
  const mpz_class low = k - (high << h);
  const int l = auxiliary(m, i, j);
  GroupWord w = commutator(short_word(m, i, l, high), power_of_two(m, l, j, h));
  return w.concat(short_word(m, i, j, low));
}

mpz_class Work::reduce_pair(int r, int s, bool apply, std::vector<Letter>& inverse_letters) {
  mpz_class nr = dot(r, r), ns = dot(s, s), rs = dot(r, s);
  const mpz_class before = nr + ns;
  int big = r, small = s;
  if (nr < ns) {
    std::swap(big, small);
    std::swap(nr, ns);
  }
  // Invariant: nr = |big|^2 >= ns = |small|^2.
  for (;;) {
    const mpz_class q = nearest_quotient(rs, ns);
    if (q == 0) break;
    if (apply) add_row(big, small, mpz_class(-q), inverse_letters);
    nr += q * q * ns - 2 * q * rs;
    rs -= q * ns;
    if (nr >= ns) break;
    std::swap(big, small);
    std::swap(nr, ns);
  }
  return before - (nr + ns);
}

mpz_class Work::reduce_against_rest(int r, bool apply, std::vector<Letter>& inverse_letters) {
  std::vector<int> others;
  for (int j = 0; j < m_; ++j)
    if (j != r) others.push_back(j);
  const auto k = static_cast<Eigen::Index>(others.size());
  // Coefficients from a scaled floating-point solve; the gain is checked exactly.
  long scale = 0;
  for (const auto& v : e_) scale = std::max<long>(scale, static_cast<long>(mpz_sizeinbase(v.get_mpz_t(), 2)));
  const long shift = std::max<long>(0, scale - 500);
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> gram(k, k);
  Eigen::Matrix<long double, Eigen::Dynamic, 1> rhs(k);
  auto to_ld = [&](const mpz_class& v) {
    mpz_class t = v >> (2 * shift);
    return static_cast<long double>(t.get_d());
  };
  for (Eigen::Index a = 0; a < k; ++a) {
    rhs(a) = to_ld(dot(r, others[static_cast<size_t>(a)]));
    for (Eigen::Index b = 0; b < k; ++b) gram(a, b) = to_ld(dot(others[static_cast<size_t>(a)], others[static_cast<size_t>(b)]));
  }
  const Eigen::Matrix<long double, Eigen::Dynamic, 1> coef = gram.fullPivLu().solve(rhs);
  std::vector<mpz_class> q(static_cast<size_t>(k));
  bool any = false;
  for (Eigen::Index a = 0; a < k; ++a) {
    const long double c = std::round(coef(a));
    if (!std::isfinite(static_cast<double>(c))) return 0;
    q[static_cast<size_t>(a)] = mpz_class(static_cast<double>(c));
    any = any || q[static_cast<size_t>(a)] != 0;
  }
  if (!any) return 0;
  mpz_class before = dot(r, r), after = 0;
  for (int c = 0; c < m_; ++c) {
    mpz_class v = at(r, c);
    for (Eigen::Index a = 0; a < k; ++a) v -= q[static_cast<size_t>(a)] * at(others[static_cast<size_t>(a)], c);
    after += v * v;
  }
  if (after >= before) return 0;
  if (apply)
    for (Eigen::Index a = 0; a < k; ++a) add_row(r, others[static_cast<size_t>(a)], mpz_class(-q[static_cast<size_t>(a)]), inverse_letters);
  return before - after;
}

void Work::add_row(int r, int s, const mpz_class& q, std::vector<Letter>& inverse_letters) {
  if (q == 0) return;
  for (int c = 0; c < m_; ++c) at(r, c) += q * at(s, c);
  if (q.fits_slong_p()) {
    inverse_letters.push_back({r + 1, s + 1, -q.get_si()});
  } else {
    const GroupWord w = short_word(m_, r + 1, s + 1, mpz_class(-q));
    inverse_letters.insert(inverse_letters.end(), w.letters().begin(), w.letters().end());
  }
}

}  // namespace

GroupWord::GroupWord(int m, std::vector<Letter> letters) : m_(m), letters_(std::move(letters)) {
  require(m >= 2, ErrorCode::invalid_argument, "word dimension must be at least two");
  for (const auto& l : letters_) check_letter(m_, l);
}

double GroupWord::log_cost() const {
  double c = 0.0;
  for (const auto& l : letters_) c += 1.0 + std::log2(1.0 + std::fabs(static_cast<double>(l.k)));
  return c;
}

void GroupWord::push_back(const Letter& l) {
  check_letter(m_, l);
  letters_.push_back(l);
}

GroupWord GroupWord::concat(const GroupWord& rhs) const {
  require(m_ == rhs.m_, ErrorCode::invalid_argument, "cannot concatenate words of different dimension");
  GroupWord out = *this;
  out.letters_.insert(out.letters_.end(), rhs.letters_.begin(), rhs.letters_.end());
  return out;
}

GroupWord GroupWord::inverse() const {
  GroupWord out(m_);
  out.letters_.reserve(letters_.size());
  for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) out.letters_.push_back({it->i, it->j, -it->k});
  return out;
}

int GroupWord::factor_count() const {
  int runs = 0;
  std::pair<int, int> prev{0, 0};
  for (const auto& l : letters_) {
    const std::pair<int, int> pair{std::min(l.i, l.j), std::max(l.i, l.j)};
    if (pair != prev) ++runs;
    prev = pair;
  }
  return runs;
}

GroupWord GroupWord::parse(const std::string& text, int m) {
  GroupWord w(m);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Letter l;
    std::string extra;
    if (!(ls >> l.i >> l.j >> l.k) || (ls >> extra))
      fail(ErrorCode::parse_error, "word line " + std::to_string(lineno) + ": expected 'i j k'");
    require(l.i >= 1 && l.i <= m && l.j >= 1 && l.j <= m && l.i != l.j, ErrorCode::parse_error,
            "word line " + std::to_string(lineno) + ": indices must satisfy 1 <= i != j <= m");
    w.letters_.push_back(l);
  }
  return w;
}

std::string GroupWord::to_string() const {
  std::string out;
  for (const auto& l : letters_) out += std::to_string(l.i) + ' ' + std::to_string(l.j) + ' ' + std::to_string(l.k) + '\n';
  return out;
}

IntegerGroupElement word_eval(const GroupWord& w) {
  const int m = w.dim();
  std::vector<mpz_class> e(static_cast<size_t>(m * m), 0);
  for (int r = 0; r < m; ++r) e[static_cast<size_t>(r * m + r)] = 1;
  // P <- P E_{i,j}^k adds k * column i to column j.
  for (const auto& l : w.letters()) {
    const mpz_class k(static_cast<long>(l.k));
    for (int r = 0; r < m; ++r) e[static_cast<size_t>(r * m + l.j - 1)] += k * e[static_cast<size_t>(r * m + l.i - 1)];
  }
  return IntegerGroupElement::from_entries(m, std::move(e));
}

namespace {

// Relative decrease of the squared row lengths, on a log scale.
double relative_gain(const mpz_class& gain, const mpz_class& before) {
  return -std::log1p(-mpq_class(gain, before).get_d());
}

// cap > 0 stops the pair phase once the word has that many factors.
DecompositionReport decompose_capped(const IntegerGroupElement& gamma, int cap) {
  const int m = gamma.dim();
  Work x(gamma);
  // Row operations o_1, ..., o_n bring gamma to I, so gamma = o_1^{-1} ... o_n^{-1}.
  std::vector<Letter> ops;

  // Shrink the rows by Lagrange reduction of one pair at a time, taking the
  // move with the largest relative decrease. A row reduced against the span of
  // the others competes too, discounted by the three letters it usually costs.
  std::vector<Letter> scratch;
  for (int guard = 0;; ++guard) {
    require(guard < 1'000'000, ErrorCode::iteration_cap_exceeded, "pair reduction did not terminate");
    double best = 0.0;
    int bi = -1, bj = -1;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const mpz_class gain = x.reduce_pair(i, j, false, scratch);
        if (gain <= 0) continue;
        const double score = relative_gain(gain, x.dot(i, i) + x.dot(j, j));
        if (score > best) {
          best = score;
          bi = i;
          bj = j;
        }
      }
    for (int i = 0; i < m; ++i) {
      const mpz_class gain = x.reduce_against_rest(i, false, scratch);
      if (gain <= 0) continue;
      const double score = relative_gain(gain, x.dot(i, i)) / 3.0;
      if (score > best) {
        best = score;
        bi = i;
        bj = -1;
      }
    }
    if (bi < 0) break;
    if (cap > 0 && GroupWord(m, ops).factor_count() >= cap) break;
    if (bj >= 0)
      x.reduce_pair(bi, bj, true, ops);
    else
      x.reduce_against_rest(bi, true, ops);
  }

  // The rows now have small entries; finish by Euclid down the columns.
  for (int c = 0; c < m; ++c) {
    for (int r = c + 1; r < m; ++r) {
      // Euclid between rows c and r on column c, survivor in row c.
      for (int guard = 0; x.at(r, c) != 0; ++guard) {
        require(guard < 100'000, ErrorCode::iteration_cap_exceeded, "row reduction did not terminate");
        if (x.at(c, c) == 0) {
          x.add_row(c, r, 1, ops);
        } else if (abs(x.at(c, c)) > abs(x.at(r, c))) {
          x.add_row(c, r, -nearest_quotient(x.at(c, c), x.at(r, c)), ops);
        } else {
          x.add_row(r, c, -nearest_quotient(x.at(r, c), x.at(c, c)), ops);
        }
      }
    }
    require(abs(x.at(c, c)) == 1, ErrorCode::invalid_argument, "input is not in SL(m,Z)");
  }
  // Negate rows in pairs with w_{ij}^2, w_{ij} = E_ij E_ji^{-1} E_ij.
  std::vector<int> negative;
  for (int c = 0; c < m; ++c)
    if (x.at(c, c) < 0) negative.push_back(c);
  require(negative.size() % 2 == 0, ErrorCode::invalid_argument, "input has determinant -1");
  for (size_t p = 0; p < negative.size(); p += 2) {
    const int i = negative[p], j = negative[p + 1];
    for (int rep = 0; rep < 2; ++rep) {
      x.add_row(i, j, 1, ops);
      x.add_row(j, i, -1, ops);
      x.add_row(i, j, 1, ops);
    }
  }
  for (int j = m - 1; j >= 1; --j)
    for (int i = 0; i < j; ++i) x.add_row(i, j, -mpz_class(x.at(i, j)), ops);

  DecompositionReport rep{GroupWord(m, std::move(ops)), 0, 0.0, gamma.log_norm()};
  rep.factor_count = rep.word.factor_count();
  rep.log_cost = rep.word.log_cost();
  return rep;
}

}  // namespace

DecompositionReport lmr_decompose(const IntegerGroupElement& gamma) {
  const int m = gamma.dim();
  require(m >= 3, ErrorCode::invalid_argument, "decomposition needs m >= 3");
  auto full = decompose_capped(gamma, 0);
  if (full.factor_count <= lmr_factor_budget(m)) return full;
  // The column phase adds at most m(m-1) + m/2 factors and one pair move at most 3.
  return decompose_capped(gamma, lmr_factor_budget(m) - m * (m - 1) - m / 2 - 2);
}

GroupWord unipotent_short_word(int i, int j, long long k, int m) {
  require(m >= 3, ErrorCode::invalid_argument,
          "short unipotent words need m >= 3; in SL(2,Z) the word length of E^k grows linearly in k");
  require(i >= 1 && i <= m && j >= 1 && j <= m && i != j, ErrorCode::invalid_argument, "indices must satisfy 1 <= i != j <= m");
  require(k > -(1LL << 62) && k < (1LL << 62), ErrorCode::invalid_argument, "exponent must satisfy |k| < 2^62");
  return short_word(m, i, j, mpz_class(static_cast<long>(k)));
}

GroupWord random_word(int m, int n, long long kmax, CounterRng& rng) {
  require(m >= 2 && n >= 0 && kmax >= 1, ErrorCode::invalid_argument, "bad random word parameters");
  GroupWord w(m);
  for (int t = 0; t < n; ++t) {
    const int i = static_cast<int>(rng.uniform_int(1, m));
    int j = static_cast<int>(rng.uniform_int(1, m - 1));
    if (j >= i) ++j;
    long long k = rng.uniform_int(1, kmax);
    if (rng.uniform() < 0.5) k = -k;
    w.push_back({i, j, k});
  }
  return w;
}

FromLmrReport fromlmr_check(const std::vector<ReturnSample>& samples) {
  require(!samples.empty(), ErrorCode::invalid_argument, "need at least one sample");
  FromLmrReport rep;
  for (size_t s = 0; s < samples.size(); ++s) {
    const auto& smp = samples[s];
    require(smp.g.rows() == 2 && smp.x.rows() == 2, ErrorCode::invalid_argument, "return-cocycle samples live on m = 2");
    const modular::Int2 beta = modular::return_cocycle_small(modular::Mat2(smp.g), modular::Mat2(smp.x));
    const double proxy = std::log1p(std::exp(beta.to_group().log_norm()));
    const double depth = modular::ModularPoint(modular::reduce_matrix(modular::Mat2(smp.x)).rep, {}).depth();
    const double scale = grouplin::symmetric_distance(grouplin::RealGroupElement::from_matrix(smp.g)) + depth + 1.0;
    rep.proxy.push_back(proxy);
    rep.scale.push_back(scale);
    if (proxy / scale > rep.C) {
      rep.C = proxy / scale;
      rep.saturating = s;
    }
  }
  return rep;
}

std::pair<mpz_class, mpz_class> semidirect_conjugate(const IntegerGroupElement& a, const std::pair<mpz_class, mpz_class>& v) {
  require(a.dim() == 2, ErrorCode::invalid_argument, "semidirect conjugation needs a 2 x 2 matrix");
  auto embed = [](const IntegerGroupElement& b) {
    std::vector<mpz_class> e{b.at(0, 0), b.at(0, 1), 0, b.at(1, 0), b.at(1, 1), 0, 0, 0, 1};
    return IntegerGroupElement::from_entries(3, std::move(e));
  };
  auto translation = [](const mpz_class& p, const mpz_class& q) {
    std::vector<mpz_class> e{1, 0, p, 0, 1, q, 0, 0, 1};
    return IntegerGroupElement::from_entries(3, std::move(e));
  };
  const mpz_class p = a.at(0, 0) * v.first + a.at(0, 1) * v.second;
  const mpz_class q = a.at(1, 0) * v.first + a.at(1, 1) * v.second;
  const IntegerGroupElement lhs = embed(a) * translation(v.first, v.second) * embed(a).inverse();
  require(lhs == translation(p, q), ErrorCode::precondition_failed, "semidirect conjugation identity failed");
  return {p, q};
}

}  // namespace cuspflow::wordgeom
