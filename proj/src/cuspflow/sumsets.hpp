#pragma once

// Covering B_n(Z^2) by a box plus iterated sums of a symmetric set, with exact
// bitset dilation, the minimal-k oracle, certificates and good-set propagation.

#include "cuspflow/rng.hpp"

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cuspflow::sumsets {

struct Point {
  int a = 0;
  int b = 0;
  Point operator+(const Point& o) const { return {a + o.a, b + o.b}; }
  Point operator-(const Point& o) const { return {a - o.a, b - o.b}; }
  Point operator-() const { return {-a, -b}; }
  bool operator==(const Point&) const = default;
};

// L-infinity ball {max(|a|,|b|) <= n}.
struct LatticeBall {
  int n = 0;
  bool contains(const Point& p) const { return std::abs(p.a) <= n && std::abs(p.b) <= n; }
  long long size() const { return (2LL * n + 1) * (2LL * n + 1); }
};

struct CoverConstants {
  int M = 0;
  long long N = 0;  // (M + 1)!
  long long k = 0;  // 4 N
  LatticeBall F;    // B_N
};

CoverConstants cover_constants(double delta);

// Subset of B_n closed under negation.
class SymmetricSet {
 public:
  explicit SymmetricSet(int n);
  static SymmetricSet full(int n);
  // Rejects sets that are not closed under negation.
  static SymmetricSet from_points(int n, const std::vector<Point>& points);
  // Each pair {v, -v} (and the origin) kept independently with probability p.
  static SymmetricSet random(int n, double p, CounterRng& rng);

  int radius() const { return n_; }
  bool contains(const Point& p) const;
  // Inserts p and -p.
  void insert(const Point& p);
  void erase(const Point& p);
  std::size_t count() const;
  double density() const { return static_cast<double>(count()) / static_cast<double>(LatticeBall{n_}.size()); }
  std::vector<Point> points() const;
  bool operator==(const SymmetricSet&) const = default;

 private:
  std::size_t index(const Point& p) const;
  int n_;
  std::vector<bool> bits_;
};

struct CoverResult {
  bool covered = false;
  std::optional<Point> witness;  // an uncovered point when covered is false
  long long k_used = 0;          // dilation rounds performed
};

// B_n subset of F_delta + (sums of at most k_delta elements of S).
CoverResult verify_cover(const SymmetricSet& s, double delta);
// Smallest k >= 1 with B_n subset of F + (sums of at most k elements of S);
// nullopt when the reach stops growing before B_n is covered or k exceeds k_cap.
std::optional<long long> minimal_k_oracle(const SymmetricSet& s, const LatticeBall& f, long long k_cap = 1'000'000);

// v = f + s_1 + ... + s_k with f in F and every s_i in S.
struct Certificate {
  Point target;
  Point f;
  std::vector<Point> summands;
};

// Certificates for every point of B_n using at most k_cap summands.
std::vector<Certificate> cover_certificates(const SymmetricSet& s, const LatticeBall& f, long long k_cap);

// a, b in S with b - a = i v for some 1 <= |i| <= M.
struct ClassPair {
  Point a;
  Point b;
  int i = 0;
};
std::optional<ClassPair> class_pair(const SymmetricSet& s, const Point& v, int M);
// True when the translates S + i v (0 <= i <= M) cannot be disjoint by counting.
bool class_pair_forced(const SymmetricSet& s, const Point& v, int M);

using CostFunction = std::function<double(const Point&)>;

struct SubadditivityCheck {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  std::size_t asymmetric = 0;
  double worst_excess = 0.0;
};
// All pairs u, v with u, v, u + v in B_r.
SubadditivityCheck check_subadditive(const CostFunction& h, int r, double tolerance = 1e-12);

struct PropagationRow {
  Certificate certificate;
  double cost = 0.0;            // h(target)
  double certified_cost = 0.0;  // h(f) + sum h(s_i)
};

struct PropagationReport {
  int n = 0;
  double eps = 0.0;
  double delta = 0.0;
  double good_density = 0.0;   // |GU_{eps,n}| / |B_n|
  CoverConstants constants;
  LatticeBall f;
  double max_cost_over_f = 0.0;
  double bound = 0.0;          // eps log n * k_max + max cost over F
  long long k_max = 0;
  std::size_t bound_failures = 0;  // rows with certified_cost > bound
  std::size_t chain_failures = 0;  // rows with cost > certified_cost
  std::vector<PropagationRow> rows;
};

// GU = {v in B_n : h(v) <= eps log n}. Requires density(GU) > delta. F defaults
// to F_delta; a smaller box may be supplied.
PropagationReport good_set_propagation(const CostFunction& h, int n, double eps, double delta,
                                       std::optional<LatticeBall> f = std::nullopt);

// Run-length encoded bitmap over B_n in row-major order, runs alternating
// absent/present and starting with absent. Header: "CFSS", u32 version, u32 n,
// u32 run count, all little-endian.
void write_set(std::ostream& out, const SymmetricSet& s);
SymmetricSet read_set(std::istream& in);

}  // namespace cuspflow::sumsets
