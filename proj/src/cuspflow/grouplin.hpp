#pragma once

// Linear algebra on SL(m,R) and SL(m,Z): elements, root subgroups, the Cartan
// subalgebra and the left-K-invariant distance. Indices in the public API are
// 1-based to match the usual E_{i,j} notation.

#include <Eigen/Dense>
#include <gmpxx.h>

#include <string>
#include <utility>
#include <vector>

namespace cuspflow {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace grouplin {

inline constexpr double kDetTolerance = 1e-9;
inline constexpr int kRenormalizeEvery = 64;

// Element of SL(m,R). Construction rescales by det^{-1/m}; inputs with
// non-positive or non-finite determinant are rejected.
class RealGroupElement {
 public:
  RealGroupElement() = default;
  static RealGroupElement identity(int m);
  // Rescales to determinant one. Throws if det <= 0 or not finite.
  static RealGroupElement from_matrix(const Mat& entries);
  // Trusts the caller that |det - 1| is already within tolerance.
  static RealGroupElement from_unimodular(const Mat& entries);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Mat& matrix() const { return entries_; }
  double operator()(int r, int c) const { return entries_(r, c); }

  RealGroupElement inverse() const;
  RealGroupElement operator*(const RealGroupElement& rhs) const;

 private:
  Mat entries_;
  int products_since_renorm_ = 0;
};

// Element of SL(m,Z) with arbitrary-precision entries.
class IntegerGroupElement {
 public:
  IntegerGroupElement() = default;
  static IntegerGroupElement identity(int m);
  // Row-major entries; checks det == 1 exactly.
  static IntegerGroupElement from_entries(int m, std::vector<mpz_class> entries);
  static IntegerGroupElement from_int64(int m, const std::vector<long long>& row_major);

  int dim() const { return m_; }
  const mpz_class& at(int r, int c) const { return entries_[static_cast<size_t>(r * m_ + c)]; }
  const std::vector<mpz_class>& entries() const { return entries_; }

  IntegerGroupElement operator*(const IntegerGroupElement& rhs) const;
  IntegerGroupElement inverse() const;
  IntegerGroupElement negated() const;
  bool operator==(const IntegerGroupElement& rhs) const { return m_ == rhs.m_ && entries_ == rhs.entries_; }
  bool is_identity() const;

  // Double conversion; overflows to inf for entries beyond double range.
  Mat to_real() const;
  // log of the operator norm, computed from a scaled copy so that it stays
  // finite for entries far beyond double range.
  double log_norm() const;
  // log of the largest absolute entry (0 for the zero matrix is never reached
  // for group elements).
  double log_max_entry() const;
  std::string to_string() const;

 private:
  IntegerGroupElement(int m, std::vector<mpz_class> entries) : m_(m), entries_(std::move(entries)) {}
  int m_ = 0;
  std::vector<mpz_class> entries_;
};

// Exact determinant by fraction-free (Bareiss) elimination.
mpz_class determinant(int m, const std::vector<mpz_class>& row_major);

// Root beta_{i,j}: the linear functional t -> t_i - t_j on the Cartan subalgebra.
struct Root {
  int i = 1;
  int j = 2;
  Root() = default;
  Root(int i_, int j_);
  Root negated() const { return Root(j, i); }
  double evaluate(const Vec& cartan) const { return cartan(i - 1) - cartan(j - 1); }
  bool operator==(const Root&) const = default;
};

// Simple root alpha_k = beta_{k,k+1} and the highest root beta_{1,m}.
Root simple_root(int k);
Root highest_root(int m);

class CartanVector {
 public:
  explicit CartanVector(Vec t);
  const Vec& values() const { return t_; }
  int dim() const { return static_cast<int>(t_.size()); }

 private:
  Vec t_;
};

IntegerGroupElement elementary(int m, int i, int j, long long k);
IntegerGroupElement elementary(int m, int i, int j, const mpz_class& k);

RealGroupElement exp_root(int m, const Root& root, double s);
RealGroupElement cartan_element(const CartanVector& v);

// a^t = diag(e^{t/2}, e^{-t/2}, 1, ..., 1).
RealGroupElement a_flow(int m, double t);
// b^s = diag(e^s, ..., e^s, e^{-s(m-1)}).
RealGroupElement b_flow(int m, double s);
// The completing generators c_k, k = 1..m-3: log-diagonal with ones in the
// first k+1 slots, -(k+1) in slot k+2 and zero elsewhere. Their (m,m)-entry is
// 1 and {a, b, c_1, ..., c_{m-3}} is an orthogonal basis of the Cartan algebra.
Vec c_generator_log(int m, int k);
RealGroupElement c_flow(int m, int k, double s);
Vec a_generator_log(int m);
Vec b_generator_log(int m);

// SL(2,R) block [[a,b],[c,d]] placed on rows/columns (i, j) of the identity.
RealGroupElement sl2_embed(int m, double a, double b, double c, double d, int i, int j);

// log singular values in decreasing order. Small singular values are taken as
// reciprocals of the large singular values of the inverse, which keeps their
// relative accuracy for badly conditioned elements.
Vec log_singular_values(const RealGroupElement& g);

// d(g, Id) = sqrt(2) * || log sigma(g) ||_2.
double symmetric_distance(const RealGroupElement& g);
// d(g, h) = d(g h^{-1}, Id).
double symmetric_distance(const RealGroupElement& g, const RealGroupElement& h);

struct NormConorm {
  double norm = 1.0;
  double conorm = 1.0;
};
NormConorm norm_conorm(const RealGroupElement& g);

// One elementary letter E_{i,j}^k (1-based indices).
struct Letter {
  int i = 1;
  int j = 2;
  long long k = 0;
  bool operator==(const Letter&) const = default;
};

// Rotation in the (i, j) coordinate plane.
RealGroupElement rotation(int m, int i, int j, double theta);

}  // namespace grouplin
}  // namespace cuspflow
