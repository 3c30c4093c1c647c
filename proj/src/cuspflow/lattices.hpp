#pragma once

// Unimodular lattices g.Z^m: reduction, exact systole by enumeration,
// sublattice covolumes and the cusp-depth functional.

#include "cuspflow/grouplin.hpp"
#include "cuspflow/rng.hpp"

#include <Eigen/Dense>

#include <vector>

namespace cuspflow::lattices {

using IntMat = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
using IntVec = Eigen::Matrix<long long, Eigen::Dynamic, 1>;

inline constexpr double kLovasz = 0.99;
inline constexpr long long kEnumerationBudget = 100'000'000;
inline constexpr int kMaxDim = 8;

struct Reduction {
  Mat reduced;    // basis * change
  IntMat change;  // unimodular, |det| = 1
};

// LLL reduction of the columns of `basis`, carried out in extended precision.
// Inputs with m > kMaxDim are rejected.
Reduction lll_reduce(const Mat& basis, double lovasz = kLovasz);

struct ShortVector {
  double length = 0.0;
  IntVec coefficients;  // with respect to the original (unreduced) basis
  Vec vector;
  long long nodes = 0;  // enumeration nodes visited
};

class UnimodularLattice {
 public:
  // Columns generate the lattice. The basis is rescaled by det^{-1/m}; a
  // non-positive, non-finite or vanishing determinant is rejected.
  static UnimodularLattice from_basis(const Mat& basis);
  static UnimodularLattice from_group_element(const grouplin::RealGroupElement& g);
  static UnimodularLattice standard(int m);

  int dim() const { return static_cast<int>(basis_.rows()); }
  const Mat& basis() const { return basis_; }
  const Mat& reduced() const { return reduction_.reduced; }
  const IntMat& change() const { return reduction_.change; }

  // Same lattice with the reduced basis as its basis.
  UnimodularLattice reduce_basis() const;
  // g.L for g in SL(m,R).
  UnimodularLattice transformed(const Mat& g) const { return from_basis(g * reduced()); }

 private:
  Mat basis_;
  Reduction reduction_;
};

// Shortest nonzero vector by Schnorr-Euchner enumeration inside the radius of
// the shortest reduced basis vector. Throws budget_exceeded past `budget` nodes.
ShortVector shortest_vector(const UnimodularLattice& lattice, long long budget = kEnumerationBudget);
double systole(const UnimodularLattice& lattice, long long budget = kEnumerationBudget);
// max(0, -log systole).
double depth(const UnimodularLattice& lattice, long long budget = kEnumerationBudget);

// All nonzero lattice vectors of length <= radius, as coefficient vectors in
// the reduced basis (one of each +-v pair when `up_to_sign`).
std::vector<IntVec> enumerate_short_vectors(const UnimodularLattice& lattice, double radius, bool up_to_sign,
                                            long long budget = kEnumerationBudget);
// Number of nonzero lattice vectors with length <= radius.
long long count_vectors_in_ball(const UnimodularLattice& lattice, double radius, long long budget = kEnumerationBudget);

// Integer coordinates of k lattice vectors with respect to the lattice basis.
struct Sublattice {
  std::vector<IntVec> vectors;
};

// sqrt(det Gram) of the spanned sublattice; rejects dependent vectors
// (Gram determinant <= 1e-12).
double sublattice_covolume(const UnimodularLattice& lattice, const Sublattice& sub);

// Hermite-type constant sqrt(1 + m/4) used for the Minkowski check.
double hermite_bound(int m);

// Basis with i.i.d. U[-2,2] entries, redrawn while |det| < min_abs_det, sign of
// the first column flipped for negative determinant, then rescaled.
UnimodularLattice sample_uniform_entries(int m, CounterRng& rng, double min_abs_det = 0.5);

}  // namespace cuspflow::lattices
