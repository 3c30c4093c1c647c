#include "cuspflow/lattices.hpp"

#include "cuspflow/error.hpp"

#include <cmath>
#include <limits>

namespace cuspflow::lattices {

namespace {

using LD = long double;
using LMat = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>;
using LVec = Eigen::Matrix<LD, Eigen::Dynamic, 1>;

struct GramSchmidt {
  LMat mu;     // mu(i, j) for j < i
  LVec bstar;  // squared norms of the orthogonalized vectors
};

GramSchmidt gram_schmidt(const LMat& b) {
  const int n = static_cast<int>(b.cols());
  GramSchmidt gs{LMat::Zero(n, n), LVec::Zero(n)};
  LMat star = b;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      gs.mu(i, j) = b.col(i).dot(star.col(j)) / gs.bstar(j);
      star.col(i) -= gs.mu(i, j) * star.col(j);
    }
    gs.bstar(i) = star.col(i).squaredNorm();
  }
  return gs;
}

// Schnorr-Euchner enumeration of x != 0 with |sum x_i b_i|^2 <= radius2. With
// `shrink`, radius2 is lowered to each accepted value so the search converges to
// the shortest vector.
template <class Visit>
void enumerate(const GramSchmidt& gs, LD& radius2, bool shrink, long long budget, long long& nodes, Visit&& visit) {
  const int n = static_cast<int>(gs.bstar.size());
  std::vector<long long> x(static_cast<size_t>(n), 0);
  std::vector<LD> partial(static_cast<size_t>(n + 1), 0.0L);

  auto recurse = [&](auto&& self, int level) -> void {
    LD center = 0.0L;
    for (int j = level + 1; j < n; ++j) center -= static_cast<LD>(x[static_cast<size_t>(j)]) * gs.mu(j, level);
    const LD above = partial[static_cast<size_t>(level + 1)];
    // Walk outward from round(center) in both directions.
    long long up = std::llround(center);
    long long down = up - 1;
    bool up_open = true;
    bool down_open = true;
    while (up_open || down_open) {
      long long cand;
      if (up_open && down_open) {
        cand = (std::fabs(static_cast<LD>(up) - center) <= std::fabs(static_cast<LD>(down) - center)) ? up : down;
      } else {
        cand = up_open ? up : down;
      }
      const LD diff = static_cast<LD>(cand) - center;
      const LD value = above + diff * diff * gs.bstar(level);
      if (value > radius2) {
        if (cand == up) up_open = false;
        else down_open = false;
        continue;
      }
      if (++nodes > budget)
        fail(ErrorCode::budget_exceeded,
             "lattice enumeration exceeded " + std::to_string(budget) + " nodes (pathological conditioning)");
      x[static_cast<size_t>(level)] = cand;
      partial[static_cast<size_t>(level)] = value;
      if (level == 0) {
        bool nonzero = false;
        for (long long xi : x) nonzero |= (xi != 0);
        if (nonzero) {
          visit(x, value);
          if (shrink) radius2 = value;
        }
      } else {
        self(self, level - 1);
      }
      if (cand == up) ++up;
      else --down;
    }
    x[static_cast<size_t>(level)] = 0;
  };
  recurse(recurse, n - 1);
}

LMat to_ld(const Mat& m) { return m.cast<LD>(); }

}  // namespace

Reduction lll_reduce(const Mat& basis, double lovasz) {
  const int n = static_cast<int>(basis.cols());
  require(n >= 1 && n <= kMaxDim, ErrorCode::invalid_argument, "lattice reduction supports dimension up to 8");
  LMat b = to_ld(basis);
  IntMat change = IntMat::Identity(n, n);
  GramSchmidt gs = gram_schmidt(b);
  int k = 1;
  int iterations = 0;
  while (k < n) {
    require(++iterations < 1'000'000, ErrorCode::iteration_cap_exceeded, "LLL did not converge");
    // Size reduction, repeated until stable since mu is only approximate.
    for (int pass = 0; pass < 8; ++pass) {
      bool changed = false;
      for (int j = k - 1; j >= 0; --j) {
        const LD q = std::round(gs.mu(k, j));
        if (q == 0.0L) continue;
        require(std::fabs(q) < 9.0e15L, ErrorCode::ill_conditioned, "basis too ill-conditioned for reduction");
        b.col(k) -= q * b.col(j);
        change.col(k) -= static_cast<long long>(q) * change.col(j);
        for (int l = 0; l < j; ++l) gs.mu(k, l) -= q * gs.mu(j, l);
        gs.mu(k, j) -= q;
        changed = true;
      }
      if (!changed) break;
      gs = gram_schmidt(b);
    }
    const LD mu = gs.mu(k, k - 1);
    if (gs.bstar(k) >= (static_cast<LD>(lovasz) - mu * mu) * gs.bstar(k - 1)) {
      ++k;
    } else {
      b.col(k).swap(b.col(k - 1));
      change.col(k).swap(change.col(k - 1));
      gs = gram_schmidt(b);
      k = std::max(k - 1, 1);
    }
  }
  return {b.cast<double>(), change};
}

UnimodularLattice UnimodularLattice::from_basis(const Mat& basis) {
  require(basis.rows() == basis.cols() && basis.rows() >= 2, ErrorCode::invalid_argument, "lattice basis must be square, m >= 2");
  require(basis.rows() <= kMaxDim, ErrorCode::invalid_argument, "lattice dimension above 8 is not supported");
  require(basis.allFinite(), ErrorCode::non_finite, "lattice basis has non-finite entries");
  const double det = basis.determinant();
  require(std::isfinite(det) && det > 1e-300, ErrorCode::invalid_argument,
          "lattice basis must have positive determinant, got " + std::to_string(det));
  UnimodularLattice l;
  const int m = static_cast<int>(basis.rows());
  l.basis_ = basis / std::pow(det, 1.0 / m);
  l.reduction_ = lll_reduce(l.basis_);
  return l;
}

UnimodularLattice UnimodularLattice::from_group_element(const grouplin::RealGroupElement& g) { return from_basis(g.matrix()); }

UnimodularLattice UnimodularLattice::standard(int m) { return from_basis(Mat::Identity(m, m)); }

UnimodularLattice UnimodularLattice::reduce_basis() const {
  UnimodularLattice l;
  l.basis_ = reduction_.reduced;
  l.reduction_ = {reduction_.reduced, IntMat::Identity(dim(), dim())};
  return l;
}

ShortVector shortest_vector(const UnimodularLattice& lattice, long long budget) {
  const LMat b = to_ld(lattice.reduced());
  const GramSchmidt gs = gram_schmidt(b);
  const int n = lattice.dim();
  LD radius2 = std::numeric_limits<LD>::max();
  for (int i = 0; i < n; ++i) radius2 = std::min(radius2, b.col(i).squaredNorm());
  radius2 *= (1.0L + 1e-12L);
  IntVec best = IntVec::Zero(n);
  long long nodes = 0;
  enumerate(gs, radius2, true, budget, nodes, [&](const std::vector<long long>& x, LD) {
    for (int i = 0; i < n; ++i) best(i) = x[static_cast<size_t>(i)];
  });
  require(best.cwiseAbs().maxCoeff() > 0, ErrorCode::ill_conditioned, "enumeration found no vector within the reduced radius");
  ShortVector out;
  out.coefficients = lattice.change() * best;
  LVec v = LVec::Zero(n);
  for (int i = 0; i < n; ++i) v += static_cast<LD>(best(i)) * b.col(i);
  out.vector = v.cast<double>();
  out.length = static_cast<double>(std::sqrt(v.squaredNorm()));
  out.nodes = nodes;
  return out;
}

double systole(const UnimodularLattice& lattice, long long budget) { return shortest_vector(lattice, budget).length; }

double depth(const UnimodularLattice& lattice, long long budget) {
  return std::max(0.0, -std::log(systole(lattice, budget)));
}

std::vector<IntVec> enumerate_short_vectors(const UnimodularLattice& lattice, double radius, bool up_to_sign, long long budget) {
  const LMat b = to_ld(lattice.reduced());
  const GramSchmidt gs = gram_schmidt(b);
  const int n = lattice.dim();
  LD radius2 = static_cast<LD>(radius) * static_cast<LD>(radius) * (1.0L + 1e-12L);
  std::vector<IntVec> out;
  long long nodes = 0;
  enumerate(gs, radius2, false, budget, nodes, [&](const std::vector<long long>& x, LD) {
    if (up_to_sign) {
      int top = n - 1;
      while (x[static_cast<size_t>(top)] == 0) --top;
      if (x[static_cast<size_t>(top)] < 0) return;
    }
    IntVec v(n);
    for (int i = 0; i < n; ++i) v(i) = x[static_cast<size_t>(i)];
    out.push_back(std::move(v));
  });
  return out;
}

long long count_vectors_in_ball(const UnimodularLattice& lattice, double radius, long long budget) {
  const LMat b = to_ld(lattice.reduced());
  const GramSchmidt gs = gram_schmidt(b);
  LD radius2 = static_cast<LD>(radius) * static_cast<LD>(radius) * (1.0L + 1e-12L);
  long long nodes = 0;
  long long count = 0;
  enumerate(gs, radius2, false, budget, nodes, [&](const std::vector<long long>&, LD) { ++count; });
  return count;
}

double sublattice_covolume(const UnimodularLattice& lattice, const Sublattice& sub) {
  const int m = lattice.dim();
  const int k = static_cast<int>(sub.vectors.size());
  require(k >= 1 && k <= m, ErrorCode::invalid_argument, "sublattice needs between 1 and m vectors");
  LMat v(m, k);
  const LMat basis = to_ld(lattice.basis());
  for (int c = 0; c < k; ++c) {
    require(sub.vectors[static_cast<size_t>(c)].size() == m, ErrorCode::invalid_argument, "sublattice vector has wrong length");
    v.col(c) = basis * sub.vectors[static_cast<size_t>(c)].cast<LD>();
  }
  const LMat gram = v.transpose() * v;
  const LD det = gram.determinant();
  require(det > 1e-12L, ErrorCode::invalid_argument, "sublattice vectors are linearly dependent");
  return static_cast<double>(std::sqrt(det));
}

double hermite_bound(int m) { return std::sqrt(1.0 + m / 4.0); }

UnimodularLattice sample_uniform_entries(int m, CounterRng& rng, double min_abs_det) {
  for (int attempt = 0; attempt < 10'000; ++attempt) {
    Mat b(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) b(r, c) = rng.uniform(-2.0, 2.0);
    const double det = b.determinant();
    if (std::abs(det) < min_abs_det) continue;
    if (det < 0) b.col(0) = -b.col(0);
    return UnimodularLattice::from_basis(b);
  }
  fail(ErrorCode::iteration_cap_exceeded, "could not draw a lattice with the requested determinant floor");
}

}  // namespace cuspflow::lattices
