#pragma once

// The modular surface SL(2,R)/SL(2,Z): Gauss reduction with deck tracking,
// geodesic and horocycle orbits, the return cocycle and cusp excursions.
//
// A point g.Gamma is identified with the upper-half-plane point z = g^T.i; the
// reduced representative has z in the standard domain |Re z| <= 1/2, |z| >= 1,
// which makes its second basis column a shortest lattice vector. Right
// multiplication by E_{2,1}^n translates z by n.

#include "cuspflow/grouplin.hpp"
#include "cuspflow/rng.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cuspflow::modular {

using Mat2 = Eigen::Matrix2d;
using grouplin::IntegerGroupElement;
using grouplin::Letter;
using grouplin::RealGroupElement;

inline constexpr int kReduceIterationCap = 10'000;
inline constexpr double kDomainTolerance = 1e-9;
// Thick part {depth <= D0}: systole squared at least 1/17, plus a margin.
inline constexpr double kThickMargin = 0.05;
double default_thick_depth();

// 2x2 integer matrix with checked 64-bit arithmetic.
struct Int2 {
  long long a = 1, b = 0, c = 0, d = 1;
  static Int2 identity() { return {}; }
  Int2 operator*(const Int2& rhs) const;
  Int2 inverse() const { return {d, -b, -c, a}; }
  Int2 negated() const { return {-a, -b, -c, -d}; }
  bool operator==(const Int2&) const = default;
  bool is_identity() const { return a == 1 && b == 0 && c == 0 && d == 1; }
  long long trace() const { return a + d; }
  IntegerGroupElement to_group() const;
  Mat2 to_real() const;
};

class ModularPoint {
 public:
  ModularPoint() = default;
  ModularPoint(const Mat2& rep, IntegerGroupElement deck) : rep_(rep), deck_(std::move(deck)) {}

  const Mat2& rep() const { return rep_; }
  const IntegerGroupElement& deck() const { return deck_; }
  RealGroupElement rep_element() const { return RealGroupElement::from_unimodular(rep_); }
  // Upper-half-plane point z = rep^T.i.
  std::complex<double> z() const;
  // Length of the shortest lattice vector (the second column of rep).
  double systole() const;
  double depth() const;

 private:
  Mat2 rep_ = Mat2::Identity();
  IntegerGroupElement deck_ = IntegerGroupElement::identity(2);
};

struct Reduction {
  Mat2 rep;
  Int2 deck;                  // g = rep * deck
  std::vector<Letter> letters;  // word for deck, in order
  int iterations = 0;
};

// Reduced representative of the coset g.Gamma. Ties on the domain boundary and
// the sign ambiguity are broken by picking the candidate with the largest trace,
// so the result depends only on the coset.
Reduction reduce_matrix(const Mat2& g);
ModularPoint reduce(const RealGroupElement& g);
ModularPoint reduce(const Mat2& g);

// Point from z = x + iy and a rotation angle (applied on the left).
ModularPoint point_from_z(double x, double y, double theta = 0.0);

// Haar-distributed point: z from (3/pi) dx dy / y^2 on the domain, uniform angle.
ModularPoint haar_point(CounterRng& rng);

enum class Flow { geodesic, horocycle };
const char* to_string(Flow f);
Mat2 flow_matrix(Flow f, double t);

struct OrbitSample {
  double time = 0.0;
  double depth = 0.0;
  Int2 increment;              // deck step taken on arrival at this sample
  unsigned letter_offset = 0;  // into OrbitSegment::letters
  unsigned letter_count = 0;
};

struct OrbitOptions {
  bool track_deck = true;     // maintain the exact accumulated deck
  bool store_points = false;  // keep every reduced representative
};

struct SegmentStats {
  double length = 0.0;     // l(zeta)
  double max_depth = 0.0;  // d(zeta)
  std::optional<double> cocycle_growth;  // c(zeta)
};

class OrbitSegment {
 public:
  const ModularPoint& start() const { return start_; }
  const ModularPoint& end() const { return end_; }
  Flow direction() const { return direction_; }
  double duration() const { return duration_; }
  double step() const { return step_; }
  const std::vector<OrbitSample>& samples() const { return samples_; }
  const std::vector<Letter>& letters() const { return letters_; }
  const std::vector<Mat2>& points() const { return points_; }
  const SegmentStats& stats() const { return stats_; }
  void set_cocycle_growth(double c) { stats_.cocycle_growth = c; }

  // Product of the increments of samples (first, last], i.e. the deck picked up
  // while moving from sample `first` to sample `last`.
  IntegerGroupElement deck_between(size_t first, size_t last) const;
  IntegerGroupElement total_deck() const { return deck_between(0, samples_.size() - 1); }

 private:
  friend OrbitSegment flow_orbit(const ModularPoint&, Flow, double, double, const OrbitOptions&);
  ModularPoint start_;
  ModularPoint end_;
  Flow direction_ = Flow::geodesic;
  double duration_ = 0.0;
  double step_ = 0.0;
  std::vector<OrbitSample> samples_;
  std::vector<Letter> letters_;
  std::vector<Mat2> points_;
  SegmentStats stats_;
};

// Samples the orbit flow(s).x for s in [0, t] at n = ceil(t/h) equal steps,
// re-reducing after every step. Requires t > 0 and 0 < h <= 0.1.
OrbitSegment flow_orbit(const ModularPoint& x, Flow direction, double t, double h, const OrbitOptions& options = {});

// beta(g, x): the deck element with g.rep(x) = rep(g.x) * beta.
IntegerGroupElement return_cocycle(const RealGroupElement& g, const ModularPoint& x);
Int2 return_cocycle_small(const Mat2& g, const Mat2& rep);

struct Piece {
  size_t first = 0;  // sample indices, inclusive
  size_t last = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  bool cusp = false;
  double duration() const { return end_time - start_time; }
};

struct ExcursionDecomposition {
  double threshold = 0.0;
  std::vector<Piece> pieces;  // alternating, in time order
  std::vector<Piece> alphas() const;
  std::vector<Piece> omegas() const;
};

// Maximal runs of samples with depth >= threshold become cusp pieces; the
// complementary runs become thick pieces. Adjacent pieces share an endpoint.
ExcursionDecomposition decompose_excursions(const OrbitSegment& seg, double threshold);

struct DeckClassVerdict {
  bool single_parabolic = true;
  Int2 parabolic;                   // primitive parabolic P with increments +-P^k
  std::vector<long long> exponents;  // nonzero exponents in time order
  bool monotone = true;             // all exponents share one sign
};

// Checks that every nontrivial deck increment inside the piece is +-P^k for a
// single primitive parabolic P.
DeckClassVerdict excursion_deck_class(const OrbitSegment& seg, const Piece& piece);
// Same check on an explicit list of increments.
DeckClassVerdict deck_class(const std::vector<Int2>& increments);

using SegmentCocycle = std::function<double(const OrbitSegment&)>;

struct ChiRow {
  double length = 0.0;
  double growth = 0.0;  // c(zeta)
  double ratio = 0.0;
  double running_sup = 0.0;
};

struct ChiStats {
  double chi_max = 0.0;
  std::vector<ChiRow> rows;
};

// c(zeta)/l(zeta) per segment and its running supremum. Segments must start
// and end in the thick part.
ChiStats chi_stats(const std::vector<OrbitSegment>& segments, const SegmentCocycle& cocycle,
                   double thick_depth = default_thick_depth());

// Number of gamma in SL(2,Z) with d(gamma, Id) <= radius, i.e.
// a^2 + b^2 + c^2 + d^2 <= 2 cosh(radius).
long long count_lattice_ball(double radius);
// Hyperbolic area of a disc: 4 pi (cosh r - 1).
double hyperbolic_ball_volume(double radius);

void write_orbit_csv(std::ostream& out, const OrbitSegment& seg, const std::string& experiment, unsigned long long seed);

}  // namespace cuspflow::modular
