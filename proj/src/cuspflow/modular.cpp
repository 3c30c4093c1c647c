#include "cuspflow/modular.hpp"

#include "cuspflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

namespace cuspflow::modular {

namespace {

long long checked_mul_add(long long x1, long long y1, long long x2, long long y2) {
  const __int128 v = static_cast<__int128>(x1) * y1 + static_cast<__int128>(x2) * y2;
  require(v <= static_cast<__int128>(INT64_MAX) && v >= static_cast<__int128>(INT64_MIN), ErrorCode::ill_conditioned,
          "deck increment overflows 64-bit integers");
  return static_cast<long long>(v);
}

// S = [[0,-1],[1,0]] = E12^{-1} E21 E12^{-1}.
void append_s(std::vector<Letter>& word) {
  word.push_back({1, 2, -1});
  word.push_back({2, 1, 1});
  word.push_back({1, 2, -1});
}

}  // namespace

double default_thick_depth() { return 0.5 * std::log(17.0) + kThickMargin; }

Int2 Int2::operator*(const Int2& r) const {
  return {checked_mul_add(a, r.a, b, r.c), checked_mul_add(a, r.b, b, r.d), checked_mul_add(c, r.a, d, r.c),
          checked_mul_add(c, r.b, d, r.d)};
}

IntegerGroupElement Int2::to_group() const { return IntegerGroupElement::from_int64(2, {a, b, c, d}); }

Mat2 Int2::to_real() const {
  Mat2 m;
  m << static_cast<double>(a), static_cast<double>(b), static_cast<double>(c), static_cast<double>(d);
  return m;
}

std::complex<double> ModularPoint::z() const {
  // z = (c + a i) / (d + b i) for rep = [[a, b], [c, d]].
  return std::complex<double>(rep_(1, 0), rep_(0, 0)) / std::complex<double>(rep_(1, 1), rep_(0, 1));
}

double ModularPoint::systole() const { return rep_.col(1).norm(); }

double ModularPoint::depth() const { return std::max(0.0, -std::log(systole())); }

Reduction reduce_matrix(const Mat2& g) {
  require(g.allFinite(), ErrorCode::non_finite, "cannot reduce a non-finite matrix");
  Reduction out;
  Mat2 rep = g;
  Int2 right = Int2::identity();  // g * right = rep
  std::vector<std::vector<Letter>> steps;
  for (;;) {
    require(++out.iterations <= kReduceIterationCap, ErrorCode::iteration_cap_exceeded,
            "fundamental-domain reduction did not terminate (degenerate input)");
    const double n2 = rep.col(1).squaredNorm();
    const double q = rep.col(0).dot(rep.col(1)) / n2;
    const double shift = std::floor(q + 0.5);
    if (shift != 0.0) {
      require(std::fabs(shift) < 9.0e18, ErrorCode::ill_conditioned, "translation too large for reduction");
      const auto n = static_cast<long long>(shift);
      rep.col(0) -= shift * rep.col(1);
      right = right * Int2{1, 0, -n, 1};
      steps.push_back({Letter{2, 1, n}});
      continue;
    }
    const double n1 = rep.col(0).squaredNorm();
    if (n1 < n2 || (n1 == n2 && q > 0.0)) {
      const Eigen::Vector2d b1 = rep.col(0);
      rep.col(0) = -rep.col(1);
      rep.col(1) = b1;
      right = right * Int2{0, 1, -1, 0};
      std::vector<Letter> s;
      append_s(s);
      steps.push_back(std::move(s));
      continue;
    }
    break;
  }
  out.deck = right.inverse();
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) out.letters.insert(out.letters.end(), it->begin(), it->end());

  // Canonical choice among the representatives of the same coset with z fixed:
  // +-rep always, and rep*J when z = i is the elliptic point.
  struct Candidate {
    Mat2 rep;
    Int2 fix;  // deck' = fix * deck
    int s_count;
  };
  const Int2 minus{-1, 0, 0, -1};
  const Int2 s_mat{0, -1, 1, 0};
  std::vector<Candidate> candidates{{rep, Int2::identity(), 0}, {-rep, minus, 2}};
  const bool at_i = rep.col(0).squaredNorm() == rep.col(1).squaredNorm() && rep.col(0).dot(rep.col(1)) == 0.0;
  if (at_i) {
    Mat2 j;
    j << 0, 1, -1, 0;
    candidates.push_back({rep * j, s_mat, 1});
    candidates.push_back({-(rep * j), minus * s_mat, 3});
  }
  size_t best = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    const double tb = candidates[best].rep.trace();
    const double ti = candidates[i].rep.trace();
    if (ti > tb || (ti == tb && candidates[i].rep(1, 0) > candidates[best].rep(1, 0))) best = i;
  }
  const Candidate& pick = candidates[best];
  out.rep = pick.rep;
  if (pick.s_count > 0) {
    out.deck = pick.fix * out.deck;
    std::vector<Letter> prefix;
    for (int i = 0; i < pick.s_count; ++i) append_s(prefix);
    out.letters.insert(out.letters.begin(), prefix.begin(), prefix.end());
  }
  return out;
}

ModularPoint reduce(const Mat2& g) {
  const Reduction r = reduce_matrix(g);
  return ModularPoint(r.rep, r.deck.to_group());
}

ModularPoint reduce(const RealGroupElement& g) {
  require(g.dim() == 2, ErrorCode::invalid_argument, "modular reduction needs m = 2");
  return reduce(Mat2(g.matrix()));
}

ModularPoint point_from_z(double x, double y, double theta) {
  require(std::isfinite(x) && std::isfinite(y) && y > 0.0, ErrorCode::invalid_argument, "z must lie in the upper half plane");
  const double sy = std::sqrt(y);
  Mat2 base;
  base << sy, 0.0, x / sy, 1.0 / sy;
  Mat2 k;
  k << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return reduce(Mat2(k * base));
}

ModularPoint haar_point(CounterRng& rng) {
  const double y0 = std::sqrt(3.0) / 2.0;
  for (;;) {
    const double x = rng.uniform(-0.5, 0.5);
    const double u = 1.0 - rng.uniform();  // (0, 1]
    const double y = y0 / u;
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    if (x * x + y * y < 1.0) continue;
    return point_from_z(x, y, theta);
  }
}

const char* to_string(Flow f) { return f == Flow::geodesic ? "geodesic" : "horocycle"; }

Mat2 flow_matrix(Flow f, double t) {
  Mat2 m;
  if (f == Flow::geodesic) m << std::exp(t / 2), 0.0, 0.0, std::exp(-t / 2);
  else m << 1.0, t, 0.0, 1.0;
  return m;
}

IntegerGroupElement OrbitSegment::deck_between(size_t first, size_t last) const {
  require(first <= last && last < samples_.size(), ErrorCode::invalid_argument, "sample range out of bounds");
  IntegerGroupElement acc = IntegerGroupElement::identity(2);
  Int2 small = Int2::identity();
  for (size_t i = first + 1; i <= last; ++i) {
    const Int2& inc = samples_[i].increment;
    if (inc.is_identity()) continue;
    try {
      small = inc * small;
    } catch (const Error&) {
      acc = small.to_group() * acc;
      small = inc;
    }
  }
  return small.to_group() * acc;
}

OrbitSegment flow_orbit(const ModularPoint& x, Flow direction, double t, double h, const OrbitOptions& options) {
  require(std::isfinite(t) && t > 0.0, ErrorCode::invalid_argument, "orbit duration must be positive");
  require(h > 0.0 && h <= 0.1, ErrorCode::invalid_argument, "orbit step must lie in (0, 0.1]");
  OrbitSegment seg;
  seg.start_ = x;
  seg.direction_ = direction;
  seg.duration_ = t;
  const long long n = t < 1e-12 ? 0 : static_cast<long long>(std::ceil(t / h - 1e-9));
  require(n < 2'000'000'000LL, ErrorCode::budget_exceeded, "orbit has too many steps");
  seg.step_ = n == 0 ? h : t / static_cast<double>(n);
  const Mat2 step = flow_matrix(direction, seg.step_);

  seg.samples_.reserve(static_cast<size_t>(n + 1));
  if (options.store_points) seg.points_.reserve(static_cast<size_t>(n + 1));
  Mat2 rep = x.rep();
  IntegerGroupElement deck = x.deck();
  Int2 pending = Int2::identity();
  double max_depth = x.depth();
  seg.samples_.push_back({0.0, x.depth(), Int2::identity(), 0, 0});
  if (options.store_points) seg.points_.push_back(rep);
  for (long long k = 1; k <= n; ++k) {
    Mat2 moved = step * rep;
    moved /= std::sqrt(moved.determinant());
    Reduction r = reduce_matrix(moved);
    rep = r.rep;
    const double depth = std::max(0.0, -std::log(rep.col(1).norm()));
    max_depth = std::max(max_depth, depth);
    OrbitSample s{k == n ? t : static_cast<double>(k) * seg.step_, depth, r.deck,
                  static_cast<unsigned>(seg.letters_.size()), static_cast<unsigned>(r.letters.size())};
    seg.letters_.insert(seg.letters_.end(), r.letters.begin(), r.letters.end());
    seg.samples_.push_back(s);
    if (options.store_points) seg.points_.push_back(rep);
    if (options.track_deck && !r.deck.is_identity()) {
      try {
        pending = r.deck * pending;
      } catch (const Error&) {
        deck = pending.to_group() * deck;
        pending = r.deck;
      }
    }
  }
  if (options.track_deck) deck = pending.to_group() * deck;
  else deck = IntegerGroupElement::identity(2);
  seg.end_ = ModularPoint(rep, deck);
  seg.stats_.length = t;
  seg.stats_.max_depth = max_depth;
  return seg;
}

Int2 return_cocycle_small(const Mat2& g, const Mat2& rep) { return reduce_matrix(g * rep).deck; }

IntegerGroupElement return_cocycle(const RealGroupElement& g, const ModularPoint& x) {
  require(g.dim() == 2, ErrorCode::invalid_argument, "return cocycle needs m = 2");
  return return_cocycle_small(Mat2(g.matrix()), x.rep()).to_group();
}

std::vector<Piece> ExcursionDecomposition::alphas() const {
  std::vector<Piece> out;
  for (const auto& p : pieces)
    if (!p.cusp) out.push_back(p);
  return out;
}

std::vector<Piece> ExcursionDecomposition::omegas() const {
  std::vector<Piece> out;
  for (const auto& p : pieces)
    if (p.cusp) out.push_back(p);
  return out;
}

ExcursionDecomposition decompose_excursions(const OrbitSegment& seg, double threshold) {
  require(std::isfinite(threshold) && threshold > 0.0, ErrorCode::invalid_argument, "excursion threshold must be positive");
  require(threshold > 0.5 * seg.step(), ErrorCode::invalid_argument, "excursion threshold is below the sampling resolution");
  const auto& samples = seg.samples();
  const size_t last = samples.size() - 1;
  ExcursionDecomposition out;
  out.threshold = threshold;
  auto make = [&](size_t a, size_t b, bool cusp) {
    return Piece{a, b, samples[a].time, samples[b].time, cusp};
  };
  size_t cursor = 0;
  size_t i = 0;
  while (i <= last) {
    if (samples[i].depth < threshold) {
      ++i;
      continue;
    }
    size_t e = i;
    while (e + 1 <= last && samples[e + 1].depth >= threshold) ++e;
    const size_t a = i == 0 ? 0 : i - 1;
    const size_t b = e == last ? last : e + 1;
    if (!(a == 0 && i == 0)) out.pieces.push_back(make(cursor, a, false));
    out.pieces.push_back(make(a, b, true));
    cursor = b;
    i = e + 1;
  }
  if (out.pieces.empty() || cursor < last) out.pieces.push_back(make(cursor, last, false));
  return out;
}

DeckClassVerdict deck_class(const std::vector<Int2>& increments) {
  DeckClassVerdict v;
  bool have = false;
  Int2 nil0{0, 0, 0, 0};
  for (const Int2& inc : increments) {
    if (inc.is_identity() || inc.negated().is_identity()) continue;
    const long long tr = inc.trace();
    if (tr != 2 && tr != -2) {
      v.single_parabolic = false;
      continue;
    }
    const Int2 m = tr == 2 ? inc : inc.negated();
    Int2 nil{m.a - 1, m.b, m.c, m.d - 1};
    long long g = std::gcd(std::gcd(nil.a, nil.b), std::gcd(nil.c, nil.d));
    const long long lead = nil.a != 0 ? nil.a : (nil.b != 0 ? nil.b : (nil.c != 0 ? nil.c : nil.d));
    if (lead < 0) g = -g;
    const Int2 prim{nil.a / g, nil.b / g, nil.c / g, nil.d / g};
    if (!have) {
      nil0 = prim;
      have = true;
    } else if (!(prim == nil0)) {
      v.single_parabolic = false;
    }
    v.exponents.push_back(g);
  }
  if (have) v.parabolic = Int2{nil0.a + 1, nil0.b, nil0.c, nil0.d + 1};
  const bool all_pos = std::all_of(v.exponents.begin(), v.exponents.end(), [](long long e) { return e > 0; });
  const bool all_neg = std::all_of(v.exponents.begin(), v.exponents.end(), [](long long e) { return e < 0; });
  v.monotone = all_pos || all_neg;
  return v;
}

DeckClassVerdict excursion_deck_class(const OrbitSegment& seg, const Piece& piece) {
  std::vector<Int2> incs;
  for (size_t i = piece.first + 1; i <= piece.last; ++i) incs.push_back(seg.samples()[i].increment);
  return deck_class(incs);
}

ChiStats chi_stats(const std::vector<OrbitSegment>& segments, const SegmentCocycle& cocycle, double thick_depth) {
  ChiStats out;
  double sup = 0.0;
  bool first = true;
  for (const auto& seg : segments) {
    require(seg.samples().front().depth <= thick_depth && seg.samples().back().depth <= thick_depth,
            ErrorCode::precondition_failed, "orbit segment endpoints must lie in the thick part");
    ChiRow row;
    row.length = seg.duration();
    row.growth = cocycle(seg);
    row.ratio = row.growth / row.length;
    sup = first ? row.ratio : std::max(sup, row.ratio);
    first = false;
    row.running_sup = sup;
    out.rows.push_back(row);
  }
  out.chi_max = sup;
  return out;
}

long long count_lattice_ball(double radius) {
  require(radius >= 0.0 && radius <= 20.0, ErrorCode::invalid_argument, "ball radius must lie in [0, 20]");
  const long double bound = 2.0L * std::cosh(static_cast<long double>(radius));
  const auto limit = static_cast<long long>(std::floor(bound + 1e-9L));
  const auto amax = static_cast<long long>(std::floor(std::sqrt(static_cast<long double>(limit))));
  long long count = 0;
  for (long long a = -amax; a <= amax; ++a) {
    for (long long c = -amax; c <= amax; ++c) {
      const long long ac = a * a + c * c;
      if (ac == 0 || ac > limit || std::gcd(a, c) != 1) continue;
      // Particular solution of a d0 - c b0 = 1 via extended Euclid on (a, -c).
      long long old_r = a, r = -c, old_s = 1, s = 0, old_t = 0, t = 1;
      while (r != 0) {
        const long long q = old_r / r;
        std::tie(old_r, r) = std::make_pair(r, old_r - q * r);
        std::tie(old_s, s) = std::make_pair(s, old_s - q * s);
        std::tie(old_t, t) = std::make_pair(t, old_t - q * t);
      }
      // old_s * a + old_t * (-c) = old_r = +-1
      long long d0 = old_s * old_r;
      long long b0 = old_t * old_r;
      const long long rem = limit - ac;
      // (b0 + k a)^2 + (d0 + k c)^2 <= rem
      const long double qa = static_cast<long double>(ac);
      const long double qb = 2.0L * static_cast<long double>(a * b0 + c * d0);
      const long double qc = static_cast<long double>(b0 * b0 + d0 * d0 - rem);
      const long double disc = qb * qb - 4.0L * qa * qc;
      if (disc < 0) continue;
      const long double sq = std::sqrt(disc);
      auto lo = static_cast<long long>(std::floor((-qb - sq) / (2.0L * qa))) - 1;
      auto hi = static_cast<long long>(std::ceil((-qb + sq) / (2.0L * qa))) + 1;
      for (long long k = lo; k <= hi; ++k) {
        const long long b = b0 + k * a;
        const long long d = d0 + k * c;
        if (b * b + d * d <= rem) ++count;
      }
    }
  }
  return count;
}

double hyperbolic_ball_volume(double radius) { return 4.0 * std::numbers::pi * (std::cosh(radius) - 1.0); }

void write_orbit_csv(std::ostream& out, const OrbitSegment& seg, const std::string& experiment, unsigned long long seed) {
  const double thick = default_thick_depth();
  out << "experiment,seed,sample,time,depth,deck_i,deck_j,deck_k,flags\n";
  const auto& samples = seg.samples();
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    std::string di, dj, dk;
    for (unsigned l = 0; l < s.letter_count; ++l) {
      const Letter& let = seg.letters()[s.letter_offset + l];
      const char* sep = l == 0 ? "" : ";";
      di += sep + std::to_string(let.i);
      dj += sep + std::to_string(let.j);
      dk += sep + std::to_string(let.k);
    }
    out << experiment << ',' << seed << ',' << i << ',' << s.time << ',' << s.depth << ',' << di << ',' << dj << ',' << dk
        << ',' << (s.depth > thick ? "cusp" : "thick") << '\n';
  }
}

}  // namespace cuspflow::modular
