#include "cuspflow/sumsets.hpp"

#include "cuspflow/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>

namespace cuspflow::sumsets {

namespace {

constexpr uint32_t kSetFormatVersion = 1;
constexpr std::array<char, 4> kSetMagic{'C', 'F', 'S', 'S'};
constexpr long long kDilationBudget = 100'000;

// Square bitset grid over B_R, one row per first coordinate.
class Grid {
 public:
  explicit Grid(int radius)
      : r_(radius), side_(2 * radius + 1), words_((side_ + 63) / 64), bits_(static_cast<size_t>(side_) * words_, 0) {}

  int radius() const { return r_; }
  bool test(const Point& p) const {
    if (std::abs(p.a) > r_ || std::abs(p.b) > r_) return false;
    const int c = p.b + r_;
    return (row(p.a + r_)[c / 64] >> (c % 64)) & 1U;
  }
  void set(const Point& p) {
    const int c = p.b + r_;
    row(p.a + r_)[c / 64] |= uint64_t{1} << (c % 64);
  }

  // this | (this + shift), truncated to the grid.
  void or_shifted(const Grid& src, const Point& shift) {
    for (int r = 0; r < side_; ++r) {
      const int dest = r + shift.a;
      if (dest < 0 || dest >= side_) continue;
      shift_row_into(src.row(r), row(dest), shift.b);
    }
  }

  Grid dilate(const std::vector<Point>& summands) const {
    Grid out = *this;
    for (const auto& s : summands) out.or_shifted(*this, s);
    return out;
  }

  bool operator==(const Grid&) const = default;

  // Inclusive 2D prefix counts, (side + 1)^2 with a zero border.
  std::vector<int> prefix() const {
    const size_t w = static_cast<size_t>(side_) + 1;
    std::vector<int> p(w * w, 0);
    for (int r = 0; r < side_; ++r)
      for (int c = 0; c < side_; ++c) {
        const int bit = (row(r)[c / 64] >> (c % 64)) & 1U;
        p[(r + 1) * w + c + 1] = bit + p[r * w + c + 1] + p[(r + 1) * w + c] - p[r * w + c];
      }
    return p;
  }

  // Does the box [center - h, center + h] meet the set? Uses prefix().
  bool box_hits(const std::vector<int>& pre, const Point& center, long long h) const {
    const size_t w = static_cast<size_t>(side_) + 1;
    const auto clip = [&](long long v) { return static_cast<int>(std::clamp<long long>(v + r_, 0, side_ - 1)); };
    const long long lo_a = center.a - h, hi_a = center.a + h, lo_b = center.b - h, hi_b = center.b + h;
    if (hi_a < -r_ || lo_a > r_ || hi_b < -r_ || lo_b > r_) return false;
    const int r0 = clip(lo_a), r1 = clip(hi_a) + 1, c0 = clip(lo_b), c1 = clip(hi_b) + 1;
    return pre[r1 * w + c1] - pre[r0 * w + c1] - pre[r1 * w + c0] + pre[r0 * w + c0] > 0;
  }

 private:
  uint64_t* row(int r) { return bits_.data() + static_cast<size_t>(r) * words_; }
  const uint64_t* row(int r) const { return bits_.data() + static_cast<size_t>(r) * words_; }

  // dest |= src shifted by `by` columns (towards larger columns when positive).
  void shift_row_into(const uint64_t* src, uint64_t* dest, int by) const {
    const int wshift = (by >= 0 ? by : -by) / 64;
    const int bshift = (by >= 0 ? by : -by) % 64;
    if (by >= 0) {
      for (int w = words_ - 1; w >= wshift; --w) {
        uint64_t v = src[w - wshift] << bshift;
        if (bshift != 0 && w - wshift - 1 >= 0) v |= src[w - wshift - 1] >> (64 - bshift);
        dest[w] |= v;
      }
    } else {
      for (int w = 0; w + wshift < words_; ++w) {
        uint64_t v = src[w + wshift] >> bshift;
        if (bshift != 0 && w + wshift + 1 < words_) v |= src[w + wshift + 1] << (64 - bshift);
        dest[w] |= v;
      }
    }
    const int tail = side_ % 64;
    if (tail != 0) dest[words_ - 1] &= (uint64_t{1} << tail) - 1;
  }

  int r_;
  int side_;
  int words_;
  std::vector<uint64_t> bits_;
};

// Radius on which truncated dilation is exact over B_{n+N}. Reordering the
// summands of any sum landing in B_{n+N} keeps every partial sum within
// (n + N) + 2 (2n + N) of the origin (Steinitz bound in the plane).
int exact_radius(int n, long long big_n) {
  const long long r = 5LL * n + 3 * big_n;
  require(r < (1 << 15), ErrorCode::budget_exceeded, "dilation grid too large");
  return static_cast<int>(r);
}

// Dilation rounds until B_n is inside F + reach or the reach stops growing.
struct Dilation {
  std::vector<Grid> levels;  // levels[j] = sums of at most j elements
  bool covered = false;
  std::optional<Point> witness;
};

std::optional<Point> first_uncovered(const Grid& reach, int n, long long f_radius) {
  const auto pre = reach.prefix();
  for (int a = -n; a <= n; ++a)
    for (int b = -n; b <= n; ++b)
      if (!reach.box_hits(pre, {a, b}, f_radius)) return Point{a, b};
  return std::nullopt;
}

Dilation dilate_until_covered(const SymmetricSet& s, long long f_radius, long long k_cap, bool keep_levels) {
  const int n = s.radius();
  const std::vector<Point> summands = s.points();
  Grid reach(exact_radius(n, f_radius));
  reach.set({0, 0});
  Dilation out;
  if (keep_levels) out.levels.push_back(reach);
  for (long long k = 1; k <= k_cap; ++k) {
    Grid next = reach.dilate(summands);
    const bool stalled = next == reach;
    reach = std::move(next);
    if (keep_levels) out.levels.push_back(reach);
    out.witness = first_uncovered(reach, n, f_radius);
    if (!out.witness) {
      out.covered = true;
      return out;
    }
    if (stalled) break;
  }
  if (!keep_levels) out.levels.push_back(std::move(reach));
  return out;
}

Certificate backtrack(const std::vector<Grid>& levels, const std::vector<Point>& summands, const Point& target, long long f_radius) {
  const Grid& top = levels.back();
  Certificate cert{target, {}, {}};
  std::optional<Point> q;
  for (long long da = -f_radius; da <= f_radius && !q; ++da)
    for (long long db = -f_radius; db <= f_radius && !q; ++db) {
      const Point f{static_cast<int>(da), static_cast<int>(db)};
      if (top.test(target - f)) {
        cert.f = f;
        q = target - f;
      }
    }
  require(q.has_value(), ErrorCode::precondition_failed, "point is not covered");
  Point cur = *q;
  for (size_t j = levels.size() - 1; j > 0; --j) {
    if (levels[j - 1].test(cur)) continue;
    bool found = false;
    for (const auto& s : summands)
      if (levels[j - 1].test(cur - s)) {
        cert.summands.push_back(s);
        cur = cur - s;
        found = true;
        break;
      }
    require(found, ErrorCode::precondition_failed, "dilation levels are inconsistent");
  }
  require(cur == Point{}, ErrorCode::precondition_failed, "certificate does not reach the origin");
  return cert;
}

void write_u32(std::ostream& out, uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}

uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  require(static_cast<bool>(in), ErrorCode::parse_error, "truncated set stream");
  return uint32_t{b[0]} | (uint32_t{b[1]} << 8) | (uint32_t{b[2]} << 16) | (uint32_t{b[3]} << 24);
}

}  // namespace

CoverConstants cover_constants(double delta) {
  require(delta > 0.0 && delta < 1.0, ErrorCode::invalid_argument, "delta must lie in (0, 1)");
  int M = 1;
  while (!(1.0 / M < delta)) ++M;
  require(M <= 19, ErrorCode::budget_exceeded, "delta too small: (M + 1)! overflows");
  long long N = 1;
  for (int i = 2; i <= M + 1; ++i) N *= i;
  return {M, N, 4 * N, LatticeBall{static_cast<int>(std::min<long long>(N, 1LL << 30))}};
}

SymmetricSet::SymmetricSet(int n) : n_(n) {
  require(n >= 0 && n <= 4096, ErrorCode::invalid_argument, "set radius must lie in [0, 4096]");
  bits_.assign(static_cast<size_t>(LatticeBall{n}.size()), false);
}

SymmetricSet SymmetricSet::full(int n) {
  SymmetricSet s(n);
  std::fill(s.bits_.begin(), s.bits_.end(), true);
  return s;
}

SymmetricSet SymmetricSet::from_points(int n, const std::vector<Point>& points) {
  SymmetricSet s(n);
  for (const auto& p : points) {
    require(LatticeBall{n}.contains(p), ErrorCode::invalid_argument, "point outside B_n");
    s.bits_[s.index(p)] = true;
  }
  for (const auto& p : points)
    require(s.contains(-p), ErrorCode::invalid_argument, "set is not closed under negation");
  return s;
}

SymmetricSet SymmetricSet::random(int n, double p, CounterRng& rng) {
  require(p >= 0.0 && p <= 1.0, ErrorCode::invalid_argument, "probability must lie in [0, 1]");
  SymmetricSet s(n);
  for (int a = 0; a <= n; ++a)
    for (int b = -n; b <= n; ++b) {
      if (a == 0 && b < 0) continue;
      if (rng.uniform() < p) s.insert({a, b});
    }
  return s;
}

std::size_t SymmetricSet::index(const Point& p) const {
  return static_cast<size_t>(p.a + n_) * static_cast<size_t>(2 * n_ + 1) + static_cast<size_t>(p.b + n_);
}

bool SymmetricSet::contains(const Point& p) const { return LatticeBall{n_}.contains(p) && bits_[index(p)]; }

void SymmetricSet::insert(const Point& p) {
  require(LatticeBall{n_}.contains(p), ErrorCode::invalid_argument, "point outside B_n");
  bits_[index(p)] = true;
  bits_[index(-p)] = true;
}

void SymmetricSet::erase(const Point& p) {
  if (!LatticeBall{n_}.contains(p)) return;
  bits_[index(p)] = false;
  bits_[index(-p)] = false;
}

std::size_t SymmetricSet::count() const { return static_cast<size_t>(std::count(bits_.begin(), bits_.end(), true)); }

std::vector<Point> SymmetricSet::points() const {
  std::vector<Point> out;
  for (int a = -n_; a <= n_; ++a)
    for (int b = -n_; b <= n_; ++b)
      if (bits_[index({a, b})]) out.push_back({a, b});
  return out;
}

CoverResult verify_cover(const SymmetricSet& s, double delta) {
  const CoverConstants cc = cover_constants(delta);
  require(static_cast<long long>(s.radius()) * cc.k <= kDilationBudget, ErrorCode::budget_exceeded,
          "n * k_delta exceeds the dilation budget of 1e5");
  require(static_cast<double>(s.count()) > delta * static_cast<double>(LatticeBall{s.radius()}.size()),
          ErrorCode::precondition_failed, "set density must exceed delta");
  const Dilation d = dilate_until_covered(s, cc.N, cc.k, false);
  return {d.covered, d.covered ? std::nullopt : d.witness, static_cast<long long>(d.levels.size())};
}

std::optional<long long> minimal_k_oracle(const SymmetricSet& s, const LatticeBall& f, long long k_cap) {
  require(k_cap >= 1, ErrorCode::invalid_argument, "k cap must be positive");
  const Dilation d = dilate_until_covered(s, f.n, k_cap, true);
  if (!d.covered) return std::nullopt;
  return static_cast<long long>(d.levels.size()) - 1;
}

std::vector<Certificate> cover_certificates(const SymmetricSet& s, const LatticeBall& f, long long k_cap) {
  const Dilation d = dilate_until_covered(s, f.n, k_cap, true);
  require(d.covered, ErrorCode::precondition_failed, "B_n is not covered within the k cap");
  const auto summands = s.points();
  std::vector<Certificate> out;
  const int n = s.radius();
  out.reserve(static_cast<size_t>(LatticeBall{n}.size()));
  for (int a = -n; a <= n; ++a)
    for (int b = -n; b <= n; ++b) out.push_back(backtrack(d.levels, summands, {a, b}, f.n));
  return out;
}

std::optional<ClassPair> class_pair(const SymmetricSet& s, const Point& v, int M) {
  require(M >= 1 && !(v == Point{}), ErrorCode::invalid_argument, "need M >= 1 and v != 0");
  for (const auto& a : s.points())
    for (int i = 1; i <= M; ++i) {
      const Point b{a.a + i * v.a, a.b + i * v.b};
      if (s.contains(b)) return ClassPair{a, b, i};
    }
  return std::nullopt;
}

bool class_pair_forced(const SymmetricSet& s, const Point& v, int M) {
  const long long side_a = 2LL * s.radius() + 1 + static_cast<long long>(M) * std::abs(v.a);
  const long long side_b = 2LL * s.radius() + 1 + static_cast<long long>(M) * std::abs(v.b);
  return static_cast<long long>(M + 1) * static_cast<long long>(s.count()) > side_a * side_b;
}

SubadditivityCheck check_subadditive(const CostFunction& h, int r, double tolerance) {
  SubadditivityCheck out;
  for (int a1 = -r; a1 <= r; ++a1)
    for (int b1 = -r; b1 <= r; ++b1) {
      const Point u{a1, b1};
      const double hu = h(u);
      if (std::fabs(hu - h(-u)) > tolerance) ++out.asymmetric;
      for (int a2 = std::max(-r, -r - a1); a2 <= std::min(r, r - a1); ++a2)
        for (int b2 = std::max(-r, -r - b1); b2 <= std::min(r, r - b1); ++b2) {
          const Point v{a2, b2};
          const double excess = h(u + v) - hu - h(v);
          ++out.pairs;
          if (excess > tolerance) {
            ++out.violations;
            out.worst_excess = std::max(out.worst_excess, excess);
          }
        }
    }
  return out;
}

PropagationReport good_set_propagation(const CostFunction& h, int n, double eps, double delta, std::optional<LatticeBall> f) {
  require(n >= 2 && eps >= 0.0, ErrorCode::invalid_argument, "need n >= 2 and eps >= 0");
  PropagationReport rep;
  rep.n = n;
  rep.eps = eps;
  rep.delta = delta;
  rep.constants = cover_constants(delta);
  rep.f = f.value_or(rep.constants.F);
  const double threshold = eps * std::log(static_cast<double>(n));

  SymmetricSet good(n);
  for (int a = -n; a <= n; ++a)
    for (int b = -n; b <= n; ++b) {
      const Point p{a, b};
      const double hp = h(p);
      require(std::fabs(hp - h(-p)) <= 1e-12 * (1.0 + std::fabs(hp)), ErrorCode::precondition_failed,
              "cost function is not symmetric");
      if (hp <= threshold) good.insert(p);
    }
  rep.good_density = good.density();
  require(rep.good_density > delta, ErrorCode::precondition_failed,
          "good-set density " + std::to_string(rep.good_density) + " does not exceed " + std::to_string(delta));
  require(static_cast<long long>(n) * rep.constants.k <= kDilationBudget, ErrorCode::budget_exceeded,
          "n * k_delta exceeds the dilation budget of 1e5");

  for (int a = -rep.f.n; a <= rep.f.n; ++a)
    for (int b = -rep.f.n; b <= rep.f.n; ++b) rep.max_cost_over_f = std::max(rep.max_cost_over_f, h({a, b}));

  const auto certs = cover_certificates(good, rep.f, rep.constants.k);
  for (const auto& c : certs) rep.k_max = std::max<long long>(rep.k_max, static_cast<long long>(c.summands.size()));
  rep.bound = threshold * static_cast<double>(rep.k_max) + rep.max_cost_over_f;
  rep.rows.reserve(certs.size());
  for (const auto& c : certs) {
    PropagationRow row{c, h(c.target), h(c.f)};
    for (const auto& s : c.summands) row.certified_cost += h(s);
    if (row.certified_cost > rep.bound * (1.0 + 1e-12) + 1e-12) ++rep.bound_failures;
    if (row.cost > row.certified_cost * (1.0 + 1e-12) + 1e-12) ++rep.chain_failures;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

void write_set(std::ostream& out, const SymmetricSet& s) {
  const int n = s.radius();
  std::vector<uint32_t> runs;
  bool state = false;
  uint32_t run = 0;
  for (int a = -n; a <= n; ++a)
    for (int b = -n; b <= n; ++b) {
      const bool bit = s.contains({a, b});
      if (bit != state) {
        runs.push_back(run);
        run = 0;
        state = bit;
      }
      ++run;
    }
  runs.push_back(run);
  out.write(kSetMagic.data(), 4);
  write_u32(out, kSetFormatVersion);
  write_u32(out, static_cast<uint32_t>(n));
  write_u32(out, static_cast<uint32_t>(runs.size()));
  for (const auto r : runs) write_u32(out, r);
  require(static_cast<bool>(out), ErrorCode::io_error, "failed to write set");
}

SymmetricSet read_set(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  require(static_cast<bool>(in) && magic == kSetMagic, ErrorCode::parse_error, "bad set magic");
  const uint32_t version = read_u32(in);
  require(version == kSetFormatVersion, ErrorCode::schema_mismatch, "unsupported set encoding version");
  const uint32_t n = read_u32(in);
  const uint32_t count = read_u32(in);
  require(n <= 4096, ErrorCode::parse_error, "set radius out of range");
  const uint64_t total = static_cast<uint64_t>(LatticeBall{static_cast<int>(n)}.size());
  std::vector<Point> points;
  uint64_t pos = 0;
  bool state = false;
  for (uint32_t r = 0; r < count; ++r) {
    const uint32_t len = read_u32(in);
    require(pos + len <= total, ErrorCode::parse_error, "runs overflow the ball");
    if (state)
      for (uint64_t q = pos; q < pos + len; ++q)
        points.push_back({static_cast<int>(q / (2 * n + 1)) - static_cast<int>(n), static_cast<int>(q % (2 * n + 1)) - static_cast<int>(n)});
    pos += len;
    state = !state;
  }
  require(pos == total, ErrorCode::parse_error, "runs do not cover the ball");
  return SymmetricSet::from_points(static_cast<int>(n), points);
}

}  // namespace cuspflow::sumsets
