#include "cuspflow/grouplin.hpp"

#include "cuspflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cuspflow {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::precondition_failed: return "precondition-failed";
    case ErrorCode::budget_exceeded: return "budget-exceeded";
    case ErrorCode::iteration_cap_exceeded: return "iteration-cap-exceeded";
    case ErrorCode::ill_conditioned: return "ill-conditioned";
    case ErrorCode::non_finite: return "non-finite";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::schema_mismatch: return "schema-mismatch";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

namespace grouplin {

namespace {

void check_index(int m, int i, const char* what) {
  require(i >= 1 && i <= m, ErrorCode::invalid_argument,
          std::string(what) + " index " + std::to_string(i) + " outside 1.." + std::to_string(m));
}

Mat renormalized(const Mat& a) {
  const int m = static_cast<int>(a.rows());
  const double det = a.determinant();
  require(std::isfinite(det), ErrorCode::non_finite, "group element has non-finite determinant");
  require(det > 0.0, ErrorCode::invalid_argument, "group element needs positive determinant, got " + std::to_string(det));
  return a / std::pow(det, 1.0 / m);
}

}  // namespace

// ---------------------------------------------------------------------------
// RealGroupElement

RealGroupElement RealGroupElement::identity(int m) {
  require(m >= 2, ErrorCode::invalid_argument, "dimension must be at least 2");
  return from_unimodular(Mat::Identity(m, m));
}

RealGroupElement RealGroupElement::from_matrix(const Mat& entries) {
  require(entries.rows() == entries.cols() && entries.rows() >= 2, ErrorCode::invalid_argument,
          "group element must be square of size >= 2");
  require(entries.allFinite(), ErrorCode::non_finite, "group element has non-finite entries");
  RealGroupElement g;
  g.entries_ = renormalized(entries);
  return g;
}

RealGroupElement RealGroupElement::from_unimodular(const Mat& entries) {
  RealGroupElement g;
  g.entries_ = entries;
  return g;
}

RealGroupElement RealGroupElement::inverse() const {
  RealGroupElement g;
  if (dim() == 2) {
    Mat inv(2, 2);
    inv << entries_(1, 1), -entries_(0, 1), -entries_(1, 0), entries_(0, 0);
    g.entries_ = inv;
  } else {
    g.entries_ = entries_.partialPivLu().inverse();
  }
  return g;
}

RealGroupElement RealGroupElement::operator*(const RealGroupElement& rhs) const {
  require(dim() == rhs.dim(), ErrorCode::invalid_argument, "dimension mismatch in product");
  RealGroupElement g;
  g.entries_ = entries_ * rhs.entries_;
  g.products_since_renorm_ = std::max(products_since_renorm_, rhs.products_since_renorm_) + 1;
  if (g.products_since_renorm_ >= kRenormalizeEvery) {
    g.entries_ = renormalized(g.entries_);
    g.products_since_renorm_ = 0;
  }
  return g;
}

// ---------------------------------------------------------------------------
// IntegerGroupElement

mpz_class determinant(int m, const std::vector<mpz_class>& a_in) {
  std::vector<mpz_class> a = a_in;
  auto at = [&](int r, int c) -> mpz_class& { return a[static_cast<size_t>(r * m + c)]; };
  mpz_class prev = 1;
  int sign = 1;
  for (int k = 0; k < m - 1; ++k) {
    if (at(k, k) == 0) {
      int swap_row = -1;
      for (int r = k + 1; r < m; ++r)
        if (at(r, k) != 0) {
          swap_row = r;
          break;
        }
      if (swap_row < 0) return 0;
      for (int c = 0; c < m; ++c) std::swap(at(k, c), at(swap_row, c));
      sign = -sign;
    }
    for (int i = k + 1; i < m; ++i)
      for (int j = k + 1; j < m; ++j) {
        at(i, j) = at(i, j) * at(k, k) - at(i, k) * at(k, j);
        mpz_divexact(at(i, j).get_mpz_t(), at(i, j).get_mpz_t(), prev.get_mpz_t());
      }
    prev = at(k, k);
  }
  return sign * at(m - 1, m - 1);
}

IntegerGroupElement IntegerGroupElement::identity(int m) {
  require(m >= 2, ErrorCode::invalid_argument, "dimension must be at least 2");
  std::vector<mpz_class> e(static_cast<size_t>(m * m), 0);
  for (int i = 0; i < m; ++i) e[static_cast<size_t>(i * m + i)] = 1;
  return IntegerGroupElement(m, std::move(e));
}

IntegerGroupElement IntegerGroupElement::from_entries(int m, std::vector<mpz_class> entries) {
  require(m >= 2 && entries.size() == static_cast<size_t>(m * m), ErrorCode::invalid_argument,
          "integer element needs m*m entries");
  require(determinant(m, entries) == 1, ErrorCode::invalid_argument, "integer element must have determinant 1");
  return IntegerGroupElement(m, std::move(entries));
}

IntegerGroupElement IntegerGroupElement::from_int64(int m, const std::vector<long long>& row_major) {
  std::vector<mpz_class> e;
  e.reserve(row_major.size());
  for (long long v : row_major) e.emplace_back(static_cast<long>(v));
  return from_entries(m, std::move(e));
}

IntegerGroupElement IntegerGroupElement::operator*(const IntegerGroupElement& rhs) const {
  require(m_ == rhs.m_, ErrorCode::invalid_argument, "dimension mismatch in product");
  std::vector<mpz_class> out(static_cast<size_t>(m_ * m_), 0);
  mpz_class acc;
  for (int r = 0; r < m_; ++r)
    for (int c = 0; c < m_; ++c) {
      acc = 0;
      for (int k = 0; k < m_; ++k) {
        const mpz_class& x = at(r, k);
        if (x == 0) continue;
        mpz_addmul(acc.get_mpz_t(), x.get_mpz_t(), rhs.at(k, c).get_mpz_t());
      }
      out[static_cast<size_t>(r * m_ + c)] = acc;
    }
  return IntegerGroupElement(m_, std::move(out));
}

IntegerGroupElement IntegerGroupElement::inverse() const {
  if (m_ == 2) {
    return IntegerGroupElement(2, {at(1, 1), -at(0, 1), -at(1, 0), at(0, 0)});
  }
  // Gauss-Jordan over Q; the result is integral because det = 1.
  const int m = m_;
  std::vector<mpq_class> a(static_cast<size_t>(m * 2 * m), 0);
  auto A = [&](int r, int c) -> mpq_class& { return a[static_cast<size_t>(r * 2 * m + c)]; };
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) A(r, c) = mpq_class(at(r, c));
    A(r, m + r) = 1;
  }
  for (int col = 0; col < m; ++col) {
    int piv = col;
    while (A(piv, col) == 0) ++piv;
    if (piv != col)
      for (int c = 0; c < 2 * m; ++c) std::swap(A(piv, c), A(col, c));
    const mpq_class p = A(col, col);
    for (int c = 0; c < 2 * m; ++c) A(col, c) /= p;
    for (int r = 0; r < m; ++r) {
      if (r == col || A(r, col) == 0) continue;
      const mpq_class f = A(r, col);
      for (int c = 0; c < 2 * m; ++c) A(r, c) -= f * A(col, c);
    }
  }
  std::vector<mpz_class> out(static_cast<size_t>(m * m));
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) out[static_cast<size_t>(r * m + c)] = A(r, m + c).get_num();
  return IntegerGroupElement(m, std::move(out));
}

IntegerGroupElement IntegerGroupElement::negated() const {
  std::vector<mpz_class> out = entries_;
  for (auto& x : out) x = -x;
  return IntegerGroupElement(m_, std::move(out));
}

bool IntegerGroupElement::is_identity() const {
  for (int r = 0; r < m_; ++r)
    for (int c = 0; c < m_; ++c)
      if (at(r, c) != (r == c ? 1 : 0)) return false;
  return true;
}

Mat IntegerGroupElement::to_real() const {
  Mat out(m_, m_);
  for (int r = 0; r < m_; ++r)
    for (int c = 0; c < m_; ++c) out(r, c) = at(r, c).get_d();
  return out;
}

double IntegerGroupElement::log_max_entry() const {
  size_t bits = 0;
  for (const auto& x : entries_) bits = std::max(bits, mpz_sizeinbase(x.get_mpz_t(), 2));
  if (bits < 900) {
    double mx = 0.0;
    for (const auto& x : entries_) mx = std::max(mx, std::abs(x.get_d()));
    return std::log(mx);
  }
  const long shift = static_cast<long>(bits) - 60;
  double mx = 0.0;
  mpz_class tmp;
  for (const auto& x : entries_) {
    mpz_tdiv_q_2exp(tmp.get_mpz_t(), x.get_mpz_t(), static_cast<mp_bitcnt_t>(shift));
    mx = std::max(mx, std::abs(tmp.get_d()));
  }
  return std::log(mx) + static_cast<double>(shift) * std::log(2.0);
}

double IntegerGroupElement::log_norm() const {
  size_t bits = 0;
  for (const auto& x : entries_) bits = std::max(bits, mpz_sizeinbase(x.get_mpz_t(), 2));
  long shift = bits < 900 ? 0 : static_cast<long>(bits) - 60;
  Mat scaled(m_, m_);
  mpz_class tmp;
  for (int r = 0; r < m_; ++r)
    for (int c = 0; c < m_; ++c) {
      if (shift == 0) {
        scaled(r, c) = at(r, c).get_d();
      } else {
        mpz_tdiv_q_2exp(tmp.get_mpz_t(), at(r, c).get_mpz_t(), static_cast<mp_bitcnt_t>(shift));
        scaled(r, c) = tmp.get_d();
      }
    }
  Eigen::JacobiSVD<Mat> svd(scaled);
  return std::log(svd.singularValues()(0)) + static_cast<double>(shift) * std::log(2.0);
}

std::string IntegerGroupElement::to_string() const {
  std::ostringstream os;
  os << "[";
  for (int r = 0; r < m_; ++r) {
    os << (r ? ",[" : "[");
    for (int c = 0; c < m_; ++c) os << (c ? "," : "") << at(r, c).get_str();
    os << "]";
  }
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------------------
// Roots and Cartan data

Root::Root(int i_, int j_) : i(i_), j(j_) {
  require(i >= 1 && j >= 1, ErrorCode::invalid_argument, "root indices are 1-based");
  require(i != j, ErrorCode::invalid_argument, "root needs i != j");
}

Root simple_root(int k) { return Root(k, k + 1); }
Root highest_root(int m) { return Root(1, m); }

CartanVector::CartanVector(Vec t) : t_(std::move(t)) {
  require(t_.size() >= 2, ErrorCode::invalid_argument, "Cartan vector needs m >= 2");
  require(t_.allFinite(), ErrorCode::non_finite, "Cartan vector has non-finite entries");
  require(std::abs(t_.sum()) <= 1e-12 * std::max(1.0, t_.cwiseAbs().maxCoeff()), ErrorCode::invalid_argument,
          "Cartan vector must have zero trace");
}

IntegerGroupElement elementary(int m, int i, int j, const mpz_class& k) {
  check_index(m, i, "row");
  check_index(m, j, "column");
  require(i != j, ErrorCode::invalid_argument, "elementary matrix needs i != j");
  std::vector<mpz_class> e(static_cast<size_t>(m * m), 0);
  for (int d = 0; d < m; ++d) e[static_cast<size_t>(d * m + d)] = 1;
  e[static_cast<size_t>((i - 1) * m + (j - 1))] = k;
  return IntegerGroupElement::from_entries(m, std::move(e));
}

IntegerGroupElement elementary(int m, int i, int j, long long k) { return elementary(m, i, j, mpz_class(static_cast<long>(k))); }

RealGroupElement exp_root(int m, const Root& root, double s) {
  check_index(m, root.i, "root");
  check_index(m, root.j, "root");
  require(std::isfinite(s), ErrorCode::non_finite, "root parameter must be finite");
  Mat e = Mat::Identity(m, m);
  e(root.i - 1, root.j - 1) = s;
  return RealGroupElement::from_unimodular(e);
}

RealGroupElement cartan_element(const CartanVector& v) {
  return RealGroupElement::from_unimodular(v.values().array().exp().matrix().asDiagonal());
}

Vec a_generator_log(int m) {
  Vec v = Vec::Zero(m);
  v(0) = 0.5;
  v(1) = -0.5;
  return v;
}

Vec b_generator_log(int m) {
  Vec v = Vec::Ones(m);
  v(m - 1) = -(m - 1.0);
  return v;
}

Vec c_generator_log(int m, int k) {
  require(k >= 1 && k <= m - 3, ErrorCode::invalid_argument, "c_k exists for 1 <= k <= m-3");
  Vec v = Vec::Zero(m);
  for (int d = 0; d <= k; ++d) v(d) = 1.0;
  v(k + 1) = -(k + 1.0);
  return v;
}

RealGroupElement a_flow(int m, double t) { return cartan_element(CartanVector(a_generator_log(m) * t)); }
RealGroupElement b_flow(int m, double s) { return cartan_element(CartanVector(b_generator_log(m) * s)); }
RealGroupElement c_flow(int m, int k, double s) { return cartan_element(CartanVector(c_generator_log(m, k) * s)); }

RealGroupElement sl2_embed(int m, double a, double b, double c, double d, int i, int j) {
  check_index(m, i, "block");
  check_index(m, j, "block");
  require(i != j, ErrorCode::invalid_argument, "SL(2) block needs i != j");
  require(std::abs(a * d - b * c - 1.0) <= kDetTolerance * std::max(1.0, std::abs(a * d) + std::abs(b * c)), ErrorCode::invalid_argument,
          "SL(2) block must have ad - bc = 1");
  Mat e = Mat::Identity(m, m);
  e(i - 1, i - 1) = a;
  e(i - 1, j - 1) = b;
  e(j - 1, i - 1) = c;
  e(j - 1, j - 1) = d;
  return RealGroupElement::from_unimodular(e);
}

RealGroupElement rotation(int m, int i, int j, double theta) {
  return sl2_embed(m, std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta), i, j);
}

// ---------------------------------------------------------------------------
// Distance

Vec log_singular_values(const RealGroupElement& g) {
  const int m = g.dim();
  Eigen::JacobiSVD<Mat> svd_g(g.matrix());
  Eigen::JacobiSVD<Mat> svd_inv(g.inverse().matrix());
  const Vec& s = svd_g.singularValues();
  const Vec& t = svd_inv.singularValues();
  Vec out(m);
  for (int i = 0; i < m; ++i) {
    // sigma_i(g) = 1 / sigma_{m-1-i}(g^{-1}); use whichever side is >= 1.
    out(i) = s(i) >= 1.0 ? std::log(s(i)) : -std::log(t(m - 1 - i));
  }
  return out;
}

double symmetric_distance(const RealGroupElement& g) { return std::sqrt(2.0) * log_singular_values(g).norm(); }

double symmetric_distance(const RealGroupElement& g, const RealGroupElement& h) { return symmetric_distance(g * h.inverse()); }

NormConorm norm_conorm(const RealGroupElement& g) {
  const Vec ls = log_singular_values(g);
  return {std::exp(ls(0)), std::exp(ls(ls.size() - 1))};
}

}  // namespace grouplin
}  // namespace cuspflow
