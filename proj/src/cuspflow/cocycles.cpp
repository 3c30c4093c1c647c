#include "cuspflow/cocycles.hpp"

#include "cuspflow/error.hpp"
#include "cuspflow/lattices.hpp"
#include "cuspflow/parallel.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace cuspflow::cocycles {

namespace {

Vec log_diagonal(const Mat& g) {
  const int m = static_cast<int>(g.rows());
  const double scale = g.cwiseAbs().maxCoeff();
  Vec v(m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c)
      if (r != c)
        require(std::fabs(g(r, c)) <= 1e-12 * scale, ErrorCode::invalid_argument,
                "generator cocycles are defined on diagonal elements only");
    require(g(r, r) > 0.0, ErrorCode::invalid_argument, "diagonal entries must be positive");
    v(r) = std::log(g(r, r));
  }
  return v;
}

Mat rotation2(double theta) {
  Mat r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

}  // namespace

Mat reduce_point(const Mat& gx) {
  if (gx.rows() == 2) return modular::reduce_matrix(modular::Mat2(gx)).rep;
  return lattices::lll_reduce(gx).reduced;
}

Mat TemperedCocycle::act(const Mat& g, const Mat& x) const { return reduce_point(g * x); }

GeneratorCocycle::GeneratorCocycle(std::vector<Vec> generators, std::vector<Mat> fiber, bool twisted, std::string name)
    : generators_(std::move(generators)), fiber_(std::move(fiber)), twisted_(twisted), name_(std::move(name)) {
  require(!generators_.empty() && generators_.size() == fiber_.size(), ErrorCode::invalid_argument,
          "need one fiber matrix per generator");
  const int d = static_cast<int>(fiber_.front().rows());
  require(d >= 1 && d <= 6, ErrorCode::invalid_argument, "fiber dimension must lie in [1, 6]");
  for (const auto& f : fiber_) require(f.rows() == d && f.cols() == d, ErrorCode::invalid_argument, "fiber matrices must be d x d");
  for (size_t i = 0; i < fiber_.size(); ++i)
    for (size_t j = i + 1; j < fiber_.size(); ++j)
      require((fiber_[i] * fiber_[j] - fiber_[j] * fiber_[i]).norm() <= 1e-12, ErrorCode::invalid_argument,
              "fiber generators must commute");
  require(!twisted_ || d >= 2, ErrorCode::invalid_argument, "twist needs fiber dimension >= 2");
}

Mat GeneratorCocycle::core(const Mat& g) const {
  const Vec v = log_diagonal(g);
  require(v.size() == generators_.front().size(), ErrorCode::invalid_argument, "group element has the wrong dimension");
  Mat l = Mat::Zero(fiber_.front().rows(), fiber_.front().cols());
  for (size_t k = 0; k < generators_.size(); ++k) {
    const double coeff = v.dot(generators_[k]) / generators_[k].squaredNorm();
    l += coeff * fiber_[k];
  }
  return l.exp();
}

Mat GeneratorCocycle::twist(const Mat& x) const {
  const int d = static_cast<int>(fiber_.front().rows());
  Mat p = Mat::Identity(d, d);
  if (!twisted_) return p;
  const double theta = std::tanh(x(0, 0) + 0.3 * x(1, 0));
  Mat shear = Mat::Identity(2, 2);
  shear(0, 1) = 0.5 * std::sin(3.0 * theta);
  p.topLeftCorner(2, 2) = rotation2(theta) * shear;
  return p;
}

Mat GeneratorCocycle::eval(const Mat& g, const Mat& x) const { return step(g, x).first; }

std::pair<Mat, Mat> GeneratorCocycle::step(const Mat& g, const Mat& x) const {
  Mat gx = act(g, x);
  Mat a = core(g);
  if (twisted_) a = twist(gx) * a * twist(x).inverse();
  return {std::move(a), std::move(gx)};
}

std::unique_ptr<GeneratorCocycle> diagonal_test_cocycle(int m, const std::vector<Vec>& generators,
                                                        const std::vector<std::vector<double>>& rates, bool twisted) {
  require(generators.size() == rates.size() && !rates.empty(), ErrorCode::invalid_argument, "need rates for every generator");
  const size_t d = rates.front().size();
  std::vector<Mat> fiber;
  for (const auto& r : rates) {
    require(r.size() == d, ErrorCode::invalid_argument, "all rate vectors need the fiber dimension");
    Vec diag(static_cast<long>(d));
    for (size_t i = 0; i < d; ++i) diag(static_cast<long>(i)) = r[i];
    fiber.push_back(diag.asDiagonal());
  }
  for (const auto& g : generators) require(g.size() == m, ErrorCode::invalid_argument, "generator has the wrong dimension");
  return std::make_unique<GeneratorCocycle>(generators, std::move(fiber), twisted, twisted ? "diagonal-twisted" : "diagonal");
}

std::unique_ptr<GeneratorCocycle> constant_cocycle(int m, const std::vector<Vec>& generators, int generator_index,
                                                   const Mat& spd) {
  require(generator_index >= 0 && generator_index < static_cast<int>(generators.size()), ErrorCode::invalid_argument,
          "generator index out of range");
  require((spd - spd.transpose()).norm() <= 1e-12, ErrorCode::invalid_argument, "matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(spd);
  require(eig.eigenvalues().minCoeff() > 0.0, ErrorCode::invalid_argument, "matrix must be positive definite");
  const Mat log_m = eig.eigenvectors() * eig.eigenvalues().array().log().matrix().asDiagonal() * eig.eigenvectors().transpose();
  std::vector<Mat> fiber(generators.size(), Mat::Zero(spd.rows(), spd.cols()));
  fiber[static_cast<size_t>(generator_index)] = log_m;
  for (const auto& g : generators) require(g.size() == m, ErrorCode::invalid_argument, "generator has the wrong dimension");
  return std::make_unique<GeneratorCocycle>(generators, std::move(fiber), false, "constant");
}

Mat ReturnCocycleLinear::eval(const Mat& g, const Mat& x) const { return step(g, x).first; }

std::pair<Mat, Mat> ReturnCocycleLinear::step(const Mat& g, const Mat& x) const {
  require(g.rows() == 2 && x.rows() == 2, ErrorCode::invalid_argument, "return cocycle lives on m = 2");
  const modular::Reduction r = modular::reduce_matrix(modular::Mat2(g * x));
  return {Mat(r.deck.to_real()), Mat(r.rep)};
}

Mat SyntheticUntempered::eval(const Mat&, const Mat& x) const {
  const double d = modular::ModularPoint(modular::reduce_matrix(modular::Mat2(x)).rep, {}).depth();
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = std::exp(d * d);
  a(1, 1) = std::exp(-d * d);
  return a;
}

double operator_norm(const Mat& a) {
  if (a.rows() == 2 && a.cols() == 2) {
    const double f2 = a.squaredNorm();
    const double det = a.determinant();
    const double disc = std::sqrt(std::max(0.0, f2 * f2 - 4.0 * det * det));
    return std::sqrt(0.5 * (f2 + disc));
  }
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

double ProductResult::log_norm() const {
  long double s = 0.0L;
  for (double v : ledger) s += v;
  return static_cast<double>(s);
}

ProductResult cocycle_product(const TemperedCocycle& a, const std::vector<Mat>& path, const Mat& x) {
  ProductResult out;
  out.normalized = Mat::Identity(a.fiber_dim(), a.fiber_dim());
  out.end_point = x;
  out.ledger.reserve(path.size());
  for (const Mat& g : path) {
    auto [step, next] = a.step(g, out.end_point);
    out.normalized = step * out.normalized;
    const double nu = operator_norm(out.normalized);
    require(std::isfinite(nu) && nu > 0.0, ErrorCode::non_finite, "cocycle product became non-finite or singular");
    out.normalized /= nu;
    out.ledger.push_back(std::log(nu));
    out.end_point = std::move(next);
  }
  return out;
}

grouplin::IntegerGroupElement return_product_exact(const std::vector<Mat>& path, const Mat& x) {
  grouplin::IntegerGroupElement acc = grouplin::IntegerGroupElement::identity(2);
  modular::Mat2 point = x;
  for (const Mat& g : path) {
    const modular::Reduction r = modular::reduce_matrix(modular::Mat2(g) * point);
    if (!r.deck.is_identity()) acc = r.deck.to_group() * acc;
    point = r.rep;
  }
  return acc;
}

namespace {

struct PathLog {
  std::vector<double> cumulative;   // log||A(n, x)|| for n = 0..N
  std::vector<double> block_norms;  // log||A(n, s^n x)|| per dyadic n
  bool finite = true;
};

PathLog run_path(const TemperedCocycle& a, const Mat& s, const Mat& x0, long long horizon, const std::vector<long long>& dyadic) {
  const int d = a.fiber_dim();
  PathLog out;
  out.cumulative.reserve(static_cast<size_t>(horizon + 1));
  out.cumulative.push_back(0.0);
  std::vector<Mat> steps;
  steps.reserve(static_cast<size_t>(horizon));
  Mat p = Mat::Identity(d, d);
  long double total = 0.0L;
  Mat x = x0;
  for (long long k = 0; k < horizon; ++k) {
    auto [step, next] = a.step(s, x);
    p = step * p;
    const double nu = operator_norm(p);
    if (!std::isfinite(nu) || nu <= 0.0) {
      out.finite = false;
      return out;
    }
    p /= nu;
    total += std::log(nu);
    out.cumulative.push_back(static_cast<double>(total));
    steps.push_back(std::move(step));
    x = std::move(next);
  }
  for (long long n : dyadic) {
    Mat q = Mat::Identity(d, d);
    long double lg = 0.0L;
    for (long long k = n; k < 2 * n; ++k) {
      q = steps[static_cast<size_t>(k)] * q;
      const double nu = operator_norm(q);
      q /= nu;
      lg += std::log(nu);
    }
    out.block_norms.push_back(static_cast<double>(lg));
  }
  return out;
}

}  // namespace

LyapunovEstimate top_lyapunov(const TemperedCocycle& a, const Mat& s, const std::vector<Mat>& starts, long long horizon,
                              int threads) {
  require(horizon >= 10, ErrorCode::invalid_argument, "Lyapunov horizon must be at least 10");
  require(!starts.empty(), ErrorCode::invalid_argument, "need at least one starting point");
  std::vector<long long> dyadic;
  for (long long n = 1; 2 * n <= horizon; n *= 2) dyadic.push_back(n);
  const std::vector<PathLog> paths =
      parallel_map<PathLog>(starts.size(), threads, [&](size_t i) { return run_path(a, s, starts[i], horizon, dyadic); });

  LyapunovEstimate est;
  est.horizon = horizon;
  est.starts = starts.size();
  for (const auto& p : paths) est.finite = est.finite && p.finite;
  if (!est.finite) {
    est.value = std::numeric_limits<double>::quiet_NaN();
    est.std_error = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  auto mean_se = [&](const std::vector<double>& v, double& mean, double& se) {
    long double s = 0.0L;
    for (double x : v) s += x;
    mean = static_cast<double>(s / v.size());
    long double q = 0.0L;
    for (double x : v) q += (x - mean) * (x - mean);
    se = v.size() > 1 ? static_cast<double>(std::sqrt(q / (v.size() - 1) / v.size())) : 0.0;
  };
  std::vector<double> rates;
  for (const auto& p : paths) rates.push_back(p.cumulative.back() / static_cast<double>(horizon));
  mean_se(rates, est.value, est.std_error);
  for (size_t k = 0; k < dyadic.size(); ++k) {
    const long long n = dyadic[k];
    std::vector<double> res;
    for (const auto& p : paths) {
      const auto nn = static_cast<size_t>(n);
      res.push_back(p.cumulative[2 * nn] - p.block_norms[k] - p.cumulative[nn]);
    }
    SubadditivityResidual r;
    r.n = n;
    r.m = n;
    mean_se(res, r.mean, r.std_error);
    r.max = *std::max_element(res.begin(), res.end());
    est.subadditivity.push_back(r);
  }
  return est;
}

TemperedFit temperedness_fit(const TemperedCocycle& a, const std::vector<TemperedSample>& samples, int threads) {
  require(samples.size() >= 10, ErrorCode::invalid_argument, "temperedness fit needs at least 10 samples");
  const std::vector<double> y = parallel_map<double>(samples.size(), threads, [&](size_t i) {
    return std::log(operator_norm(a.eval(samples[i].g, samples[i].x)));
  });
  double dmin = samples.front().depth, dmax = dmin;
  for (const auto& s : samples) {
    dmin = std::min(dmin, s.depth);
    dmax = std::max(dmax, s.depth);
  }
  const double mid = 0.5 * (dmin + dmax);
  constexpr int kBins = 8;
  std::vector<double> bin_y(kBins, -std::numeric_limits<double>::infinity());
  std::vector<double> bin_d(kBins, 0.0);
  const double width = std::max(mid - dmin, 1e-12) / kBins;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].depth > mid) continue;
    const int b = std::min(kBins - 1, static_cast<int>((samples[i].depth - dmin) / width));
    if (y[i] > bin_y[static_cast<size_t>(b)]) {
      bin_y[static_cast<size_t>(b)] = y[i];
      bin_d[static_cast<size_t>(b)] = samples[i].depth;
    }
  }
  double sx = 0, sy = 0, n = 0;
  for (int b = 0; b < kBins; ++b)
    if (std::isfinite(bin_y[static_cast<size_t>(b)])) {
      sx += bin_d[static_cast<size_t>(b)];
      sy += bin_y[static_cast<size_t>(b)];
      n += 1;
    }
  TemperedFit fit;
  if (n >= 2) {
    const double xb = sx / n, yb = sy / n;
    double sxx = 0, sxy = 0;
    for (int b = 0; b < kBins; ++b)
      if (std::isfinite(bin_y[static_cast<size_t>(b)])) {
        sxx += (bin_d[static_cast<size_t>(b)] - xb) * (bin_d[static_cast<size_t>(b)] - xb);
        sxy += (bin_d[static_cast<size_t>(b)] - xb) * (bin_y[static_cast<size_t>(b)] - yb);
      }
    fit.k = sxx > 0 ? std::max(0.0, sxy / sxx) : 0.0;
  }
  fit.log_C = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < samples.size(); ++i)
    if (samples[i].depth <= mid) fit.log_C = std::max(fit.log_C, y[i] - fit.k * samples[i].depth);
  const double slack = std::log(1.1);
  for (size_t i = 0; i < samples.size(); ++i)
    if (y[i] > fit.log_C + fit.k * samples[i].depth + slack) ++fit.violations;
  fit.samples = samples.size();
  fit.violation_rate = static_cast<double>(fit.violations) / static_cast<double>(samples.size());
  return fit;
}

Mat sample_sl2_ball(double radius, CounterRng& rng) {
  const double tau = rng.uniform(0.0, radius);
  const double th1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double th2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = std::exp(tau / 2);
  a(1, 1) = std::exp(-tau / 2);
  return rotation2(th1) * a * rotation2(th2);
}

Vec qr_exponents(const TemperedCocycle& a, const Mat& step, const Mat& x0, long long steps, double* max_condition) {
  require(steps >= 1, ErrorCode::invalid_argument, "need at least one step");
  const int d = a.fiber_dim();
  Mat q = Mat::Identity(d, d);
  Vec sums = Vec::Zero(d);
  Mat x = x0;
  double cond = 1.0;
  for (long long k = 0; k < steps; ++k) {
    auto [m, next] = a.step(step, x);
    Eigen::HouseholderQR<Mat> qr(m * q);
    const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    Mat qn = qr.householderQ();
    for (int i = 0; i < d; ++i) {
      const double rii = r(i, i);
      require(std::isfinite(rii) && rii != 0.0, ErrorCode::ill_conditioned, "QR frame collapsed");
      sums(i) += std::log(std::fabs(rii));
      if (rii < 0) qn.col(i) = -qn.col(i);
    }
    const Vec diag = r.diagonal().cwiseAbs();
    cond = std::max(cond, diag.maxCoeff() / diag.minCoeff());
    q = qn;
    x = std::move(next);
  }
  if (max_condition) *max_condition = cond;
  Vec out = sums / static_cast<double>(steps);
  std::sort(out.data(), out.data() + out.size(), std::greater<>());
  return out;
}

OseledetsReport oseledets_functionals(const TemperedCocycle& a, const FlowGenerator& g1, const FlowGenerator& g2, const Mat& x,
                                      long long steps) {
  require(a.fiber_dim() <= 6, ErrorCode::invalid_argument, "fiber dimension must be at most 6");
  require((g1.element * g2.element - g2.element * g1.element).norm() <= 1e-9, ErrorCode::precondition_failed,
          "generators must commute");
  OseledetsReport rep;
  double c1 = 1, c2 = 1, c12 = 1;
  const Vec e1 = qr_exponents(a, g1.element, x, steps, &c1);
  const Vec e2 = qr_exponents(a, g2.element, x, steps, &c2);
  const Vec e12 = qr_exponents(a, g1.element * g2.element, x, steps, &c12);
  rep.max_condition = std::max({c1, c2, c12});
  rep.ill_conditioned = rep.max_condition > 1e8;
  const std::string both = g1.name + "*" + g2.name;
  // Each spectrum is sorted on its own, so the exponents of one Oseledets
  // direction sit at different positions. Pair them by the permutations that
  // make the functionals most nearly additive.
  const int d = a.fiber_dim();
  std::vector<int> p1(static_cast<size_t>(d)), p2(static_cast<size_t>(d));
  std::iota(p1.begin(), p1.end(), 0);
  std::vector<int> best1 = p1, best2 = p1;
  double best = std::numeric_limits<double>::infinity();
  do {
    std::iota(p2.begin(), p2.end(), 0);
    do {
      double total = 0.0;
      for (int i = 0; i < d; ++i) total += std::fabs(e12(i) - e1(p1[static_cast<size_t>(i)]) - e2(p2[static_cast<size_t>(i)]));
      if (total < best) {
        best = total;
        best1 = p1;
        best2 = p2;
      }
    } while (std::next_permutation(p2.begin(), p2.end()));
  } while (std::next_permutation(p1.begin(), p1.end()));
  for (int i = 0; i < d; ++i) {
    const double v1 = e1(best1[static_cast<size_t>(i)]);
    const double v2 = e2(best2[static_cast<size_t>(i)]);
    LyapunovFunctional f;
    f.values[g1.name] = v1;
    f.values[g2.name] = v2;
    f.values[both] = e12(i);
    f.residual = std::fabs(e12(i) - v1 - v2);
    const double scale = std::max(std::fabs(e12(i)), std::fabs(v1) + std::fabs(v2));
    f.relative_residual = scale > 1e-12 ? f.residual / scale : 0.0;
    rep.functionals.push_back(f);
  }
  return rep;
}

double segment_growth_return(const modular::OrbitSegment& seg) { return seg.total_deck().log_norm(); }

double segment_growth(const TemperedCocycle& a, const modular::OrbitSegment& seg) {
  const auto& pts = seg.points();
  require(pts.size() == seg.samples().size(), ErrorCode::precondition_failed, "segment was generated without stored points");
  const Mat g = modular::flow_matrix(seg.direction(), seg.step());
  Mat p = Mat::Identity(a.fiber_dim(), a.fiber_dim());
  long double lg = 0.0L;
  for (size_t k = 0; k + 1 < pts.size(); ++k) {
    p = a.eval(g, pts[k]) * p;
    const double nu = operator_norm(p);
    p /= nu;
    lg += std::log(nu);
  }
  return static_cast<double>(lg);
}

}  // namespace cuspflow::cocycles
