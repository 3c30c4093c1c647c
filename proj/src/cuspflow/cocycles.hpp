#pragma once

// Linear cocycles over the left action on SL(m,R)/SL(m,Z), their norm
// products, top Lyapunov exponents, temperedness fits and Lyapunov
// functionals over two commuting flows.

#include "cuspflow/grouplin.hpp"
#include "cuspflow/modular.hpp"
#include "cuspflow/rng.hpp"

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace cuspflow::cocycles {

struct TemperedBounds {
  double k = 0.0;  // claimed ||A(g,x)|| <= C e^{k depth(x)} for d(g, Id) <= 1
  double C = 1.0;
};

// A(g, x) together with the base action x -> g.x. Base points are lattice
// bases; act() returns a reduced representative of the same coset.
class TemperedCocycle {
 public:
  virtual ~TemperedCocycle() = default;
  virtual int base_dim() const = 0;
  virtual int fiber_dim() const = 0;
  virtual std::string name() const = 0;
  virtual TemperedBounds bounds() const { return {}; }
  virtual Mat eval(const Mat& g, const Mat& x) const = 0;
  virtual Mat act(const Mat& g, const Mat& x) const;
  // (A(g, x), g.x) in one pass; overridden where both share work.
  virtual std::pair<Mat, Mat> step(const Mat& g, const Mat& x) const { return {eval(g, x), act(g, x)}; }
};

// Reduced representative of g.x: Gauss reduction for m = 2, LLL otherwise.
Mat reduce_point(const Mat& gx);

class IdentityCocycle final : public TemperedCocycle {
 public:
  IdentityCocycle(int base_dim, int fiber_dim) : m_(base_dim), d_(fiber_dim) {}
  int base_dim() const override { return m_; }
  int fiber_dim() const override { return d_; }
  std::string name() const override { return "identity"; }
  Mat eval(const Mat&, const Mat&) const override { return Mat::Identity(d_, d_); }

 private:
  int m_, d_;
};

// A(g, x) = P(g.x) exp(sum_k coeff_k(g) L_k) P(x)^{-1}, where coeff_k(g) is the
// coordinate of log diag(g) along the k-th Cartan generator and the fiber
// generators L_k commute. Only diagonal g are accepted. The optional twist P is
// a bounded x-dependent rotation-and-shear; it does not change exponents.
class GeneratorCocycle final : public TemperedCocycle {
 public:
  // `generators` are Cartan log-vectors (mutually orthogonal), `fiber` the
  // matching d x d matrices.
  GeneratorCocycle(std::vector<Vec> generators, std::vector<Mat> fiber, bool twisted, std::string name);
  int base_dim() const override { return static_cast<int>(generators_.front().size()); }
  int fiber_dim() const override { return static_cast<int>(fiber_.front().rows()); }
  std::string name() const override { return name_; }
  TemperedBounds bounds() const override { return {0.0, bound_}; }
  Mat eval(const Mat& g, const Mat& x) const override;
  std::pair<Mat, Mat> step(const Mat& g, const Mat& x) const override;
  Mat twist(const Mat& x) const;

 private:
  Mat core(const Mat& g) const;
  std::vector<Vec> generators_;
  std::vector<Mat> fiber_;
  bool twisted_;
  std::string name_;
  double bound_ = 1.0;
};

// Diagonal test cocycle on SL(m,R) with prescribed rates per generator:
// rates[k][i] is the exponent of fiber coordinate i along generator k.
std::unique_ptr<GeneratorCocycle> diagonal_test_cocycle(int m, const std::vector<Vec>& generators,
                                                        const std::vector<std::vector<double>>& rates, bool twisted = false);
// exp(coeff_a(g) log M) for a symmetric positive-definite M, trivial along the
// other generators.
std::unique_ptr<GeneratorCocycle> constant_cocycle(int m, const std::vector<Vec>& generators, int generator_index,
                                                   const Mat& spd);

// The derivative cocycle of the linear torus action over the modular surface:
// A(g, x) = beta(g, x) as a real 2 x 2 matrix.
class ReturnCocycleLinear final : public TemperedCocycle {
 public:
  int base_dim() const override { return 2; }
  int fiber_dim() const override { return 2; }
  std::string name() const override { return "return"; }
  TemperedBounds bounds() const override { return {2.0, 8.0}; }
  Mat eval(const Mat& g, const Mat& x) const override;
  std::pair<Mat, Mat> step(const Mat& g, const Mat& x) const override;
};

// Not a cocycle: ||A(g, x)|| = e^{depth(x)^2}. Exists to exercise the
// temperedness diagnostic.
class SyntheticUntempered final : public TemperedCocycle {
 public:
  int base_dim() const override { return 2; }
  int fiber_dim() const override { return 2; }
  std::string name() const override { return "untempered"; }
  Mat eval(const Mat& g, const Mat& x) const override;
};

// Operator norm (largest singular value).
double operator_norm(const Mat& a);

struct ProductResult {
  Mat normalized;             // product / ||product||
  std::vector<double> ledger;  // log-norm increments, summing to log ||product||
  Mat end_point;
  double log_norm() const;
};

// A(g_n, x_{n-1}) ... A(g_1, x_0) with x_k = g_k.x_{k-1}, renormalized every step.
ProductResult cocycle_product(const TemperedCocycle& a, const std::vector<Mat>& path, const Mat& x);
// Exact integer product of return-cocycle values along the path.
grouplin::IntegerGroupElement return_product_exact(const std::vector<Mat>& path, const Mat& x);

struct SubadditivityResidual {
  long long n = 0;
  long long m = 0;
  double mean = 0.0;  // log||A(n+m,x)|| - log||A(n, s^m x)|| - log||A(m,x)||, averaged
  double std_error = 0.0;
  double max = 0.0;
};

struct LyapunovEstimate {
  double value = 0.0;
  long long horizon = 0;
  double std_error = 0.0;
  std::size_t starts = 0;
  std::vector<SubadditivityResidual> subadditivity;
  bool finite = true;
};

// (1/N) log ||A(s^N, x)|| averaged over starting points, plus the dyadic
// subadditivity residuals (n, n) for n = 1, 2, 4, ... <= N/2.
LyapunovEstimate top_lyapunov(const TemperedCocycle& a, const Mat& s, const std::vector<Mat>& starts, long long horizon,
                              int threads = 1);

struct TemperedSample {
  Mat g;
  Mat x;
  double depth = 0.0;
};

struct TemperedFit {
  double k = 0.0;
  double log_C = 0.0;
  double violation_rate = 0.0;
  std::size_t samples = 0;
  std::size_t violations = 0;
};

// k is the least-squares slope of the per-bin maxima of log||A|| against depth
// over the lower half of the depth range; log C is the largest residual there.
// Violations count samples anywhere above C e^{k depth} by more than 10%.
TemperedFit temperedness_fit(const TemperedCocycle& a, const std::vector<TemperedSample>& samples, int threads = 1);

// g = k1 a^tau k2 with tau uniform in [0, radius]: an element of the
// radius-ball around Id in SL(2,R).
Mat sample_sl2_ball(double radius, CounterRng& rng);

struct FlowGenerator {
  std::string name;
  Mat element;  // one step
};

struct LyapunovFunctional {
  std::map<std::string, double> values;  // generator name -> exponent per step
  double residual = 0.0;                  // |l(g1 g2) - l(g1) - l(g2)|
  double relative_residual = 0.0;
};

struct OseledetsReport {
  std::vector<LyapunovFunctional> functionals;  // one per exponent, decreasing along g1*g2
  double max_condition = 1.0;
  bool ill_conditioned = false;
};

// QR frame tracking along g1, g2 and g1 g2 from x for `steps` steps each.
OseledetsReport oseledets_functionals(const TemperedCocycle& a, const FlowGenerator& g1, const FlowGenerator& g2,
                                      const Mat& x, long long steps);

// Growth exponents along one generator by QR tracking, decreasing order.
Vec qr_exponents(const TemperedCocycle& a, const Mat& step, const Mat& x, long long steps, double* max_condition = nullptr);

// c(zeta) for the return cocycle: log ||total deck of the segment||.
double segment_growth_return(const modular::OrbitSegment& seg);
// c(zeta) for any cocycle over the segment's stored points.
double segment_growth(const TemperedCocycle& a, const modular::OrbitSegment& seg);

}  // namespace cuspflow::cocycles
