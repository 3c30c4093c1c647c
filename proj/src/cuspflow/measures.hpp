#pragma once

// Finite weighted samples on SL(m,R)/SL(m,Z) and the averaging operators
// built on them: orbit measures, unipotent and Folner averages, cusp-mass
// functionals, non-divergence fractions and the Siegel statistic.

#include "cuspflow/grouplin.hpp"
#include "cuspflow/modular.hpp"
#include "cuspflow/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace cuspflow::measures {

inline constexpr std::size_t kAtomBudget = 10'000'000;
inline constexpr double kWeightTolerance = 1e-12;

struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

struct Atom {
  Mat basis;    // columns generate the lattice
  double weight = 0.0;
  Vec fiber;    // empty when absent
};

class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  // Weights must be positive and sum to one.
  EmpiricalMeasure(std::vector<Atom> atoms, Provenance provenance);
  static EmpiricalMeasure point_mass(const Mat& basis, Provenance provenance = {});
  static EmpiricalMeasure uniform(std::vector<Mat> bases, Provenance provenance);
  // Convex combination sum w_i mu_i.
  static EmpiricalMeasure mixture(const std::vector<EmpiricalMeasure>& parts, const std::vector<double>& weights);

  int dim() const { return atoms_.empty() ? 0 : static_cast<int>(atoms_.front().basis.rows()); }
  std::size_t size() const { return atoms_.size(); }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const Provenance& provenance() const { return provenance_; }

  double integrate(const std::function<double(const Atom&)>& f) const;

 private:
  std::vector<Atom> atoms_;
  Provenance provenance_;
};

// Systole and depth of the lattice spanned by the columns (m = 2 uses Gauss
// reduction, larger m uses enumeration).
double atom_systole(const Mat& basis);
double atom_depth(const Mat& basis);
std::vector<double> depths(const EmpiricalMeasure& mu, int threads = 1);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};
// Weighted mean of per-atom values with a standard error.
Estimate weighted_mean(const std::vector<double>& values, const std::vector<double>& weights);

// Uniform measure on n equally spaced points flow(s).x, 0 <= s <= t.
EmpiricalMeasure empirical_measure(modular::Flow direction, double t, const modular::ModularPoint& x, std::size_t n_atoms,
                                   int threads = 1);

// Each atom is replaced by `substeps` atoms exp_root(root, s_j).atom at the
// midpoints s_j of [0, T].
EmpiricalMeasure average_unipotent(const EmpiricalMeasure& mu, const grouplin::Root& root, double T, int substeps,
                                   std::size_t budget = kAtomBudget);

// Haar measure on SL(2,R)/SL(2,Z).
EmpiricalMeasure haar_measure(std::size_t n, std::uint64_t seed, std::uint64_t stream, int threads = 1);
// Depth law under Haar: atom 1 - 3/pi at 0, P(depth > D) = (3/pi) e^{-2D}.
double haar_depth_cdf(double depth);
double haar_depth_cdf_left(double depth);
double haar_mean_depth();
double haar_exp_moment(double eta);  // E e^{eta depth}, infinite for eta >= 2
// Sorted depths of n Haar samples; computed once per (n, seed) and cached.
const std::vector<double>& haar_reference_depths(std::size_t n, std::uint64_t seed);

// sup |F_n - F| for a weighted sample against a CDF with left limits.
double ks_distance(const std::vector<double>& values, const std::vector<double>& weights,
                   const std::function<double(double)>& cdf, const std::function<double(double)>& cdf_left);
double ks_distance(std::vector<double> values, const std::function<double(double)>& cdf,
                   const std::function<double(double)>& cdf_left);
double ks_two_sample(std::vector<double> a, std::vector<double> b);

struct CuspMassReport {
  std::vector<double> etas;
  std::vector<Estimate> exp_mass;  // E e^{eta depth}
  std::vector<Estimate> sys_mass;  // E systole^{-eta}
};

struct CuspMassFamily {
  std::vector<CuspMassReport> reports;
  std::vector<double> family_sup;  // per eta, sup over the family of exp_mass
};

CuspMassReport cusp_mass(const EmpiricalMeasure& mu, const std::vector<double>& etas, int threads = 1);
CuspMassFamily cusp_mass(const std::vector<EmpiricalMeasure>& family, const std::vector<double>& etas, int threads = 1);
// From precomputed per-atom depths and systoles.
CuspMassReport cusp_mass_from(const std::vector<double>& depth, const std::vector<double>& systole,
                              const std::vector<double>& weights, const std::vector<double>& etas);

struct KmResult {
  std::vector<double> eps;
  std::vector<double> fraction;
  double rho = 0.0;   // systole of the starting point
  double step = 0.0;
  std::size_t samples = 0;
};

// Fraction of t in [0, T] with systole(u(t).x) <= eps, u the highest-root
// unipotent, sampled at `step` (default: min eps / 10). Rejects a step above
// min eps / 10.
KmResult km_fractions(const Mat& x, double T, const std::vector<double>& eps, double step = 0.0, int threads = 1);

// Parameter box for the sets a^t b^s prod c_i^{s_i} u^r.
struct FolnerBox {
  int m = 3;
  double t_n = 10.0;
  double delta = 0.2;
  double r_rate = 2.0;
  double log_radius() const { return r_rate * t_n; }
  void validate() const;
};

struct BoxPoint {
  double t = 0.0;
  double s = 0.0;
  std::vector<double> s_c;  // m - 3 entries
  Vec r_unit;                // r / radius, in the unit ball of R^{m-1}
};

BoxPoint sample_box(const FolnerBox& box, CounterRng& rng);
bool in_box(const FolnerBox& box, const BoxPoint& p);
// Diagonal log-vector of a^t b^s prod c_i^{s_i}.
Vec box_log_diagonal(const FolnerBox& box, double t, double s, const std::vector<double>& s_c);
// Inverse of box_log_diagonal on the Cartan algebra.
void decompose_log_diagonal(int m, const Vec& v, double& t, double& s, std::vector<double>& s_c);

// Element of the group AN': exp(log_diagonal) u^{r}, with r in units of the
// box radius.
struct SolvableElement {
  Vec log_diagonal;
  Vec r_unit;
};

struct Defect {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};
// |gF (sym. diff.) F| / |F| by Monte-Carlo membership in box coordinates.
Defect folner_defect(const FolnerBox& box, const SolvableElement& g, std::size_t n_samples, std::uint64_t seed,
                     int threads = 1);

// Starting point x~ = block(K, 1) for K in SL(m-1,R).
Mat block_point(const Mat& top);
// Basis of a^t b^s prod c_i^{s_i} u^{r} x~ with r = K f, f in the unit cube
// [-1/2, 1/2]^{m-1}; r only matters modulo K Z^{m-1}.
Mat folner_atom_basis(const Mat& top, const FolnerBox& box, double t, double s, const std::vector<double>& s_c,
                      const Vec& f);

// Monte-Carlo sample of the averaged measure mu_n. The radius e^{r_rate t_n}
// exceeds 2^20 in every realistic case, and then r mod K Z^{m-1} is sampled
// uniformly on the torus; smaller radii draw r in the ball exactly.
EmpiricalMeasure folner_average(const Mat& top, const FolnerBox& box, std::size_t n_atoms, std::uint64_t seed, int threads = 1);

struct TcParams {
  double t_n = 8.0;
  double t = 4.0;
  double s = 1.2;
  std::vector<double> s_c;
  double delta = 0.2;
};

struct TcRow {
  double c = 0.0;
  double fraction = 0.0;
  double std_error = 0.0;
  std::size_t hits = 0;
};

struct TcProfile {
  std::vector<TcRow> rows;
  std::size_t samples = 0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double slope_upper95 = 0.0;  // slope + 1.96 stderr
  int fitted_points = 0;
};

// |{r in D_n : -log systole > c}| / |D_n| for each c, and a weighted
// least-squares slope of log fraction against c (rows with at least 5 hits and
// fraction below one).
TcProfile tc_profile(const Mat& top, const TcParams& params, const std::vector<double>& c_grid, std::size_t n_samples,
                     std::uint64_t seed, int threads = 1);

enum class PipelineChoice { simple_root_2, highest_root };

struct SiegelStatistic {
  Estimate mean_count;
  double ball_volume = 0.0;
  double radius = 0.0;
};

double ball_volume(int m, double radius);
SiegelStatistic siegel_statistic(const EmpiricalMeasure& mu, double radius, int threads = 1);

// U^{beta'} average for time T followed by U^{beta^} average for time T.
EmpiricalMeasure haarization_pipeline(const EmpiricalMeasure& mu, PipelineChoice choice, double T, int substeps,
                                      std::size_t budget = kAtomBudget);

// Random lattice with H-Haar SL(2) blocks on coordinates (1,2), (3,4), ...
Mat block_haar_lattice(int m, CounterRng& rng);

void write_measure_csv(std::ostream& out, const EmpiricalMeasure& mu);
EmpiricalMeasure read_measure_csv(std::istream& in);

}  // namespace cuspflow::measures
