#include "cuspflow/measures.hpp"

#include "cuspflow/error.hpp"
#include "cuspflow/lattices.hpp"
#include "cuspflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

namespace cuspflow::measures {

namespace {

long double compensated_sum(const std::vector<Atom>& atoms) {
  long double s = 0.0L;
  for (const auto& a : atoms) s += a.weight;
  return s;
}

std::vector<double> weights_of(const EmpiricalMeasure& mu) {
  std::vector<double> w;
  w.reserve(mu.size());
  for (const auto& a : mu.atoms()) w.push_back(a.weight);
  return w;
}

Vec sample_unit_ball(int dim, CounterRng& rng) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  const double n = v.norm();
  const double radius = std::pow(rng.uniform(), 1.0 / dim);
  return v * (radius / n);
}

// Row i += s * row j, i.e. exp of s E_{i,j} applied on the left.
Mat apply_root(const Mat& basis, const grouplin::Root& root, double s) {
  Mat out = basis;
  out.row(root.i - 1) += s * basis.row(root.j - 1);
  return out;
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<Atom> atoms, Provenance provenance)
    : atoms_(std::move(atoms)), provenance_(provenance) {
  require(!atoms_.empty(), ErrorCode::invalid_argument, "an empirical measure needs at least one atom");
  require(atoms_.size() <= kAtomBudget, ErrorCode::budget_exceeded, "atom budget of 10^7 exceeded");
  for (const auto& a : atoms_)
    require(a.weight > 0.0 && std::isfinite(a.weight), ErrorCode::invalid_argument, "atom weights must be positive");
  const long double total = compensated_sum(atoms_);
  require(std::fabs(static_cast<double>(total - 1.0L)) <= kWeightTolerance, ErrorCode::invalid_argument,
          "atom weights must sum to one");
}

EmpiricalMeasure EmpiricalMeasure::point_mass(const Mat& basis, Provenance provenance) {
  return EmpiricalMeasure({Atom{basis, 1.0, Vec()}}, provenance);
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<Mat> bases, Provenance provenance) {
  require(!bases.empty(), ErrorCode::invalid_argument, "an empirical measure needs at least one atom");
  const double w = 1.0 / static_cast<double>(bases.size());
  std::vector<Atom> atoms;
  atoms.reserve(bases.size());
  for (auto& b : bases) atoms.push_back({std::move(b), w, Vec()});
  // Renormalize the last weight so the total is one to rounding.
  long double rest = 1.0L;
  for (size_t i = 0; i + 1 < atoms.size(); ++i) rest -= atoms[i].weight;
  atoms.back().weight = static_cast<double>(rest);
  return EmpiricalMeasure(std::move(atoms), provenance);
}

EmpiricalMeasure EmpiricalMeasure::mixture(const std::vector<EmpiricalMeasure>& parts, const std::vector<double>& weights) {
  require(!parts.empty() && parts.size() == weights.size(), ErrorCode::invalid_argument,
          "mixture needs one weight per component");
  std::vector<Atom> atoms;
  for (size_t p = 0; p < parts.size(); ++p) {
    require(weights[p] > 0.0, ErrorCode::invalid_argument, "mixture weights must be positive");
    for (const auto& a : parts[p].atoms()) atoms.push_back({a.basis, a.weight * weights[p], a.fiber});
  }
  return EmpiricalMeasure(std::move(atoms), parts.front().provenance());
}

double EmpiricalMeasure::integrate(const std::function<double(const Atom&)>& f) const {
  long double s = 0.0L;
  for (const auto& a : atoms_) s += static_cast<long double>(a.weight) * f(a);
  return static_cast<double>(s);
}

double atom_systole(const Mat& basis) {
  require(basis.rows() == basis.cols() && basis.rows() >= 2, ErrorCode::invalid_argument, "atom basis must be square");
  if (basis.rows() == 2) {
    const double det = basis.determinant();
    require(det > 0.0 && std::isfinite(det), ErrorCode::invalid_argument, "atom basis must have positive determinant");
    const modular::Mat2 g = basis / std::sqrt(det);
    return modular::reduce_matrix(g).rep.col(1).norm();
  }
  return lattices::systole(lattices::UnimodularLattice::from_basis(basis));
}

double atom_depth(const Mat& basis) { return std::max(0.0, -std::log(atom_systole(basis))); }

std::vector<double> depths(const EmpiricalMeasure& mu, int threads) {
  return parallel_map<double>(mu.size(), threads, [&](size_t i) { return atom_depth(mu.atoms()[i].basis); });
}

Estimate weighted_mean(const std::vector<double>& values, const std::vector<double>& weights) {
  require(values.size() == weights.size() && !values.empty(), ErrorCode::invalid_argument, "mismatched sample sizes");
  long double mean = 0.0L;
  long double wsum = 0.0L;
  for (size_t i = 0; i < values.size(); ++i) {
    mean += static_cast<long double>(weights[i]) * values[i];
    wsum += weights[i];
  }
  mean /= wsum;
  long double var = 0.0L;
  for (size_t i = 0; i < values.size(); ++i) {
    const long double w = weights[i] / wsum;
    const long double d = values[i] - mean;
    var += w * w * d * d;
  }
  const auto n = static_cast<long double>(values.size());
  if (values.size() > 1) var *= n / (n - 1.0L);
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(var)), values.size()};
}

EmpiricalMeasure empirical_measure(modular::Flow direction, double t, const modular::ModularPoint& x, std::size_t n_atoms,
                                   int threads) {
  require(n_atoms >= 1, ErrorCode::invalid_argument, "n_atoms must be at least one");
  require(std::isfinite(t) && t >= 0.0, ErrorCode::invalid_argument, "orbit length must be non-negative");
  require(n_atoms <= kAtomBudget, ErrorCode::budget_exceeded, "atom budget of 10^7 exceeded");
  std::vector<Mat> bases(n_atoms);
  if (n_atoms == 1 || t < 1e-12) {
    for (auto& b : bases) b = x.rep();
  } else if (direction == modular::Flow::horocycle) {
    parallel_for(n_atoms, threads, [&](size_t i) {
      const double s = t * static_cast<double>(i) / static_cast<double>(n_atoms - 1);
      bases[i] = modular::reduce_matrix(modular::flow_matrix(direction, s) * x.rep()).rep;
    });
  } else {
    // The geodesic flow is integrated in steps of at most 0.1 with re-reduction.
    const double spacing = t / static_cast<double>(n_atoms - 1);
    const auto sub = static_cast<long long>(std::ceil(spacing / 0.1 - 1e-9));
    const modular::Mat2 step = modular::flow_matrix(direction, spacing / static_cast<double>(sub));
    modular::Mat2 rep = x.rep();
    bases[0] = rep;
    for (size_t i = 1; i < n_atoms; ++i) {
      for (long long k = 0; k < sub; ++k) {
        modular::Mat2 moved = step * rep;
        moved /= std::sqrt(moved.determinant());
        rep = modular::reduce_matrix(moved).rep;
      }
      bases[i] = rep;
    }
  }
  return EmpiricalMeasure::uniform(std::move(bases), {});
}

EmpiricalMeasure average_unipotent(const EmpiricalMeasure& mu, const grouplin::Root& root, double T, int substeps,
                                   std::size_t budget) {
  require(std::isfinite(T) && T >= 0.0, ErrorCode::invalid_argument, "averaging time must be non-negative");
  require(substeps >= 1, ErrorCode::invalid_argument, "substeps must be at least one");
  require(root.i <= mu.dim() && root.j <= mu.dim(), ErrorCode::invalid_argument, "root does not fit the dimension");
  if (T == 0.0) return mu;
  require(mu.size() * static_cast<size_t>(substeps) <= std::min(budget, kAtomBudget), ErrorCode::budget_exceeded,
          "unipotent averaging exceeds the atom budget");
  std::vector<Atom> atoms;
  atoms.reserve(mu.size() * static_cast<size_t>(substeps));
  for (const auto& a : mu.atoms()) {
    for (int j = 0; j < substeps; ++j) {
      const double s = T * (j + 0.5) / substeps;
      atoms.push_back({apply_root(a.basis, root, s), a.weight / substeps, a.fiber});
    }
  }
  return EmpiricalMeasure(std::move(atoms), mu.provenance());
}

EmpiricalMeasure haar_measure(std::size_t n, std::uint64_t seed, std::uint64_t stream, int threads) {
  require(n >= 1 && n <= kAtomBudget, ErrorCode::invalid_argument, "Haar sample size must lie in [1, 10^7]");
  std::vector<Mat> bases = parallel_map<Mat>(n, threads, [&](size_t i) {
    CounterRng rng(seed, static_cast<uint32_t>(stream), i);
    return Mat(modular::haar_point(rng).rep());
  });
  return EmpiricalMeasure::uniform(std::move(bases), {seed, stream});
}

double haar_depth_cdf(double depth) {
  if (depth < 0.0) return 0.0;
  return 1.0 - 3.0 / std::numbers::pi * std::exp(-2.0 * depth);
}

double haar_depth_cdf_left(double depth) { return depth <= 0.0 ? 0.0 : haar_depth_cdf(depth); }

double haar_mean_depth() { return 3.0 / (2.0 * std::numbers::pi); }

double haar_exp_moment(double eta) {
  if (eta >= 2.0) return std::numeric_limits<double>::infinity();
  // (1 - 3/pi) + int_0^inf e^{eta D} (6/pi) e^{-2D} dD
  return 1.0 - 3.0 / std::numbers::pi + 6.0 / (std::numbers::pi * (2.0 - eta));
}

const std::vector<double>& haar_reference_depths(std::size_t n, std::uint64_t seed) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, std::uint64_t>, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{n, seed}];
  if (slot.empty() && n > 0) {
    slot.resize(n);
    for (size_t i = 0; i < n; ++i) {
      CounterRng rng(seed, streams::haar_reference, i);
      slot[i] = modular::haar_point(rng).depth();
    }
    std::sort(slot.begin(), slot.end());
  }
  return slot;
}

double ks_distance(const std::vector<double>& values, const std::vector<double>& weights,
                   const std::function<double(double)>& cdf, const std::function<double(double)>& cdf_left) {
  require(values.size() == weights.size() && !values.empty(), ErrorCode::invalid_argument, "mismatched sample sizes");
  std::vector<size_t> order(values.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
  long double total = 0.0L;
  for (double w : weights) total += w;
  long double below = 0.0L;
  double d = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    const double v = values[order[i]];
    long double mass = 0.0L;
    while (i < order.size() && values[order[i]] == v) mass += weights[order[i++]];
    const double lo = static_cast<double>(below / total);
    below += mass;
    const double hi = static_cast<double>(below / total);
    d = std::max({d, std::fabs(lo - cdf_left(v)), std::fabs(hi - cdf(v))});
  }
  return d;
}

double ks_distance(std::vector<double> values, const std::function<double(double)>& cdf,
                   const std::function<double(double)>& cdf_left) {
  const std::vector<double> w(values.size(), 1.0);
  return ks_distance(values, w, cdf, cdf_left);
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::invalid_argument, "two-sample KS needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double d = 0.0;
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) v = a[i];
    else v = b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

CuspMassReport cusp_mass_from(const std::vector<double>& depth, const std::vector<double>& systole,
                              const std::vector<double>& weights, const std::vector<double>& etas) {
  CuspMassReport r;
  r.etas = etas;
  std::vector<double> f(depth.size());
  for (double eta : etas) {
    for (size_t i = 0; i < depth.size(); ++i) f[i] = std::exp(eta * depth[i]);
    r.exp_mass.push_back(weighted_mean(f, weights));
    for (size_t i = 0; i < depth.size(); ++i) f[i] = std::pow(systole[i], -eta);
    r.sys_mass.push_back(weighted_mean(f, weights));
  }
  return r;
}

CuspMassReport cusp_mass(const EmpiricalMeasure& mu, const std::vector<double>& etas, int threads) {
  const std::vector<double> sys =
      parallel_map<double>(mu.size(), threads, [&](size_t i) { return atom_systole(mu.atoms()[i].basis); });
  std::vector<double> dep(sys.size());
  for (size_t i = 0; i < sys.size(); ++i) dep[i] = std::max(0.0, -std::log(sys[i]));
  return cusp_mass_from(dep, sys, weights_of(mu), etas);
}

CuspMassFamily cusp_mass(const std::vector<EmpiricalMeasure>& family, const std::vector<double>& etas, int threads) {
  require(!family.empty(), ErrorCode::invalid_argument, "cusp mass needs a nonempty family");
  CuspMassFamily out;
  out.family_sup.assign(etas.size(), 0.0);
  for (const auto& mu : family) {
    out.reports.push_back(cusp_mass(mu, etas, threads));
    for (size_t k = 0; k < etas.size(); ++k)
      out.family_sup[k] = std::max(out.family_sup[k], out.reports.back().exp_mass[k].value);
  }
  return out;
}

KmResult km_fractions(const Mat& x, double T, const std::vector<double>& eps, double step, int threads) {
  const int m = static_cast<int>(x.rows());
  require(m >= 2 && m <= 4 && x.cols() == m, ErrorCode::invalid_argument, "non-divergence check supports m in {2,3,4}");
  require(!eps.empty() && std::isfinite(T) && T > 0.0, ErrorCode::invalid_argument, "need T > 0 and a nonempty eps grid");
  const double eps_min = *std::min_element(eps.begin(), eps.end());
  require(eps_min > 0.0, ErrorCode::invalid_argument, "eps values must be positive");
  if (step <= 0.0) step = eps_min / 10.0;
  require(step <= eps_min / 10.0 * (1.0 + 1e-12), ErrorCode::precondition_failed,
          "eps is below the sampling resolution (step must be <= eps/10)");
  KmResult out;
  out.eps = eps;
  out.step = step;
  out.rho = atom_systole(x);
  const auto n = static_cast<size_t>(std::floor(T / step)) + 1;
  out.samples = n;
  const grouplin::Root root = grouplin::highest_root(m);
  const size_t chunks = std::min<size_t>(n, 256);
  std::vector<std::vector<long long>> counts(chunks, std::vector<long long>(eps.size(), 0));
  parallel_for(chunks, threads, [&](size_t c) {
    const size_t lo = n * c / chunks;
    const size_t hi = n * (c + 1) / chunks;
    for (size_t i = lo; i < hi; ++i) {
      const double sys = atom_systole(apply_root(x, root, static_cast<double>(i) * step));
      for (size_t k = 0; k < eps.size(); ++k)
        if (sys <= eps[k]) ++counts[c][k];
    }
  });
  for (size_t k = 0; k < eps.size(); ++k) {
    long long total = 0;
    for (const auto& c : counts) total += c[k];
    out.fraction.push_back(static_cast<double>(total) / static_cast<double>(n));
  }
  return out;
}

void FolnerBox::validate() const {
  require(m >= 3 && m <= lattices::kMaxDim, ErrorCode::invalid_argument, "Folner box needs 3 <= m <= 8");
  require(std::isfinite(t_n) && t_n > 0.0, ErrorCode::invalid_argument, "t_n must be positive");
  require(std::isfinite(delta) && delta > 0.0 && delta < 1.0, ErrorCode::invalid_argument, "delta must lie in (0,1)");
  require(std::isfinite(r_rate) && r_rate > 0.0, ErrorCode::invalid_argument, "r_rate must be positive");
}

BoxPoint sample_box(const FolnerBox& box, CounterRng& rng) {
  BoxPoint p;
  p.t = rng.uniform(0.0, box.t_n);
  p.s = rng.uniform(box.delta * box.t_n / 2.0, box.delta * box.t_n);
  for (int k = 0; k < box.m - 3; ++k) p.s_c.push_back(rng.uniform(0.0, std::sqrt(box.t_n)));
  p.r_unit = sample_unit_ball(box.m - 1, rng);
  return p;
}

bool in_box(const FolnerBox& box, const BoxPoint& p) {
  if (!(p.t > 0.0 && p.t < box.t_n)) return false;
  if (!(p.s > box.delta * box.t_n / 2.0 && p.s < box.delta * box.t_n)) return false;
  for (double sc : p.s_c)
    if (!(sc > 0.0 && sc < std::sqrt(box.t_n))) return false;
  return p.r_unit.norm() < 1.0;
}

Vec box_log_diagonal(const FolnerBox& box, double t, double s, const std::vector<double>& s_c) {
  Vec v = t * grouplin::a_generator_log(box.m) + s * grouplin::b_generator_log(box.m);
  for (int k = 1; k <= box.m - 3; ++k) v += s_c[static_cast<size_t>(k - 1)] * grouplin::c_generator_log(box.m, k);
  return v;
}

void decompose_log_diagonal(int m, const Vec& v, double& t, double& s, std::vector<double>& s_c) {
  const Vec a = grouplin::a_generator_log(m);
  const Vec b = grouplin::b_generator_log(m);
  t = v.dot(a) / a.squaredNorm();
  s = v.dot(b) / b.squaredNorm();
  s_c.assign(static_cast<size_t>(m - 3), 0.0);
  for (int k = 1; k <= m - 3; ++k) {
    const Vec c = grouplin::c_generator_log(m, k);
    s_c[static_cast<size_t>(k - 1)] = v.dot(c) / c.squaredNorm();
  }
}

Defect folner_defect(const FolnerBox& box, const SolvableElement& g, std::size_t n_samples, std::uint64_t seed, int threads) {
  box.validate();
  require(g.log_diagonal.size() == box.m, ErrorCode::invalid_argument, "group element has the wrong dimension");
  require(std::fabs(g.log_diagonal.sum()) <= 1e-12 * (1.0 + g.log_diagonal.cwiseAbs().sum()), ErrorCode::invalid_argument,
          "diagonal part must have trace zero");
  require(n_samples >= 1, ErrorCode::invalid_argument, "need at least one sample");
  const Vec r0 = g.r_unit.size() == 0 ? Vec::Zero(box.m - 1) : g.r_unit;
  require(r0.size() == box.m - 1, ErrorCode::invalid_argument, "translation part has the wrong dimension");
  const std::vector<char> outside = parallel_map<char>(n_samples, threads, [&](size_t i) -> char {
    CounterRng rng(seed, streams::folner_defect, i);
    const BoxPoint p = sample_box(box, rng);
    // g^{-1} p = alpha u^{r - r0 (alpha_m / alpha_k)} with alpha = e^{-v} a_p.
    const Vec alpha_log = box_log_diagonal(box, p.t, p.s, p.s_c) - g.log_diagonal;
    BoxPoint q;
    decompose_log_diagonal(box.m, alpha_log, q.t, q.s, q.s_c);
    q.r_unit = p.r_unit;
    for (int k = 0; k < box.m - 1; ++k)
      if (r0(k) != 0.0) q.r_unit(k) -= r0(k) * std::exp(alpha_log(box.m - 1) - alpha_log(k));
    return in_box(box, q) ? 0 : 1;
  });
  long long misses = 0;
  for (char c : outside) misses += c;
  const double f = static_cast<double>(misses) / static_cast<double>(n_samples);
  Defect d;
  d.value = 2.0 * f;
  d.std_error = 2.0 * std::sqrt(std::max(f * (1.0 - f), 1.0 / static_cast<double>(n_samples)) / static_cast<double>(n_samples));
  d.samples = n_samples;
  return d;
}

Mat block_point(const Mat& top) {
  const int m = static_cast<int>(top.rows()) + 1;
  require(top.rows() == top.cols() && m >= 3, ErrorCode::invalid_argument, "top block must be square of size >= 2");
  const double det = top.determinant();
  require(std::fabs(det - 1.0) <= 1e-9, ErrorCode::invalid_argument, "top block must have determinant one");
  Mat x = Mat::Identity(m, m);
  x.topLeftCorner(m - 1, m - 1) = top;
  return x;
}

Mat folner_atom_basis(const Mat& top, const FolnerBox& box, double t, double s, const std::vector<double>& s_c, const Vec& f) {
  const int m = box.m;
  require(top.rows() == m - 1 && f.size() == m - 1, ErrorCode::invalid_argument, "Folner atom dimensions disagree");
  const Vec logd = box_log_diagonal(box, t, s, s_c);
  Mat scaled = top;
  for (int k = 0; k < m - 1; ++k) scaled.row(k) *= std::exp(logd(k) - s);
  lattices::Reduction red = lattices::lll_reduce(scaled);
  if (red.reduced.determinant() < 0.0) {
    red.reduced.col(0) *= -1.0;
    red.change.col(0) *= -1;
  }
  // f' = U^{-1} f reduced mod 1, so that the last column is short.
  const Mat u_inv = red.change.cast<double>().inverse();
  Vec fp = u_inv * f;
  for (int k = 0; k < m - 1; ++k) fp(k) -= std::round(fp(k));
  Mat basis = Mat::Zero(m, m);
  const double es = std::exp(s);
  basis.topLeftCorner(m - 1, m - 1) = es * red.reduced;
  basis.topRightCorner(m - 1, 1) = es * (red.reduced * fp);
  basis(m - 1, m - 1) = std::exp(-(m - 1) * s);
  return basis;
}

EmpiricalMeasure folner_average(const Mat& top, const FolnerBox& box, std::size_t n_atoms, std::uint64_t seed, int threads) {
  box.validate();
  require(top.rows() == box.m - 1, ErrorCode::invalid_argument, "starting point has the wrong dimension");
  require(n_atoms >= 1 && n_atoms <= kAtomBudget, ErrorCode::budget_exceeded, "atom budget of 10^7 exceeded");
  const bool torus_uniform = box.log_radius() > 20.0 * std::numbers::ln2;
  const Mat top_inv = top.inverse();
  std::vector<Mat> bases = parallel_map<Mat>(n_atoms, threads, [&](size_t i) {
    CounterRng rng(seed, streams::folner_atoms, i);
    const BoxPoint p = sample_box(box, rng);
    Vec f(box.m - 1);
    if (torus_uniform) {
      for (int k = 0; k < box.m - 1; ++k) f(k) = rng.uniform(-0.5, 0.5);
    } else {
      f = top_inv * (std::exp(box.log_radius()) * p.r_unit);
      for (int k = 0; k < box.m - 1; ++k) f(k) -= std::round(f(k));
    }
    return folner_atom_basis(top, box, p.t, p.s, p.s_c, f);
  });
  return EmpiricalMeasure::uniform(std::move(bases), {seed, streams::folner_atoms});
}

TcProfile tc_profile(const Mat& top, const TcParams& params, const std::vector<double>& c_grid, std::size_t n_samples,
                     std::uint64_t seed, int threads) {
  const int m = static_cast<int>(top.rows()) + 1;
  require(m >= 3, ErrorCode::invalid_argument, "T_c profile needs m >= 3");
  FolnerBox box{m, params.t_n, params.delta, 1.0};
  box.validate();
  require(params.t > 0.0 && params.t < params.t_n, ErrorCode::precondition_failed, "need 0 < t < t_n");
  require(params.s > params.delta * params.t_n / 2.0 && params.s < params.delta * params.t_n, ErrorCode::precondition_failed,
          "need delta t_n / 2 < s < delta t_n");
  require(static_cast<int>(params.s_c.size()) == m - 3, ErrorCode::invalid_argument, "need m - 3 values s_i");
  for (double sc : params.s_c)
    require(sc > 0.0 && sc < std::sqrt(params.t_n), ErrorCode::precondition_failed, "need 0 < s_i < sqrt(t_n)");
  require(n_samples >= 10 && n_samples <= kAtomBudget, ErrorCode::budget_exceeded, "sample count must lie in [10, 10^7]");
  require(!c_grid.empty(), ErrorCode::invalid_argument, "c grid must be nonempty");

  const std::vector<double> beta = parallel_map<double>(n_samples, threads, [&](size_t i) {
    CounterRng rng(seed, streams::tc_profile, i);
    Vec f(m - 1);
    for (int k = 0; k < m - 1; ++k) f(k) = rng.uniform(-0.5, 0.5);
    const Mat basis = folner_atom_basis(top, box, params.t, params.s, params.s_c, f);
    return -std::log(lattices::systole(lattices::UnimodularLattice::from_basis(basis)));
  });
  TcProfile out;
  out.samples = n_samples;
  const auto n = static_cast<double>(n_samples);
  for (double c : c_grid) {
    TcRow row;
    row.c = c;
    row.hits = static_cast<size_t>(std::count_if(beta.begin(), beta.end(), [&](double b) { return b > c; }));
    row.fraction = static_cast<double>(row.hits) / n;
    row.std_error = std::sqrt(row.fraction * (1.0 - row.fraction) / n);
    out.rows.push_back(row);
  }
  // Weighted least squares of log fraction on c; var(log p) ~ (1 - p) / hits.
  double sw = 0, sx = 0, sy = 0;
  std::vector<std::array<double, 3>> pts;
  for (const auto& row : out.rows) {
    if (row.hits < 5 || row.hits == n_samples) continue;
    const double w = static_cast<double>(row.hits) / (1.0 - row.fraction);
    pts.push_back({row.c, std::log(row.fraction), w});
    sw += w;
    sx += w * row.c;
    sy += w * std::log(row.fraction);
  }
  out.fitted_points = static_cast<int>(pts.size());
  if (pts.size() >= 2) {
    const double xb = sx / sw, yb = sy / sw;
    double sxx = 0, sxy = 0;
    for (const auto& p : pts) {
      sxx += p[2] * (p[0] - xb) * (p[0] - xb);
      sxy += p[2] * (p[0] - xb) * (p[1] - yb);
    }
    out.slope = sxy / sxx;
    out.slope_stderr = std::sqrt(1.0 / sxx);
    out.slope_upper95 = out.slope + 1.96 * out.slope_stderr;
  } else {
    out.slope = std::numeric_limits<double>::quiet_NaN();
    out.slope_stderr = std::numeric_limits<double>::infinity();
    out.slope_upper95 = std::numeric_limits<double>::infinity();
  }
  return out;
}

double ball_volume(int m, double radius) {
  return std::pow(std::numbers::pi, m / 2.0) / std::tgamma(m / 2.0 + 1.0) * std::pow(radius, m);
}

SiegelStatistic siegel_statistic(const EmpiricalMeasure& mu, double radius, int threads) {
  require(radius > 0.0, ErrorCode::invalid_argument, "Siegel radius must be positive");
  const std::vector<double> counts = parallel_map<double>(mu.size(), threads, [&](size_t i) {
    return static_cast<double>(
        lattices::count_vectors_in_ball(lattices::UnimodularLattice::from_basis(mu.atoms()[i].basis), radius));
  });
  return {weighted_mean(counts, weights_of(mu)), ball_volume(mu.dim(), radius), radius};
}

EmpiricalMeasure haarization_pipeline(const EmpiricalMeasure& mu, PipelineChoice choice, double T, int substeps,
                                      std::size_t budget) {
  const int m = mu.dim();
  require(m >= 4, ErrorCode::precondition_failed, "haarization pipeline needs m >= 4");
  const grouplin::Root first = choice == PipelineChoice::simple_root_2 ? grouplin::simple_root(2) : grouplin::highest_root(m);
  const EmpiricalMeasure once = average_unipotent(mu, first, T, substeps, budget);
  return average_unipotent(once, first.negated(), T, substeps, budget);
}

Mat block_haar_lattice(int m, CounterRng& rng) {
  require(m >= 2, ErrorCode::invalid_argument, "dimension must be at least two");
  Mat x = Mat::Identity(m, m);
  for (int k = 0; k + 1 < m; k += 2) x.block(k, k, 2, 2) = modular::haar_point(rng).rep();
  return x;
}

void write_measure_csv(std::ostream& out, const EmpiricalMeasure& mu) {
  const int m = mu.dim();
  const long fiber = mu.atoms().front().fiber.size();
  out << "weight";
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) out << ",b" << r + 1 << '_' << c + 1;
  for (long k = 0; k < fiber; ++k) out << ",f" << k + 1;
  out << '\n';
  out.precision(17);
  for (const auto& a : mu.atoms()) {
    out << a.weight;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) out << ',' << a.basis(r, c);
    for (long k = 0; k < fiber; ++k) out << ',' << a.fiber(k);
    out << '\n';
  }
}

EmpiricalMeasure read_measure_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse_error, "measure CSV is empty");
  int basis_cols = 0, fiber_cols = 0;
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    require(cell == "weight", ErrorCode::parse_error, "measure CSV must start with a weight column");
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell[0] == 'b') ++basis_cols;
      else if (!cell.empty() && cell[0] == 'f') ++fiber_cols;
      else fail(ErrorCode::parse_error, "unknown measure CSV column '" + cell + "'");
    }
  }
  const int m = static_cast<int>(std::lround(std::sqrt(basis_cols)));
  require(m * m == basis_cols && m >= 2, ErrorCode::parse_error, "measure CSV basis columns do not form a square");
  std::vector<Atom> atoms;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorCode::parse_error, "bad number '" + cell + "' in measure CSV");
      }
    }
    require(static_cast<int>(vals.size()) == 1 + basis_cols + fiber_cols, ErrorCode::parse_error,
            "measure CSV row has the wrong number of cells");
    Atom a;
    a.weight = vals[0];
    a.basis.resize(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) a.basis(r, c) = vals[static_cast<size_t>(1 + r * m + c)];
    a.fiber.resize(fiber_cols);
    for (int k = 0; k < fiber_cols; ++k) a.fiber(k) = vals[static_cast<size_t>(1 + basis_cols + k)];
    atoms.push_back(std::move(a));
  }
  return EmpiricalMeasure(std::move(atoms), {});
}

}  // namespace cuspflow::measures
