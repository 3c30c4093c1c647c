#include "cuspflow/experiments.hpp"

#include "cuspflow/cocycles.hpp"
#include "cuspflow/error.hpp"
#include "cuspflow/grouplin.hpp"
#include "cuspflow/lattices.hpp"
#include "cuspflow/measures.hpp"
#include "cuspflow/modular.hpp"
#include "cuspflow/parallel.hpp"
#include "cuspflow/rng.hpp"
#include "cuspflow/sumsets.hpp"
#include "cuspflow/wordgeom.hpp"

#include <toml.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace cuspflow::experiments {

namespace {

using Checker = std::function<std::string(const Json&)>;

struct ParamDef {
  std::string name;
  Json def;
  std::string help;
  Checker check;
};

struct TableDef {
  std::string name;
  std::string columns;
};

struct Context {
  const Json& p;
  std::uint64_t seed;
  int threads;
  RunReport& out;
};

struct ExperimentDef {
  std::string id;
  std::string about;
  std::vector<ParamDef> params;
  std::vector<TableDef> tables;
  std::function<std::vector<std::string>(const Json&)> cross;
  std::function<double(const Json&)> work;
  std::function<void(Context&)> body;
};

// ---- parameter checks ------------------------------------------------------

std::string range_text(double lo, double hi, bool open_lo, bool open_hi) {
  return std::string(open_lo ? "(" : "[") + format_number(lo) + ", " + format_number(hi) + (open_hi ? ")" : "]");
}

bool in_range(double v, double lo, double hi, bool open_lo, bool open_hi) {
  if (!std::isfinite(v)) return false;
  if (open_lo ? v <= lo : v < lo) return false;
  return open_hi ? v < hi : v <= hi;
}

Checker int_in(long long lo, long long hi) {
  return [=](const Json& v) -> std::string {
    const auto x = v.get<long long>();
    if (x < lo || x > hi) return "must lie in " + range_text(double(lo), double(hi), false, false);
    return {};
  };
}

Checker real_in(double lo, double hi, bool open_lo = false, bool open_hi = false) {
  return [=](const Json& v) -> std::string {
    if (!in_range(v.get<double>(), lo, hi, open_lo, open_hi)) return "must lie in " + range_text(lo, hi, open_lo, open_hi);
    return {};
  };
}

Checker list_in(double lo, double hi, std::size_t min_len, std::size_t max_len, bool open_lo = false, bool integral = false) {
  return [=](const Json& v) -> std::string {
    if (v.size() < min_len || v.size() > max_len)
      return "needs between " + std::to_string(min_len) + " and " + std::to_string(max_len) + " entries";
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (integral && !v[k].is_number_integer()) return "entry " + std::to_string(k) + " must be an integer";
      if (!in_range(v[k].get<double>(), lo, hi, open_lo, false))
        return "entry " + std::to_string(k) + " must lie in " + range_text(lo, hi, open_lo, false);
    }
    return {};
  };
}

Checker one_of(std::vector<std::string> options) {
  return [=](const Json& v) -> std::string {
    const auto s = v.get<std::string>();
    if (std::find(options.begin(), options.end(), s) != options.end()) return {};
    std::string all;
    for (const auto& o : options) all += (all.empty() ? "" : ", ") + o;
    return "must be one of " + all;
  };
}

Checker strings_of(std::vector<std::string> options) {
  return [=](const Json& v) -> std::string {
    if (v.empty()) return "needs at least one entry";
    for (const auto& e : v) {
      const auto s = e.get<std::string>();
      if (std::find(options.begin(), options.end(), s) == options.end()) return "unknown entry '" + s + "'";
    }
    return {};
  };
}

// Type of a supplied value against the type of the default.
std::string type_error(const Json& def, const Json& v) {
  if (def.is_boolean()) return v.is_boolean() ? "" : "expected a boolean";
  if (def.is_number_integer()) return v.is_number_integer() ? "" : "expected an integer";
  if (def.is_number()) return v.is_number() ? "" : "expected a number";
  if (def.is_string()) return v.is_string() ? "" : "expected a string";
  if (def.is_array()) {
    if (!v.is_array()) return "expected an array";
    const bool strings = !def.empty() && def.front().is_string();
    for (const auto& e : v)
      if (strings ? !e.is_string() : !e.is_number()) return strings ? "expected an array of strings" : "expected an array of numbers";
    return {};
  }
  return {};
}

std::vector<double> doubles(const Json& v) { return v.get<std::vector<double>>(); }
std::size_t count_of(const Json& p, const char* key) { return p.at(key).get<std::size_t>(); }

// ---- output helpers ----------------------------------------------------------

std::string cell(double v) { return format_number(v); }
std::string cell(long long v) { return std::to_string(v); }
std::string cell(std::size_t v) { return std::to_string(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "1" : "0"; }

Table& table(RunReport& r, const std::string& name, std::vector<std::string> columns) {
  r.tables.push_back(Table{name, std::move(columns), {}});
  return r.tables.back();
}

void check(RunReport& r, std::string name, bool passed, std::string detail) {
  r.checks.push_back(Check{std::move(name), passed, std::move(detail)});
}

void metric(RunReport& r, const std::string& name, double value, double se, std::uint64_t samples) {
  r.metrics[name] = Metric{value, se, samples};
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  long double s = 0.0L;
  for (double x : v) s += x;
  out.mean = static_cast<double>(s / static_cast<long double>(v.size()));
  if (v.size() < 2) return out;
  long double q = 0.0L;
  for (double x : v) q += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(static_cast<double>(q / static_cast<long double>(v.size() - 1)) / static_cast<double>(v.size()));
  return out;
}

// ---- systole -----------------------------------------------------------------

// Minimum over the coefficient box [-box, box]^m of |B c|, c != 0.
double brute_force_systole(const Mat& b, int box) {
  const int m = static_cast<int>(b.cols());
  const Vec last = b.col(m - 1);
  const double ll = last.squaredNorm();
  std::vector<int> c(static_cast<size_t>(m - 1), -box);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXi arg = Eigen::VectorXi::Zero(m);
  for (;;) {
    Vec base = Vec::Zero(m);
    bool zero = true;
    for (int k = 0; k < m - 1; ++k) {
      base += c[static_cast<size_t>(k)] * b.col(k);
      zero = zero && c[static_cast<size_t>(k)] == 0;
    }
    const double bb = base.squaredNorm();
    const double bl = base.dot(last);
    for (int z = -box; z <= box; ++z) {
      if (zero && z == 0) continue;
      const double n2 = bb + 2.0 * z * bl + double(z) * z * ll;
      if (n2 < best) {
        best = n2;
        for (int k = 0; k < m - 1; ++k) arg(k) = c[static_cast<size_t>(k)];
        arg(m - 1) = z;
      }
    }
    int k = 0;
    while (k < m - 1 && ++c[static_cast<size_t>(k)] > box) c[static_cast<size_t>(k++)] = -box;
    if (k == m - 1) break;
  }
  // Recompute the winner directly to avoid cancellation in the expansion.
  return (b * arg.cast<double>()).norm();
}

void run_systole(Context& ctx) {
  const int m = ctx.p.at("m").get<int>();
  const auto n = count_of(ctx.p, "samples");
  const int box = ctx.p.at("box").get<int>();
  const double tol = ctx.p.at("tolerance").get<double>();
  struct Row {
    double enumerated, brute;
    long long nodes;
  };
  const auto rows = parallel_map<Row>(n, ctx.threads, [&](std::size_t i) {
    CounterRng rng(ctx.seed, streams::lattice_sample, i);
    const auto lattice = lattices::sample_uniform_entries(m, rng);
    const auto sv = lattices::shortest_vector(lattice);
    return Row{sv.length, brute_force_systole(lattice.basis(), box), sv.nodes};
  });
  auto& t = table(ctx.out, "systole", {"m", "systole_enum", "systole_brute", "abs_diff", "nodes"});
  std::size_t mismatches = 0;
  double worst = 0.0;
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = std::fabs(rows[i].enumerated - rows[i].brute);
    if (diff > tol * std::max(1.0, rows[i].brute)) ++mismatches;
    worst = std::max(worst, diff);
    values.push_back(rows[i].enumerated);
    t.add(i, {cell(m), cell(rows[i].enumerated), cell(rows[i].brute), cell(diff), cell(rows[i].nodes)});
  }
  const auto ms = mean_se(values);
  metric(ctx.out, "mismatches", double(mismatches), 0.0, n);
  metric(ctx.out, "max_abs_diff", worst, 0.0, n);
  metric(ctx.out, "mean_systole", ms.mean, ms.se, n);
  check(ctx.out, "zero_mismatches", mismatches == 0,
        std::to_string(mismatches) + " of " + std::to_string(n) + " lattices disagree with the coefficient box");
}

// ---- geodesic ----------------------------------------------------------------

void run_geodesic(Context& ctx) {
  const auto want = count_of(ctx.p, "excursions");
  const auto max_starts = count_of(ctx.p, "max_starts");
  const double threshold = ctx.p.at("threshold").get<double>();
  const double t = ctx.p.at("t").get<double>();
  const double h = ctx.p.at("h").get<double>();
  const double thick = modular::default_thick_depth();

  struct Found {
    std::size_t start;
    modular::Piece piece;
    double max_depth;
    modular::DeckClassVerdict verdict;
  };
  std::vector<Found> found;
  constexpr std::size_t kBatch = 16;
  std::size_t next = 0;
  while (found.size() < want && next < max_starts) {
    const std::size_t n = std::min(kBatch, max_starts - next);
    const auto lists = parallel_map<std::vector<Found>>(n, ctx.threads, [&](std::size_t b) {
      const std::size_t idx = next + b;
      CounterRng rng(ctx.seed, streams::starts, idx);
      const auto seg = modular::flow_orbit(modular::haar_point(rng), modular::Flow::geodesic, t, h);
      const auto dec = modular::decompose_excursions(seg, threshold);
      std::vector<Found> out;
      for (const auto& piece : dec.omegas()) {
        // Pieces touching either end of the segment are truncated excursions.
        if (piece.first == 0 || piece.last + 1 >= seg.samples().size()) continue;
        double deepest = 0.0;
        for (std::size_t s = piece.first; s <= piece.last; ++s) deepest = std::max(deepest, seg.samples()[s].depth);
        out.push_back(Found{idx, piece, deepest, modular::excursion_deck_class(seg, piece)});
      }
      return out;
    });
    for (const auto& l : lists)
      for (const auto& f : l)
        if (found.size() < want) found.push_back(f);
    next += n;
  }
  auto& te = table(ctx.out, "excursions",
                   {"start", "first", "last", "duration", "max_depth", "single_parabolic", "monotone", "exponents", "parabolic"});
  std::size_t pass = 0;
  for (std::size_t k = 0; k < found.size(); ++k) {
    const auto& f = found[k];
    pass += f.verdict.single_parabolic ? 1 : 0;
    const auto& P = f.verdict.parabolic;
    te.add(k, {cell(f.start), cell(f.piece.first), cell(f.piece.last), cell(f.piece.duration()), cell(f.max_depth),
               cell(f.verdict.single_parabolic), cell(f.verdict.monotone), cell(f.verdict.exponents.size()),
               std::to_string(P.a) + ";" + std::to_string(P.b) + ";" + std::to_string(P.c) + ";" + std::to_string(P.d)});
  }
  metric(ctx.out, "excursions_found", double(found.size()), 0.0, found.size());
  metric(ctx.out, "excursions_single_parabolic", double(pass), 0.0, found.size());
  check(ctx.out, "excursion_deck_class", found.size() == want && pass == want,
        std::to_string(pass) + "/" + std::to_string(found.size()) + " excursions single parabolic, " + std::to_string(want) +
            " requested");

  const auto n_seg = count_of(ctx.p, "chi_segments");
  if (n_seg == 0) return;
  const double length = ctx.p.at("chi_length").get<double>();
  const auto rows = parallel_map<modular::ChiRow>(n_seg, ctx.threads, [&](std::size_t i) {
    CounterRng rng(ctx.seed, streams::chi_segments, i);
    modular::ModularPoint x = modular::haar_point(rng);
    while (x.depth() > thick) x = modular::haar_point(rng);
    // Extend until the endpoint is thick as well.
    for (double len = length;; len += 1.0) {
      require(len <= length + 1000.0, ErrorCode::iteration_cap_exceeded, "no thick endpoint within 1000 time units");
      const auto seg = modular::flow_orbit(x, modular::Flow::geodesic, len, h);
      if (seg.end().depth() <= thick)
        return modular::chi_stats({seg}, [](const modular::OrbitSegment& s) { return cocycles::segment_growth_return(s); })
            .rows.front();
    }
  });
  auto& tc = table(ctx.out, "chi", {"length", "growth", "ratio", "running_sup"});
  double sup = -std::numeric_limits<double>::infinity();
  std::vector<double> ratios;
  for (std::size_t i = 0; i < n_seg; ++i) {
    sup = std::max(sup, rows[i].ratio);
    ratios.push_back(rows[i].ratio);
    tc.add(i, {cell(rows[i].length), cell(rows[i].growth), cell(rows[i].ratio), cell(sup)});
  }
  const auto ms = mean_se(ratios);
  metric(ctx.out, "chi_max", sup, 0.0, n_seg);
  metric(ctx.out, "chi_mean", ms.mean, ms.se, n_seg);
  const double tol = ctx.p.at("chi_tolerance").get<double>();
  check(ctx.out, "chi_max_near_half", std::fabs(sup - 0.5) <= tol,
        "chi_max " + format_number(sup) + " against 1/2 +- " + format_number(tol));
}

// ---- km ----------------------------------------------------------------------

void run_km(Context& ctx) {
  const int m = ctx.p.at("m").get<int>();
  const double T = ctx.p.at("T").get<double>();
  const auto eps = doubles(ctx.p.at("eps"));
  const double fit_eps = ctx.p.at("fit_eps").get<double>();
  const double alpha = 1.0 / double(m * m);
  const std::size_t fit_k = static_cast<std::size_t>(std::find(eps.begin(), eps.end(), fit_eps) - eps.begin());
  auto& t = table(ctx.out, "km", {"start", "eps", "fraction", "bound", "rho"});
  std::size_t row = 0;
  for (const auto& start_json : ctx.p.at("starts")) {
    const auto start = start_json.get<std::string>();
    Mat x = Mat::Identity(m, m);
    if (start == "generic") {
      if (m == 2) {
        x = modular::point_from_z(std::numbers::phi - 1.5, 1.1, 0.4).rep();
      } else {
        CounterRng rng(ctx.seed, streams::starts, 0);
        x = lattices::sample_uniform_entries(m, rng).reduced();
      }
    }
    const auto km = measures::km_fractions(x, T, eps, 0.0, ctx.threads);
    const double c_hat = km.fraction[fit_k] / std::pow(fit_eps / km.rho, alpha);
    std::size_t violations = 0;
    bool monotone = true;
    std::vector<std::size_t> order(eps.size());
    for (std::size_t k = 0; k < eps.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return eps[a] < eps[b]; });
    for (std::size_t k = 1; k < order.size(); ++k) monotone = monotone && km.fraction[order[k - 1]] <= km.fraction[order[k]];
    for (std::size_t k = 0; k < eps.size(); ++k) {
      const double bound = c_hat * std::pow(eps[k] / km.rho, alpha);
      if (eps[k] < fit_eps && km.fraction[k] > bound) ++violations;
      t.add(row++, {start, cell(eps[k]), cell(km.fraction[k]), cell(bound), cell(km.rho)});
      metric(ctx.out, "fraction[" + start + ",eps=" + format_number(eps[k]) + "]", km.fraction[k], 0.0, km.samples);
    }
    metric(ctx.out, "C_hat[" + start + "]", c_hat, 0.0, km.samples);
    check(ctx.out, "km_bound[" + start + "]", violations == 0,
          std::to_string(violations) + " eps values exceed C_hat (eps/rho)^(1/m^2) with C_hat = " + format_number(c_hat));
    check(ctx.out, "km_monotone[" + start + "]", monotone, "fractions non-decreasing in eps");
  }
}

// ---- cuspmass ----------------------------------------------------------------

void run_cuspmass(Context& ctx) {
  const auto sizes = ctx.p.at("sizes").get<std::vector<std::size_t>>();
  const auto reps = count_of(ctx.p, "replicates");
  const double eta_s = ctx.p.at("eta_stable").get<double>();
  const double eta_d = ctx.p.at("eta_divergent").get<double>();
  const auto etas = doubles(ctx.p.at("etas"));

  struct Rep {
    double stable = 0.0, stable_se = 0.0, log_div = 0.0;
  };
  std::vector<double> grid_depth, grid_sys;
  const std::size_t jobs = sizes.size() * reps;
  const auto out = parallel_map<Rep>(jobs, ctx.threads, [&](std::size_t job) {
    const std::size_t k = job / reps, r = job % reps;
    const std::size_t n = sizes[k];
    const bool keep = r == 0 && k + 1 == sizes.size();
    std::vector<double> dep, sys;
    long double s1 = 0, s2 = 0, s3 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      CounterRng rng(ctx.seed, static_cast<std::uint32_t>(streams::replicate_base + job), i);
      const auto x = modular::haar_point(rng);
      const double d = x.depth();
      const long double e = std::exp(static_cast<long double>(eta_s * d));
      s1 += e;
      s2 += e * e;
      s3 += std::exp(static_cast<long double>(eta_d * d));
      if (keep) {
        dep.push_back(d);
        sys.push_back(x.systole());
      }
    }
    if (keep) {
      grid_depth = std::move(dep);
      grid_sys = std::move(sys);
    }
    const long double nn = static_cast<long double>(n);
    const long double mean = s1 / nn;
    const long double var = std::max<long double>(0.0L, s2 / nn - mean * mean);
    return Rep{static_cast<double>(mean), static_cast<double>(std::sqrt(var / nn)), static_cast<double>(std::log(s3 / nn))};
  });

  auto& tr = table(ctx.out, "replicates", {"size", "replicate", "stable_mass", "stable_stderr", "log_divergent_mass"});
  std::vector<MeanSe> growth_by_size;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    std::vector<double> logs;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& o = out[k * reps + r];
      tr.add(k * reps + r, {cell(sizes[k]), cell(r), cell(o.stable), cell(o.stable_se), cell(o.log_div)});
      logs.push_back(o.log_div);
    }
    growth_by_size.push_back(mean_se(logs));
    const auto& first = out[k * reps];
    metric(ctx.out, "exp_mass[eta=" + format_number(eta_s) + ",n=" + std::to_string(sizes[k]) + "]", first.stable,
           first.stable_se, sizes[k]);
    metric(ctx.out, "log_exp_mass[eta=" + format_number(eta_d) + ",n=" + std::to_string(sizes[k]) + "]",
           growth_by_size.back().mean, growth_by_size.back().se, sizes[k] * reps);
  }
  metric(ctx.out, "exact_exp_mass[eta=" + format_number(eta_s) + "]", measures::haar_exp_moment(eta_s), 0.0, 0);
  metric(ctx.out, "critical_eta", 2.0, 0.0, 0);

  // Stability across sizes at the stable exponent.
  bool stable = true;
  std::string detail;
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    const auto& a = out[(k - 1) * reps];
    const auto& b = out[k * reps];
    const double band = 3.0 * std::hypot(a.stable_se, b.stable_se);
    stable = stable && std::fabs(a.stable - b.stable) <= band;
    detail += format_number(a.stable) + " vs " + format_number(b.stable) + " (3 sigma " + format_number(band) + ") ";
  }
  check(ctx.out, "stable[eta=" + format_number(eta_s) + "]", stable, detail);

  // Divergence: log mean e^{eta depth} keeps growing with the sample size.
  bool divergent = true;
  detail.clear();
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    const double g = growth_by_size[k].mean - growth_by_size[k - 1].mean;
    const double se = std::hypot(growth_by_size[k].se, growth_by_size[k - 1].se);
    divergent = divergent && g > 5.0 * se;
    metric(ctx.out, "log_growth[eta=" + format_number(eta_d) + ",step=" + std::to_string(k) + "]", g, se, 2 * reps);
    detail += "growth " + format_number(g) + " vs 5 sigma " + format_number(5.0 * se) + " ";
  }
  check(ctx.out, "divergent[eta=" + format_number(eta_d) + "]", divergent, detail);

  const std::vector<double> w(grid_depth.size(), 1.0 / double(grid_depth.size()));
  const auto grid = measures::cusp_mass_from(grid_depth, grid_sys, w, etas);
  auto& tg = table(ctx.out, "eta_grid", {"eta", "exp_mass", "exp_stderr", "sys_mass", "sys_stderr", "exact"});
  bool monotone = true;
  for (std::size_t k = 0; k < etas.size(); ++k) {
    if (k > 0) monotone = monotone && grid.exp_mass[k].value >= grid.exp_mass[k - 1].value;
    tg.add(k, {cell(etas[k]), cell(grid.exp_mass[k].value), cell(grid.exp_mass[k].std_error), cell(grid.sys_mass[k].value),
               cell(grid.sys_mass[k].std_error), cell(measures::haar_exp_moment(etas[k]))});
  }
  check(ctx.out, "monotone_in_eta", monotone, "exp mass non-decreasing along the sorted eta grid");
}

// ---- folner ------------------------------------------------------------------

void run_folner(Context& ctx) {
  const int m = ctx.p.at("m").get<int>();
  const double delta = ctx.p.at("delta").get<double>();
  const double r_rate = ctx.p.at("r_rate").get<double>();
  const auto n_def = count_of(ctx.p, "defect_samples");
  auto& td = table(ctx.out, "defect", {"t_n", "defect", "stderr", "bound", "limit"});
  std::size_t row = 0;
  bool all = true;
  std::string detail;
  for (double tn : doubles(ctx.p.at("defect_t_n"))) {
    const measures::FolnerBox box{m, tn, delta, r_rate};
    const measures::SolvableElement a1{grouplin::a_generator_log(m), Vec()};
    const auto d = measures::folner_defect(box, a1, n_def, ctx.seed, ctx.threads);
    const double limit = 2.0 / tn + 3.0 * d.std_error;
    all = all && d.value <= limit;
    td.add(row++, {cell(tn), cell(d.value), cell(d.std_error), cell(2.0 / tn), cell(limit)});
    metric(ctx.out, "defect[t_n=" + format_number(tn) + "]", d.value, d.std_error, d.samples);
    detail += format_number(d.value) + "<=" + format_number(limit) + " ";
  }
  if (row > 0) check(ctx.out, "defect_bound", all, detail);

  const auto fam_t = doubles(ctx.p.at("family_t_n"));
  if (fam_t.empty()) return;
  const int fm = ctx.p.at("family_m").get<int>();
  const auto atoms = count_of(ctx.p, "family_atoms");
  const double eta = ctx.p.at("eta").get<double>();
  std::vector<measures::EmpiricalMeasure> family;
  for (double tn : fam_t)
    family.push_back(measures::folner_average(Mat::Identity(fm - 1, fm - 1), measures::FolnerBox{fm, tn, delta, r_rate}, atoms,
                                              ctx.seed, ctx.threads));
  const auto fam = measures::cusp_mass(family, {eta}, ctx.threads);
  auto& tf = table(ctx.out, "family", {"t_n", "eta", "exp_mass", "exp_stderr", "sys_mass", "sys_stderr"});
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t k = 0; k < fam_t.size(); ++k) {
    const auto& e = fam.reports[k].exp_mass.front();
    const auto& s = fam.reports[k].sys_mass.front();
    lo = std::min(lo, e.value);
    hi = std::max(hi, e.value);
    tf.add(k, {cell(fam_t[k]), cell(eta), cell(e.value), cell(e.std_error), cell(s.value), cell(s.std_error)});
    metric(ctx.out, "cusp_mass[t_n=" + format_number(fam_t[k]) + "]", e.value, e.std_error, e.samples);
  }
  metric(ctx.out, "family_sup", hi, 0.0, atoms * fam_t.size());
  if (fam_t.size() >= 2) {
    const double max_ratio = ctx.p.at("max_ratio").get<double>();
    metric(ctx.out, "family_ratio", hi / lo, 0.0, atoms * fam_t.size());
    check(ctx.out, "family_ratio", hi / lo <= max_ratio, "max/min " + format_number(hi / lo) + " <= " + format_number(max_ratio));
  }
}

// ---- tc ----------------------------------------------------------------------

void run_tc(Context& ctx) {
  const int m = ctx.p.at("m").get<int>();
  measures::TcParams tp;
  tp.t_n = ctx.p.at("t_n").get<double>();
  tp.t = ctx.p.at("t").get<double>();
  tp.s = ctx.p.at("s").get<double>();
  tp.s_c = doubles(ctx.p.at("s_c"));
  tp.delta = ctx.p.at("delta").get<double>();
  const auto grid = doubles(ctx.p.at("c_grid"));
  const auto n = count_of(ctx.p, "samples");
  const auto prof = measures::tc_profile(Mat::Identity(m - 1, m - 1), tp, grid, n, ctx.seed, ctx.threads);
  auto& t = table(ctx.out, "tc", {"c", "fraction", "stderr", "hits"});
  for (std::size_t k = 0; k < prof.rows.size(); ++k) {
    const auto& r = prof.rows[k];
    t.add(k, {cell(r.c), cell(r.fraction), cell(r.std_error), cell(r.hits)});
  }
  metric(ctx.out, "slope", prof.slope, prof.slope_stderr, prof.samples);
  metric(ctx.out, "slope_upper95", prof.slope_upper95, 0.0, prof.samples);
  metric(ctx.out, "fitted_points", prof.fitted_points, 0.0, prof.samples);
  check(ctx.out, "slope_negative", prof.fitted_points >= 2 && prof.slope_upper95 < 0.0,
        "slope " + format_number(prof.slope) + ", upper 95% " + format_number(prof.slope_upper95) + " over " +
            std::to_string(prof.fitted_points) + " points");
}

// ---- lyap --------------------------------------------------------------------

void run_lyap(Context& ctx) {
  const auto kind = ctx.p.at("cocycle").get<std::string>();
  const auto n_starts = count_of(ctx.p, "starts");
  const auto horizon = ctx.p.at("horizon").get<long long>();
  const double step = ctx.p.at("step").get<double>();
  const double rate = ctx.p.at("rate").get<double>();
  std::unique_ptr<cocycles::TemperedCocycle> owned;
  Mat s = modular::flow_matrix(modular::Flow::geodesic, step);
  double expected = 0.5 * step;
  if (kind == "return") {
    owned = std::make_unique<cocycles::ReturnCocycleLinear>();
  } else if (kind == "identity") {
    owned = std::make_unique<cocycles::IdentityCocycle>(2, 2);
    expected = 0.0;
  } else {
    owned = cocycles::diagonal_test_cocycle(2, {grouplin::a_generator_log(2)}, {{rate, -rate}});
    expected = rate * step;
  }
  std::vector<Mat> starts;
  for (std::size_t i = 0; i < n_starts; ++i) {
    CounterRng rng(ctx.seed, streams::starts, i);
    starts.push_back(modular::haar_point(rng).rep());
  }
  const auto est = cocycles::top_lyapunov(*owned, s, starts, horizon, ctx.threads);
  metric(ctx.out, "lyapunov", est.value, est.std_error, est.starts);
  metric(ctx.out, "expected", expected, 0.0, 0);
  const double tol = ctx.p.at("tolerance").get<double>();
  check(ctx.out, "lyapunov_value", est.finite && std::fabs(est.value - expected) <= tol,
        format_number(est.value) + " against " + format_number(expected) + " +- " + format_number(tol));
  auto& t = table(ctx.out, "subadditivity", {"n", "m", "mean", "stderr", "max"});
  bool ok = true;
  for (std::size_t k = 0; k < est.subadditivity.size(); ++k) {
    const auto& r = est.subadditivity[k];
    ok = ok && std::isfinite(r.mean) && r.mean <= 3.0 * r.std_error + 1e-12;
    t.add(k, {cell(r.n), cell(r.m), cell(r.mean), cell(r.std_error), cell(r.max)});
  }
  check(ctx.out, "subadditivity", ok, std::to_string(est.subadditivity.size()) + " nested horizons, residual <= 3 sigma");
}

// ---- oseledets ---------------------------------------------------------------

void run_oseledets(Context& ctx) {
  const int m = ctx.p.at("m").get<int>();
  const auto ra = doubles(ctx.p.at("rates_a"));
  const auto rb = doubles(ctx.p.at("rates_b"));
  const bool twisted = ctx.p.at("twisted").get<bool>();
  const auto steps = ctx.p.at("steps").get<long long>();
  const double tol = ctx.p.at("tolerance").get<double>();
  const std::vector<Vec> gens{grouplin::a_generator_log(m), grouplin::b_generator_log(m)};
  const auto coc = cocycles::diagonal_test_cocycle(m, gens, {ra, rb}, twisted);
  const cocycles::FlowGenerator g1{"a", grouplin::cartan_element(grouplin::CartanVector(gens[0])).matrix()};
  const cocycles::FlowGenerator g2{"b", grouplin::cartan_element(grouplin::CartanVector(gens[1])).matrix()};
  CounterRng rng(ctx.seed, streams::starts, 0);
  const Mat x0 = lattices::sample_uniform_entries(m, rng).reduced();
  const auto rep = cocycles::oseledets_functionals(*coc, g1, g2, x0, steps);

  std::vector<std::size_t> order(ra.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ra[a] + rb[a] > ra[b] + rb[b]; });
  auto rel = [](double v, double e) { return e == 0.0 ? std::fabs(v) : std::fabs(v - e) / std::fabs(e); };
  auto& t = table(ctx.out, "functionals", {"functional", "a", "b", "expected_a", "expected_b", "rel_error", "relative_residual"});
  double worst = 0.0, worst_res = 0.0;
  for (std::size_t k = 0; k < rep.functionals.size(); ++k) {
    const auto& f = rep.functionals[k];
    const double ea = ra[order[k]], eb = rb[order[k]];
    const double va = f.values.at("a"), vb = f.values.at("b");
    const double err = std::max(rel(va, ea), rel(vb, eb));
    worst = std::max(worst, err);
    worst_res = std::max(worst_res, f.relative_residual);
    t.add(k, {cell(k), cell(va), cell(vb), cell(ea), cell(eb), cell(err), cell(f.relative_residual)});
  }
  metric(ctx.out, "max_rel_error", worst, 0.0, static_cast<std::uint64_t>(steps));
  metric(ctx.out, "max_relative_residual", worst_res, 0.0, static_cast<std::uint64_t>(steps));
  metric(ctx.out, "max_condition", rep.max_condition, 0.0, static_cast<std::uint64_t>(steps));
  check(ctx.out, "rates_recovered", !rep.ill_conditioned && worst <= tol,
        "worst relative error " + format_number(worst) + " <= " + format_number(tol));
  check(ctx.out, "additivity", worst_res < tol, "worst relative residual " + format_number(worst_res) + " < " + format_number(tol));
}

// ---- decompose ---------------------------------------------------------------

void run_decompose(Context& ctx) {
  const int m = ctx.p.at("m").get<int>();
  const auto n = count_of(ctx.p, "samples");
  const int letters = ctx.p.at("letters").get<int>();
  const auto kmax = ctx.p.at("kmax").get<std::vector<long long>>();
  struct Row {
    long long kmax;
    double log_norm;
    int factors;
    std::size_t letters;
    double cost;
    bool exact;
  };
  const auto rows = parallel_map<Row>(n, ctx.threads, [&](std::size_t i) {
    CounterRng rng(ctx.seed, streams::word_corpus, i);
    const long long k = kmax[i % kmax.size()];
    const auto g = wordgeom::word_eval(wordgeom::random_word(m, letters, k, rng));
    const auto rep = wordgeom::lmr_decompose(g);
    return Row{k, g.log_norm(), rep.factor_count, rep.word.letter_count(), rep.log_cost, wordgeom::word_eval(rep.word) == g};
  });
  struct Decade {
    std::size_t count = 0;
    double c = 0.0;
    double sum = 0.0;
  };
  std::map<int, Decade> decades;
  auto& t = table(ctx.out, "corpus", {"kmax", "log_norm", "decade", "factors", "letters", "log_cost", "ratio", "exact"});
  std::size_t exact = 0;
  int max_factors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i];
    const double ratio = r.cost / (1.0 + r.log_norm);
    const int decade = static_cast<int>(std::floor(r.log_norm / std::numbers::ln10));
    auto& d = decades[decade];
    ++d.count;
    d.c = std::max(d.c, ratio);
    d.sum += ratio;
    exact += r.exact ? 1 : 0;
    max_factors = std::max(max_factors, r.factors);
    t.add(i, {cell(r.kmax), cell(r.log_norm), cell(decade), cell(r.factors), cell(r.letters), cell(r.cost), cell(ratio), cell(r.exact)});
  }
  const int max_decade = ctx.p.at("max_decade").get<int>();
  const auto min_count = count_of(ctx.p, "min_decade_samples");
  const double band = ctx.p.at("stability").get<double>();
  auto& td = table(ctx.out, "decades", {"decade", "count", "C", "mean_ratio", "eligible"});
  double c_ref = 0.0;
  std::size_t eligible = 0, idx = 0, ref_count = 0;
  bool stable = true;
  std::string detail;
  for (const auto& [dec, d] : decades) {
    const bool use = dec < max_decade && d.count >= min_count;
    td.add(idx++, {cell(dec), cell(d.count), cell(d.c), cell(d.sum / double(d.count)), cell(use)});
    if (!use) continue;
    if (eligible++ == 0) {
      c_ref = d.c;
      ref_count = d.count;
    }
    stable = stable && d.c >= (1.0 - band) * c_ref && d.c <= (1.0 + band) * c_ref;
    detail += std::to_string(dec) + ":" + format_number(d.c) + " ";
  }
  metric(ctx.out, "reconstructed", double(exact), 0.0, n);
  metric(ctx.out, "max_factors", max_factors, 0.0, n);
  metric(ctx.out, "C_reference", c_ref, 0.0, ref_count);
  metric(ctx.out, "eligible_decades", double(eligible), 0.0, n);
  check(ctx.out, "exact_reconstruction", exact == n, std::to_string(exact) + "/" + std::to_string(n));
  const int factor_cap = ctx.p.at("max_factor_count").get<int>();
  check(ctx.out, "factor_count", max_factors <= factor_cap,
        "max " + std::to_string(max_factors) + " <= " + std::to_string(factor_cap));
  check(ctx.out, "cost_stability", stable && eligible >= 3,
        std::to_string(eligible) + " decades within +-" + format_number(band) + " of the first: " + detail);
}

// ---- uniword -----------------------------------------------------------------

void run_uniword(Context& ctx) {
  const int m = ctx.p.at("m").get<int>();
  const int i = ctx.p.at("i").get<int>();
  const int j = ctx.p.at("j").get<int>();
  const int bits = ctx.p.at("max_bits").get<int>();
  std::vector<long long> ks;
  for (int b = 1; b <= bits; ++b) {
    if (b >= 2) ks.push_back((1LL << b) - 1);
    ks.push_back(1LL << b);
  }
  struct Row {
    std::size_t length;
    bool exact, unit;
  };
  const auto rows = parallel_map<Row>(ks.size(), ctx.threads, [&](std::size_t q) {
    const auto w = wordgeom::unipotent_short_word(i, j, ks[q], m);
    bool unit = true;
    for (const auto& l : w.letters()) unit = unit && (l.k == 1 || l.k == -1);
    return Row{w.letter_count(), wordgeom::word_eval(w) == grouplin::elementary(m, i, j, ks[q]), unit};
  });
  auto& t = table(ctx.out, "words", {"k", "bits", "length", "ratio", "exact", "unit_letters"});
  double worst = 0.0, lower = 0.0, upper = 0.0;
  std::size_t exact = 0;
  bool unit = true;
  const int half = std::max(1, bits / 2);
  for (std::size_t q = 0; q < ks.size(); ++q) {
    const double l2 = std::log2(double(ks[q]));
    const int b = static_cast<int>(std::ceil(l2 - 1e-12));
    const double ratio = double(rows[q].length) / (l2 * l2);
    worst = std::max(worst, ratio);
    double& side = b <= half ? lower : upper;
    side = std::max(side, ratio);
    exact += rows[q].exact ? 1 : 0;
    unit = unit && rows[q].unit;
    t.add(q, {cell(ks[q]), cell(b), cell(rows[q].length), cell(ratio), cell(rows[q].exact), cell(rows[q].unit)});
  }
  metric(ctx.out, "max_length_ratio", worst, 0.0, ks.size());
  metric(ctx.out, "ratio_lower_half", lower, 0.0, ks.size());
  metric(ctx.out, "ratio_upper_half", upper, 0.0, ks.size());
  check(ctx.out, "exact_words", exact == ks.size() && unit, std::to_string(exact) + "/" + std::to_string(ks.size()) + " exact");
  if (bits >= 2) {
    const double growth = ctx.p.at("max_ratio_growth").get<double>();
    check(ctx.out, "quadratic_in_log", upper <= growth * lower,
          "max length/(log2 k)^2 above 2^" + std::to_string(half) + " is " + format_number(upper) + ", below " +
              format_number(lower) + ", allowed growth " + format_number(growth));
  }
  const double c = ctx.p.at("length_constant").get<double>();
  if (c > 0.0)
    check(ctx.out, "length_constant", worst <= c, "length/(log2 k)^2 " + format_number(worst) + " <= " + format_number(c));
}

// ---- sumset ------------------------------------------------------------------

void run_sumset(Context& ctx) {
  const int n_min = ctx.p.at("n_min").get<int>();
  const int n_max = ctx.p.at("n_max").get<int>();
  const auto deltas = doubles(ctx.p.at("deltas"));
  const auto sets = count_of(ctx.p, "sets");
  const double spread = ctx.p.at("density_spread").get<double>();

  struct Row {
    int n;
    double density;
    bool covered;
    long long k_min;
    std::size_t forced, paired;
  };
  auto& t = table(ctx.out, "sets", {"delta", "n", "density", "covered", "k_min", "k_delta", "forced_pairs", "found_pairs"});
  bool covered_all = true, k_ok = true, pairs_ok = true;
  std::size_t covered = 0, total = 0, row = 0;
  long long k_worst = 0;
  for (std::size_t di = 0; di < deltas.size(); ++di) {
    const double delta = deltas[di];
    const auto cc = sumsets::cover_constants(delta);
    const auto rows = parallel_map<Row>(sets, ctx.threads, [&](std::size_t q) {
      CounterRng rng(ctx.seed, streams::sumset_sets, di * sets + q);
      const int n = static_cast<int>(rng.uniform_int(n_min, n_max));
      sumsets::SymmetricSet s(n);
      for (int attempt = 0;; ++attempt) {
        require(attempt < 1000, ErrorCode::iteration_cap_exceeded, "could not draw a set above the density threshold");
        s = sumsets::SymmetricSet::random(n, std::min(1.0, delta + spread * rng.uniform()), rng);
        if (s.density() > delta) break;
      }
      const auto cover = sumsets::verify_cover(s, delta);
      const auto k = sumsets::minimal_k_oracle(s, cc.F, cc.k);
      std::size_t forced = 0, paired = 0;
      for (int l = 1; l <= n; ++l) {
        const sumsets::Point v{l, 0};
        if (!sumsets::class_pair_forced(s, v, cc.M)) continue;
        ++forced;
        const auto pr = sumsets::class_pair(s, v, cc.M);
        if (pr && s.contains(pr->a) && s.contains(pr->b) && pr->b - pr->a == sumsets::Point{pr->i * l, 0} &&
            std::abs(pr->i) >= 1 && std::abs(pr->i) <= cc.M)
          ++paired;
      }
      return Row{n, s.density(), cover.covered, k ? *k : -1, forced, paired};
    });
    for (const auto& r : rows) {
      ++total;
      covered += r.covered ? 1 : 0;
      covered_all = covered_all && r.covered;
      k_ok = k_ok && r.k_min >= 1 && r.k_min <= cc.k;
      k_worst = std::max(k_worst, r.k_min);
      pairs_ok = pairs_ok && r.forced == r.paired;
      t.add(row++, {cell(delta), cell(r.n), cell(r.density), cell(r.covered), cell(r.k_min), cell(cc.k), cell(r.forced), cell(r.paired)});
    }
  }
  const auto half = sumsets::cover_constants(0.5);
  metric(ctx.out, "covered", double(covered), 0.0, total);
  metric(ctx.out, "max_minimal_k", double(k_worst), 0.0, total);
  check(ctx.out, "verify_cover", covered_all, std::to_string(covered) + "/" + std::to_string(total));
  check(ctx.out, "minimal_k_within_k_delta", k_ok, "max minimal k " + std::to_string(k_worst));
  check(ctx.out, "class_pairs", pairs_ok, "every forced axis pair certified");
  check(ctx.out, "constants_half", half.M == 3 && half.N == 24 && half.k == 96 && half.F.n == 24,
        "(M, N, k, F) = (" + std::to_string(half.M) + ", " + std::to_string(half.N) + ", " + std::to_string(half.k) + ", B_" +
            std::to_string(half.F.n) + ")");
}

// ---- registry ----------------------------------------------------------------

std::vector<ExperimentDef> make_defs() {
  std::vector<ExperimentDef> s;
  s.push_back(ExperimentDef{
      "systole",
      "Exact systoles of random unimodular lattices against a brute-force coefficient box.",
      {{"m", 3, "lattice rank", int_in(2, 5)},
       {"samples", 1000, "number of lattices", int_in(1, 1'000'000)},
       {"box", 25, "coefficient box half-width of the oracle", int_in(1, 200)},
       {"tolerance", 1e-9, "relative agreement tolerance", real_in(0.0, 1e-3, true)}},
      {{"systole", "m, systole_enum, systole_brute, abs_diff, nodes"}},
      nullptr,
      [](const Json& p) { return p["samples"].get<double>() * std::pow(2.0 * p["box"].get<double>() + 1.0, p["m"].get<double>()); },
      run_systole});
  s.push_back(ExperimentDef{
      "geodesic",
      "Cusp excursions of random geodesics on the modular surface and the chi_max estimator of the torus cocycle.",
      {{"excursions", 100, "interior excursions to classify", int_in(1, 100'000)},
       {"threshold", 1.5, "excursion depth threshold", real_in(1.5, 20.0)},
       {"t", 200.0, "length of each geodesic", real_in(1.0, 1e5)},
       {"h", 0.05, "sampling step", real_in(0.0, 0.1, true)},
       {"max_starts", 5000, "cap on geodesics drawn", int_in(1, 1'000'000)},
       {"chi_segments", 100, "segments for chi_max (0 skips)", int_in(0, 100'000)},
       {"chi_length", 1000.0, "minimal segment length", real_in(1.0, 1e6)},
       {"chi_tolerance", 0.05, "allowed |chi_max - 1/2|", real_in(0.0, 1.0, true)}},
      {{"excursions", "start, first, last, duration, max_depth, single_parabolic, monotone, exponents, parabolic (a;b;c;d)"},
       {"chi", "length, growth, ratio, running_sup"}},
      nullptr,
      [](const Json& p) {
        return p["excursions"].get<double>() * p["t"].get<double>() / p["h"].get<double>() +
               p["chi_segments"].get<double>() * p["chi_length"].get<double>() / p["h"].get<double>();
      },
      run_geodesic});
  s.push_back(ExperimentDef{
      "km",
      "Fractions of time a highest-root unipotent orbit spends below systole eps, against C (eps/rho)^(1/m^2).",
      {{"m", 2, "lattice rank", int_in(2, 4)},
       {"T", 1e4, "orbit length", real_in(0.0, 1e7, true)},
       {"eps", Json::array({0.4, 0.2, 0.1, 0.05}), "eps grid", list_in(0.0, 10.0, 1, 64, true)},
       {"fit_eps", 0.4, "eps at which C is fitted (must be in the grid)", real_in(0.0, 10.0, true)},
       {"starts", Json::array({"identity", "generic"}), "starting points", strings_of({"identity", "generic"})}},
      {{"km", "start, eps, fraction, bound, rho"}},
      [](const Json& p) {
        std::vector<std::string> e;
        const auto eps = doubles(p["eps"]);
        if (std::find(eps.begin(), eps.end(), p["fit_eps"].get<double>()) == eps.end())
          e.push_back("params.fit_eps: must be one of the eps values");
        return e;
      },
      [](const Json& p) {
        const auto eps = doubles(p["eps"]);
        return p["T"].get<double>() / (*std::min_element(eps.begin(), eps.end()) / 10.0) * double(p["starts"].size());
      },
      run_km});
  s.push_back(ExperimentDef{
      "cuspmass",
      "Haar cusp mass on the modular surface: stability at a small exponent, replicate growth at a large one.",
      {{"sizes", Json::array({10000, 40000}), "sample sizes, increasing", list_in(10, 1e7, 2, 8, false, true)},
       {"replicates", 200, "replicates per size", int_in(1, 10'000)},
       {"eta_stable", 1.0, "exponent expected to be integrable", real_in(0.0, 2.0, true, true)},
       {"eta_divergent", 3.0, "exponent expected to diverge", real_in(2.0, 10.0, true)},
       {"etas", Json::array({0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0}), "eta grid for the table", list_in(0.0, 10.0, 1, 64)}},
      {{"replicates", "size, replicate, stable_mass, stable_stderr, log_divergent_mass"},
       {"eta_grid", "eta, exp_mass, exp_stderr, sys_mass, sys_stderr, exact"}},
      [](const Json& p) {
        std::vector<std::string> e;
        const auto sz = p["sizes"].get<std::vector<double>>();
        for (std::size_t k = 1; k < sz.size(); ++k)
          if (sz[k] <= sz[k - 1]) e.push_back("params.sizes: must be strictly increasing");
        const auto etas = doubles(p["etas"]);
        if (!std::is_sorted(etas.begin(), etas.end())) e.push_back("params.etas: must be sorted");
        return e;
      },
      [](const Json& p) {
        double total = 0.0;
        for (const auto& v : p["sizes"]) total += v.get<double>();
        return total * p["replicates"].get<double>();
      },
      run_cuspmass});
  s.push_back(ExperimentDef{
      "folner",
      "Folner defects under a^1 and the cusp mass of the averaged measures along a family of t_n.",
      {{"m", 3, "rank for the defect runs", int_in(3, 8)},
       {"delta", 0.2, "box parameter delta", real_in(0.0, 1.0, true, true)},
       {"r_rate", 2.0, "log radius per unit t_n", real_in(0.0, 1000.0, true)},
       {"defect_t_n", Json::array({10.0, 20.0, 50.0, 100.0}), "t_n values for the defect", list_in(0.0, 1e6, 0, 64, true)},
       {"defect_samples", 200000, "Monte-Carlo samples per defect", int_in(1, 100'000'000)},
       {"family_m", 4, "rank for the family", int_in(3, 8)},
       {"family_t_n", Json::array({5.0, 10.0, 20.0}), "t_n values of the family", list_in(0.0, 1e4, 0, 64, true)},
       {"family_atoms", 20000, "atoms per averaged measure", int_in(1, 10'000'000)},
       {"eta", 0.1, "cusp-mass exponent", real_in(0.0, 10.0, true)},
       {"max_ratio", 3.0, "allowed max/min family ratio", real_in(1.0, 1e6)}},
      {{"defect", "t_n, defect, stderr, bound, limit"}, {"family", "t_n, eta, exp_mass, exp_stderr, sys_mass, sys_stderr"}},
      nullptr,
      [](const Json& p) {
        return double(p["defect_t_n"].size()) * p["defect_samples"].get<double>() +
               50.0 * double(p["family_t_n"].size()) * p["family_atoms"].get<double>();
      },
      run_folner});
  s.push_back(ExperimentDef{
      "tc",
      "Profile of the set of translations with cusp depth above c, with a weighted log-linear slope fit.",
      {{"m", 4, "rank", int_in(3, 8)},
       {"t_n", 8.0, "box size", real_in(0.0, 1e4, true)},
       {"t", 4.0, "a-parameter, in (0, t_n)", real_in(0.0, 1e4, true)},
       {"s", 1.2, "b-parameter, in (delta t_n / 2, delta t_n)", real_in(0.0, 1e4, true)},
       {"s_c", Json::array({1.0}), "c-parameters, m - 3 entries in (0, sqrt t_n)", list_in(0.0, 1e4, 0, 5, true)},
       {"delta", 0.2, "box parameter delta", real_in(0.0, 1.0, true, true)},
       {"c_grid", Json::array({1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5}), "depth thresholds", list_in(0.0, 100.0, 2, 256)},
       {"samples", 100000, "translations sampled", int_in(10, 100'000'000)}},
      {{"tc", "c, fraction, stderr, hits"}},
      [](const Json& p) {
        std::vector<std::string> e;
        const double tn = p["t_n"].get<double>(), d = p["delta"].get<double>();
        const double t = p["t"].get<double>(), sv = p["s"].get<double>();
        if (!(t > 0.0 && t < tn)) e.push_back("params.t: must lie in (0, t_n)");
        if (!(sv > d * tn / 2.0 && sv < d * tn)) e.push_back("params.s: must lie in (delta t_n / 2, delta t_n)");
        const auto sc = doubles(p["s_c"]);
        if (static_cast<int>(sc.size()) != p["m"].get<int>() - 3) e.push_back("params.s_c: needs m - 3 entries");
        for (double x : sc)
          if (!(x > 0.0 && x < std::sqrt(tn))) e.push_back("params.s_c: entries must lie in (0, sqrt t_n)");
        return e;
      },
      [](const Json& p) { return 10.0 * p["samples"].get<double>(); },
      run_tc});
  s.push_back(ExperimentDef{
      "lyap",
      "Top Lyapunov exponent of a cocycle over the geodesic flow on the modular surface, with subadditivity residuals.",
      {{"cocycle", "return", "return, identity or diagonal", one_of({"return", "identity", "diagonal"})},
       {"rate", 0.3, "rate of the diagonal cocycle", real_in(-100.0, 100.0)},
       {"starts", 4, "Haar starting points", int_in(1, 10'000)},
       {"horizon", 100000, "number of flow steps", int_in(10, 100'000'000)},
       {"step", 1.0, "flow time per step", real_in(0.0, 100.0, true)},
       {"tolerance", 0.05, "allowed deviation from the expected exponent", real_in(0.0, 10.0, true)}},
      {{"subadditivity", "n, m, mean, stderr, max"}},
      nullptr,
      [](const Json& p) { return p["starts"].get<double>() * p["horizon"].get<double>(); },
      run_lyap});
  s.push_back(ExperimentDef{
      "oseledets",
      "Lyapunov functionals of a diagonal test cocycle over two commuting Cartan flows.",
      {{"m", 3, "rank", int_in(3, 8)},
       {"rates_a", Json::array({0.7, -0.2, 0.1}), "fiber rates along a", list_in(-100.0, 100.0, 1, 6)},
       {"rates_b", Json::array({-0.3, 0.5, 0.25}), "fiber rates along b", list_in(-100.0, 100.0, 1, 6)},
       {"twisted", true, "conjugate by a bounded point-dependent twist", nullptr},
       {"steps", 20000, "steps per flow", int_in(10, 10'000'000)},
       {"tolerance", 0.02, "relative tolerance for rates and additivity", real_in(0.0, 1.0, true)}},
      {{"functionals", "functional, a, b, expected_a, expected_b, rel_error, relative_residual"}},
      [](const Json& p) {
        std::vector<std::string> e;
        if (p["rates_a"].size() != p["rates_b"].size()) e.push_back("params.rates_b: must have as many entries as rates_a");
        return e;
      },
      [](const Json& p) { return 3.0 * p["steps"].get<double>() * double(p["rates_a"].size()); },
      run_oseledets});
  s.push_back(ExperimentDef{
      "decompose",
      "Exact decomposition of random products of elementary matrices, with factor counts and log-cost per norm decade.",
      {{"m", 4, "rank", int_in(3, 8)},
       {"samples", 1000, "words in the corpus", int_in(1, 1'000'000)},
       {"letters", 50, "letters per random word", int_in(1, 10'000)},
       {"kmax", Json::array({1, 2, 3, 4, 5, 6, 7, 8}), "exponent bounds, cycled over the corpus", list_in(1, 1e9, 1, 64, false, true)},
       {"max_factor_count", 60, "allowed factors per decomposition", int_in(1, 1'000'000)},
       {"max_decade", 12, "decades at or above this are not compared", int_in(1, 1000)},
       {"min_decade_samples", 20, "samples needed for a decade to count", int_in(1, 1'000'000)},
       {"stability", 0.5, "relative band around the first decade's C", real_in(0.0, 10.0, true)}},
      {{"corpus", "kmax, log_norm, decade, factors, letters, log_cost, ratio, exact"},
       {"decades", "decade, count, C, mean_ratio, eligible"}},
      nullptr,
      [](const Json& p) { return p["samples"].get<double>() * p["letters"].get<double>(); },
      run_decompose});
  s.push_back(ExperimentDef{
      "uniword",
      "Short unit-letter words for E_ij^k built from commutators, checked exactly.",
      {{"m", 4, "rank", int_in(3, 8)},
       {"i", 1, "row index", int_in(1, 8)},
       {"j", 2, "column index", int_in(1, 8)},
       {"max_bits", 30, "largest exponent is 2^max_bits", int_in(1, 62)},
       {"max_ratio_growth", 1.5, "allowed growth of length/(log2 k)^2 from the lower to the upper half of bits",
        real_in(1.0, 100.0)},
       {"length_constant", 0.0, "bound on length/(log2 k)^2; 0 disables", real_in(0.0, 1e6)}},
      {{"words", "k, bits, length, ratio, exact, unit_letters"}},
      [](const Json& p) {
        std::vector<std::string> e;
        const int m = p["m"].get<int>(), i = p["i"].get<int>(), j = p["j"].get<int>();
        if (i > m || j > m || i == j) e.push_back("params.i: indices must be distinct and at most m");
        return e;
      },
      [](const Json& p) {
        const double b = p["max_bits"].get<double>();
        return 2.0 * b * b * b;
      },
      run_uniword});
  s.push_back(ExperimentDef{
      "sumset",
      "Exhaustive covering of B_n by F_delta plus sums of a random symmetric set, with minimal k and class pairs.",
      {{"n_min", 1, "smallest ball radius", int_in(1, 4096)},
       {"n_max", 40, "largest ball radius", int_in(1, 4096)},
       {"deltas", Json::array({0.3, 0.5}), "density thresholds", list_in(0.0, 1.0, 1, 16, true)},
       {"sets", 200, "random sets per delta", int_in(1, 1'000'000)},
       {"density_spread", 0.3, "keep probability is delta + spread * U[0,1)", real_in(0.0, 1.0, true)}},
      {{"sets", "delta, n, density, covered, k_min, k_delta, forced_pairs, found_pairs"}},
      [](const Json& p) {
        std::vector<std::string> e;
        if (p["n_min"].get<int>() > p["n_max"].get<int>()) e.push_back("params.n_min: must not exceed n_max");
        for (double d : doubles(p["deltas"]))
          if (!(d < 1.0)) e.push_back("params.deltas: entries must be below 1");
        return e;
      },
      [](const Json& p) {
        const double n = p["n_max"].get<double>();
        double k = 0.0;
        for (double d : doubles(p["deltas"])) k = std::max(k, double(sumsets::cover_constants(d).k));
        return double(p["deltas"].size()) * p["sets"].get<double>() * (2 * n + 1) * (2 * n + 1) * std::min(k, 10.0);
      },
      run_sumset});
  return s;
}

const std::vector<ExperimentDef>& defs() {
  static const std::vector<ExperimentDef> all = make_defs();
  return all;
}

const ExperimentDef& def_for(const std::string& id) {
  for (const auto& s : defs())
    if (s.id == id) return s;
  fail(ErrorCode::invalid_argument, "experiment: unknown id '" + id + "'");
}

Json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json o = Json::object();
    for (const auto& [k, v] : *t) o[std::string(k.str())] = toml_to_json(v);
    return o;
  }
  if (const auto* a = node.as_array()) {
    Json o = Json::array();
    for (const auto& v : *a) o.push_back(toml_to_json(v));
    return o;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  fail(ErrorCode::parse_error, "config: dates and times are not supported");
}

}  // namespace

void Table::add(std::uint64_t sample, std::vector<std::string> cells) {
  cells.insert(cells.begin(), std::to_string(sample));
  rows.push_back(std::move(cells));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (const auto& s : defs()) out.push_back(s.id);
    return out;
  }();
  return ids;
}

Json default_params(const std::string& id) {
  Json p = Json::object();
  for (const auto& ps : def_for(id).params) p[ps.name] = ps.def;
  return p;
}

std::string experiment_help(const std::string& id) {
  const ExperimentDef& s = def_for(id);
  std::ostringstream out;
  out << s.about << "\n\nParameters ([params] table of the config):\n";
  for (const auto& p : s.params) out << "  " << p.name << " = " << p.def.dump() << "  " << p.help << "\n";
  out << "\nCSV files (columns after experiment, seed, sample):\n";
  for (const auto& t : s.tables) out << "  " << s.id << "_" << t.name << ".csv: " << t.columns << "\n";
  return out.str();
}

ExperimentConfig parse_config(const std::string& toml_text) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: line " << e.source().begin.line << ", column " << e.source().begin.column << ": " << e.description();
    fail(ErrorCode::parse_error, msg.str());
  }
  const Json j = toml_to_json(doc);
  ExperimentConfig c;
  std::vector<std::string> errors;
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") {
      if (value.is_string())
        c.experiment = value.get<std::string>();
      else
        errors.push_back("experiment: expected a string");
    } else if (key == "seed") {
      if (value.is_number_integer() && value.get<long long>() >= 0)
        c.seed = value.get<std::uint64_t>();
      else
        errors.push_back("seed: expected a non-negative integer");
    } else if (key == "threads") {
      if (value.is_number_integer() && value.get<long long>() >= 1 && value.get<long long>() <= 1024)
        c.threads = value.get<int>();
      else
        errors.push_back("threads: expected an integer in [1, 1024]");
    } else if (key == "budget") {
      if (value.is_number() && value.get<double>() > 0.0)
        c.budget = value.get<double>();
      else
        errors.push_back("budget: expected a positive number");
    } else if (key == "params") {
      if (value.is_object())
        c.params = value;
      else
        errors.push_back("params: expected a table");
    } else {
      errors.push_back(key + ": unknown field");
    }
  }
  if (!errors.empty()) {
    std::string all;
    for (const auto& e : errors) all += (all.empty() ? "" : "\n") + e;
    fail(ErrorCode::invalid_argument, all);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ExperimentConfig validate(const ExperimentConfig& config) {
  const ExperimentDef& s = def_for(config.experiment);
  ExperimentConfig out = config;
  require(config.params.is_object(), ErrorCode::invalid_argument, "params: expected a table");
  std::vector<std::string> errors;
  for (const auto& [key, value] : config.params.items()) {
    const bool known = std::any_of(s.params.begin(), s.params.end(), [&](const ParamDef& p) { return p.name == key; });
    if (!known) errors.push_back("params." + key + ": unknown parameter for " + s.id);
  }
  Json filled = Json::object();
  for (const auto& p : s.params) {
    const Json v = config.params.contains(p.name) ? config.params.at(p.name) : p.def;
    if (auto e = type_error(p.def, v); !e.empty()) {
      errors.push_back("params." + p.name + ": " + e);
      continue;
    }
    if (p.check) {
      if (auto e = p.check(v); !e.empty()) {
        errors.push_back("params." + p.name + ": " + e);
        continue;
      }
    }
    filled[p.name] = v;
  }
  if (errors.empty() && s.cross)
    for (auto& e : s.cross(filled)) errors.push_back(std::move(e));
  if (config.threads < 1) errors.push_back("threads: must be at least 1");
  if (config.budget && !(*config.budget > 0.0)) errors.push_back("budget: must be positive");
  if (!errors.empty()) {
    std::string all;
    for (const auto& e : errors) all += (all.empty() ? "" : "\n") + e;
    fail(ErrorCode::invalid_argument, s.id + ": invalid config\n" + all);
  }
  out.params = std::move(filled);
  return out;
}

double work_units(const ExperimentConfig& config) {
  const ExperimentConfig v = validate(config);
  return def_for(v.experiment).work(v.params);
}

bool RunReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

Json RunReport::summary() const {
  Json j = Json::object();
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = config.experiment;
  j["seed"] = config.seed;
  Json echo = Json::object();
  echo["experiment"] = config.experiment;
  echo["seed"] = config.seed;
  if (config.budget) echo["budget"] = *config.budget;
  echo["params"] = config.params;
  j["config"] = echo;
  Json ms = Json::object();
  for (const auto& [name, m] : metrics) ms[name] = Json{{"value", m.value}, {"stderr", m.std_error}, {"samples", m.samples}};
  j["metrics"] = ms;
  Json cs = Json::array();
  for (const auto& c : checks) cs.push_back(Json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = cs;
  j["passed"] = passed();
  return j;
}

Json RunReport::run_meta() const {
  return Json{{"schema_version", kSchemaVersion},
              {"experiment", config.experiment},
              {"seed", config.seed},
              {"threads", resolve_threads(config.threads)},
              {"wall_seconds", wall_seconds}};
}

std::string RunReport::csv(const Table& table) const {
  std::ostringstream out;
  out << "experiment,seed,sample";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (const auto& row : table.rows) {
    out << config.experiment << ',' << config.seed;
    for (const auto& c : row) out << ',' << c;
    out << '\n';
  }
  return out.str();
}

RunReport run(const ExperimentConfig& config) {
  RunReport report;
  report.config = validate(config);
  const ExperimentDef& s = def_for(report.config.experiment);
  const double work = s.work(report.config.params);
  if (report.config.budget)
    require(work <= *report.config.budget, ErrorCode::budget_exceeded,
            s.id + ": estimated " + format_number(work) + " work units exceed the budget of " + format_number(*report.config.budget));
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx{report.config.params, report.config.seed, resolve_threads(report.config.threads), report};
  try {
    s.body(ctx);
  } catch (const Error& e) {
    throw Error(e.code(), s.id + ": " + e.what());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_outputs(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + p.string());
    out << text;
    require(static_cast<bool>(out), ErrorCode::io_error, "write failed for " + p.string());
  };
  for (const auto& t : report.tables) write(dir / (report.config.experiment + "_" + t.name + ".csv"), report.csv(t));
  write(dir / "summary.json", report.summary().dump(2) + "\n");
  write(dir / "run_meta.json", report.run_meta().dump(2) + "\n");
}

std::string Aggregate::render() const {
  std::vector<std::array<std::string, 5>> cells{{"experiment", "seed", "name", "value", "status"}};
  for (const auto& r : rows) cells.push_back({r.experiment, r.experiment.empty() ? "" : std::to_string(r.seed), r.name, r.value, r.status});
  std::array<std::size_t, 5> width{};
  for (const auto& c : cells)
    for (std::size_t k = 0; k < 5; ++k) width[k] = std::max(width[k], c[k].size());
  std::ostringstream out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t k = 0; k < 5; ++k) {
      out << cells[i][k];
      if (k + 1 < 5) out << std::string(width[k] - cells[i][k].size() + 2, ' ');
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
  out << (passed ? "overall: PASS" : "overall: FAIL") << '\n';
  return out.str();
}

Aggregate aggregate(const std::vector<Json>& summaries) {
  require(!summaries.empty(), ErrorCode::invalid_argument, "report: need at least one run summary");
  std::set<long long> versions;
  for (const auto& s : summaries) {
    require(s.is_object() && s.contains("schema_version") && s["schema_version"].is_number_integer(), ErrorCode::schema_mismatch,
            "report: summary without schema_version");
    versions.insert(s["schema_version"].get<long long>());
  }
  require(versions.size() == 1, ErrorCode::schema_mismatch, "report: mixed schema versions");
  require(*versions.begin() == kSchemaVersion, ErrorCode::schema_mismatch,
          "report: unsupported schema version " + std::to_string(*versions.begin()));

  Aggregate agg;
  // t_n -> pooled (sum of value * samples, samples), and the tightest allowed ratio.
  std::map<double, std::pair<double, double>> family;
  double max_ratio = std::numeric_limits<double>::infinity();
  static const std::string prefix = "cusp_mass[t_n=";
  for (const auto& s : summaries) {
    const auto exp = s.at("experiment").get<std::string>();
    const auto seed = s.at("seed").get<std::uint64_t>();
    for (const auto& [name, m] : s.at("metrics").items()) {
      std::string value = format_number(m.at("value").is_null() ? std::nan("") : m.at("value").get<double>());
      const double se = m.at("stderr").is_null() ? 0.0 : m.at("stderr").get<double>();
      if (se > 0.0) value += " +- " + format_number(se);
      value += " (n=" + std::to_string(m.at("samples").get<std::uint64_t>()) + ")";
      agg.rows.push_back({exp, seed, name, value, ""});
      if (exp == "folner" && name.rfind(prefix, 0) == 0) {
        const double tn = std::stod(name.substr(prefix.size(), name.size() - prefix.size() - 1));
        const double n = m.at("samples").get<double>();
        family[tn].first += m.at("value").get<double>() * n;
        family[tn].second += n;
      }
    }
    for (const auto& c : s.at("checks")) {
      const bool ok = c.at("passed").get<bool>();
      agg.rows.push_back({exp, seed, c.at("name").get<std::string>(), c.at("detail").get<std::string>(), ok ? "PASS" : "FAIL"});
      agg.passed = agg.passed && ok;
    }
    if (exp == "folner") {
      const auto& p = s.at("config").at("params");
      if (p.contains("max_ratio")) max_ratio = std::min(max_ratio, p.at("max_ratio").get<double>());
    }
  }
  if (family.size() >= 2) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::string members;
    for (const auto& [tn, acc] : family) {
      const double v = acc.first / acc.second;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      members += (members.empty() ? "" : ",") + format_number(tn);
    }
    const double ratio = hi / lo;
    const bool ok = ratio <= max_ratio;
    agg.rows.push_back({"", 0, "family_sup[t_n=" + members + "]",
                        format_number(hi) + ", max/min " + format_number(ratio) + " <= " + format_number(max_ratio),
                        ok ? "PASS" : "FAIL"});
    agg.passed = agg.passed && ok;
  }
  return agg;
}

Aggregate aggregate_files(const std::vector<std::filesystem::path>& paths) {
  std::vector<Json> summaries;
  for (const auto& p : paths) {
    const auto file = std::filesystem::is_directory(p) ? p / "summary.json" : p;
    std::ifstream in(file);
    require(static_cast<bool>(in), ErrorCode::io_error, "report: cannot open " + file.string());
    try {
      summaries.push_back(Json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse_error, "report: " + file.string() + ": " + e.what());
    }
  }
  return aggregate(summaries);
}

}  // namespace cuspflow::experiments
