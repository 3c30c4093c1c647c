// One PASS/FAIL line per acceptance criterion; exit status 0 only if all pass.

#include "cuspflow/experiments.hpp"
#include "cuspflow/grouplin.hpp"
#include "cuspflow/measures.hpp"
#include "cuspflow/modular.hpp"
#include "cuspflow/rng.hpp"
#include "cuspflow/sumsets.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

using namespace cuspflow;
namespace ex = cuspflow::experiments;
using ex::Json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::map<std::string, ex::RunReport> g_runs;

const ex::RunReport& run_once(const std::string& key, const std::string& id, Json params) {
  auto it = g_runs.find(key);
  if (it != g_runs.end()) return it->second;
  ex::ExperimentConfig c;
  c.experiment = id;
  c.seed = 1;
  c.threads = 1;
  c.params = std::move(params);
  return g_runs.emplace(key, ex::run(c)).first->second;
}

// All named checks must be present and passing.
Outcome checks(const ex::RunReport& r, const std::vector<std::string>& names) {
  Outcome o{true, {}};
  for (const auto& n : names) {
    const auto it = std::find_if(r.checks.begin(), r.checks.end(), [&](const ex::Check& c) { return c.name == n; });
    if (it == r.checks.end()) {
      o.pass = false;
      o.detail += n + ": missing; ";
      continue;
    }
    o.pass = o.pass && it->passed;
    o.detail += n + ": " + it->detail + "; ";
  }
  return o;
}

Outcome both(Outcome a, const Outcome& b) {
  a.pass = a.pass && b.pass;
  a.detail += b.detail;
  return a;
}

double fixture_constant() {
  std::ifstream in(CUSPFLOW_FIXTURE_DIR "/uniword_constant.txt");
  std::string line;
  double c = 0.0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') c = std::stod(line);
  return c;
}

grouplin::RealGroupElement random_element(int m, CounterRng& rng) {
  Mat a(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) a(r, c) = rng.normal();
  if (a.determinant() < 0) a.col(0) *= -1.0;
  Vec t(m);
  for (int k = 0; k < m; ++k) t(k) = 2.0 * rng.normal();
  t.array() -= t.mean();
  const auto g = grouplin::RealGroupElement::from_matrix(a);
  return g * grouplin::cartan_element(grouplin::CartanVector(t)) * grouplin::RealGroupElement::from_matrix(a.transpose());
}

Outcome c1() {
  const auto& r = run_once("systole", "systole", Json{{"m", 3}, {"samples", 1000}});
  auto o = checks(r, {"zero_mismatches"});
  o.pass = o.pass && r.wall_seconds < 30.0;
  o.detail += "wall " + ex::format_number(r.wall_seconds) + " s < 30 s";
  return o;
}

Outcome c2() {
  using namespace grouplin;
  CounterRng rng(2, streams::group_sample, 0);
  double c1 = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Mat a = random_element(2, rng).matrix();
    a /= std::sqrt(a.determinant());
    const auto g = sl2_embed(4, a(0, 0), a(0, 1), a(1, 0), a(1, 1), 1 + i % 3, 4);
    c1 = std::max(c1, std::fabs(symmetric_distance(g) - 2.0 * std::log(norm_conorm(g).norm)));
  }
  int outside = 0;
  for (int i = 0; i < 10000; ++i) {
    const int m = 2 + i % 4;
    const auto g = random_element(m, rng);
    const double kappa = std::sqrt(2.0) * m, d = symmetric_distance(g), ln = std::log(norm_conorm(g).norm);
    if (d < ln / kappa - 2.0 || d > kappa * ln + 2.0) ++outside;
  }
  double worst = -1e300;
  for (long long k = 2; k <= 1'000'000'000; k = k * 2 + 1) {
    const double d = symmetric_distance(RealGroupElement::from_matrix(elementary(3, 1, 3, k).to_real()));
    worst = std::max(worst, d - (2.1 * std::log(double(k)) + 1.0));
  }
  return {c1 <= 1.2 && outside == 0 && worst <= 0.0,
          "C1 " + ex::format_number(c1) + " <= 1.2; norm-form violations " + std::to_string(outside) +
              "/10000; max d(E^k,Id) - (2.1 log k + 1) = " + ex::format_number(worst)};
}

Outcome c3() {
  return checks(run_once("km", "km", Json{{"m", 2}, {"T", 1e4}, {"eps", Json::array({0.4, 0.2, 0.1, 0.05})}, {"fit_eps", 0.4},
                                         {"starts", Json::array({"identity"})}}),
                {"km_bound[identity]"});
}

Outcome c4() {
  return checks(run_once("cuspmass", "cuspmass", Json{{"sizes", Json::array({10000, 40000})}, {"eta_stable", 1.0}, {"eta_divergent", 3.0}}),
                {"stable[eta=1]", "divergent[eta=3]"});
}

Outcome c5() {
  const double phi = std::numbers::phi;
  double worst = 0.0;
  for (int j = 1; j <= 10; ++j) {
    const double x = std::fmod(j * phi, 1.0) - 0.5;
    const auto start = modular::point_from_z(x, 1.2 + 0.05 * j, 0.7 * j);
    const auto seg = modular::flow_orbit(start, modular::Flow::horocycle, 1e4, 0.1, {false, false});
    std::vector<double> depths;
    depths.reserve(seg.samples().size() - 1);
    for (std::size_t i = 1; i < seg.samples().size(); ++i) depths.push_back(seg.samples()[i].depth);
    worst = std::max(worst, measures::ks_distance(std::move(depths), measures::haar_depth_cdf, measures::haar_depth_cdf_left));
  }
  return {worst <= 0.05, "max KS over 10 starts " + ex::format_number(worst) + " <= 0.05"};
}

Outcome c6() {
  return checks(run_once("lyap", "lyap", Json{{"cocycle", "return"}, {"horizon", 100000}, {"tolerance", 0.05}}),
                {"lyapunov_value", "subadditivity"});
}

Outcome c7() {
  return checks(run_once("oseledets", "oseledets", Json{{"tolerance", 0.02}}), {"rates_recovered", "additivity"});
}

Json folner_params() {
  return Json{{"defect_t_n", Json::array({10.0, 20.0, 50.0, 100.0})}, {"family_m", 4}, {"eta", 0.1},
              {"family_t_n", Json::array({5.0, 10.0, 20.0})}, {"max_ratio", 3.0}};
}

Outcome c8() { return checks(run_once("folner", "folner", folner_params()), {"defect_bound"}); }

Outcome c9() {
  return both(checks(run_once("folner", "folner", folner_params()), {"family_ratio"}),
              checks(run_once("tc", "tc", Json{{"m", 4}}), {"slope_negative"}));
}

Outcome c10() {
  const auto& r = run_once("sumset", "sumset", Json::object());
  auto o = checks(r, {"verify_cover", "minimal_k_within_k_delta", "class_pairs", "constants_half"});
  const auto cc = sumsets::cover_constants(0.5);
  const bool consts = cc.M == 3 && cc.N == 24 && cc.k == 96 && cc.F.n == 24;
  o.pass = o.pass && consts;
  o.detail += "cover_constants(0.5) = (" + std::to_string(cc.M) + ", " + std::to_string(cc.N) + ", " + std::to_string(cc.k) +
              ", B_" + std::to_string(cc.F.n) + ")";
  return o;
}

Outcome c11() {
  const double c = fixture_constant();
  return both(checks(run_once("decompose", "decompose", Json{{"m", 4}, {"samples", 1000}}),
                     {"exact_reconstruction", "factor_count", "cost_stability"}),
              checks(run_once("uniword", "uniword", Json{{"m", 4}, {"max_bits", 30}, {"length_constant", c}}),
                     {"exact_words", "quadratic_in_log", "length_constant"}));
}

Outcome c12() { return checks(run_once("geodesic", "geodesic", Json{{"excursions", 100}}), {"excursion_deck_class"}); }

Outcome c13() {
  const std::vector<std::pair<std::string, Json>> reduced{
      {"systole", Json{{"samples", 100}}},
      {"geodesic", Json{{"excursions", 10}, {"chi_segments", 5}, {"chi_length", 200.0}}},
      {"km", Json{{"T", 2000.0}}},
      {"cuspmass", Json{{"sizes", Json::array({1000, 4000})}, {"replicates", 20}}},
      {"folner", Json{{"defect_samples", 5000}, {"family_atoms", 1000}}},
      {"tc", Json{{"samples", 5000}}},
      {"lyap", Json{{"horizon", 5000}}},
      {"oseledets", Json{{"steps", 2000}}},
      {"decompose", Json{{"samples", 100}}},
      {"uniword", Json::object()},
      {"sumset", Json{{"n_max", 15}, {"sets", 20}}},
  };
  Outcome o{true, {}};
  for (const auto& [id, params] : reduced) {
    std::string dumps[2];
    const int threads[2] = {1, 8};
    for (int k = 0; k < 2; ++k) {
      ex::ExperimentConfig c;
      c.experiment = id;
      c.seed = 13;
      c.threads = threads[k];
      c.params = params;
      dumps[k] = ex::run(c).summary().dump();
    }
    const bool same = dumps[0] == dumps[1];
    o.pass = o.pass && same;
    o.detail += id + (same ? " identical; " : " DIFFERS; ");
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12, c13};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("criterion %zu: %s  (%.1f s) %s\n", i + 1, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
