#include "cuspflow/cuspflow.h"

#include "cuspflow/error.hpp"
#include "cuspflow/experiments.hpp"
#include "cuspflow/lattices.hpp"
#include "cuspflow/sumsets.hpp"
#include "cuspflow/wordgeom.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <string>

namespace ex = cuspflow::experiments;
using cuspflow::ErrorCode;

struct cf_lattice {
  cuspflow::lattices::UnimodularLattice lattice;
};

struct cf_word {
  cuspflow::wordgeom::GroupWord word;
  std::string text;
};

struct cf_sumset {
  cuspflow::sumsets::SymmetricSet set;
};

struct cf_config {
  ex::ExperimentConfig config;
};

struct cf_report {
  ex::RunReport report;
  std::string summary;
};

struct cf_aggregate {
  ex::Aggregate aggregate;
  std::string text;
};

namespace {

thread_local std::string g_last_error;

cf_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return CF_INVALID_ARGUMENT;
    case ErrorCode::precondition_failed: return CF_PRECONDITION_FAILED;
    case ErrorCode::budget_exceeded: return CF_BUDGET_EXCEEDED;
    case ErrorCode::iteration_cap_exceeded: return CF_ITERATION_CAP_EXCEEDED;
    case ErrorCode::ill_conditioned: return CF_ILL_CONDITIONED;
    case ErrorCode::non_finite: return CF_NON_FINITE;
    case ErrorCode::parse_error: return CF_PARSE_ERROR;
    case ErrorCode::schema_mismatch: return CF_SCHEMA_MISMATCH;
    case ErrorCode::io_error: return CF_IO_ERROR;
  }
  return CF_INTERNAL_ERROR;
}

// Runs fn, translating exceptions into a status and the thread's last error.
template <class Fn>
cf_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return CF_OK;
  } catch (const cuspflow::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return CF_INTERNAL_ERROR;
}

void need(const void* p, const char* what) {
  cuspflow::require(p != nullptr, ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

cf_word* make_word(cuspflow::wordgeom::GroupWord w) {
  auto out = std::make_unique<cf_word>(cf_word{std::move(w), {}});
  out->text = out->word.to_string();
  return out.release();
}

}  // namespace

extern "C" {

const char* cf_version(void) { return "0.1.0"; }

const char* cf_status_name(cf_status status) {
  switch (status) {
    case CF_OK: return "ok";
    case CF_INTERNAL_ERROR: return "internal_error";
    default:
      if (status >= CF_INVALID_ARGUMENT && status <= CF_IO_ERROR) return cuspflow::to_string(static_cast<ErrorCode>(status));
      return "unknown_status";
  }
}

const char* cf_last_error(void) { return g_last_error.c_str(); }

// ---- lattices

cf_status cf_lattice_from_basis(int m, const double* basis, cf_lattice** out) {
  return guarded([&] {
    need(basis, "basis");
    need(out, "out");
    cuspflow::require(m >= 2 && m <= cuspflow::lattices::kMaxDim, ErrorCode::invalid_argument, "lattice dimension out of range");
    const cuspflow::Mat b = Eigen::Map<const Eigen::MatrixXd>(basis, m, m);
    *out = new cf_lattice{cuspflow::lattices::UnimodularLattice::from_basis(b)};
  });
}

cf_status cf_lattice_sample(int m, uint64_t seed, uint64_t index, cf_lattice** out) {
  return guarded([&] {
    need(out, "out");
    cuspflow::require(m >= 2 && m <= cuspflow::lattices::kMaxDim, ErrorCode::invalid_argument, "lattice dimension out of range");
    cuspflow::CounterRng rng(seed, cuspflow::streams::lattice_sample, index);
    *out = new cf_lattice{cuspflow::lattices::sample_uniform_entries(m, rng)};
  });
}

int cf_lattice_dim(const cf_lattice* lattice) { return lattice ? lattice->lattice.dim() : 0; }

cf_status cf_lattice_basis(const cf_lattice* lattice, double* out) {
  return guarded([&] {
    need(lattice, "lattice");
    need(out, "out");
    Eigen::Map<Eigen::MatrixXd>(out, lattice->lattice.dim(), lattice->lattice.dim()) = lattice->lattice.basis();
  });
}

cf_status cf_lattice_systole(const cf_lattice* lattice, double* length, long long* coefficients) {
  return guarded([&] {
    need(lattice, "lattice");
    need(length, "length");
    const auto sv = cuspflow::lattices::shortest_vector(lattice->lattice);
    *length = sv.length;
    if (coefficients)
      for (int k = 0; k < lattice->lattice.dim(); ++k) coefficients[k] = sv.coefficients(k);
  });
}

void cf_lattice_free(cf_lattice* lattice) { delete lattice; }

// ---- words

cf_status cf_word_parse(int m, const char* text, cf_word** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = make_word(cuspflow::wordgeom::GroupWord::parse(text, m));
  });
}

cf_status cf_word_unipotent(int i, int j, long long k, int m, cf_word** out) {
  return guarded([&] {
    need(out, "out");
    *out = make_word(cuspflow::wordgeom::unipotent_short_word(i, j, k, m));
  });
}

cf_status cf_word_decompose(int m, const long long* entries, cf_word** out) {
  return guarded([&] {
    need(entries, "entries");
    need(out, "out");
    cuspflow::require(m >= 3 && m <= 64, ErrorCode::invalid_argument, "decomposition needs 3 <= m <= 64");
    const std::vector<long long> rows(entries, entries + static_cast<std::ptrdiff_t>(m) * m);
    const auto g = cuspflow::grouplin::IntegerGroupElement::from_int64(m, rows);
    *out = make_word(cuspflow::wordgeom::lmr_decompose(g).word);
  });
}

size_t cf_word_length(const cf_word* word) { return word ? word->word.letter_count() : 0; }
int cf_word_factor_count(const cf_word* word) { return word ? word->word.factor_count() : 0; }
double cf_word_log_cost(const cf_word* word) { return word ? word->word.log_cost() : 0.0; }

cf_status cf_word_eval(const cf_word* word, long long* entries) {
  return guarded([&] {
    need(word, "word");
    need(entries, "entries");
    const auto g = cuspflow::wordgeom::word_eval(word->word);
    const auto& e = g.entries();
    for (const auto& v : e)
      cuspflow::require(v.fits_slong_p(), ErrorCode::precondition_failed, "word value has entries beyond 64 bits");
    for (std::size_t k = 0; k < e.size(); ++k) entries[k] = e[k].get_si();
  });
}

const char* cf_word_text(const cf_word* word) { return word ? word->text.c_str() : ""; }
void cf_word_free(cf_word* word) { delete word; }

// ---- sumsets

cf_status cf_sumset_random(int n, double p, uint64_t seed, uint64_t index, cf_sumset** out) {
  return guarded([&] {
    need(out, "out");
    cuspflow::CounterRng rng(seed, cuspflow::streams::sumset_sets, index);
    *out = new cf_sumset{cuspflow::sumsets::SymmetricSet::random(n, p, rng)};
  });
}

cf_status cf_sumset_from_points(int n, const int* points, size_t count, cf_sumset** out) {
  return guarded([&] {
    need(out, "out");
    if (count > 0) need(points, "points");
    std::vector<cuspflow::sumsets::Point> pts;
    for (size_t k = 0; k < count; ++k) pts.push_back({points[2 * k], points[2 * k + 1]});
    *out = new cf_sumset{cuspflow::sumsets::SymmetricSet::from_points(n, pts)};
  });
}

int cf_sumset_radius(const cf_sumset* set) { return set ? set->set.radius() : 0; }
double cf_sumset_density(const cf_sumset* set) { return set ? set->set.density() : 0.0; }

cf_status cf_sumset_verify_cover(const cf_sumset* set, double delta, int* covered) {
  return guarded([&] {
    need(set, "set");
    need(covered, "covered");
    *covered = cuspflow::sumsets::verify_cover(set->set, delta).covered ? 1 : 0;
  });
}

cf_status cf_sumset_minimal_k(const cf_sumset* set, int f_radius, long long k_cap, long long* k) {
  return guarded([&] {
    need(set, "set");
    need(k, "k");
    cuspflow::require(f_radius >= 0, ErrorCode::invalid_argument, "f_radius must be non-negative");
    const auto r = cuspflow::sumsets::minimal_k_oracle(set->set, {f_radius}, k_cap);
    *k = r ? *r : -1;
  });
}

cf_status cf_sumset_save(const cf_sumset* set, const char* path) {
  return guarded([&] {
    need(set, "set");
    need(path, "path");
    std::ofstream out(path, std::ios::binary);
    cuspflow::require(static_cast<bool>(out), ErrorCode::io_error, std::string("cannot write ") + path);
    cuspflow::sumsets::write_set(out, set->set);
    cuspflow::require(static_cast<bool>(out), ErrorCode::io_error, std::string("write failed for ") + path);
  });
}

cf_status cf_sumset_load(const char* path, cf_sumset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream in(path, std::ios::binary);
    cuspflow::require(static_cast<bool>(in), ErrorCode::io_error, std::string("cannot open ") + path);
    *out = new cf_sumset{cuspflow::sumsets::read_set(in)};
  });
}

void cf_sumset_free(cf_sumset* set) { delete set; }

// ---- experiments

size_t cf_experiment_count(void) { return ex::experiment_ids().size(); }

const char* cf_experiment_id(size_t index) {
  const auto& ids = ex::experiment_ids();
  return index < ids.size() ? ids[index].c_str() : nullptr;
}

cf_status cf_experiment_help(const char* id, const char** text) {
  static std::mutex mu;
  static std::map<std::string, std::string> cache;
  return guarded([&] {
    need(id, "id");
    need(text, "text");
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, ex::experiment_help(id)).first;
    *text = it->second.c_str();
  });
}

cf_status cf_config_new(const char* experiment, cf_config** out) {
  return guarded([&] {
    need(experiment, "experiment");
    need(out, "out");
    ex::default_params(experiment);  // rejects unknown ids
    auto* c = new cf_config{};
    c->config.experiment = experiment;
    *out = c;
  });
}

cf_status cf_config_parse(const char* toml_text, cf_config** out) {
  return guarded([&] {
    need(toml_text, "toml_text");
    need(out, "out");
    *out = new cf_config{ex::parse_config(toml_text)};
  });
}

cf_status cf_config_load(const char* path, cf_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new cf_config{ex::load_config(path)};
  });
}

const char* cf_config_experiment(const cf_config* config) { return config ? config->config.experiment.c_str() : ""; }

cf_status cf_config_set_experiment(cf_config* config, const char* experiment) {
  return guarded([&] {
    need(config, "config");
    need(experiment, "experiment");
    ex::default_params(experiment);
    config->config.experiment = experiment;
  });
}

cf_status cf_config_set_seed(cf_config* config, uint64_t seed) {
  return guarded([&] {
    need(config, "config");
    config->config.seed = seed;
  });
}

cf_status cf_config_set_threads(cf_config* config, int threads) {
  return guarded([&] {
    need(config, "config");
    cuspflow::require(threads >= 1 && threads <= 1024, ErrorCode::invalid_argument, "threads must lie in [1, 1024]");
    config->config.threads = threads;
  });
}

cf_status cf_config_set_budget(cf_config* config, double budget) {
  return guarded([&] {
    need(config, "config");
    if (budget > 0.0)
      config->config.budget = budget;
    else
      config->config.budget.reset();
  });
}

cf_status cf_config_set_param(cf_config* config, const char* name, const char* json_value) {
  return guarded([&] {
    need(config, "config");
    need(name, "name");
    need(json_value, "json_value");
    ex::Json v;
    try {
      v = ex::Json::parse(json_value);
    } catch (const nlohmann::json::exception&) {
      cuspflow::fail(ErrorCode::parse_error, std::string("params.") + name + ": not a JSON value: " + json_value);
    }
    config->config.params[name] = std::move(v);
  });
}

cf_status cf_config_validate(const cf_config* config, double* work_units) {
  return guarded([&] {
    need(config, "config");
    const double w = ex::work_units(config->config);
    if (work_units) *work_units = w;
  });
}

void cf_config_free(cf_config* config) { delete config; }

cf_status cf_run(const cf_config* config, cf_report** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    auto r = std::make_unique<cf_report>(cf_report{ex::run(config->config), {}});
    r->summary = r->report.summary().dump(2);
    *out = r.release();
  });
}

int cf_report_passed(const cf_report* report) { return report && report->report.passed() ? 1 : 0; }
double cf_report_wall_seconds(const cf_report* report) { return report ? report->report.wall_seconds : 0.0; }
const char* cf_report_summary(const cf_report* report) { return report ? report->summary.c_str() : ""; }

cf_status cf_report_write(const cf_report* report, const char* dir) {
  return guarded([&] {
    need(report, "report");
    need(dir, "dir");
    ex::write_outputs(report->report, dir);
  });
}

void cf_report_free(cf_report* report) { delete report; }

cf_status cf_aggregate_files(const char* const* paths, size_t count, cf_aggregate** out) {
  return guarded([&] {
    need(out, "out");
    if (count > 0) need(paths, "paths");
    std::vector<std::filesystem::path> ps;
    for (size_t k = 0; k < count; ++k) {
      need(paths[k], "path");
      ps.emplace_back(paths[k]);
    }
    auto a = std::make_unique<cf_aggregate>(cf_aggregate{ex::aggregate_files(ps), {}});
    a->text = a->aggregate.render();
    *out = a.release();
  });
}

int cf_aggregate_passed(const cf_aggregate* aggregate) { return aggregate && aggregate->aggregate.passed ? 1 : 0; }
const char* cf_aggregate_text(const cf_aggregate* aggregate) { return aggregate ? aggregate->text.c_str() : ""; }
void cf_aggregate_free(cf_aggregate* aggregate) { delete aggregate; }

}  // extern "C"
