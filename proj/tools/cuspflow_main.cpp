// cuspflow-run: experiment runner on top of the C API.
// Exit status: 0 all checks passed, 2 some check failed, 1 usage or runtime error.

#include "cuspflow/cuspflow.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitFail = 2;

struct ConfigFree {
  void operator()(cf_config* c) const { cf_config_free(c); }
};
struct ReportFree {
  void operator()(cf_report* r) const { cf_report_free(r); }
};
struct AggregateFree {
  void operator()(cf_aggregate* a) const { cf_aggregate_free(a); }
};
using ConfigPtr = std::unique_ptr<cf_config, ConfigFree>;
using ReportPtr = std::unique_ptr<cf_report, ReportFree>;
using AggregatePtr = std::unique_ptr<cf_aggregate, AggregateFree>;

struct CallFailed {
  cf_status status;
};

void ok(cf_status s) {
  if (s == CF_OK) return;
  std::fprintf(stderr, "error (%s): %s\n", cf_status_name(s), cf_last_error());
  throw CallFailed{s};
}

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> budget;
  std::string out_dir;
  std::vector<std::string> params;
};

std::string quote_json(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

void set_param(cf_config* cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    std::fprintf(stderr, "error (invalid_argument): --param expects name=value, got '%s'\n", assignment.c_str());
    throw CallFailed{CF_INVALID_ARGUMENT};
  }
  const std::string name = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  // Bare words are taken as strings.
  if (cf_config_set_param(cfg, name.c_str(), value.c_str()) == CF_PARSE_ERROR)
    ok(cf_config_set_param(cfg, name.c_str(), quote_json(value).c_str()));
}

int print_aggregate(const std::vector<std::string>& paths) {
  std::vector<const char*> raw;
  for (const auto& p : paths) raw.push_back(p.c_str());
  cf_aggregate* agg = nullptr;
  ok(cf_aggregate_files(raw.data(), raw.size(), &agg));
  AggregatePtr owned(agg);
  std::fputs(cf_aggregate_text(agg), stdout);
  return cf_aggregate_passed(agg) ? kExitPass : kExitFail;
}

int run_experiment(const std::string& id, const RunOptions& o) {
  cf_config* raw = nullptr;
  ok(o.config.empty() ? cf_config_new(id.c_str(), &raw) : cf_config_load(o.config.c_str(), &raw));
  ConfigPtr cfg(raw);
  const std::string named = cf_config_experiment(raw);
  if (!named.empty() && named != id) {
    std::fprintf(stderr, "error (invalid_argument): config is for '%s', not '%s'\n", named.c_str(), id.c_str());
    return kExitError;
  }
  ok(cf_config_set_experiment(raw, id.c_str()));
  if (o.seed) ok(cf_config_set_seed(raw, *o.seed));
  if (o.threads) ok(cf_config_set_threads(raw, *o.threads));
  if (o.budget) ok(cf_config_set_budget(raw, *o.budget));
  for (const auto& p : o.params) set_param(raw, p);
  ok(cf_config_validate(raw, nullptr));

  cf_report* rep = nullptr;
  ok(cf_run(raw, &rep));
  ReportPtr report(rep);
  const std::string dir = o.out_dir.empty() ? "results/" + id : o.out_dir;
  ok(cf_report_write(rep, dir.c_str()));
  std::printf("%s: wrote %s (%.2f s)\n", id.c_str(), dir.c_str(), cf_report_wall_seconds(rep));
  const int code = print_aggregate({(std::filesystem::path(dir) / "summary.json").string()});
  return cf_report_passed(rep) ? code : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cuspflow-run: numerical experiments on homogeneous dynamics, cusp excursions and word geometry"};
  app.set_version_flag("--version", std::string(cf_version()));
  app.require_subcommand(1);

  RunOptions opts;
  std::string chosen;
  for (std::size_t k = 0; k < cf_experiment_count(); ++k) {
    const std::string id = cf_experiment_id(k);
    const char* help = nullptr;
    if (cf_experiment_help(id.c_str(), &help) != CF_OK) help = "";
    const std::string text = help;
    auto* sub = app.add_subcommand(id, text.substr(0, text.find('\n')));
    sub->footer(text.substr(text.find('\n') + 1));
    sub->add_option("--config", opts.config, "TOML config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "master seed (overrides the config)");
    sub->add_option("--threads", opts.threads, "worker threads; CUSPFLOW_THREADS overrides")->check(CLI::Range(1, 1024));
    sub->add_option("--out-dir", opts.out_dir, "output directory (default results/<experiment>)");
    sub->add_option("--budget", opts.budget, "abort before running if the work estimate exceeds this")->check(CLI::PositiveNumber);
    sub->add_option("--param", opts.params, "parameter override name=value (JSON literal or bare word); repeatable");
    sub->callback([&chosen, id] { chosen = id; });
  }

  std::vector<std::string> report_paths;
  auto* report = app.add_subcommand("report", "Aggregate table over run directories or summary.json files");
  report->add_option("paths", report_paths, "run directories or summary.json files")->required();
  report->callback([&chosen] { chosen = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitError;
  }

  try {
    if (chosen == "report") return print_aggregate(report_paths);
    return run_experiment(chosen, opts);
  } catch (const CallFailed&) {
    return kExitError;
  }
}
