#include "cuspflow/error.hpp"
#include "cuspflow/experiments.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cuspflow;
using namespace cuspflow::experiments;

namespace {

ExperimentConfig small(const std::string& id, Json params, int threads = 1) {
  ExperimentConfig c;
  c.experiment = id;
  c.seed = 5;
  c.threads = threads;
  c.params = std::move(params);
  return c;
}

std::string message_of(const ExperimentConfig& c) {
  try {
    validate(c);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
    return e.what();
  }
  return {};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("registry") {
  const auto& ids = experiment_ids();
  CHECK(ids.size() == 11);
  for (const auto& id : ids) {
    CHECK_FALSE(experiment_help(id).empty());
    CHECK(default_params(id).is_object());
    CHECK_NOTHROW(validate(small(id, Json::object())));
  }
  CHECK_THROWS_AS(default_params("nope"), Error);
}

TEST_CASE("config parsing") {
  const auto c = parse_config("experiment = \"systole\"\nseed = 9\nthreads = 2\nbudget = 1e6\n[params]\nm = 2\nsamples = 10\n");
  CHECK(c.experiment == "systole");
  CHECK(c.seed == 9);
  CHECK(c.threads == 2);
  REQUIRE(c.budget.has_value());
  CHECK(*c.budget == 1e6);
  CHECK(c.params["samples"] == 10);

  auto code_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io_error;
  };
  CHECK(code_of("experiment = \n") == ErrorCode::parse_error);
  CHECK(code_of("experiment = \"systole\"\ncolour = 1\n") == ErrorCode::invalid_argument);
  CHECK(code_of("experiment = \"systole\"\nthreads = 0\n") == ErrorCode::invalid_argument);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.toml"), Error);
}

TEST_CASE("validation names every bad field") {
  const auto msg = message_of(small("systole", Json{{"m", 9}, {"samples", "many"}, {"colour", 1}}));
  CHECK(msg.find("systole: invalid config") != std::string::npos);
  CHECK(msg.find("params.m") != std::string::npos);
  CHECK(msg.find("params.samples") != std::string::npos);
  CHECK(msg.find("params.colour") != std::string::npos);
  CHECK(message_of(small("km", Json{{"fit_eps", 0.3}})).find("params.fit_eps") != std::string::npos);
  CHECK(message_of(small("cuspmass", Json{{"sizes", Json::array({400, 100})}})).find("params.sizes") != std::string::npos);
  CHECK(message_of(small("lyap", Json{{"cocycle", "other"}})).find("params.cocycle") != std::string::npos);
  CHECK_THROWS_AS(validate(small("nope", Json::object())), Error);
}

TEST_CASE("budget is checked before running") {
  auto c = small("systole", Json{{"samples", 100}});
  const double w = work_units(validate(c));
  CHECK(w > 0.0);
  c.budget = w / 2;
  try {
    run(c);
    FAIL("expected budget_exceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::budget_exceeded);
  }
  c.budget = w * 2;
  CHECK(run(c).passed());
}

TEST_CASE("summaries do not depend on the thread count") {
  const std::vector<std::pair<std::string, Json>> cases{
      {"systole", Json{{"samples", 60}}},
      {"lyap", Json{{"horizon", 2000}, {"tolerance", 1.0}}},
      {"folner", Json{{"defect_samples", 2000}, {"family_atoms", 500}, {"defect_t_n", Json::array({10.0})}}},
      {"sumset", Json{{"n_max", 12}, {"sets", 10}}},
  };
  for (const auto& [id, params] : cases) {
    const auto a = run(small(id, params, 1)).summary().dump();
    const auto b = run(small(id, params, 3)).summary().dump();
    CHECK_MESSAGE(a == b, id);
  }
}

TEST_CASE("outputs and aggregate") {
  const auto dir = std::filesystem::temp_directory_path() / "cuspflow_test_outputs";
  std::filesystem::remove_all(dir);
  const auto rep = run(small("uniword", Json{{"max_bits", 12}}));
  write_outputs(rep, dir / "u");
  const auto csv = slurp(dir / "u" / "uniword_words.csv");
  CHECK(csv.rfind("experiment,seed,sample,k,bits,length,ratio,exact,unit_letters\n", 0) == 0);
  CHECK(csv.find("\nuniword,5,") != std::string::npos);
  const auto meta = Json::parse(slurp(dir / "u" / "run_meta.json"));
  CHECK(meta.contains("wall_seconds"));
  CHECK_FALSE(Json::parse(slurp(dir / "u" / "summary.json")).contains("wall_seconds"));

  const auto agg = aggregate_files({dir / "u"});
  CHECK(agg.passed == rep.passed());
  CHECK(agg.render().find("uniword") != std::string::npos);

  auto s1 = rep.summary();
  auto s2 = s1;
  s2["schema_version"] = kSchemaVersion + 1;
  try {
    aggregate({s1, s2});
    FAIL("expected schema_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema_mismatch);
  }
  CHECK_THROWS_AS(aggregate_files({dir / "missing"}), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("failing checks fail the run") {
  const auto rep = run(small("uniword", Json{{"max_bits", 12}, {"length_constant", 0.1}}));
  CHECK_FALSE(rep.passed());
  const auto agg = aggregate({rep.summary()});
  CHECK_FALSE(agg.passed);
  CHECK(agg.render().find("FAIL") != std::string::npos);
}

TEST_CASE("folner family row") {
  const auto a = run(small("folner", Json{{"defect_samples", 1000}, {"family_atoms", 300}, {"defect_t_n", Json::array({10.0})},
                                          {"family_t_n", Json::array({5.0, 10.0})}}));
  const auto agg = aggregate({a.summary()});
  bool found = false;
  for (const auto& r : agg.rows)
    if (r.name.rfind("family_sup[", 0) == 0) found = true;
  CHECK(found);
}

TEST_CASE("number formatting roundtrips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345678.9, -2.5, 0.0}) CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("shipped configs validate") {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(CUSPFLOW_CONFIG_DIR)) {
    if (entry.path().extension() != ".toml") continue;
    const auto c = validate(load_config(entry.path()));
    CHECK(c.experiment == entry.path().stem().string());
    ++n;
  }
  CHECK(n == experiment_ids().size());
}
