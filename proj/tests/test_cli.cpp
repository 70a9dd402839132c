#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmm/cli.hpp"
#include "cmm/io.hpp"
#include "oracles.hpp"
#include "schema_check.hpp"

using namespace cmm;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

bool single_error_line(const Run& r, const std::string& kind) {
  return r.err.rfind("error: " + kind + ": ", 0) == 0 &&
         std::count(r.err.begin(), r.err.end(), '\n') == 1;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cmm_cli_test_" + name)).string();
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = temp_path(name);
  std::ofstream(path) << text;
  return path;
}

const std::string kSmall = std::string(CMM_SOURCE_DIR) + "/tests/data/small.csv";

}  // namespace

TEST_CASE("density at nu = 1 reproduces multinomial probabilities") {
  const auto r = run({"density", "--m", "3", "--p", "0.5,0.3,0.2", "--nu", "1", "--json"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["table"].size() == 10);
  for (const auto& row : j["table"]) {
    const auto y = row["y"].get<std::vector<int>>();
    CHECK(row["pmf"].get<double>() == doctest::Approx(oracle::multinomial_pmf(y, {0.5, 0.3, 0.2})).epsilon(1e-12));
  }
  const auto one = run({"density", "--m", "2", "--p", "0.5,0.5", "--nu", "2", "--y", "1,1"});
  REQUIRE(one.code == 0);
  CHECK(one.out.find("pmf: 0.666667") != std::string::npos);
  const auto table = run({"density", "--m", "2", "--p", "0.5,0.5", "--nu", "2"});
  CHECK(table.out.rfind("y_1,y_2,pmf,log_pmf\n2,0,0.166667,", 0) == 0);
}

TEST_CASE("moments with trial correlations") {
  const auto r = run({"moments", "--m", "20", "--p", "0.5,0.3,0.2", "--nu=-0.25", "--trial-corr"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean: ") == 0);
  CHECK(r.out.find("between-trial correlation:") != std::string::npos);
  const auto j = run({"moments", "--m", "4", "--p", "0.5,0.5", "--nu", "1", "--json"});
  const auto parsed = nlohmann::json::parse(j.out);
  CHECK(parsed["mean"][0].get<double>() == doctest::Approx(2.0));
  CHECK_FALSE(parsed.contains("trial_correlation"));
}

TEST_CASE("sampling is deterministic per seed and emits parseable CSV") {
  const std::vector<std::string> args{"sample", "--m", "6", "--p", "0.2,0.3,0.5", "--nu", "1.5",
                                      "--n", "50", "--seed", "9", "--burn-in", "100", "--thin", "2"};
  const auto a = run(args), b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  auto other = args;
  other[10] = "10";
  CHECK(run(other).out != a.out);
  std::istringstream in(a.out);
  const auto d = read_csv(in);
  CHECK(d.observations.size() == 50);
  for (const auto& o : d.observations) CHECK(o.y.total() == 6);
  const auto exact = run({"sample", "--m", "3", "--p", "0.5,0.5", "--nu", "0", "--n", "5", "--method", "exact"});
  CHECK(exact.code == 0);
  CHECK(std::count(exact.out.begin(), exact.out.end(), '\n') == 6);
}

TEST_CASE("fit emits a schema-valid report") {
  std::ifstream sf(std::string(CMM_SOURCE_DIR) + "/docs/fit_report.schema.json");
  const auto schema = nlohmann::json::parse(sf);
  const auto r = run({"fit", "--data", kSmall, "--baseline", "a", "--nu-formula", "group"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(schema_check::validate(schema, j).empty());
  CHECK(j["coefficients"].size() == 6);
  CHECK(j["convergence"]["converged"] == true);

  const auto out_file = temp_path("report.json");
  const auto m = run({"fit", "--data", kSmall, "--model", "multinomial", "--out", out_file});
  REQUIRE(m.code == 0);
  CHECK(m.out.empty());
  std::ifstream rf(out_file);
  const auto mj = nlohmann::json::parse(rf);
  CHECK(mj["model"] == "multinomial");
  CHECK(mj["n_parameters"] == 4);
  CHECK(schema_check::validate(schema, mj).empty());

  const auto drop = run({"fit", "--data", kSmall, "--se", "drop"});
  CHECK(nlohmann::json::parse(drop.out)["se_convention"] == "drop_alphas");
}

TEST_CASE("usage, data and numerical failures map to exit codes") {
  Run r = run({});
  CHECK(r.code == kExitUsage);
  CHECK(single_error_line(r, "usage"));
  CHECK(run({"--help"}).code == 0);

  r = run({"density", "--m", "3", "--p", "0.5,0.6", "--nu", "1"});
  CHECK(r.code == kExitUsage);
  CHECK(single_error_line(r, "usage"));
  r = run({"density", "--m", "3", "--p", "0.5,0.5", "--nu", "1", "--y", "1,1"});
  CHECK(r.code == kExitUsage);
  r = run({"fit", "--data", kSmall, "--baseline", "zebra"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("zebra") != std::string::npos);
  r = run({"fit", "--data", kSmall, "--model", "probit"});
  CHECK(r.code == kExitUsage);

  r = run({"fit", "--data", "/nonexistent.csv"});
  CHECK(r.code == kExitData);
  CHECK(single_error_line(r, "data"));
  r = run({"fit", "--data", write_temp("bad.csv", "y_a,y_b\n1,2\n1,-4\n")});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("row 3") != std::string::npos);
  r = run({"simulate", "--config", write_temp("bad.json", "{\"m\": 2}")});
  CHECK(r.code == kExitData);

  r = run({"density", "--m", "1000", "--p", "0.2,0.2,0.2,0.2,0.1,0.1", "--nu", "1"});
  CHECK(r.code == kExitNumerical);
  CHECK(single_error_line(r, "numerical"));
  r = run({"fit", "--data", write_temp("vertex.csv", "y_a,y_b,y_c\n2,0,0\n0,2,0\n0,0,2\n2,0,0\n")});
  CHECK(r.code == kExitNumerical);
  CHECK(single_error_line(r, "numerical"));
  CHECK(nlohmann::json::parse(r.out)["convergence"]["converged"] == false);
}

TEST_CASE("simulate runs a small study") {
  const auto cfg = write_temp("study.json",
                              R"({"m": 3, "p": [0.4, 0.35, 0.25], "nu": 0.5, "n": 30,
                                  "replicates": 4, "seed": 3, "burn_in": 100})");
  const auto a = run({"simulate", "--config", cfg});
  REQUIRE(a.code == 0);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["replicates"].size() == 4);
  CHECK(j["summary"]["chi_squared_df"] == 3);
  CHECK(run({"simulate", "--config", cfg}).out == a.out);
}
