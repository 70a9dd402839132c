#include "cmm/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cmm/diagnostics.hpp"
#include "cmm/distribution.hpp"
#include "cmm/error.hpp"
#include "cmm/inference.hpp"
#include "cmm/io.hpp"
#include "cmm/random.hpp"
#include "cmm/sampler.hpp"

namespace cmm {

namespace {

constexpr int kHumanDigits = 6;

struct DistArgs {
  int m = 0;
  std::vector<double> p;
  double nu = 1.0;
  int baseline = -1;
};

void add_dist_options(CLI::App* cmd, DistArgs& a) {
  cmd->add_option("--m", a.m, "Number of trials per cluster")->required();
  cmd->add_option("--p", a.p, "Category probabilities, comma separated")
      ->required()
      ->delimiter(',');
  cmd->add_option("--nu", a.nu, "Association parameter")->required();
}

CmmParams make_params(const DistArgs& a) {
  const double total = std::accumulate(a.p.begin(), a.p.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) {
    throw InvalidArgument("--p must sum to 1 (got " + std::to_string(total) + ")");
  }
  std::vector<double> p = a.p;
  for (double& v : p) v /= total;
  return CmmParams(a.m, p, a.nu, a.baseline);
}

std::string join(const Eigen::VectorXd& v, const char* sep = ", ") {
  std::ostringstream os;
  os << std::setprecision(kHumanDigits);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? sep : "") << v[i];
  return os.str();
}

void print_matrix(std::ostream& out, const std::string& title, const Eigen::MatrixXd& m) {
  out << title << ":\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) out << "  " << join(m.row(r).transpose()) << '\n';
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(json_number(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_number(v[i]));
  return out;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty() && item != "1" && item != "intercept") out.push_back(item);
  }
  return out;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError(path + ": cannot open for writing");
  f << text;
}

int cmd_density(const DistArgs& a, const std::vector<int>& y, bool json, std::ostream& out) {
  const CmmParams params = make_params(a);
  const CmmDistribution dist(params);
  if (!y.empty()) {
    const CountVector yv(y);
    if (static_cast<int>(yv.categories()) != params.k() || yv.total() != params.m()) {
      throw InvalidArgument("--y " + to_string(yv) + " is not in the sample space for m = " +
                            std::to_string(params.m()) + ", k = " + std::to_string(params.k()));
    }
    const double lp = dist.log_pmf(yv);
    if (json) {
      out << nlohmann::json{{"y", y},
                            {"log_pmf", json_number(lp)},
                            {"pmf", json_number(std::exp(lp))},
                            {"log_norm_const", json_number(dist.log_norm_const())}}
                 .dump(2)
          << '\n';
    } else {
      out << std::setprecision(kHumanDigits) << "y: " << to_string(yv) << '\n'
          << "log_pmf: " << lp << '\n'
          << "pmf: " << std::exp(lp) << '\n'
          << "log_norm_const: " << dist.log_norm_const() << '\n';
    }
    return kExitOk;
  }
  if (json) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& z : enumerate_compositions(params.m(), params.k())) {
      const double lp = dist.log_pmf(z);
      rows.push_back({{"y", z}, {"log_pmf", json_number(lp)}, {"pmf", json_number(std::exp(lp))}});
    }
    out << nlohmann::json{{"log_norm_const", json_number(dist.log_norm_const())}, {"table", rows}}
               .dump(2)
        << '\n';
    return kExitOk;
  }
  out << std::setprecision(kHumanDigits);
  for (int j = 0; j < params.k(); ++j) out << "y_" << j + 1 << ',';
  out << "pmf,log_pmf\n";
  for (const auto& z : enumerate_compositions(params.m(), params.k())) {
    for (int v : z) out << v << ',';
    const double lp = dist.log_pmf(z);
    out << std::exp(lp) << ',' << lp << '\n';
  }
  return kExitOk;
}

int cmd_moments(const DistArgs& a, bool trial, bool json, std::ostream& out) {
  const CmmParams params = make_params(a);
  const MomentSummary mom = moments(params);
  std::unique_ptr<TrialCorrelation> tc;
  if (trial) tc = std::make_unique<TrialCorrelation>(trial_correlation(params));
  if (json) {
    nlohmann::json j{{"mean", vector_json(mom.mean)}, {"covariance", matrix_json(mom.covariance)}};
    if (tc) {
      j["trial_correlation"] = {{"trial_mean", vector_json(tc->trial_mean)},
                                {"trial_covariance", matrix_json(tc->trial_cov)},
                                {"cross_covariance", matrix_json(tc->cross_cov)},
                                {"correlation", matrix_json(tc->corr)}};
    }
    out << j.dump(2) << '\n';
    return kExitOk;
  }
  out << "mean: " << join(mom.mean) << '\n';
  print_matrix(out, "covariance", mom.covariance);
  if (tc) {
    out << "trial mean: " << join(tc->trial_mean) << '\n';
    print_matrix(out, "trial covariance", tc->trial_cov);
    print_matrix(out, "between-trial covariance", tc->cross_cov);
    print_matrix(out, "between-trial correlation", tc->corr);
  }
  return kExitOk;
}

int cmd_sample(const DistArgs& a, int n, std::uint64_t seed, int burn_in, int thin,
               const std::string& method, std::ostream& out) {
  const CmmParams params = make_params(a);
  if (n < 1) throw InvalidArgument("--n must be positive");
  RandomSource rng(seed);
  std::vector<CountVector> draws;
  if (method == "exact") {
    draws = ExactSampler(params).draw(n, rng);
  } else {
    draws = gibbs_chain(n, default_initial_state(params), params, {burn_in, thin}, rng).draws;
  }
  for (int j = 0; j < params.k(); ++j) out << (j ? "," : "") << "y_" << j + 1;
  out << '\n';
  for (const auto& d : draws) {
    for (std::size_t j = 0; j < d.categories(); ++j) out << (j ? "," : "") << d[j];
    out << '\n';
  }
  return kExitOk;
}

struct FitArgs {
  std::string data;
  std::string model = "cmm";
  std::string baseline;
  std::string nu_formula;
  std::string x_formula;
  bool x_formula_set = false;
  bool no_intercept_x = false;
  bool no_intercept_w = false;
  std::string se = "schur";
  int max_iterations = 200;
  std::string out;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  CsvOptions csv;
  csv.intercept_x = !a.no_intercept_x;
  csv.intercept_w = !a.no_intercept_w;
  csv.w_columns = split_names(a.nu_formula);
  if (a.x_formula_set) csv.x_columns = split_names(a.x_formula);
  const Dataset data = load_csv(a.data, csv);

  FitOptions options;
  options.max_iterations = a.max_iterations;
  options.se = a.se == "drop" ? SeConvention::kDropAlphas : SeConvention::kSchurComplement;
  if (!a.baseline.empty()) options.spec.baseline = data.category_index(a.baseline);
  const FitResult fit = a.model == "multinomial" ? fit_multinomial(data.observations, options)
                                                 : fit_cmm(data.observations, options);
  emit(to_json(make_report(fit, data)).dump(2) + "\n", a.out, out);
  if (!fit.converged) {
    err << "error: numerical: fit did not converge (" << to_string(fit.status) << "): "
        << fit.message << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, std::ostream& out) {
  std::ifstream f(config_path);
  if (!f) throw DataError(config_path + ": cannot open file");
  nlohmann::json cfg;
  try {
    f >> cfg;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(config_path + ": invalid JSON: " + e.what());
  }
  auto config = [&]() {
    try {
      DistArgs d;
      d.m = cfg.at("m").get<int>();
      d.p = cfg.at("p").get<std::vector<double>>();
      d.nu = cfg.at("nu").get<double>();
      d.baseline = cfg.value("baseline", -1);
      StudyConfig c{make_params(d)};
      c.n = cfg.at("n").get<int>();
      c.replicates = cfg.at("replicates").get<int>();
      c.seed = cfg.value("seed", std::uint64_t{1});
      c.burn_in = cfg.value("burn_in", 2000);
      c.threshold = cfg.value("threshold", 30.0);
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(config_path + ": " + e.what());
    }
  }();
  const StudyResult res = run_consistency_study(config);
  nlohmann::json reps = nlohmann::json::array();
  for (std::size_t r = 0; r < res.replicates.size(); ++r) {
    const auto& rep = res.replicates[r];
    reps.push_back({{"replicate", r},
                    {"q", json_number(rep.q)},
                    {"converged", rep.converged},
                    {"status", to_string(rep.status)},
                    {"eta_hat", vector_json(rep.eta_hat)}});
  }
  const nlohmann::json report{
      {"config", cfg},
      {"eta_true", vector_json(natural_parameters(config.true_params))},
      {"replicates", reps},
      {"summary",
       {{"replicates", res.replicates.size()},
        {"threshold", res.threshold},
        {"count_at_or_above", res.count_at_or_above},
        {"non_converged", res.non_converged},
        {"chi_squared_df", config.true_params.k()},
        {"ks_chi_squared", json_number(res.ks_chi_squared)}}}};
  emit(report.dump(2) + "\n", out_path, out);
  return kExitOk;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conway-Maxwell-multinomial distribution toolkit", "cmm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  DistArgs dist;
  std::vector<int> y;
  bool json = false;
  auto* density = app.add_subcommand("density", "Log-pmf of one outcome, or the full table");
  add_dist_options(density, dist);
  density->add_option("--y", y, "Outcome, comma separated")->delimiter(',');
  density->add_flag("--json", json, "JSON output at full precision");

  bool trial = false;
  auto* mom = app.add_subcommand("moments", "Mean and covariance of Y");
  add_dist_options(mom, dist);
  mom->add_flag("--trial-corr", trial, "Also report between-trial correlations");
  mom->add_flag("--json", json, "JSON output at full precision");

  int n = 0;
  std::uint64_t seed = 1;
  int burn_in = 1000;
  int thin = 1;
  std::string method = "gibbs";
  auto* sample = app.add_subcommand("sample", "Draw outcomes as CSV");
  add_dist_options(sample, dist);
  sample->add_option("--n", n, "Number of draws")->required();
  sample->add_option("--seed", seed, "Random seed")->capture_default_str();
  sample->add_option("--burn-in", burn_in, "Gibbs burn-in sweeps")->capture_default_str();
  sample->add_option("--thin", thin, "Keep every thin-th sweep")->capture_default_str();
  sample->add_option("--method", method, "gibbs or exact (enumeration)")
      ->check(CLI::IsMember({"gibbs", "exact"}))
      ->capture_default_str();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a CMM or multinomial regression to a CSV file");
  fit->add_option("--data", fa.data, "CSV file with y_, x_, w_ columns")->required();
  fit->add_option("--model", fa.model, "cmm or multinomial")
      ->check(CLI::IsMember({"cmm", "multinomial"}))
      ->capture_default_str();
  fit->add_option("--baseline", fa.baseline, "Baseline category name (default: last)");
  fit->add_option("--nu-formula", fa.nu_formula,
                  "w_ columns for the dispersion link, comma separated (default: intercept only)");
  auto* xf = fit->add_option("--x-formula", fa.x_formula,
                             "x_ columns for the probability link (default: all)");
  fit->add_flag("--no-intercept-x", fa.no_intercept_x, "Do not prepend an intercept to x");
  fit->add_flag("--no-intercept-w", fa.no_intercept_w, "Do not prepend an intercept to w");
  fit->add_option("--se", fa.se, "Standard-error convention: schur or drop")
      ->check(CLI::IsMember({"schur", "drop"}))
      ->capture_default_str();
  fit->add_option("--max-iter", fa.max_iterations, "Newton iteration cap")->capture_default_str();
  fit->add_option("--out", fa.out, "Write the JSON report here instead of stdout");

  std::string config_path, sim_out;
  auto* sim = app.add_subcommand("simulate", "Run a consistency study from a JSON config");
  sim->add_option("--config", config_path, "Study configuration (JSON)")->required();
  sim->add_option("--out", sim_out, "Write the JSON result here instead of stdout");

  std::vector<std::string> argv_store{"cmm"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    if (density->parsed()) return cmd_density(dist, y, json, out);
    if (mom->parsed()) return cmd_moments(dist, trial, json, out);
    if (sample->parsed()) return cmd_sample(dist, n, seed, burn_in, thin, method, out);
    if (fit->parsed()) {
      fa.x_formula_set = xf->count() > 0;
      return cmd_fit(fa, out, err);
    }
    if (sim->parsed()) return cmd_simulate(config_path, sim_out, out);
  } catch (const DataError& e) {
    err << "error: data: " << one_line(e.what()) << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "error: numerical: " << one_line(e.what()) << '\n';
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: numerical: " << one_line(e.what()) << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace cmm
