#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include "json.hpp"
#include <optional>
#include <string>
#include <vector>

#include "cmm/inference.hpp"

namespace cmm {

// Observations plus the column names they came from. Covariate names
// exclude the `x_` / `w_` prefix; an added intercept is named "intercept".
struct Dataset {
  std::vector<std::string> categories;  // from y_ columns
  std::vector<std::string> x_names;
  std::vector<std::string> w_names;
  bool intercept_x = false;
  bool intercept_w = false;
  std::vector<Observation> observations;

  int k() const { return static_cast<int>(categories.size()); }
  int category_index(const std::string& name) const;
};

struct CsvOptions {
  bool intercept_x = true;
  bool intercept_w = true;
  // Covariate columns to keep, by name without prefix; nullopt keeps all.
  std::optional<std::vector<std::string>> x_columns;
  std::optional<std::vector<std::string>> w_columns;
};

// Header row required. Columns prefixed y_ are counts (at least two),
// x_ probability covariates, w_ dispersion covariates; others are ignored.
// Errors are DataError naming the row (1-based, header = row 1) and column.
Dataset read_csv(std::istream& in, const CsvOptions& options = {},
                 const std::string& source = "<input>");
Dataset load_csv(const std::string& path, const CsvOptions& options = {});

// Writes y_, x_, w_ columns (intercepts omitted) with round-trip precision.
void write_csv(std::ostream& out, const Dataset& data);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
};

struct FitReport {
  std::string model;  // "cmm" or "multinomial"
  std::vector<std::string> categories;
  std::string baseline;
  std::vector<Coefficient> coefficients;
  double loglik = 0.0;
  double aic = 0.0;
  int n_parameters = 0;
  double rss = 0.0;
  std::vector<std::vector<double>> expected_counts;
  int iterations = 0;
  bool converged = false;
  std::string status;
  std::string message;
  double max_abs_score = 0.0;
  std::string se_convention;
};

FitReport make_report(const FitResult& fit, const Dataset& data);
nlohmann::json to_json(const FitReport& report);
FitReport report_from_json(const nlohmann::json& j);

// Doubles as JSON numbers, with non-finite values written as null.
nlohmann::json json_number(double v);

}  // namespace cmm
