#include "cmm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>

#include "cmm/diagnostics.hpp"
#include "cmm/error.hpp"

namespace cmm {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool has_prefix(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0 && s.size() > 2;
}

std::string where(const std::string& source, std::size_t row, const std::string& column) {
  return source + ": row " + std::to_string(row) + ", column '" + column + "'";
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Picks covariate column positions, in the order requested (or file order).
std::vector<std::size_t> select_columns(const std::vector<std::string>& header,
                                        const std::vector<std::size_t>& available,
                                        const std::optional<std::vector<std::string>>& wanted,
                                        const char* prefix, const std::string& source) {
  if (!wanted) return available;
  std::vector<std::size_t> out;
  for (const auto& name : *wanted) {
    // Accept names with or without the column prefix.
    const std::string full = name.starts_with(prefix) ? name : prefix + name;
    auto it = std::find_if(available.begin(), available.end(),
                           [&](std::size_t c) { return header[c] == full; });
    if (it == available.end()) {
      throw DataError(source + ": missing column '" + full + "'");
    }
    out.push_back(*it);
  }
  return out;
}

}  // namespace

int Dataset::category_index(const std::string& name) const {
  const auto it = std::find(categories.begin(), categories.end(), name);
  if (it == categories.end()) throw InvalidArgument("unknown category '" + name + "'");
  return static_cast<int>(it - categories.begin());
}

Dataset read_csv(std::istream& in, const CsvOptions& options, const std::string& source) {
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++row;
    if (!trim(line).empty()) header = split_fields(line);
  }
  if (header.empty()) throw DataError(source + ": no header row");

  std::vector<std::size_t> y_cols, x_all, w_all;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (has_prefix(header[c], "y_")) y_cols.push_back(c);
    else if (has_prefix(header[c], "x_")) x_all.push_back(c);
    else if (has_prefix(header[c], "w_")) w_all.push_back(c);
  }
  if (y_cols.size() < 2) {
    throw DataError(source + ": need at least two count columns prefixed 'y_', found " +
                    std::to_string(y_cols.size()));
  }
  const auto x_cols = select_columns(header, x_all, options.x_columns, "x_", source);
  const auto w_cols = select_columns(header, w_all, options.w_columns, "w_", source);

  Dataset data;
  data.intercept_x = options.intercept_x;
  data.intercept_w = options.intercept_w;
  for (auto c : y_cols) data.categories.push_back(header[c].substr(2));
  if (options.intercept_x) data.x_names.emplace_back("intercept");
  for (auto c : x_cols) data.x_names.push_back(header[c].substr(2));
  if (options.intercept_w) data.w_names.emplace_back("intercept");
  for (auto c : w_cols) data.w_names.push_back(header[c].substr(2));
  if (data.x_names.empty()) throw DataError(source + ": no probability covariates and no intercept");
  if (data.w_names.empty()) throw DataError(source + ": no dispersion covariates and no intercept");

  auto parse_real = [&](const std::string& field, std::size_t r, std::size_t c) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() ||
        !std::isfinite(v)) {
      throw DataError(where(source, r, header[c]) + ": '" + field + "' is not a finite number");
    }
    return v;
  };

  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(source + ": row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    std::vector<int> y;
    for (auto c : y_cols) {
      const std::string& f = fields[c];
      int v = 0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw DataError(where(source, row, header[c]) + ": '" + f + "' is not an integer count");
      }
      if (v < 0) throw DataError(where(source, row, header[c]) + ": negative count " + f);
      y.push_back(v);
    }
    Observation obs{CountVector(y), Eigen::VectorXd(static_cast<Eigen::Index>(data.x_names.size())),
                    Eigen::VectorXd(static_cast<Eigen::Index>(data.w_names.size()))};
    if (obs.y.total() < 1) throw DataError(source + ": row " + std::to_string(row) + " has no trials");
    Eigen::Index pos = 0;
    if (options.intercept_x) obs.x[pos++] = 1.0;
    for (auto c : x_cols) obs.x[pos++] = parse_real(fields[c], row, c);
    pos = 0;
    if (options.intercept_w) obs.w[pos++] = 1.0;
    for (auto c : w_cols) obs.w[pos++] = parse_real(fields[c], row, c);
    data.observations.push_back(std::move(obs));
  }
  if (data.observations.empty()) throw DataError(source + ": no data rows");
  return data;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  return read_csv(in, options, path);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const std::size_t x0 = data.intercept_x ? 1 : 0;
  const std::size_t w0 = data.intercept_w ? 1 : 0;
  std::vector<std::string> header;
  for (const auto& c : data.categories) header.push_back("y_" + c);
  for (std::size_t i = x0; i < data.x_names.size(); ++i) header.push_back("x_" + data.x_names[i]);
  for (std::size_t i = w0; i < data.w_names.size(); ++i) header.push_back("w_" + data.w_names[i]);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& obs : data.observations) {
    bool first = true;
    auto put = [&](const std::string& s) {
      out << (first ? "" : ",") << s;
      first = false;
    };
    for (int v : obs.y.counts()) put(std::to_string(v));
    for (auto i = static_cast<Eigen::Index>(x0); i < obs.x.size(); ++i) put(format_double(obs.x[i]));
    for (auto i = static_cast<Eigen::Index>(w0); i < obs.w.size(); ++i) put(format_double(obs.w[i]));
    out << '\n';
  }
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

namespace {

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string se_name(SeConvention c) {
  return c == SeConvention::kSchurComplement ? "schur_complement" : "drop_alphas";
}

}  // namespace

FitReport make_report(const FitResult& fit, const Dataset& data) {
  FitReport r;
  r.model = fit.spec.dispersion ? "cmm" : "multinomial";
  r.categories = data.categories;
  r.baseline = data.categories.at(static_cast<std::size_t>(fit.spec.baseline));
  int j = 0;
  for (int c = 0; c < fit.k; ++c) {
    if (c == fit.spec.baseline) continue;
    for (int i = 0; i < fit.d1; ++i) {
      const auto idx = static_cast<Eigen::Index>(j * fit.d1 + i);
      r.coefficients.push_back({data.categories[static_cast<std::size_t>(c)] + ":" +
                                    data.x_names[static_cast<std::size_t>(i)],
                                fit.psi_hat[idx], fit.std_errors[idx]});
    }
    ++j;
  }
  for (int i = 0; i < fit.d2; ++i) {
    const auto idx = static_cast<Eigen::Index>((fit.k - 1) * fit.d1 + i);
    r.coefficients.push_back({"nu:" + data.w_names[static_cast<std::size_t>(i)], fit.psi_hat[idx],
                              fit.std_errors[idx]});
  }
  r.loglik = fit.loglik;
  r.aic = fit.aic;
  r.n_parameters = fit.n_parameters;
  const Eigen::MatrixXd expected = expected_counts(fit, data.observations);
  r.rss = rss(data.observations, expected);
  for (Eigen::Index i = 0; i < expected.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(expected.cols()));
    for (Eigen::Index c = 0; c < expected.cols(); ++c) row[static_cast<std::size_t>(c)] = expected(i, c);
    r.expected_counts.push_back(std::move(row));
  }
  r.iterations = static_cast<int>(fit.iterations.size());
  r.converged = fit.converged;
  r.status = to_string(fit.status);
  r.message = fit.message;
  r.max_abs_score = fit.max_abs_score;
  r.se_convention = se_name(fit.se_convention);
  return r;
}

nlohmann::json to_json(const FitReport& r) {
  nlohmann::json coefs = nlohmann::json::array();
  for (const auto& c : r.coefficients) {
    coefs.push_back({{"name", c.name},
                     {"estimate", json_number(c.estimate)},
                     {"std_error", json_number(c.std_error)}});
  }
  nlohmann::json expected = nlohmann::json::array();
  for (const auto& row : r.expected_counts) {
    nlohmann::json jr = nlohmann::json::array();
    for (double v : row) jr.push_back(json_number(v));
    expected.push_back(std::move(jr));
  }
  return {{"model", r.model},
          {"categories", r.categories},
          {"baseline", r.baseline},
          {"coefficients", coefs},
          {"loglik", json_number(r.loglik)},
          {"aic", json_number(r.aic)},
          {"n_parameters", r.n_parameters},
          {"rss", json_number(r.rss)},
          {"expected_counts", expected},
          {"se_convention", r.se_convention},
          {"convergence",
           {{"iterations", r.iterations},
            {"converged", r.converged},
            {"status", r.status},
            {"message", r.message},
            {"max_abs_score", json_number(r.max_abs_score)}}}};
}

FitReport report_from_json(const nlohmann::json& j) {
  try {
    FitReport r;
    r.model = j.at("model").get<std::string>();
    r.categories = j.at("categories").get<std::vector<std::string>>();
    r.baseline = j.at("baseline").get<std::string>();
    for (const auto& c : j.at("coefficients")) {
      r.coefficients.push_back({c.at("name").get<std::string>(), number_or_nan(c.at("estimate")),
                                number_or_nan(c.at("std_error"))});
    }
    r.loglik = number_or_nan(j.at("loglik"));
    r.aic = number_or_nan(j.at("aic"));
    r.n_parameters = j.at("n_parameters").get<int>();
    r.rss = number_or_nan(j.at("rss"));
    for (const auto& row : j.at("expected_counts")) {
      std::vector<double> v;
      for (const auto& e : row) v.push_back(number_or_nan(e));
      r.expected_counts.push_back(std::move(v));
    }
    r.se_convention = j.at("se_convention").get<std::string>();
    const auto& conv = j.at("convergence");
    r.iterations = conv.at("iterations").get<int>();
    r.converged = conv.at("converged").get<bool>();
    r.status = conv.at("status").get<std::string>();
    r.message = conv.at("message").get<std::string>();
    r.max_abs_score = number_or_nan(conv.at("max_abs_score"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fit report: ") + e.what());
  }
}

}  // namespace cmm
