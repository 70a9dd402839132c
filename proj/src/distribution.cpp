#include "cmm/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cmm/detail/weighted_moments.hpp"
#include "cmm/error.hpp"
#include "cmm/log_space.hpp"

namespace cmm {

namespace {

constexpr double kSumTolerance = 1e-12;

int resolve_baseline(int baseline, int k) {
  if (baseline < 0) return k - 1;
  if (baseline >= k) {
    throw InvalidArgument("baseline category " + std::to_string(baseline) +
                          " out of range for k = " + std::to_string(k));
  }
  return baseline;
}

std::vector<double> log_factorial_table(int m) {
  std::vector<double> table(static_cast<std::size_t>(m) + 1);
  for (int i = 0; i <= m; ++i) table[static_cast<std::size_t>(i)] = log_factorial(i);
  return table;
}

// Checks that `subset` holds distinct, in-range indices and returns its
// membership mask.
std::vector<bool> membership(std::span<const int> subset, int k, const char* what) {
  std::vector<bool> in(static_cast<std::size_t>(k), false);
  for (int j : subset) {
    if (j < 0 || j >= k) {
      throw InvalidArgument(std::string(what) + ": category index " + std::to_string(j) +
                            " out of range for k = " + std::to_string(k));
    }
    if (in[static_cast<std::size_t>(j)]) {
      throw InvalidArgument(std::string(what) + ": repeated category index " +
                            std::to_string(j));
    }
    in[static_cast<std::size_t>(j)] = true;
  }
  return in;
}

}  // namespace

CmmParams::CmmParams(int m, std::vector<double> p, double nu, int baseline)
    : m_(m), p_(std::move(p)), nu_(nu), baseline_(0) {
  if (m_ < 1) throw InvalidArgument("m must be >= 1, got " + std::to_string(m_));
  if (p_.size() < 2) throw InvalidArgument("CMM needs k >= 2 categories");
  if (!std::isfinite(nu_)) throw InvalidArgument("nu must be finite");
  double sum = 0.0;
  for (std::size_t j = 0; j < p_.size(); ++j) {
    if (!(p_[j] > 0.0) || !std::isfinite(p_[j])) {
      throw InvalidArgument("p[" + std::to_string(j) + "] = " + std::to_string(p_[j]) +
                            " must lie in (0, 1)");
    }
    sum += p_[j];
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InvalidArgument("probabilities sum to " + std::to_string(sum) + ", not 1");
  }
  baseline_ = resolve_baseline(baseline, k());
}

CmmParams CmmParams::from_logits(int m, std::span<const double> logits, double nu,
                                 int baseline) {
  const int k = static_cast<int>(logits.size()) + 1;
  const int b = resolve_baseline(baseline, k);
  std::vector<double> log_w(static_cast<std::size_t>(k), 0.0);
  for (int j = 0, i = 0; j < k; ++j) {
    if (j == b) continue;
    log_w[static_cast<std::size_t>(j)] = logits[static_cast<std::size_t>(i++)];
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double total = 0.0;
  for (double lw : log_w) total += std::exp(lw - top);
  std::vector<double> p(static_cast<std::size_t>(k));
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::exp(log_w[j] - top) / total;
  return CmmParams(m, std::move(p), nu, b);
}

std::vector<double> CmmParams::log_p() const {
  std::vector<double> out(p_.size());
  std::transform(p_.begin(), p_.end(), out.begin(), [](double v) { return std::log(v); });
  return out;
}

std::vector<int> CmmParams::non_baseline() const {
  std::vector<int> out;
  for (int j = 0; j < k(); ++j) {
    if (j != baseline_) out.push_back(j);
  }
  return out;
}

std::vector<double> CmmParams::theta() const {
  std::vector<double> out;
  for (int j : non_baseline()) out.push_back(p(j) / p(baseline_));
  return out;
}

std::vector<double> CmmParams::logits() const {
  std::vector<double> out;
  for (int j : non_baseline()) out.push_back(std::log(p(j)) - std::log(p(baseline_)));
  return out;
}

double log_norm_const_weights(std::span<const double> log_weights, double nu, int m) {
  if (log_weights.empty()) throw InvalidArgument("need at least one category");
  if (m < 0) throw InvalidArgument("m must be >= 0, got " + std::to_string(m));
  const int k = static_cast<int>(log_weights.size());
  if (k == 1) return m == 0 ? 0.0 : m * log_weights[0];
  const std::vector<double> lf = log_factorial_table(m);
  LogSumExp lse;
  for (const auto& y : enumerate_compositions(m, k)) {
    double coeff = lf[static_cast<std::size_t>(m)];
    double term = 0.0;
    for (int j = 0; j < k; ++j) {
      const int c = y[static_cast<std::size_t>(j)];
      coeff -= lf[static_cast<std::size_t>(c)];
      if (c) term += c * log_weights[static_cast<std::size_t>(j)];
    }
    lse.add(nu * coeff + term);
  }
  return lse.value();
}

double log_norm_const_C(std::span<const double> p, double nu, int m) {
  std::vector<double> lp(p.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] > 0.0)) throw InvalidArgument("probabilities must be positive");
    sum += p[j];
    lp[j] = std::log(p[j]);
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InvalidArgument("probabilities sum to " + std::to_string(sum) + ", not 1");
  }
  return log_norm_const_weights(lp, nu, m);
}

double log_norm_const_T(std::span<const double> theta, double nu, int m) {
  std::vector<double> lw(theta.size() + 1, 0.0);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (!(theta[j] > 0.0)) throw InvalidArgument("odds must be positive");
    lw[j] = std::log(theta[j]);
  }
  return log_norm_const_weights(lw, nu, m);
}

CmmDistribution::CmmDistribution(CmmParams params)
    : params_(std::move(params)),
      log_p_(params_.log_p()),
      log_c_(log_norm_const_weights(log_p_, params_.nu(), params_.m())) {}

double CmmDistribution::log_pmf(std::span<const int> y) const {
  if (static_cast<int>(y.size()) != params_.k()) {
    throw InvalidArgument("count vector has " + std::to_string(y.size()) +
                          " categories, distribution has " + std::to_string(params_.k()));
  }
  int total = 0;
  double acc = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] < 0) throw InvalidArgument("negative count");
    total += y[j];
    acc += y[j] * log_p_[j];
  }
  if (total != params_.m()) {
    throw InvalidArgument("count vector sums to " + std::to_string(total) + ", expected m = " +
                          std::to_string(params_.m()));
  }
  return params_.nu() * log_multinomial_coeff(y) + acc - log_c_;
}

double CmmDistribution::pmf(const CountVector& y) const { return std::exp(log_pmf(y)); }

double log_pmf(const CountVector& y, const CmmParams& params) {
  return CmmDistribution(params).log_pmf(y);
}

double cmb_log_pmf(int y, int m, double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("CMB success probability must lie in (0, 1)");
  if (y < 0 || y > m) throw InvalidArgument("CMB outcome outside [0, m]");
  const double lw[2] = {std::log(p), std::log1p(-p)};
  const int yy[2] = {y, m - y};
  return nu * log_multinomial_coeff(yy) + y * lw[0] + (m - y) * lw[1] -
         log_norm_const_weights(lw, nu, m);
}

MomentSummary moments(const CmmParams& params) {
  const int m = params.m();
  const int k = params.k();
  const std::vector<double> lp = params.log_p();
  const std::vector<double> lf = log_factorial_table(m);
  detail::WeightedMoments acc(k);
  Eigen::VectorXd v(k);
  for (const auto& y : enumerate_compositions(m, k)) {
    double lw = 0.0;
    double coeff = lf[static_cast<std::size_t>(m)];
    for (int j = 0; j < k; ++j) {
      const int c = y[static_cast<std::size_t>(j)];
      coeff -= lf[static_cast<std::size_t>(c)];
      lw += c * lp[static_cast<std::size_t>(j)];
      v[j] = c;
    }
    acc.add(params.nu() * coeff + lw, v);
  }
  MomentSummary out;
  out.mean = acc.mean();
  Eigen::MatrixXd cov = acc.second_moment() - out.mean * out.mean.transpose();
  out.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

TrialCorrelation trial_correlation(const CmmParams& params) {
  const int m = params.m();
  if (m < 2) throw InvalidArgument("trial correlation needs m >= 2, got m = " + std::to_string(m));
  const MomentSummary mom = moments(params);
  const Eigen::VectorXd& mu = mom.mean;
  const Eigen::MatrixXd second = mom.covariance + mu * mu.transpose();  // E(Y Y^T)

  TrialCorrelation out;
  out.trial_mean = mu / m;
  out.trial_cov = Eigen::MatrixXd(out.trial_mean.asDiagonal()) -
                  out.trial_mean * out.trial_mean.transpose();
  const double pairs = static_cast<double>(m) * (m - 1);
  out.cross_cov = (second - Eigen::MatrixXd(mu.asDiagonal())) / pairs -
                  mu * mu.transpose() / (static_cast<double>(m) * m);
  out.cross_cov = 0.5 * (out.cross_cov + out.cross_cov.transpose()).eval();
  const Eigen::VectorXd sd = out.trial_cov.diagonal().cwiseSqrt();
  out.corr = out.cross_cov.array() / (sd * sd.transpose()).array();
  return out;
}

double log_pgf(std::span<const double> t, const CmmParams& params) {
  if (static_cast<int>(t.size()) != params.k()) {
    throw InvalidArgument("pgf argument has wrong dimension");
  }
  std::vector<double> lw = params.log_p();
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (!(t[j] > 0.0)) {
      throw InvalidArgument("pgf is evaluated in log space and needs t_j > 0, got t[" +
                            std::to_string(j) + "] = " + std::to_string(t[j]));
    }
    lw[j] += std::log(t[j]);
  }
  return log_norm_const_weights(lw, params.nu(), params.m()) -
         log_norm_const_weights(params.log_p(), params.nu(), params.m());
}

double pgf(std::span<const double> t, const CmmParams& params) {
  return std::exp(log_pgf(t, params));
}

double log_mgf(std::span<const double> t, const CmmParams& params) {
  if (static_cast<int>(t.size()) != params.k()) {
    throw InvalidArgument("mgf argument has wrong dimension");
  }
  std::vector<double> lw = params.log_p();
  for (std::size_t j = 0; j < t.size(); ++j) lw[j] += t[j];
  return log_norm_const_weights(lw, params.nu(), params.m()) -
         log_norm_const_weights(params.log_p(), params.nu(), params.m());
}

double mgf(std::span<const double> t, const CmmParams& params) {
  return std::exp(log_mgf(t, params));
}

double marginal_log_pmf(std::span<const int> subset, std::span<const int> counts,
                        const CmmParams& params) {
  const int k = params.k();
  const int m = params.m();
  if (subset.empty() || static_cast<int>(subset.size()) >= k) {
    throw InvalidArgument("marginal needs a nonempty proper subset of categories");
  }
  if (counts.size() != subset.size()) {
    throw InvalidArgument("marginal counts and subset differ in length");
  }
  const std::vector<bool> in_a = membership(subset, k, "marginal");
  int used = 0;
  for (int c : counts) {
    if (c < 0) throw InvalidArgument("marginal counts must be non-negative");
    used += c;
  }
  if (used > m) {
    throw InvalidArgument("marginal counts sum to " + std::to_string(used) +
                          ", more than m = " + std::to_string(m));
  }
  const int rest = m - used;

  std::vector<double> lp_b;
  double p_b = 0.0;
  for (int j = 0; j < k; ++j) {
    if (!in_a[static_cast<std::size_t>(j)]) p_b += params.p(j);
  }
  for (int j = 0; j < k; ++j) {
    if (!in_a[static_cast<std::size_t>(j)]) lp_b.push_back(std::log(params.p(j) / p_b));
  }
  std::vector<int> reduced(counts.begin(), counts.end());
  reduced.push_back(rest);

  double acc = log_norm_const_weights(lp_b, params.nu(), rest) -
               log_norm_const_weights(params.log_p(), params.nu(), m) +
               params.nu() * log_multinomial_coeff(reduced) + rest * std::log(p_b);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    acc += counts[i] * std::log(params.p(subset[i]));
  }
  return acc;
}

double grouped_log_pmf(const std::vector<std::vector<int>>& partition,
                       std::span<const int> block_totals, const CmmParams& params) {
  const int k = params.k();
  if (partition.empty()) throw InvalidArgument("partition has no blocks");
  if (partition.size() != block_totals.size()) {
    throw InvalidArgument("partition and block totals differ in length");
  }
  std::vector<int> flat;
  for (const auto& block : partition) {
    if (block.empty()) throw InvalidArgument("partition contains an empty block");
    flat.insert(flat.end(), block.begin(), block.end());
  }
  const std::vector<bool> covered = membership(flat, k, "partition");
  if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
    throw InvalidArgument("partition does not cover every category");
  }
  int total = 0;
  for (int c : block_totals) {
    if (c < 0) throw InvalidArgument("block totals must be non-negative");
    total += c;
  }
  if (total != params.m()) {
    throw InvalidArgument("block totals sum to " + std::to_string(total) + ", expected m = " +
                          std::to_string(params.m()));
  }

  double acc = params.nu() * log_multinomial_coeff(block_totals) -
               log_norm_const_weights(params.log_p(), params.nu(), params.m());
  for (std::size_t b = 0; b < partition.size(); ++b) {
    double mass = 0.0;
    for (int j : partition[b]) mass += params.p(j);
    std::vector<double> lp;
    for (int j : partition[b]) lp.push_back(std::log(params.p(j) / mass));
    acc += log_norm_const_weights(lp, params.nu(), block_totals[b]) +
           block_totals[b] * std::log(mass);
  }
  return acc;
}

CmmParams conditional_params(std::span<const int> free_set, std::span<const int> fixed_counts,
                             const CmmParams& params) {
  const int k = params.k();
  if (free_set.size() < 2) {
    throw InvalidArgument("conditioning leaves fewer than 2 free categories; the law is a point mass");
  }
  membership(free_set, k, "conditional");
  if (fixed_counts.size() != static_cast<std::size_t>(k) - free_set.size()) {
    throw InvalidArgument("conditional needs one fixed count per category outside the free set");
  }
  int fixed_total = 0;
  for (int c : fixed_counts) {
    if (c < 0) throw InvalidArgument("fixed counts must be non-negative");
    fixed_total += c;
  }
  const int m_free = params.m() - fixed_total;
  if (m_free <= 0) {
    throw InvalidArgument("fixed counts use " + std::to_string(fixed_total) + " of m = " +
                          std::to_string(params.m()) + " trials; no free trials remain");
  }
  double mass = 0.0;
  for (int j : free_set) mass += params.p(j);
  std::vector<double> p;
  int baseline = static_cast<int>(free_set.size()) - 1;
  for (std::size_t i = 0; i < free_set.size(); ++i) {
    p.push_back(params.p(free_set[i]) / mass);
    if (free_set[i] == params.baseline()) baseline = static_cast<int>(i);
  }
  // Renormalize to absorb rounding in the division above.
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= s;
  return CmmParams(m_free, std::move(p), params.nu(), baseline);
}

}  // namespace cmm
