#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "cmm/sample_space.hpp"

namespace cmm {

// Parameters of one CMM_k(m, p, nu) distribution.
//
// p is a strictly positive probability vector; nu is any real. The baseline
// category (default: the last one) fixes the odds theta_j = p_j / p_baseline
// and logits phi_j = ln theta_j, indexed over the non-baseline categories
// in their natural order.
class CmmParams {
 public:
  CmmParams(int m, std::vector<double> p, double nu, int baseline = -1);

  // Builds p from k - 1 logits relative to `baseline`.
  static CmmParams from_logits(int m, std::span<const double> logits, double nu,
                               int baseline = -1);

  int m() const { return m_; }
  int k() const { return static_cast<int>(p_.size()); }
  double nu() const { return nu_; }
  int baseline() const { return baseline_; }
  std::span<const double> p() const { return p_; }
  double p(int j) const { return p_[static_cast<std::size_t>(j)]; }

  std::vector<double> log_p() const;
  std::vector<double> theta() const;
  std::vector<double> logits() const;
  // Categories other than the baseline, in index order.
  std::vector<int> non_baseline() const;

  CmmParams with_m(int m) const { return CmmParams(m, p_, nu_, baseline_); }
  CmmParams with_nu(double nu) const { return CmmParams(m_, p_, nu, baseline_); }

 private:
  int m_;
  std::vector<double> p_;
  double nu_;
  int baseline_;
};

// ln sum_{y in Omega_{m,k}} binom(m; y)^nu prod_j exp(y_j log_weights_j),
// for arbitrary (unnormalized) log-weights. k = 1 is allowed and gives
// m * log_weights_0. One streaming pass; guarded by check_space.
double log_norm_const_weights(std::span<const double> log_weights, double nu, int m);

// ln C(p, nu; m).
double log_norm_const_C(std::span<const double> p, double nu, int m);

// ln T(theta, nu; m) with theta the k - 1 odds against the last category.
double log_norm_const_T(std::span<const double> theta, double nu, int m);

// Density with ln C computed once and cached.
class CmmDistribution {
 public:
  explicit CmmDistribution(CmmParams params);

  const CmmParams& params() const { return params_; }
  double log_norm_const() const { return log_c_; }
  double log_pmf(std::span<const int> y) const;
  double log_pmf(const CountVector& y) const { return log_pmf(y.counts()); }
  double pmf(const CountVector& y) const;

 private:
  CmmParams params_;
  std::vector<double> log_p_;
  double log_c_;
};

double log_pmf(const CountVector& y, const CmmParams& params);

// Conway-Maxwell-binomial, the k = 2 case: log P(Y = y) for Y ~ CMB(m, p, nu).
double cmb_log_pmf(int y, int m, double p, double nu);

struct MomentSummary {
  Eigen::VectorXd mean;        // E(Y)
  Eigen::MatrixXd covariance;  // Var(Y)
};

MomentSummary moments(const CmmParams& params);

// Correlations between two distinct trials Z_1, Z_2 of the cluster.
struct TrialCorrelation {
  Eigen::MatrixXd corr;        // (j, l) = Corr(Z_1j, Z_2l)
  Eigen::MatrixXd cross_cov;   // Cov(Z_1, Z_2)
  Eigen::MatrixXd trial_cov;   // Var(Z_i)
  Eigen::VectorXd trial_mean;  // E(Z_i)
};

TrialCorrelation trial_correlation(const CmmParams& params);

// Probability and moment generating functions, as ratios of normalizing
// constants. The log forms avoid overflow; pgf requires t_j > 0.
double log_pgf(std::span<const double> t, const CmmParams& params);
double pgf(std::span<const double> t, const CmmParams& params);
double log_mgf(std::span<const double> t, const CmmParams& params);
double mgf(std::span<const double> t, const CmmParams& params);

// Marginal law of Y_A. `subset` holds distinct category indices (a proper,
// nonempty subset); `counts` the matching values with sum <= m.
double marginal_log_pmf(std::span<const int> subset, std::span<const int> counts,
                        const CmmParams& params);

// Law of the block totals (Y+_{A_1}, ..., Y+_{A_K}) for a partition of
// {0, ..., k-1}. `block_totals` must sum to m.
double grouped_log_pmf(const std::vector<std::vector<int>>& partition,
                       std::span<const int> block_totals, const CmmParams& params);

// Y_A | Y_B = y_B, returned as CMM_|A|(m - y_B+, p_A / p_A+, nu). `free_set`
// lists A (|A| >= 2); `fixed_counts` gives y_j for every j outside A, in
// increasing index order. Categories of the result follow the order of
// `free_set`; its baseline is the original baseline when that lies in A,
// otherwise the last entry of A.
CmmParams conditional_params(std::span<const int> free_set,
                             std::span<const int> fixed_counts, const CmmParams& params);

}  // namespace cmm
