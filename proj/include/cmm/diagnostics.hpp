#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmm/distribution.hpp"
#include "cmm/inference.hpp"

namespace cmm {

// (eta_hat - eta)^T I (eta_hat - eta).
double quadratic_form(const Eigen::VectorXd& eta_hat, const Eigen::VectorXd& eta_true,
                      const Eigen::MatrixXd& fim_true);

// Sum over observations and categories of (y_ij - expected_ij)^2.
double rss(std::span<const Observation> data, const Eigen::MatrixXd& expected);

// sup_t |F_n(t) - F(t)| for the empirical cdf F_n of `samples`, checked on
// both sides of every jump.
double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf);

double chi_squared_cdf(double x, double df);

// eta = (logits against the baseline, nu) for intercept-only data.
Eigen::VectorXd natural_parameters(const CmmParams& params);

struct StudyConfig {
  CmmParams true_params;
  int n = 200;
  int replicates = 100;
  std::uint64_t seed = 1;
  int burn_in = 2000;
  double threshold = 30.0;
};

struct StudyReplicate {
  double q = 0.0;
  bool converged = false;
  FitStatus status = FitStatus::kConverged;
  Eigen::VectorXd eta_hat;
};

struct StudyResult {
  std::vector<StudyReplicate> replicates;
  int count_at_or_above = 0;  // replicates with Q >= threshold
  int non_converged = 0;
  double threshold = 30.0;
  double ks_chi_squared = 0.0;  // KS distance of finite Q values to chi^2_k

  std::vector<double> q_values() const;
};

// Per replicate: n clusters, each the last state of a fresh Gibbs chain
// after `burn_in` sweeps; intercept-only CMM fit; Q against the true eta
// with the true-parameter information. Replicates use streams split from
// `seed` in order, so results do not depend on scheduling.
StudyResult run_consistency_study(const StudyConfig& config);

}  // namespace cmm
