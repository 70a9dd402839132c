#pragma once

#include <Eigen/Dense>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cmm/distribution.hpp"
#include "cmm/sample_space.hpp"

namespace cmm {

// One cluster: its counts, probability-link covariates x (length d1) and
// dispersion-link covariates w (length d2). Intercept-only means x = (1).
struct Observation {
  CountVector y;
  Eigen::VectorXd x;
  Eigen::VectorXd w;
};

// Observations sharing (m, x, w) exactly, with the tally N(z) of each
// observed outcome z.
struct CollapsedCell {
  int m = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd w;
  int n = 0;
  std::map<CountVector, int> counts;
};

// Groups observations by (m, x, w), ordered lexicographically on that tuple.
std::vector<CollapsedCell> collapse(std::span<const Observation> data);

struct ModelSpec {
  int baseline = -1;        // category used for the logits; -1 = last
  bool dispersion = true;   // false pins nu = 1 and drops gamma
};

// Index bookkeeping for the working parameter
//   theta = (alpha_1..alpha_|cells|, gamma (d2), beta_1 (d1), ..., beta_{k-1} (d1)).
// psi is the same vector without the alphas.
class ThetaLayout {
 public:
  ThetaLayout(int cells, int k, int d1, int d2, bool dispersion);

  int cells() const { return cells_; }
  int k() const { return k_; }
  int d1() const { return d1_; }
  int d2() const { return dispersion_ ? d2_ : 0; }
  bool dispersion() const { return dispersion_; }
  int psi_size() const { return d2() + (k_ - 1) * d1_; }
  int size() const { return cells_ + psi_size(); }
  int alpha(int cell) const { return cell; }
  int gamma(int i) const { return cells_ + i; }
  int beta(int j, int i) const { return cells_ + d2() + j * d1_ + i; }

 private:
  int cells_, k_, d1_, d2_;
  bool dispersion_;
};

struct ThetaVector {
  Eigen::VectorXd alphas;
  Eigen::VectorXd gamma;
  std::vector<Eigen::VectorXd> betas;  // k - 1 vectors, non-baseline order

  Eigen::VectorXd flat(const ThetaLayout& layout) const;
  static ThetaVector unflat(const Eigen::VectorXd& flat, const ThetaLayout& layout);
};

// Working covariate s_{cell,z} = (1, ln binom(m; z) w, z_j1 x, ..., z_j{k-1} x)
// for the dispersion model, where j1.. are the non-baseline categories.
Eigen::VectorXd sufficient_stats(const CountVector& z, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& w, int baseline = -1);

// Log-likelihood of the CMM regression at psi = (beta_1..beta_{k-1}, gamma);
// for spec.dispersion == false psi holds only the betas and nu = 1.
double cmm_loglik(const Eigen::VectorXd& psi, std::span<const Observation> data,
                  const ModelSpec& spec = {});

struct ScoreInfo {
  Eigen::VectorXd score;  // theta order
  Eigen::MatrixXd fim;
};

// Score and Fisher information of the Poisson-trick likelihood at theta,
// one pass over each cell's sample space.
ScoreInfo score_and_fim(const ThetaVector& theta, std::span<const CollapsedCell> cells,
                        const ModelSpec& spec = {});

// The Poisson-trick log-likelihood itself (all constants included).
double poisson_loglik(const ThetaVector& theta, std::span<const CollapsedCell> cells,
                      const ModelSpec& spec = {});

// How standard errors are read off the information matrix over theta.
enum class SeConvention {
  kSchurComplement,  // invert the full matrix, keep the psi block
  kDropAlphas,       // delete the alpha rows/columns, then invert
};

struct FitOptions {
  ModelSpec spec;
  int max_iterations = 200;
  int max_halvings = 20;
  double score_tolerance = 1e-8;
  double step_tolerance = 1e-8;
  double gamma_bound = 1e3;
  SeConvention se = SeConvention::kSchurComplement;
};

enum class FitStatus { kConverged, kMaxIterations, kStalled, kBoundary, kSingular };
std::string to_string(FitStatus status);

struct IterationRecord {
  double loglik;
  int halvings;
  double max_abs_score;
};

struct FitResult {
  ModelSpec spec;
  int k = 0, d1 = 0, d2 = 0;
  Eigen::VectorXd psi_hat;         // (beta_1, ..., beta_{k-1}, gamma)
  Eigen::VectorXd std_errors;      // per `se_convention`
  Eigen::VectorXd std_errors_alt;  // the other convention, for comparison
  SeConvention se_convention = SeConvention::kSchurComplement;
  Eigen::MatrixXd covariance;      // of psi_hat, per `se_convention`
  Eigen::VectorXd alpha_hat;       // per collapsed cell
  Eigen::MatrixXd fim;             // over theta (alphas, gamma, betas)
  double loglik = 0.0;
  double aic = 0.0;
  int n_parameters = 0;
  double max_abs_score = 0.0;
  std::vector<IterationRecord> iterations;
  bool converged = false;
  FitStatus status = FitStatus::kMaxIterations;
  std::string message;
  std::vector<CollapsedCell> cells;

  // beta_j as a d1-vector, j over non-baseline categories.
  Eigen::VectorXd beta(int j) const { return psi_hat.segment(j * d1, d1); }
  Eigen::VectorXd gamma() const {
    return spec.dispersion ? Eigen::VectorXd(psi_hat.tail(d2)) : Eigen::VectorXd();
  }
};

FitResult fit_cmm(std::span<const Observation> data, const FitOptions& options = {});

// The embedded multinomial model (nu pinned to 1).
FitResult fit_multinomial(std::span<const Observation> data, FitOptions options = {});

// CMM parameters implied by psi at one covariate profile.
CmmParams params_at(const Eigen::VectorXd& psi, const ModelSpec& spec, int k, int m,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& w);
CmmParams fitted_params(const FitResult& fit, const Observation& obs);

// Fitted E(Y_i), one row per observation.
Eigen::MatrixXd expected_counts(const FitResult& fit, std::span<const Observation> data);

// Expected information for eta = (logits, nu) of n i.i.d. clusters from
// `params`: n Cov(s(Y)) with s = (y_j for non-baseline j, ln binom(m; y)).
Eigen::MatrixXd iid_information(const CmmParams& params, int n);

}  // namespace cmm
