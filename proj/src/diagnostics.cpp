#include "cmm/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "cmm/error.hpp"
#include "cmm/random.hpp"
#include "cmm/sampler.hpp"

namespace cmm {

double quadratic_form(const Eigen::VectorXd& eta_hat, const Eigen::VectorXd& eta_true,
                      const Eigen::MatrixXd& fim_true) {
  const auto d = eta_true.size();
  if (eta_hat.size() != d || fim_true.rows() != d || fim_true.cols() != d) {
    throw InvalidArgument("quadratic_form: dimension mismatch (eta " +
                          std::to_string(eta_hat.size()) + " vs " + std::to_string(d) +
                          ", information " + std::to_string(fim_true.rows()) + "x" +
                          std::to_string(fim_true.cols()) + ")");
  }
  const Eigen::VectorXd diff = eta_hat - eta_true;
  return diff.dot(fim_true * diff);
}

double rss(std::span<const Observation> data, const Eigen::MatrixXd& expected) {
  if (expected.rows() != static_cast<Eigen::Index>(data.size())) {
    throw InvalidArgument("rss: " + std::to_string(expected.rows()) + " rows of expected counts for " +
                          std::to_string(data.size()) + " observations");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& y = data[i].y;
    if (static_cast<Eigen::Index>(y.categories()) != expected.cols()) {
      throw InvalidArgument("rss: observation " + std::to_string(i) + " has " +
                            std::to_string(y.categories()) + " categories, expected counts have " +
                            std::to_string(expected.cols()));
    }
    for (std::size_t j = 0; j < y.categories(); ++j) {
      const double r = y[j] - expected(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      total += r * r;
    }
  }
  return total;
}

double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw InvalidArgument("ks_distance: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double f = cdf(s[i]);
    const double below = static_cast<double>(i) / n;
    const double at = static_cast<double>(j) / n;
    // Left limit of F is taken as F itself; exact for continuous references.
    d = std::max({d, std::abs(f - below), std::abs(at - f)});
    i = j;
  }
  return d;
}

double chi_squared_cdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

Eigen::VectorXd natural_parameters(const CmmParams& params) {
  const std::vector<double> logits = params.logits();
  Eigen::VectorXd eta(static_cast<Eigen::Index>(logits.size()) + 1);
  for (std::size_t j = 0; j < logits.size(); ++j) eta[static_cast<Eigen::Index>(j)] = logits[j];
  eta[eta.size() - 1] = params.nu();
  return eta;
}

std::vector<double> StudyResult::q_values() const {
  std::vector<double> out;
  out.reserve(replicates.size());
  for (const auto& r : replicates) out.push_back(r.q);
  return out;
}

StudyResult run_consistency_study(const StudyConfig& config) {
  if (config.replicates < 1) throw InvalidArgument("study needs at least one replicate");
  if (config.n < 2) throw InvalidArgument("study needs n >= 2 clusters per replicate");
  if (config.burn_in < 1) throw InvalidArgument("study burn-in must be positive");

  const CmmParams& truth = config.true_params;
  const Eigen::VectorXd eta = natural_parameters(truth);
  const Eigen::MatrixXd fim = iid_information(truth, config.n);
  const CountVector start = default_initial_state(truth);
  const GibbsOptions gibbs{config.burn_in, 1};

  FitOptions fit_options;
  fit_options.spec.baseline = truth.baseline();

  RandomSource master(config.seed);
  std::vector<RandomSource> streams;
  streams.reserve(static_cast<std::size_t>(config.replicates));
  for (int r = 0; r < config.replicates; ++r) streams.push_back(master.split());

  StudyResult out;
  out.threshold = config.threshold;
  out.replicates.resize(static_cast<std::size_t>(config.replicates));
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  for (int r = 0; r < config.replicates; ++r) {
    RandomSource& rng = streams[static_cast<std::size_t>(r)];
    std::vector<Observation> data;
    data.reserve(static_cast<std::size_t>(config.n));
    for (int i = 0; i < config.n; ++i) {
      data.push_back({gibbs_chain(1, start, truth, gibbs, rng).draws.front(), one, one});
    }
    StudyReplicate rep;
    const FitResult fit = fit_cmm(data, fit_options);
    rep.eta_hat = fit.psi_hat;
    rep.converged = fit.converged;
    rep.status = fit.status;
    rep.q = quadratic_form(fit.psi_hat, eta, fim);
    out.replicates[static_cast<std::size_t>(r)] = std::move(rep);
  }

  std::vector<double> finite;
  for (const auto& rep : out.replicates) {
    if (!rep.converged) ++out.non_converged;
    if (rep.q >= config.threshold) ++out.count_at_or_above;
    if (std::isfinite(rep.q)) finite.push_back(rep.q);
  }
  const double df = static_cast<double>(eta.size());
  if (!finite.empty()) {
    out.ks_chi_squared = ks_distance(finite, [df](double x) { return chi_squared_cdf(x, df); });
  }
  return out;
}

}  // namespace cmm
