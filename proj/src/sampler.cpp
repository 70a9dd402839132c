#include "cmm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cmm/error.hpp"

namespace cmm {

namespace {

// Position of u * total in the running sums, following the inverse-cdf
// convention [Pi_{j-1}, Pi_j) -> j. Falls through to the last index
// carrying positive weight.
std::size_t search_cumulative(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) {
    // Only reachable through rounding; take the last positive-weight entry.
    auto last = std::lower_bound(cumulative.begin(), cumulative.end(), cumulative.back());
    return static_cast<std::size_t>(last - cumulative.begin());
  }
  return static_cast<std::size_t>(it - cumulative.begin());
}

std::vector<double> cumulative_from_log(std::span<const double> log_weights) {
  if (log_weights.empty()) throw InvalidArgument("cannot draw from an empty set");
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
      throw InvalidArgument("log-weights must be finite or -inf");
    }
    top = std::max(top, lw);
  }
  if (top == -std::numeric_limits<double>::infinity()) {
    throw InvalidArgument("all weights are zero");
  }
  std::vector<double> cumulative(log_weights.size());
  double run = 0.0;
  for (std::size_t j = 0; j < log_weights.size(); ++j) {
    run += std::exp(log_weights[j] - top);
    cumulative[j] = run;
  }
  return cumulative;
}

}  // namespace

std::size_t draw_index(std::span<const double> weights, RandomSource& rng) {
  if (weights.empty()) throw InvalidArgument("cannot draw from an empty set");
  std::vector<double> cumulative(weights.size());
  double run = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!std::isfinite(weights[j]) || weights[j] < 0.0) {
      throw InvalidArgument("weight " + std::to_string(j) + " is negative or not finite");
    }
    run += weights[j];
    cumulative[j] = run;
  }
  if (!(run > 0.0)) throw InvalidArgument("all weights are zero");
  return search_cumulative(cumulative, rng.uniform());
}

std::size_t draw_index_log(std::span<const double> log_weights, RandomSource& rng) {
  return search_cumulative(cumulative_from_log(log_weights), rng.uniform());
}

std::vector<double> cmb_log_weights(int m, double p, double nu) {
  if (m < 0) throw InvalidArgument("CMB trial count must be >= 0");
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument("CMB success probability must lie in (0, 1), got " + std::to_string(p));
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double lm = log_factorial(m);
  std::vector<double> out(static_cast<std::size_t>(m) + 1);
  for (int y = 0; y <= m; ++y) {
    const double coeff = lm - log_factorial(y) - log_factorial(m - y);
    out[static_cast<std::size_t>(y)] = nu * coeff + y * lp + (m - y) * lq;
  }
  return out;
}

int draw_cmb(int m, double p, double nu, RandomSource& rng) {
  const std::vector<double> lw = cmb_log_weights(m, p, nu);
  return static_cast<int>(draw_index_log(lw, rng));
}

ExactSampler::ExactSampler(const CmmParams& params) {
  const CmmDistribution dist(params);
  std::vector<double> log_weights;
  for (const auto& y : enumerate_compositions(params.m(), params.k())) {
    outcomes_.emplace_back(std::vector<int>(y.begin(), y.end()));
    log_weights.push_back(dist.log_pmf(y));
  }
  cumulative_ = cumulative_from_log(log_weights);
}

CountVector ExactSampler::draw(RandomSource& rng) const {
  return outcomes_[search_cumulative(cumulative_, rng.uniform())];
}

std::vector<CountVector> ExactSampler::draw(int n, RandomSource& rng) const {
  if (n < 0) throw InvalidArgument("number of draws must be >= 0");
  std::vector<CountVector> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(draw(rng));
  return out;
}

CountVector default_initial_state(const CmmParams& params) {
  return distinguished_subsets(params.m(), params.k()).centers.front();
}

GibbsChain gibbs_chain(int length, const CountVector& initial, const CmmParams& params,
                       const GibbsOptions& options, RandomSource& rng) {
  if (length <= 0) throw InvalidArgument("chain length must be positive");
  if (options.burn_in < 0) throw InvalidArgument("burn-in must be >= 0");
  if (options.thinning < 1) throw InvalidArgument("thinning must be >= 1");
  if (static_cast<int>(initial.categories()) != params.k() || initial.total() != params.m()) {
    throw InvalidArgument("initial state " + to_string(initial) + " is not in Omega_{" +
                          std::to_string(params.m()) + "," + std::to_string(params.k()) + "}");
  }

  const int m = params.m();
  const int base = params.baseline();
  const std::vector<int> free_cats = params.non_baseline();

  // cdf_cache[i][f]: running weights of the CMB conditional for category
  // free_cats[i] with f free trials, built on first use.
  std::vector<std::vector<std::vector<double>>> cdf_cache(
      free_cats.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(m) + 1));
  std::vector<double> success(free_cats.size());
  for (std::size_t i = 0; i < free_cats.size(); ++i) {
    const double pj = params.p(free_cats[i]);
    success[i] = pj / (pj + params.p(base));
  }

  std::vector<int> y = initial.vec();
  auto sweep = [&]() {
    for (std::size_t i = 0; i < free_cats.size(); ++i) {
      const auto j = static_cast<std::size_t>(free_cats[i]);
      const int f = y[j] + y[static_cast<std::size_t>(base)];
      auto& cdf = cdf_cache[i][static_cast<std::size_t>(f)];
      if (cdf.empty()) cdf = cumulative_from_log(cmb_log_weights(f, success[i], params.nu()));
      const int draw = static_cast<int>(search_cumulative(cdf, rng.uniform()));
      y[j] = draw;
      y[static_cast<std::size_t>(base)] = f - draw;
    }
  };

  for (int s = 0; s < options.burn_in; ++s) sweep();

  GibbsChain chain;
  chain.burn_in = options.burn_in;
  chain.thinning = options.thinning;
  chain.draws.reserve(static_cast<std::size_t>(length));
  while (static_cast<int>(chain.draws.size()) < length) {
    for (int t = 0; t < options.thinning; ++t) sweep();
    chain.draws.emplace_back(y);
  }
  return chain;
}

}  // namespace cmm
