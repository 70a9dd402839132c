#pragma once

#include <span>
#include <vector>

#include "cmm/distribution.hpp"
#include "cmm/error.hpp"
#include "cmm/random.hpp"
#include "cmm/sample_space.hpp"

namespace cmm {

// Inverse-cdf draw of an index with probability weights[j] / sum(weights).
// Weights need not be normalized; they must be finite, non-negative, and
// not all zero.
std::size_t draw_index(std::span<const double> weights, RandomSource& rng);

// Same, with weights given as logarithms (-inf allowed for zero weight).
std::size_t draw_index_log(std::span<const double> log_weights, RandomSource& rng);

template <class T>
const T& draw_discrete(std::span<const T> values, std::span<const double> weights,
                       RandomSource& rng) {
  if (values.size() != weights.size()) {
    throw InvalidArgument("draw_discrete: values and weights differ in length");
  }
  return values[draw_index(weights, rng)];
}

// Unnormalized log-weights nu ln binom(m, y) + y ln p + (m - y) ln(1 - p)
// for y = 0..m.
std::vector<double> cmb_log_weights(int m, double p, double nu);

// Exact CMB(m, p, nu) draw.
int draw_cmb(int m, double p, double nu, RandomSource& rng);

// Inverse-cdf sampling over the enumerated sample space, with outcomes in
// the canonical enumeration order. Holds the cumulative pmf, so it is
// limited by the sample-space guard.
class ExactSampler {
 public:
  explicit ExactSampler(const CmmParams& params);
  CountVector draw(RandomSource& rng) const;
  std::vector<CountVector> draw(int n, RandomSource& rng) const;
  std::size_t size() const { return outcomes_.size(); }

 private:
  std::vector<CountVector> outcomes_;
  std::vector<double> cumulative_;
};

struct GibbsOptions {
  int burn_in = 1000;
  int thinning = 1;
};

struct GibbsChain {
  std::vector<CountVector> draws;
  int burn_in = 0;
  int thinning = 1;
};

// A center point of Omega_{m,k}; always a valid starting state.
CountVector default_initial_state(const CmmParams& params);

// Systematic-scan Gibbs sampler. One sweep redraws each non-baseline
// coordinate j from its CMB conditional given everything except (j,
// baseline), putting the remainder in the baseline. After `burn_in` sweeps
// every `thinning`-th state is kept until `length` states are recorded.
GibbsChain gibbs_chain(int length, const CountVector& initial, const CmmParams& params,
                       const GibbsOptions& options, RandomSource& rng);

}  // namespace cmm
