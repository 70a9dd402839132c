#include <doctest.h>

#include <random>

#include "cmm/error.hpp"
#include "cmm/inference.hpp"
#include "cmm/random.hpp"
#include "cmm/sampler.hpp"
#include "oracles.hpp"

using namespace cmm;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::vector<double> stdvec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

oracle::RegressionData to_oracle(const std::vector<Observation>& data) {
  oracle::RegressionData out;
  for (const auto& o : data) {
    out.y.push_back(o.y.vec());
    out.x.push_back(stdvec(o.x));
    out.w.push_back(stdvec(o.w));
  }
  return out;
}

// n clusters with a binary covariate in both links; m varies in 2..max_m.
std::vector<Observation> simulate(int n, int max_m, const Eigen::VectorXd& psi, std::uint64_t seed,
                                  bool covariate = true) {
  RandomSource rng(seed);
  std::vector<Observation> data;
  for (int i = 0; i < n; ++i) {
    const int m = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_m - 1));
    const double z = covariate ? static_cast<double>(i % 2) : 0.0;
    Eigen::VectorXd x = covariate ? vec({1.0, z}) : vec({1.0});
    Eigen::VectorXd w = vec({1.0});
    const CmmParams params = params_at(psi, {}, 3, m, x, w);
    data.push_back({ExactSampler(params).draw(rng), x, w});
  }
  return data;
}

// ln sum_z exp(eta_z) for one cell, straight from the definition.
double cell_log_total(const CollapsedCell& cell, const Eigen::VectorXd& psi, int k) {
  const auto d1 = cell.x.size();
  double top = -1e300;
  std::vector<double> terms;
  for (const auto& z : oracle::outcomes(cell.m, k)) {
    double eta = psi.tail(cell.w.size()).dot(cell.w) *
                 std::log(static_cast<double>(oracle::to_ld(oracle::multinomial_coeff(z))));
    for (int j = 0; j + 1 < k; ++j) eta += z[static_cast<std::size_t>(j)] * psi.segment(j * d1, d1).dot(cell.x);
    terms.push_back(eta);
    top = std::max(top, eta);
  }
  double s = 0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

}  // namespace

TEST_CASE("collapsing groups identical profiles and tallies outcomes") {
  const Eigen::VectorXd one = vec({1.0});
  const std::vector<Observation> data{{{2, 0}, one, one},   {{1, 1}, one, one},
                                      {{1, 1}, one, one},   {{0, 3}, one, one},
                                      {{1, 1}, vec({2.0}), one}};
  const auto cells = collapse(data);
  REQUIRE(cells.size() == 3);
  CHECK(cells[0].m == 2);
  CHECK(cells[0].x[0] == 1.0);
  CHECK(cells[0].n == 3);
  CHECK(cells[0].counts.at(CountVector{1, 1}) == 2);
  CHECK(cells[0].counts.at(CountVector{2, 0}) == 1);
  CHECK(cells[1].m == 2);
  CHECK(cells[1].x[0] == 2.0);
  CHECK(cells[2].m == 3);
  CHECK(cells[2].n == 1);
}

TEST_CASE("working covariate layout") {
  const auto s = sufficient_stats(CountVector{2, 1, 3}, vec({1.0, 0.5}), vec({1.0, 2.0}));
  REQUIRE(s.size() == 1 + 2 + 2 * 2);
  const double lb = std::log(60.0);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == doctest::Approx(lb));
  CHECK(s[2] == doctest::Approx(2 * lb));
  CHECK(s[3] == 2.0);
  CHECK(s[4] == 1.0);
  CHECK(s[5] == 1.0);
  CHECK(s[6] == 0.5);
  const auto sb = sufficient_stats(CountVector{2, 1, 3}, vec({1.0}), vec({1.0}), 0);
  CHECK(sb[2] == 1.0);
  CHECK(sb[3] == 3.0);
  const ThetaLayout layout(4, 3, 2, 2, true);
  CHECK(layout.size() == 4 + 2 + 4);
  CHECK(layout.beta(1, 1) == 9);
  const ThetaLayout mult(4, 3, 2, 2, false);
  CHECK(mult.psi_size() == 4);
}

TEST_CASE("regression log-likelihood agrees with the oracle") {
  const Eigen::VectorXd psi = vec({0.4, -0.3, -0.2, 0.5, 1.7});
  const auto data = simulate(25, 4, psi, 3);
  const oracle::LoglikOracle ref(to_oracle(data));
  for (const Eigen::VectorXd& at : {psi, vec({0.0, 0.0, 0.0, 0.0, 1.0}), vec({1.0, -1.0, 0.5, 0.2, -0.8})}) {
    CHECK(cmm_loglik(at, data) == doctest::Approx(ref(stdvec(at))).epsilon(1e-11));
  }
  const double one = 1.0;
  const Eigen::VectorXd betas = psi.head(4);
  CHECK(cmm_loglik(betas, data, {-1, false}) == doctest::Approx(ref(stdvec(betas), &one)).epsilon(1e-11));
}

TEST_CASE("score and information are the derivatives of the Poisson log-likelihood") {
  const Eigen::VectorXd psi = vec({0.4, -0.3, -0.2, 0.5, 1.3});
  const auto data = simulate(20, 3, psi, 4);
  const auto cells = collapse(data);
  for (bool dispersion : {true, false}) {
    const ModelSpec spec{-1, dispersion};
    const ThetaLayout layout(static_cast<int>(cells.size()), 3, 2, 1, dispersion);
    Eigen::VectorXd flat(layout.size());
    for (int c = 0; c < layout.cells(); ++c) flat[c] = -0.5 - 0.1 * c;
    if (dispersion) flat[layout.gamma(0)] = 1.3;
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i) flat[layout.beta(j, i)] = psi[2 * j + i];
    }
    const auto theta = ThetaVector::unflat(flat, layout);
    CHECK(theta.flat(layout) == flat);
    const auto si = score_and_fim(theta, cells, spec);
    auto ll = [&](const Eigen::VectorXd& t) { return poisson_loglik(ThetaVector::unflat(t, layout), cells, spec); };
    const double h = 1e-5;
    for (int a = 0; a < layout.size(); ++a) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(layout.size());
      e[a] = h;
      CHECK(si.score[a] == doctest::Approx((ll(flat + e) - ll(flat - e)) / (2 * h)).epsilon(1e-6).scale(1.0));
      for (int b = 0; b < layout.size(); ++b) {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(layout.size());
        const double h2 = 1e-4;
        e[a] = h2;
        f[b] = h2;
        const double hess = (ll(flat + e + f) - ll(flat + e - f) - ll(flat - e + f) + ll(flat - e - f)) / (4 * h2 * h2);
        e[a] = h;
        CHECK(si.fim(a, b) == doctest::Approx(-hess).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("Poisson likelihood at profiled intercepts equals the CMM likelihood plus a constant") {
  const Eigen::VectorXd psi = vec({0.2, 0.1, -0.4, 0.3, 0.6});
  const auto data = simulate(30, 4, psi, 5);
  const auto cells = collapse(data);
  const ThetaLayout layout(static_cast<int>(cells.size()), 3, 2, 1, true);
  ThetaVector theta;
  theta.alphas.resize(layout.cells());
  double constant = 0;
  for (int c = 0; c < layout.cells(); ++c) {
    const auto& cell = cells[static_cast<std::size_t>(c)];
    theta.alphas[c] = -cell_log_total(cell, psi, 3);
    constant += cell.n * std::log(static_cast<double>(cell.n)) - cell.n;
    for (const auto& [z, count] : cell.counts) constant -= std::lgamma(count + 1.0);
  }
  theta.gamma = psi.tail(1);
  theta.betas = {psi.segment(0, 2), psi.segment(2, 2)};
  CHECK(poisson_loglik(theta, cells) == doctest::Approx(cmm_loglik(psi, data) + constant).epsilon(1e-11));
}

TEST_CASE("hand-derived example: symmetric binomial data give p = 1/2, nu = 1") {
  const Eigen::VectorXd one = vec({1.0});
  const std::vector<Observation> data{{{2, 0}, one, one}, {{1, 1}, one, one},
                                      {{1, 1}, one, one}, {{0, 2}, one, one}};
  const auto fit = fit_cmm(data);
  REQUIRE(fit.converged);
  const auto params = fitted_params(fit, data.front());
  CHECK(params.p(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fit.gamma()[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.loglik == doctest::Approx(2 * std::log(0.25) + 2 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("fit reaches the oracle maximum") {
  const Eigen::VectorXd psi = vec({0.5, -0.4, -0.3, 0.6, 1.5});
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    const auto data = simulate(30, 4, psi, seed);
    const auto fit = fit_cmm(data);
    REQUIRE(fit.converged);
    const oracle::LoglikOracle ref(to_oracle(data));
    const auto best = oracle::nelder_mead([&](const std::vector<double>& x) { return -ref(x); },
                                          {0.0, 0.0, 0.0, 0.0, 1.0});
    CHECK(fit.loglik == doctest::Approx(ref(best)).epsilon(1e-8));
    CHECK(fit.loglik >= ref(best) - 1e-9);
    for (int i = 0; i < 5; ++i) CHECK(fit.psi_hat[i] == doctest::Approx(best[static_cast<std::size_t>(i)]).epsilon(1e-3).scale(1.0));
    CHECK(fit.max_abs_score < 1e-8);
    // Newton with step-halving never lowers the likelihood.
    for (std::size_t t = 1; t < fit.iterations.size(); ++t) {
      CHECK(fit.iterations[t].loglik >= fit.iterations[t - 1].loglik - 1e-12);
    }
    // Intercept-recovery identity at the estimate.
    for (std::size_t c = 0; c < fit.cells.size(); ++c) {
      CHECK(fit.alpha_hat[static_cast<Eigen::Index>(c)] ==
            doctest::Approx(-cell_log_total(fit.cells[c], fit.psi_hat, 3)).epsilon(1e-8));
    }
  }
}

TEST_CASE("standard errors invert the curvature of the profile likelihood") {
  const Eigen::VectorXd psi = vec({0.5, -0.4, -0.3, 0.6, 1.5});
  const auto data = simulate(30, 4, psi, 40);
  const auto fit = fit_cmm(data);
  REQUIRE(fit.converged);
  const int P = 5;
  Eigen::MatrixXd hess(P, P);
  const double h = 1e-4;
  for (int a = 0; a < P; ++a) {
    for (int b = 0; b < P; ++b) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(P), f = Eigen::VectorXd::Zero(P);
      e[a] = h;
      f[b] = h;
      const auto& x = fit.psi_hat;
      hess(a, b) = (cmm_loglik(x + e + f, data) - cmm_loglik(x + e - f, data) -
                    cmm_loglik(x - e + f, data) + cmm_loglik(x - e - f, data)) / (4 * h * h);
    }
  }
  const Eigen::MatrixXd cov = (-hess).inverse();
  for (int a = 0; a < P; ++a) {
    CHECK(fit.std_errors[a] == doctest::Approx(std::sqrt(cov(a, a))).epsilon(1e-4));
    CHECK(fit.std_errors_alt[a] < fit.std_errors[a] + 1e-12);
  }
  FitOptions drop;
  drop.se = SeConvention::kDropAlphas;
  const auto fit2 = fit_cmm(data, drop);
  CHECK(fit2.std_errors == fit.std_errors_alt);
}

TEST_CASE("multinomial fit has the closed-form estimate and standard errors") {
  const Eigen::VectorXd one = vec({1.0});
  std::vector<Observation> data;
  RandomSource rng(50);
  const CmmParams truth(6, {0.6, 0.3, 0.1}, 1.0);
  const ExactSampler sampler(truth);
  for (int i = 0; i < 40; ++i) data.push_back({sampler.draw(rng), one, one});
  std::vector<double> tot(3, 0);
  for (const auto& o : data) for (int j = 0; j < 3; ++j) tot[j] += o.y[static_cast<std::size_t>(j)];
  const double N = tot[0] + tot[1] + tot[2];
  const auto fit = fit_multinomial(data);
  REQUIRE(fit.converged);
  CHECK(fit.n_parameters == 2);
  for (int j = 0; j < 2; ++j) {
    CHECK(fit.psi_hat[j] == doctest::Approx(std::log(tot[j] / tot[2])).epsilon(1e-9));
    CHECK(fit.std_errors[j] == doctest::Approx(std::sqrt(1 / tot[j] + 1 / tot[2])).epsilon(1e-8));
  }
  double ll = 0;
  for (const auto& o : data) {
    ll += std::log(oracle::multinomial_pmf(o.y.vec(), {tot[0] / N, tot[1] / N, tot[2] / N}));
  }
  CHECK(fit.loglik == doctest::Approx(ll).epsilon(1e-10));
  CHECK(fit.aic == doctest::Approx(-2 * ll + 4).epsilon(1e-10));
  // The dispersion model nests the multinomial one.
  const auto cmm = fit_cmm(data);
  CHECK(cmm.loglik >= fit.loglik - 1e-9);
}

TEST_CASE("baseline choice changes logits but not the fit") {
  const Eigen::VectorXd psi = vec({0.3, -0.6, 1.2});
  const auto data = simulate(30, 5, psi, 60, false);
  FitOptions a, b;
  b.spec.baseline = 0;
  const auto fa = fit_cmm(data, a);
  const auto fb = fit_cmm(data, b);
  REQUIRE(fa.converged);
  REQUIRE(fb.converged);
  CHECK(fa.loglik == doctest::Approx(fb.loglik).epsilon(1e-10));
  CHECK(fa.gamma()[0] == doctest::Approx(fb.gamma()[0]).epsilon(1e-7));
  CHECK(fa.std_errors[2] == doctest::Approx(fb.std_errors[2]).epsilon(1e-7));
  // logit(1 vs 0) = logit(1 vs 2) - logit(0 vs 2)
  CHECK(fb.psi_hat[0] == doctest::Approx(fa.psi_hat[1] - fa.psi_hat[0]).epsilon(1e-7));
  const auto pa = fitted_params(fa, data.front());
  const auto pb = fitted_params(fb, data.front());
  for (int j = 0; j < 3; ++j) CHECK(pa.p(j) == doctest::Approx(pb.p(j)).epsilon(1e-7));
}

TEST_CASE("expected counts are the fitted means") {
  const Eigen::VectorXd psi = vec({0.5, -0.4, -0.3, 0.6, 1.5});
  const auto data = simulate(20, 4, psi, 70);
  const auto fit = fit_cmm(data);
  const auto e = expected_counts(fit, data);
  REQUIRE(e.rows() == 20);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto params = fitted_params(fit, data[i]);
    const auto ref = oracle::moments(params.m(), {params.p().begin(), params.p().end()}, params.nu());
    for (int j = 0; j < 3; ++j) {
      CHECK(e(static_cast<Eigen::Index>(i), j) == doctest::Approx(ref.mean[static_cast<std::size_t>(j)]).epsilon(1e-9));
    }
    CHECK(e.row(static_cast<Eigen::Index>(i)).sum() == doctest::Approx(data[i].y.total()));
  }
}

TEST_CASE("i.i.d. information equals n times the covariance of the statistics") {
  const CmmParams params(5, {0.5, 0.3, 0.2}, 0.7);
  const auto info = iid_information(params, 10);
  const auto table = oracle::pmf_table(5, {0.5, 0.3, 0.2}, 0.7);
  std::vector<std::vector<double>> s;
  std::vector<double> w;
  for (const auto& [y, pr] : table) {
    s.push_back({double(y[0]), double(y[1]), std::log(static_cast<double>(oracle::to_ld(oracle::multinomial_coeff(y))))});
    w.push_back(pr);
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      double ea = 0, eb = 0, eab = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        ea += w[i] * s[i][a];
        eb += w[i] * s[i][b];
        eab += w[i] * s[i][a] * s[i][b];
      }
      CHECK(info(a, b) == doctest::Approx(10 * (eab - ea * eb)).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("degenerate data end in a flagged, non-converged fit") {
  const Eigen::VectorXd one = vec({1.0});
  // Only vertex outcomes: the likelihood increases without bound as nu -> -inf.
  const std::vector<Observation> data{{{2, 0, 0}, one, one}, {{0, 2, 0}, one, one},
                                      {{0, 0, 2}, one, one}, {{2, 0, 0}, one, one}};
  const auto fit = fit_cmm(data);
  CHECK_FALSE(fit.converged);
  CHECK(fit.status != FitStatus::kConverged);
  CHECK_FALSE(fit.message.empty());
  CHECK(fit.gamma()[0] < -5);
}

TEST_CASE("invalid datasets are rejected") {
  const Eigen::VectorXd one = vec({1.0});
  CHECK_THROWS_AS(fit_cmm(std::vector<Observation>{}), InvalidArgument);
  const std::vector<Observation> mixed{{{1, 1}, one, one}, {{1, 1, 0}, one, one}};
  CHECK_THROWS_AS(fit_cmm(mixed), InvalidArgument);
  const std::vector<Observation> empty_x{{{1, 1}, Eigen::VectorXd(), one}};
  CHECK_THROWS_AS(fit_cmm(empty_x), InvalidArgument);
  const std::vector<Observation> no_trials{{{0, 0}, one, one}};
  CHECK_THROWS_AS(fit_cmm(no_trials), InvalidArgument);
  CHECK_THROWS_AS(cmm_loglik(vec({1.0}), std::vector<Observation>{{{1, 1}, one, one}}), InvalidArgument);
}

TEST_CASE("pollen-scale intercept-only fit: standard errors equal the i.i.d. information inverse") {
  // 73 clusters of m = 100 over k = 4 categories, one collapsed cell with a
  // 176,851-point sample space.
  const CmmParams truth(100, {0.463, 0.114, 0.251, 0.172}, 0.253, 0);
  RandomSource rng(73);
  const Eigen::VectorXd one = vec({1.0});
  std::vector<Observation> data;
  for (int i = 0; i < 73; ++i) {
    data.push_back({gibbs_chain(1, default_initial_state(truth), truth, {500, 1}, rng).draws.front(), one, one});
  }
  FitOptions options;
  options.spec.baseline = 0;
  const auto fit = fit_cmm(data, options);
  REQUIRE(fit.converged);
  CHECK(fit.cells.size() == 1);
  const auto at_hat = fitted_params(fit, data.front());
  const Eigen::MatrixXd cov = iid_information(at_hat, 73).inverse();
  for (int a = 0; a < 4; ++a) {
    CHECK(fit.std_errors[a] == doctest::Approx(std::sqrt(cov(a, a))).epsilon(1e-6));
  }
  CHECK(std::abs(fit.gamma()[0] - 0.253) < 4 * fit.std_errors[3]);
}
