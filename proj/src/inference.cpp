#include "cmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cmm/detail/weighted_moments.hpp"
#include "cmm/error.hpp"

namespace cmm {

namespace {

bool profile_less(int m1, const Eigen::VectorXd& x1, const Eigen::VectorXd& w1, int m2,
                  const Eigen::VectorXd& x2, const Eigen::VectorXd& w2) {
  if (m1 != m2) return m1 < m2;
  auto lex = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  };
  if (lex(x1, x2)) return true;
  if (lex(x2, x1)) return false;
  return lex(w1, w2);
}

bool same_profile(const CollapsedCell& c, const Observation& o) {
  return c.m == o.y.total() && c.x == o.x && c.w == o.w;
}

std::vector<int> free_categories(int k, int baseline) {
  std::vector<int> out;
  for (int j = 0; j < k; ++j) {
    if (j != baseline) out.push_back(j);
  }
  return out;
}

int resolve(int baseline, int k) {
  if (baseline < 0) return k - 1;
  if (baseline >= k) {
    throw InvalidArgument("baseline category " + std::to_string(baseline) +
                          " out of range for k = " + std::to_string(k));
  }
  return baseline;
}

struct CellStats {
  double log_total = 0.0;   // ln sum_z exp(eta_z)
  Eigen::VectorXd mean;     // E(u) under the cell's CMM law
  Eigen::MatrixXd second;   // E(u u^T)
  std::vector<int> argmax;  // outcome with the largest eta
};

// Everything the likelihood machinery needs about one data set.
class Model {
 public:
  Model(std::span<const Observation> data, const ModelSpec& spec)
      : spec_(spec), cells_(collapse(data)) {
    k_ = static_cast<int>(data.front().y.categories());
    d1_ = static_cast<int>(data.front().x.size());
    d2_ = static_cast<int>(data.front().w.size());
    base_ = resolve(spec.baseline, k_);
    free_ = free_categories(k_, base_);
    layout_ = ThetaLayout(static_cast<int>(cells_.size()), k_, d1_, d2_, spec.dispersion);
    for (const auto& c : cells_) check_space(c.m, k_);

    observed_u_ = Eigen::VectorXd::Zero(layout_.psi_size());
    Eigen::VectorXd u(layout_.psi_size());
    for (const auto& obs : data) {
      const auto& cell = cells_[index_of(obs)];
      const double lb = log_multinomial_coeff(obs.y);
      fill_u(obs.y.counts(), lb, cell, u);
      observed_u_ += u;
      observed_offset_ += offset(lb);
    }
    for (const auto& c : cells_) {
      log_n_term_ += c.n * std::log(static_cast<double>(c.n));
      for (const auto& [z, count] : c.counts) log_count_factorials_ += log_factorial(count);
    }
  }

  const ThetaLayout& layout() const { return layout_; }
  const std::vector<CollapsedCell>& cells() const { return cells_; }
  int k() const { return k_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  int baseline() const { return base_; }

  std::size_t index_of(const Observation& obs) const {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      if (same_profile(cells_[i], obs)) return i;
    }
    throw InvalidArgument("observation does not belong to any cell");
  }

  double offset(double log_binom) const { return spec_.dispersion ? 0.0 : log_binom; }

  // psi-part of the working covariate, theta order (gamma block, beta blocks).
  void fill_u(std::span<const int> z, double log_binom, const CollapsedCell& cell,
              Eigen::VectorXd& u) const {
    int pos = 0;
    if (spec_.dispersion) {
      u.segment(0, d2_) = log_binom * cell.w;
      pos = d2_;
    }
    for (std::size_t j = 0; j < free_.size(); ++j) {
      u.segment(pos + static_cast<int>(j) * d1_, d1_) =
          static_cast<double>(z[static_cast<std::size_t>(free_[j])]) * cell.x;
    }
  }

  CellStats stats(const CollapsedCell& cell, const Eigen::VectorXd& psi) const {
    const int P = layout_.psi_size();
    detail::WeightedMoments acc(P);
    Eigen::VectorXd u(P);
    std::vector<double> lf(static_cast<std::size_t>(cell.m) + 1);
    for (int i = 0; i <= cell.m; ++i) lf[static_cast<std::size_t>(i)] = log_factorial(i);
    CellStats out;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& z : enumerate_compositions(cell.m, k_)) {
      double lb = lf[static_cast<std::size_t>(cell.m)];
      for (int c : z) lb -= lf[static_cast<std::size_t>(c)];
      fill_u(z, lb, cell, u);
      const double eta = offset(lb) + u.dot(psi);
      if (!std::isfinite(eta)) {
        std::vector<int> zz(z);
        throw NumericalError("non-finite rate at cell with m = " + std::to_string(cell.m) +
                             ", z = " + to_string(CountVector(zz)));
      }
      if (eta > best) {
        best = eta;
        out.argmax = z;
      }
      acc.add(eta, u);
    }
    out.log_total = acc.log_total();
    out.mean = acc.mean();
    out.second = acc.second_moment();
    return out;
  }

  std::vector<CellStats> all_stats(const Eigen::VectorXd& psi) const {
    std::vector<CellStats> out;
    out.reserve(cells_.size());
    for (const auto& c : cells_) out.push_back(stats(c, psi));
    return out;
  }

  // Log-likelihood of the original CMM regression.
  double loglik(const Eigen::VectorXd& psi, const std::vector<CellStats>& st) const {
    double ll = observed_offset_ + observed_u_.dot(psi);
    for (std::size_t i = 0; i < cells_.size(); ++i) ll -= cells_[i].n * st[i].log_total;
    return ll;
  }

  // Total rate sum_z lambda(z) per cell at the given alpha.
  double rate_total(std::size_t cell, double alpha, const CellStats& st) const {
    const double total = cells_[cell].n * std::exp(alpha + st.log_total);
    if (!std::isfinite(total)) {
      std::ostringstream msg;
      msg << "non-finite Poisson rate in cell " << cell << " (m = " << cells_[cell].m
          << "), largest at z = " << to_string(CountVector(st.argmax));
      throw NumericalError(msg.str());
    }
    return total;
  }

  ScoreInfo score_info(const Eigen::VectorXd& theta, const std::vector<CellStats>& st) const {
    const int C = layout_.cells();
    const int P = layout_.psi_size();
    ScoreInfo out;
    out.score = Eigen::VectorXd::Zero(layout_.size());
    out.fim = Eigen::MatrixXd::Zero(layout_.size(), layout_.size());
    out.score.tail(P) = observed_u_;
    for (int c = 0; c < C; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      const double lam = rate_total(cs, theta[c], st[cs]);
      out.score[c] = cells_[cs].n - lam;
      out.score.tail(P) -= lam * st[cs].mean;
      out.fim(c, c) = lam;
      out.fim.block(C, c, P, 1) = lam * st[cs].mean;
      out.fim.block(c, C, 1, P) = lam * st[cs].mean.transpose();
      out.fim.bottomRightCorner(P, P) += lam * st[cs].second;
    }
    return out;
  }

  double poisson_loglik(const Eigen::VectorXd& theta, const std::vector<CellStats>& st) const {
    const int C = layout_.cells();
    const int P = layout_.psi_size();
    double ll = observed_offset_ + observed_u_.dot(theta.tail(P)) + log_n_term_ -
                log_count_factorials_;
    for (int c = 0; c < C; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      ll += cells_[cs].n * theta[c] - rate_total(cs, theta[c], st[cs]);
    }
    return ll;
  }

  // Information for psi with the alphas profiled out.
  Eigen::MatrixXd schur_information(const Eigen::VectorXd& theta,
                                    const std::vector<CellStats>& st) const {
    const int P = layout_.psi_size();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(P, P);
    for (int c = 0; c < layout_.cells(); ++c) {
      const auto cs = static_cast<std::size_t>(c);
      const double lam = rate_total(cs, theta[c], st[cs]);
      out += lam * (st[cs].second - st[cs].mean * st[cs].mean.transpose());
    }
    return 0.5 * (out + out.transpose());
  }

  // theta-order psi (gamma, betas) <-> public order (betas, gamma).
  Eigen::VectorXd to_public(const Eigen::VectorXd& psi) const {
    const int g = layout_.d2();
    Eigen::VectorXd out(psi.size());
    out << psi.tail(psi.size() - g), psi.head(g);
    return out;
  }
  Eigen::VectorXd from_public(const Eigen::VectorXd& psi) const {
    const int g = layout_.d2();
    if (psi.size() != layout_.psi_size()) {
      throw InvalidArgument("coefficient vector has length " + std::to_string(psi.size()) +
                            ", model needs " + std::to_string(layout_.psi_size()));
    }
    Eigen::VectorXd out(psi.size());
    out << psi.tail(g), psi.head(psi.size() - g);
    return out;
  }
  Eigen::MatrixXd to_public(const Eigen::MatrixXd& cov) const {
    const int P = layout_.psi_size();
    const int g = layout_.d2();
    std::vector<int> perm(static_cast<std::size_t>(P));
    for (int i = 0; i < P - g; ++i) perm[static_cast<std::size_t>(i)] = g + i;
    for (int i = 0; i < g; ++i) perm[static_cast<std::size_t>(P - g + i)] = i;
    Eigen::MatrixXd out(P, P);
    for (int a = 0; a < P; ++a) {
      for (int b = 0; b < P; ++b) {
        out(a, b) = cov(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
      }
    }
    return out;
  }

 private:
  ModelSpec spec_;
  std::vector<CollapsedCell> cells_;
  int k_ = 0, d1_ = 0, d2_ = 0, base_ = 0;
  std::vector<int> free_;
  ThetaLayout layout_{0, 2, 1, 1, true};
  Eigen::VectorXd observed_u_;
  double observed_offset_ = 0.0;
  double log_n_term_ = 0.0;
  double log_count_factorials_ = 0.0;
};

void validate(std::span<const Observation> data) {
  if (data.empty()) throw InvalidArgument("dataset is empty");
  const auto k = data.front().y.categories();
  const auto d1 = data.front().x.size();
  const auto d2 = data.front().w.size();
  if (d1 < 1 || d2 < 1) {
    throw InvalidArgument("covariate vectors need at least one entry (use (1) for an intercept)");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& o = data[i];
    if (o.y.categories() != k || o.x.size() != d1 || o.w.size() != d2) {
      throw InvalidArgument("observation " + std::to_string(i) +
                            " has dimensions inconsistent with observation 0");
    }
    if (o.y.total() < 1) {
      throw InvalidArgument("observation " + std::to_string(i) + " has no trials");
    }
    if (!o.x.allFinite() || !o.w.allFinite()) {
      throw InvalidArgument("observation " + std::to_string(i) + " has non-finite covariates");
    }
  }
}

Eigen::VectorXd inverse_sqrt_diag(const Eigen::MatrixXd& info, Eigen::MatrixXd* cov_out,
                                  bool* ok) {
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  const Eigen::Index P = info.rows();
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
    *ok = false;
    if (cov_out) *cov_out = Eigen::MatrixXd::Constant(P, P, std::numeric_limits<double>::quiet_NaN());
    return Eigen::VectorXd::Constant(P, std::numeric_limits<double>::quiet_NaN());
  }
  *ok = true;
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(P, P));
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (cov_out) *cov_out = cov;
  return cov.diagonal().cwiseSqrt();
}

FitResult fit_impl(std::span<const Observation> data, const FitOptions& options) {
  validate(data);
  const Model model(data, options.spec);
  const ThetaLayout& layout = model.layout();
  const int C = layout.cells();
  const int P = layout.psi_size();

  // Start at the embedded multinomial model: betas from its fit, nu = 1.
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(P);
  if (options.spec.dispersion) {
    FitOptions mopts = options;
    mopts.spec.dispersion = false;
    const FitResult mult = fit_impl(data, mopts);
    if (mult.psi_hat.allFinite()) psi.tail(P - layout.d2()) = mult.psi_hat;
    Eigen::MatrixXd W(C, layout.d2());
    for (int c = 0; c < C; ++c) W.row(c) = model.cells()[static_cast<std::size_t>(c)].w.transpose();
    psi.head(layout.d2()) = W.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(C));
  }

  std::vector<CellStats> st = model.all_stats(psi);
  Eigen::VectorXd theta(layout.size());
  theta.tail(P) = psi;
  for (int c = 0; c < C; ++c) theta[c] = -st[static_cast<std::size_t>(c)].log_total;
  double ll = model.loglik(psi, st);

  FitResult out;
  out.spec = options.spec;
  out.k = model.k();
  out.d1 = model.d1();
  out.d2 = options.spec.dispersion ? model.d2() : 0;
  out.spec.baseline = model.baseline();
  out.status = FitStatus::kMaxIterations;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const ScoreInfo si = model.score_info(theta, st);
    const double max_score = si.score.cwiseAbs().maxCoeff();
    Eigen::LLT<Eigen::MatrixXd> llt(si.fim);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
      out.status = FitStatus::kSingular;
      out.message = "information matrix is singular at iteration " + std::to_string(iter);
      break;
    }
    const Eigen::VectorXd step = llt.solve(si.score);
    if (!step.allFinite()) {
      out.status = FitStatus::kSingular;
      out.message = "Newton step is not finite at iteration " + std::to_string(iter);
      break;
    }
    if (max_score < options.score_tolerance && step.cwiseAbs().maxCoeff() < options.step_tolerance) {
      out.status = FitStatus::kConverged;
      break;
    }

    double t = 1.0;
    bool accepted = false;
    int halvings = 0;
    Eigen::VectorXd cand;
    std::vector<CellStats> cand_st;
    double cand_ll = ll;
    for (; halvings <= options.max_halvings; ++halvings, t *= 0.5) {
      cand = theta + t * step;
      try {
        cand_st = model.all_stats(cand.tail(P));
      } catch (const NumericalError&) {
        continue;
      }
      cand_ll = model.loglik(cand.tail(P), cand_st);
      if (std::isfinite(cand_ll) && cand_ll >= ll - 1e-12 * std::max(1.0, std::abs(ll))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.status = FitStatus::kStalled;
      out.message = "step-halving failed to increase the log-likelihood at iteration " +
                    std::to_string(iter);
      break;
    }
    theta = cand;
    st = std::move(cand_st);
    ll = cand_ll;
    out.iterations.push_back({ll, halvings, max_score});

    if (options.spec.dispersion &&
        theta.segment(C, layout.d2()).cwiseAbs().maxCoeff() > options.gamma_bound) {
      out.status = FitStatus::kBoundary;
      out.message = "dispersion coefficients exceed " + std::to_string(options.gamma_bound) +
                    "; nu is weakly identified by these data";
      break;
    }
  }
  if (out.status == FitStatus::kMaxIterations) {
    out.message = "no convergence after " + std::to_string(options.max_iterations) + " iterations";
  }

  out.converged = out.status == FitStatus::kConverged;
  out.psi_hat = model.to_public(Eigen::VectorXd(theta.tail(P)));
  out.alpha_hat = theta.head(C);
  out.loglik = ll;
  out.n_parameters = P;
  out.aic = -2.0 * ll + 2.0 * P;
  out.cells = model.cells();

  const ScoreInfo si = model.score_info(theta, st);
  out.fim = si.fim;
  out.max_abs_score = si.score.cwiseAbs().maxCoeff();

  bool ok_schur = false, ok_drop = false;
  Eigen::MatrixXd cov_schur, cov_drop;
  const Eigen::VectorXd se_schur =
      inverse_sqrt_diag(model.schur_information(theta, st), &cov_schur, &ok_schur);
  const Eigen::MatrixXd drop_block = si.fim.bottomRightCorner(P, P);
  const Eigen::VectorXd se_drop = inverse_sqrt_diag(drop_block, &cov_drop, &ok_drop);
  out.se_convention = options.se;
  if (options.se == SeConvention::kSchurComplement) {
    out.std_errors = model.to_public(se_schur);
    out.std_errors_alt = model.to_public(se_drop);
    out.covariance = model.to_public(cov_schur);
  } else {
    out.std_errors = model.to_public(se_drop);
    out.std_errors_alt = model.to_public(se_schur);
    out.covariance = model.to_public(cov_drop);
  }
  const bool ok = options.se == SeConvention::kSchurComplement ? ok_schur : ok_drop;
  if (!ok && out.converged) {
    out.converged = false;
    out.status = FitStatus::kSingular;
    out.message = "information matrix is singular at the estimate";
  }
  return out;
}

}  // namespace

std::vector<CollapsedCell> collapse(std::span<const Observation> data) {
  validate(data);
  std::vector<CollapsedCell> cells;
  for (const auto& obs : data) {
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const CollapsedCell& c) { return same_profile(c, obs); });
    if (it == cells.end()) {
      CollapsedCell c;
      c.m = obs.y.total();
      c.x = obs.x;
      c.w = obs.w;
      cells.push_back(std::move(c));
      it = cells.end() - 1;
    }
    ++it->n;
    ++it->counts[obs.y];
  }
  std::sort(cells.begin(), cells.end(), [](const CollapsedCell& a, const CollapsedCell& b) {
    return profile_less(a.m, a.x, a.w, b.m, b.x, b.w);
  });
  return cells;
}

ThetaLayout::ThetaLayout(int cells, int k, int d1, int d2, bool dispersion)
    : cells_(cells), k_(k), d1_(d1), d2_(d2), dispersion_(dispersion) {}

Eigen::VectorXd ThetaVector::flat(const ThetaLayout& layout) const {
  Eigen::VectorXd out(layout.size());
  if (alphas.size() != layout.cells() || gamma.size() != layout.d2() ||
      static_cast<int>(betas.size()) != layout.k() - 1) {
    throw InvalidArgument("theta vector does not match the model layout");
  }
  out.head(layout.cells()) = alphas;
  if (layout.d2() > 0) out.segment(layout.gamma(0), layout.d2()) = gamma;
  for (int j = 0; j < layout.k() - 1; ++j) {
    if (betas[static_cast<std::size_t>(j)].size() != layout.d1()) {
      throw InvalidArgument("beta block has the wrong length");
    }
    out.segment(layout.beta(j, 0), layout.d1()) = betas[static_cast<std::size_t>(j)];
  }
  return out;
}

ThetaVector ThetaVector::unflat(const Eigen::VectorXd& flat, const ThetaLayout& layout) {
  if (flat.size() != layout.size()) throw InvalidArgument("theta vector has the wrong length");
  ThetaVector out;
  out.alphas = flat.head(layout.cells());
  out.gamma = flat.segment(layout.cells(), layout.d2());
  for (int j = 0; j < layout.k() - 1; ++j) {
    out.betas.emplace_back(flat.segment(layout.beta(j, 0), layout.d1()));
  }
  return out;
}

Eigen::VectorXd sufficient_stats(const CountVector& z, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& w, int baseline) {
  const int k = static_cast<int>(z.categories());
  const int b = resolve(baseline, k);
  const auto d1 = x.size();
  const auto d2 = w.size();
  Eigen::VectorXd s(1 + d2 + (k - 1) * d1);
  s[0] = 1.0;
  s.segment(1, d2) = log_multinomial_coeff(z) * w;
  Eigen::Index pos = 1 + d2;
  for (int j : free_categories(k, b)) {
    s.segment(pos, d1) = static_cast<double>(z[static_cast<std::size_t>(j)]) * x;
    pos += d1;
  }
  return s;
}

double cmm_loglik(const Eigen::VectorXd& psi, std::span<const Observation> data,
                  const ModelSpec& spec) {
  validate(data);
  const Model model(data, spec);
  const Eigen::VectorXd internal = model.from_public(psi);
  return model.loglik(internal, model.all_stats(internal));
}

namespace {

std::vector<Observation> expand(std::span<const CollapsedCell> cells) {
  std::vector<Observation> out;
  for (const auto& c : cells) {
    for (const auto& [z, count] : c.counts) {
      for (int i = 0; i < count; ++i) out.push_back({z, c.x, c.w});
    }
  }
  return out;
}

}  // namespace

ScoreInfo score_and_fim(const ThetaVector& theta, std::span<const CollapsedCell> cells,
                        const ModelSpec& spec) {
  const std::vector<Observation> data = expand(cells);
  validate(data);
  const Model model(data, spec);
  const Eigen::VectorXd flat = theta.flat(model.layout());
  return model.score_info(flat, model.all_stats(flat.tail(model.layout().psi_size())));
}

double poisson_loglik(const ThetaVector& theta, std::span<const CollapsedCell> cells,
                      const ModelSpec& spec) {
  const std::vector<Observation> data = expand(cells);
  validate(data);
  const Model model(data, spec);
  const Eigen::VectorXd flat = theta.flat(model.layout());
  return model.poisson_loglik(flat, model.all_stats(flat.tail(model.layout().psi_size())));
}

std::string to_string(FitStatus status) {
  switch (status) {
    case FitStatus::kConverged: return "converged";
    case FitStatus::kMaxIterations: return "max_iterations";
    case FitStatus::kStalled: return "stalled";
    case FitStatus::kBoundary: return "boundary";
    case FitStatus::kSingular: return "singular_information";
  }
  return "unknown";
}

FitResult fit_cmm(std::span<const Observation> data, const FitOptions& options) {
  return fit_impl(data, options);
}

FitResult fit_multinomial(std::span<const Observation> data, FitOptions options) {
  options.spec.dispersion = false;
  return fit_impl(data, options);
}

CmmParams params_at(const Eigen::VectorXd& psi, const ModelSpec& spec, int k, int m,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
  const auto d1 = x.size();
  const Eigen::Index d2 = spec.dispersion ? w.size() : 0;
  if (psi.size() != (k - 1) * d1 + d2) {
    throw InvalidArgument("coefficient vector does not match covariate dimensions");
  }
  std::vector<double> logits(static_cast<std::size_t>(k - 1));
  for (int j = 0; j < k - 1; ++j) logits[static_cast<std::size_t>(j)] = psi.segment(j * d1, d1).dot(x);
  const double nu = spec.dispersion ? psi.tail(d2).dot(w) : 1.0;
  return CmmParams::from_logits(m, logits, nu, spec.baseline);
}

CmmParams fitted_params(const FitResult& fit, const Observation& obs) {
  return params_at(fit.psi_hat, fit.spec, fit.k, obs.y.total(), obs.x, obs.w);
}

Eigen::MatrixXd expected_counts(const FitResult& fit, std::span<const Observation> data) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.size()), fit.k);
  std::vector<std::pair<const Observation*, Eigen::VectorXd>> cache;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Observation& o = data[i];
    auto hit = std::find_if(cache.begin(), cache.end(), [&](const auto& entry) {
      const Observation& c = *entry.first;
      return c.y.total() == o.y.total() && c.x == o.x && c.w == o.w;
    });
    if (hit == cache.end()) {
      cache.emplace_back(&o, moments(fitted_params(fit, o)).mean);
      hit = cache.end() - 1;
    }
    out.row(static_cast<Eigen::Index>(i)) = hit->second.transpose();
  }
  return out;
}

Eigen::MatrixXd iid_information(const CmmParams& params, int n) {
  const int k = params.k();
  const int m = params.m();
  const std::vector<int> free = params.non_baseline();
  const std::vector<double> lp = params.log_p();
  detail::WeightedMoments acc(k);
  Eigen::VectorXd s(k);
  for (const auto& y : enumerate_compositions(m, k)) {
    const double lb = log_multinomial_coeff(y);
    double lw = params.nu() * lb;
    for (int j = 0; j < k; ++j) lw += y[static_cast<std::size_t>(j)] * lp[static_cast<std::size_t>(j)];
    for (std::size_t j = 0; j < free.size(); ++j) s[static_cast<Eigen::Index>(j)] = y[static_cast<std::size_t>(free[j])];
    s[k - 1] = lb;
    acc.add(lw, s);
  }
  const Eigen::VectorXd mu = acc.mean();
  Eigen::MatrixXd cov = acc.second_moment() - mu * mu.transpose();
  return n * 0.5 * (cov + cov.transpose());
}

}  // namespace cmm
