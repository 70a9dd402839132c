#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace cmm::detail {

// One-pass accumulation of sum_i w_i, sum_i w_i v_i and sum_i w_i v_i v_i^T
// where the weights arrive as logarithms. All three sums are held relative
// to the running maximum log-weight and rescaled when it moves.
class WeightedMoments {
 public:
  explicit WeightedMoments(Eigen::Index dim)
      : s1_(Eigen::VectorXd::Zero(dim)), s2_(Eigen::MatrixXd::Zero(dim, dim)) {}

  template <class Vec>
  void add(double log_w, const Vec& v) {
    if (log_w == -std::numeric_limits<double>::infinity()) return;
    double w;
    if (log_w <= max_) {
      w = std::exp(log_w - max_);
    } else {
      const double scale = std::exp(max_ - log_w);
      s0_ *= scale;
      s1_ *= scale;
      s2_.triangularView<Eigen::Lower>() *= scale;
      max_ = log_w;
      w = 1.0;
    }
    s0_ += w;
    s1_.noalias() += w * v;
    s2_.selfadjointView<Eigen::Lower>().rankUpdate(v, w);
  }

  double log_total() const { return max_ + std::log(s0_); }
  double max_log_weight() const { return max_; }
  Eigen::VectorXd mean() const { return s1_ / s0_; }
  Eigen::MatrixXd second_moment() const {
    Eigen::MatrixXd out = s2_.selfadjointView<Eigen::Lower>();
    return out / s0_;
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double s0_ = 0.0;
  Eigen::VectorXd s1_;
  Eigen::MatrixXd s2_;
};

}  // namespace cmm::detail
