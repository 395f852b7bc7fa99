#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "bemopt/core/error.hpp"
#include "bemopt/core/rng.hpp"

namespace bemopt::calib {

using Vector = Eigen::VectorXd;

struct CmaOptions {
  Vector initial_mean;
  double initial_sigma = 0.3;
  // Box bounds; leave empty for an unbounded search.
  Vector lower, upper;
  std::size_t population = 0;  // 0 selects 4 + floor(3 ln n)
  double max_sigma = std::numeric_limits<double>::infinity();
};

// Folds x back into [lo, hi] by mirroring at the faces.
inline double reflect(double x, double lo, double hi) {
  const double w = hi - lo;
  if (w <= 0) return lo;
  if (x >= lo && x <= hi) return x;
  double t = std::fmod(x - lo, 2 * w);
  if (t < 0) t += 2 * w;
  return t <= w ? lo + t : hi - (t - w);
}

// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
// cumulative step-size adaptation. Minimizes.
class CmaEs {
 public:
  CmaEs(CmaOptions opt, std::uint64_t seed) : opt_(std::move(opt)), rng_(Rng::stream(seed, "cma-es")) {
    n_ = static_cast<std::size_t>(opt_.initial_mean.size());
    if (n_ == 0) throw InputError("CMA-ES needs at least one dimension");
    if (!(opt_.initial_sigma > 0)) throw InputError("CMA-ES initial sigma must be positive");
    bounded_ = opt_.lower.size() > 0 || opt_.upper.size() > 0;
    if (bounded_ && (static_cast<std::size_t>(opt_.lower.size()) != n_ || static_cast<std::size_t>(opt_.upper.size()) != n_))
      throw InputError("CMA-ES bounds must match the dimension");
    if (bounded_)
      for (std::size_t i = 0; i < n_; ++i)
        if (opt_.lower[i] > opt_.upper[i]) throw InputError("CMA-ES lower bound above upper bound");

    const double n = static_cast<double>(n_);
    lambda_ = opt_.population ? opt_.population : 4 + static_cast<std::size_t>(std::floor(3 * std::log(n)));
    if (lambda_ < 2) throw InputError("CMA-ES population must be at least 2");
    mu_ = lambda_ / 2;
    weights_.resize(static_cast<Eigen::Index>(mu_));
    for (std::size_t i = 0; i < mu_; ++i)
      weights_[static_cast<Eigen::Index>(i)] = std::log((static_cast<double>(lambda_) + 1) / 2) - std::log(static_cast<double>(i + 1));
    weights_ /= weights_.sum();
    mueff_ = 1.0 / weights_.squaredNorm();
    cc_ = (4 + mueff_ / n) / (n + 4 + 2 * mueff_ / n);
    cs_ = (mueff_ + 2) / (n + mueff_ + 5);
    c1_ = 2 / ((n + 1.3) * (n + 1.3) + mueff_);
    cmu_ = std::min(1 - c1_, 2 * (mueff_ - 2 + 1 / mueff_) / ((n + 2) * (n + 2) + mueff_));
    damps_ = 1 + 2 * std::max(0.0, std::sqrt((mueff_ - 1) / (n + 1)) - 1) + cs_;
    chi_n_ = std::sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n));

    mean_ = opt_.initial_mean;
    if (bounded_)
      for (std::size_t i = 0; i < n_; ++i) mean_[i] = std::clamp(mean_[i], opt_.lower[i], opt_.upper[i]);
    sigma_ = opt_.initial_sigma;
    c_ = Eigen::MatrixXd::Identity(n_, n_);
    b_ = c_;
    d_ = Vector::Ones(n_);
    ps_ = Vector::Zero(n_);
    pc_ = Vector::Zero(n_);
  }

  std::vector<Vector> ask() {
    std::vector<Vector> out;
    out.reserve(lambda_);
    for (std::size_t k = 0; k < lambda_; ++k) {
      Vector z(n_);
      for (std::size_t i = 0; i < n_; ++i) z[i] = rng_.normal();
      Vector x = mean_ + sigma_ * (b_ * d_.cwiseProduct(z));
      if (bounded_)
        for (std::size_t i = 0; i < n_; ++i) x[i] = reflect(x[i], opt_.lower[i], opt_.upper[i]);
      out.push_back(std::move(x));
    }
    return out;
  }

  // Lower fitness is better; non-finite fitness ranks last.
  void tell(const std::vector<Vector>& xs, const std::vector<double>& fitness) {
    if (xs.size() != lambda_ || fitness.size() != lambda_)
      throw InputError("CMA-ES tell expects " + std::to_string(lambda_) + " candidates and fitnesses");
    std::vector<std::size_t> order(lambda_);
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) {
      return std::isfinite(fitness[i]) ? fitness[i] : std::numeric_limits<double>::infinity();
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    if (key(order[0]) < best_fitness_) {
      best_fitness_ = key(order[0]);
      best_ = xs[order[0]];
    }

    const Vector old_mean = mean_;
    mean_.setZero();
    for (std::size_t i = 0; i < mu_; ++i) mean_ += weights_[static_cast<Eigen::Index>(i)] * xs[order[i]];
    const Vector yw = (mean_ - old_mean) / sigma_;

    // C^{-1/2} yw through the current eigenbasis.
    const Vector c_inv_sqrt_yw = b_ * (b_.transpose() * yw).cwiseQuotient(d_);
    ps_ = (1 - cs_) * ps_ + std::sqrt(cs_ * (2 - cs_) * mueff_) * c_inv_sqrt_yw;
    ++generation_;
    const double ps_norm = ps_.norm();
    const double ps_expect = std::sqrt(1 - std::pow(1 - cs_, 2.0 * static_cast<double>(generation_)));
    const bool hsig = ps_norm / ps_expect / chi_n_ < 1.4 + 2.0 / (static_cast<double>(n_) + 1);
    pc_ = (1 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2 - cc_) * mueff_) : 0.0) * yw;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n_, n_);
    for (std::size_t i = 0; i < mu_; ++i) {
      const Vector y = (xs[order[i]] - old_mean) / sigma_;
      rank_mu += weights_[static_cast<Eigen::Index>(i)] * y * y.transpose();
    }
    const double decay = 1 - c1_ - cmu_ + (hsig ? 0.0 : c1_ * cc_ * (2 - cc_));
    c_ = decay * c_ + c1_ * pc_ * pc_.transpose() + cmu_ * rank_mu;
    c_ = 0.5 * (c_ + c_.transpose());

    sigma_ *= std::exp((cs_ / damps_) * (ps_norm / chi_n_ - 1));
    sigma_ = std::min(sigma_, opt_.max_sigma);
    if (!std::isfinite(sigma_) || sigma_ <= 0) throw NumericalError("CMA-ES step size became " + std::to_string(sigma_));
    decompose();
  }

  std::size_t dimension() const { return n_; }
  std::size_t population() const { return lambda_; }
  std::size_t mu() const { return mu_; }
  const Vector& weights() const { return weights_; }
  std::size_t generation() const { return generation_; }
  const Vector& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  const Eigen::MatrixXd& covariance() const { return c_; }
  const Vector& path_sigma() const { return ps_; }
  const Vector& path_c() const { return pc_; }
  const Vector& best() const { return best_; }
  double best_fitness() const { return best_fitness_; }
  std::size_t repairs() const { return repairs_; }

 private:
  void decompose() {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c_);
    bool ok = es.info() == Eigen::Success && es.eigenvalues().allFinite() && es.eigenvectors().allFinite();
    if (!ok) {
      // Lost the covariance: restart its shape but keep mean and step size.
      ++repairs_;
      c_ = Eigen::MatrixXd::Identity(n_, n_);
      b_ = c_;
      d_ = Vector::Ones(n_);
      return;
    }
    Vector ev = es.eigenvalues();
    constexpr double kFloor = 1e-14;
    if (ev.minCoeff() <= kFloor) {
      ++repairs_;
      ev = ev.cwiseMax(kFloor * std::max(1.0, ev.maxCoeff()));
      c_ = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
      c_ = 0.5 * (c_ + c_.transpose());
    }
    b_ = es.eigenvectors();
    d_ = ev.cwiseSqrt();
  }

  CmaOptions opt_;
  Rng rng_;
  std::size_t n_ = 0, lambda_ = 0, mu_ = 0, generation_ = 0, repairs_ = 0;
  bool bounded_ = false;
  Vector weights_;
  double mueff_ = 0, cc_ = 0, cs_ = 0, c1_ = 0, cmu_ = 0, damps_ = 0, chi_n_ = 0;
  Vector mean_, ps_, pc_, d_;
  double sigma_ = 0;
  Eigen::MatrixXd c_, b_;
  Vector best_;
  double best_fitness_ = std::numeric_limits<double>::infinity();
};

struct CmaRun {
  Vector best;
  double best_fitness = 0;
  std::size_t evaluations = 0;
  std::vector<double> best_history;  // best-so-far after each generation
};

// Ask/tell loop until the budget of generations or evaluations is spent or
// the best fitness reaches `target`.
inline CmaRun cma_minimize(const std::function<double(const Vector&)>& f, const CmaOptions& opt, std::uint64_t seed,
                           std::size_t max_generations, std::size_t max_evaluations = 0,
                           double target = -std::numeric_limits<double>::infinity()) {
  CmaEs es(opt, seed);
  CmaRun run;
  for (std::size_t g = 0; g < max_generations; ++g) {
    if (max_evaluations && run.evaluations + es.population() > max_evaluations) break;
    auto xs = es.ask();
    std::vector<double> fit(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) fit[i] = f(xs[i]);
    run.evaluations += xs.size();
    es.tell(xs, fit);
    run.best_history.push_back(es.best_fitness());
    if (es.best_fitness() <= target) break;
  }
  run.best = es.best().size() ? es.best() : es.mean();
  run.best_fitness = es.best().size() ? es.best_fitness() : f(run.best);
  return run;
}

}  // namespace bemopt::calib
