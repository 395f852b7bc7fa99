#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "bemopt/core/error.hpp"
#include "bemopt/core/rng.hpp"
#include "bemopt/train/trainer.hpp"

namespace bemopt::opt {

using Objectives = std::array<double, 2>;  // both minimized

// Objective value given to candidates whose evaluation failed.
constexpr double kPenalty = 1e300;

inline bool dominates(const Objectives& a, const Objectives& b) {
  return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

// Fast non-dominated sort: fronts of indices, best first.
inline std::vector<std::vector<std::size_t>> non_dominated_sort(const std::vector<Objectives>& f) {
  const std::size_t n = f.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<std::size_t>> fronts(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(f[p], f[q])) dominated[p].push_back(q);
      else if (dominates(f[q], f[p])) ++count[p];
    }
    if (count[p] == 0) fronts[0].push_back(p);
  }
  while (!fronts.back().empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : fronts.back())
      for (std::size_t q : dominated[p])
        if (--count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(next));
  }
  fronts.pop_back();
  return fronts;
}

// Crowding distance of each member of `front` (indices into f).
inline std::vector<double> crowding_distance(const std::vector<Objectives>& f, const std::vector<std::size_t>& front) {
  const std::size_t m = front.size();
  std::vector<double> d(m, 0.0);
  if (m <= 2) {
    std::fill(d.begin(), d.end(), std::numeric_limits<double>::infinity());
    return d;
  }
  std::vector<std::size_t> order(m);
  for (std::size_t k = 0; k < 2; ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return f[front[a]][k] < f[front[b]][k]; });
    const double lo = f[front[order.front()]][k], hi = f[front[order.back()]][k];
    d[order.front()] = d[order.back()] = std::numeric_limits<double>::infinity();
    if (!(hi > lo) || !std::isfinite(hi - lo)) continue;
    for (std::size_t i = 1; i + 1 < m; ++i)
      d[order[i]] += (f[front[order[i + 1]]][k] - f[front[order[i - 1]]][k]) / (hi - lo);
  }
  return d;
}

// Area dominated by the points and bounded by `ref` (both minimized).
inline double hypervolume_2d(std::vector<Objectives> pts, const Objectives& ref) {
  std::erase_if(pts, [&](const Objectives& p) { return !(p[0] < ref[0] && p[1] < ref[1]); });
  std::sort(pts.begin(), pts.end());
  double hv = 0, best_y = ref[1];
  for (const auto& p : pts) {
    if (p[1] >= best_y) continue;
    hv += (ref[0] - p[0]) * (best_y - p[1]);
    best_y = p[1];
  }
  return hv;
}

struct NsgaConfig {
  std::size_t population = 100;
  std::size_t generations = 300;
  double crossover_eta = 15;
  double crossover_probability = 0.9;
  double mutation_eta = 20;
  double mutation_probability = -1;  // negative selects 1 / n
  std::size_t tournament = 2;

  void validate() const {
    if (population < 2 || population % 2 != 0) throw InputError("NSGA-II population must be even and at least 2");
    if (crossover_probability < 0 || crossover_probability > 1) throw InputError("crossover probability outside [0, 1]");
    if (mutation_probability > 1) throw InputError("mutation probability above 1");
    if (tournament < 1) throw InputError("tournament size must be positive");
    if (crossover_eta < 0 || mutation_eta < 0) throw InputError("distribution indices must be non-negative");
  }
};

struct Solution {
  std::vector<double> x;
  Objectives f{};
};

struct ParetoFront {
  std::vector<Solution> members;  // sorted by the first objective
  std::vector<double> hypervolume;  // per generation, generation 0 first
  std::vector<Objectives> best_per_objective;  // per generation
  Objectives reference{};
};

using Evaluator = std::function<Objectives(const std::vector<double>&)>;

namespace detail {

// Simulated binary crossover on one coordinate, bounded form.
inline void sbx(double& c1, double& c2, double lo, double hi, double eta, Rng& rng) {
  if (std::fabs(c1 - c2) < 1e-14 || !(hi > lo)) return;
  const double y1 = std::min(c1, c2), y2 = std::max(c1, c2);
  const double u = rng.uniform();
  auto child = [&](double beta_edge) {
    const double alpha = 2.0 - std::pow(beta_edge, -(eta + 1));
    const double betaq = u <= 1.0 / alpha ? std::pow(u * alpha, 1.0 / (eta + 1))
                                          : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1));
    return betaq;
  };
  const double bq1 = child(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
  const double bq2 = child(1.0 + 2.0 * (hi - y2) / (y2 - y1));
  double a = 0.5 * ((y1 + y2) - bq1 * (y2 - y1));
  double b = 0.5 * ((y1 + y2) + bq2 * (y2 - y1));
  a = std::clamp(a, lo, hi);
  b = std::clamp(b, lo, hi);
  if (rng.uniform() <= 0.5) std::swap(a, b);
  c1 = a;
  c2 = b;
}

// Polynomial mutation, bounded form.
inline void polynomial_mutation(double& y, double lo, double hi, double eta, Rng& rng) {
  if (!(hi > lo)) return;
  const double d1 = (y - lo) / (hi - lo), d2 = (hi - y) / (hi - lo);
  const double u = rng.uniform();
  const double p = 1.0 / (eta + 1);
  double dq;
  if (u < 0.5) {
    const double v = 2 * u + (1 - 2 * u) * std::pow(1 - d1, eta + 1);
    dq = std::pow(v, p) - 1;
  } else {
    const double v = 2 * (1 - u) + 2 * (u - 0.5) * std::pow(1 - d2, eta + 1);
    dq = 1 - std::pow(v, p);
  }
  y = std::clamp(y + dq * (hi - lo), lo, hi);
}

inline Objectives safe_evaluate(const Evaluator& f, const std::vector<double>& x) {
  Objectives o;
  try {
    o = f(x);
  } catch (const Error&) {
    return {kPenalty, kPenalty};
  }
  for (double& v : o)
    if (!std::isfinite(v)) v = kPenalty;
  return o;
}

}  // namespace detail

// Elitist generational NSGA-II over the box [lower, upper]. `seeds` replace
// the first random members of the initial population (clamped into the box).
inline ParetoFront nsga2_run(const NsgaConfig& cfg, const Evaluator& evaluate, const std::vector<double>& lower,
                             const std::vector<double>& upper, std::uint64_t seed, unsigned jobs = 1,
                             const std::vector<std::vector<double>>& seeds = {}) {
  cfg.validate();
  const std::size_t n = lower.size();
  if (n == 0 || upper.size() != n) throw InputError("NSGA-II bounds must be non-empty and of equal length");
  for (std::size_t i = 0; i < n; ++i)
    if (lower[i] > upper[i]) throw InputError("NSGA-II lower bound above upper bound at coordinate " + std::to_string(i));
  const double pm = cfg.mutation_probability < 0 ? 1.0 / static_cast<double>(n) : cfg.mutation_probability;
  Rng rng = Rng::stream(seed, "nsga2");
  const std::size_t np = cfg.population;

  std::vector<std::vector<double>> xs(np, std::vector<double>(n));
  for (auto& x : xs)
    for (std::size_t i = 0; i < n; ++i) x[i] = lower[i] + rng.uniform() * (upper[i] - lower[i]);
  if (seeds.size() > np) throw InputError("more NSGA-II seeds than population members");
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    if (seeds[k].size() != n) throw InputError("NSGA-II seed " + std::to_string(k) + " has the wrong dimension");
    for (std::size_t i = 0; i < n; ++i) xs[k][i] = std::clamp(seeds[k][i], lower[i], upper[i]);
  }
  auto eval_all = [&](const std::vector<std::vector<double>>& pop) {
    std::vector<Objectives> f(pop.size());
    train::parallel_for(pop.size(), jobs, [&](std::size_t i) { f[i] = detail::safe_evaluate(evaluate, pop[i]); });
    return f;
  };
  std::vector<Objectives> fs = eval_all(xs);

  ParetoFront out;
  out.reference = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& f : fs)
    for (std::size_t k = 0; k < 2; ++k)
      if (f[k] < kPenalty) out.reference[k] = std::max(out.reference[k], f[k]);

  std::vector<std::size_t> rank(np);
  std::vector<double> crowd(np);
  auto assign = [&]() {
    const auto fronts = non_dominated_sort(fs);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
      const auto d = crowding_distance(fs, fronts[r]);
      for (std::size_t i = 0; i < fronts[r].size(); ++i) {
        rank[fronts[r][i]] = r;
        crowd[fronts[r][i]] = d[i];
      }
    }
  };
  auto record = [&]() {
    out.hypervolume.push_back(hypervolume_2d(fs, out.reference));
    Objectives best{kPenalty, kPenalty};
    for (const auto& f : fs)
      for (std::size_t k = 0; k < 2; ++k) best[k] = std::min(best[k], f[k]);
    out.best_per_objective.push_back(best);
  };
  assign();
  record();

  auto better = [&](std::size_t a, std::size_t b) {
    return rank[a] < rank[b] || (rank[a] == rank[b] && crowd[a] > crowd[b]);
  };
  auto tournament = [&]() {
    std::size_t w = rng.below(np);
    for (std::size_t t = 1; t < cfg.tournament; ++t) {
      const std::size_t c = rng.below(np);
      if (better(c, w)) w = c;
    }
    return w;
  };

  for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
    std::vector<std::vector<double>> children;
    children.reserve(np);
    while (children.size() < np) {
      std::vector<double> a = xs[tournament()], b = xs[tournament()];
      if (rng.uniform() < cfg.crossover_probability)
        for (std::size_t i = 0; i < n; ++i)
          if (rng.uniform() <= 0.5) detail::sbx(a[i], b[i], lower[i], upper[i], cfg.crossover_eta, rng);
      for (auto* c : {&a, &b})
        for (std::size_t i = 0; i < n; ++i)
          if (rng.uniform() < pm) detail::polynomial_mutation((*c)[i], lower[i], upper[i], cfg.mutation_eta, rng);
      children.push_back(std::move(a));
      children.push_back(std::move(b));
    }
    const auto child_f = eval_all(children);

    // Combined population truncated by rank, then by crowding.
    std::vector<std::vector<double>> all_x = xs;
    std::vector<Objectives> all_f = fs;
    all_x.insert(all_x.end(), children.begin(), children.end());
    all_f.insert(all_f.end(), child_f.begin(), child_f.end());
    const auto fronts = non_dominated_sort(all_f);
    std::vector<std::size_t> keep;
    for (const auto& front : fronts) {
      if (keep.size() + front.size() <= np) {
        keep.insert(keep.end(), front.begin(), front.end());
        continue;
      }
      const auto d = crowding_distance(all_f, front);
      std::vector<std::size_t> order(front.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
      for (std::size_t i = 0; keep.size() < np; ++i) keep.push_back(front[order[i]]);
      break;
    }
    for (std::size_t i = 0; i < np; ++i) {
      xs[i] = all_x[keep[i]];
      fs[i] = all_f[keep[i]];
    }
    assign();
    record();
  }

  const auto final_fronts = non_dominated_sort(fs);
  for (std::size_t i : final_fronts.front()) {
    if (fs[i][0] >= kPenalty || fs[i][1] >= kPenalty) continue;
    const bool seen = std::any_of(out.members.begin(), out.members.end(), [&](const Solution& s) { return s.f == fs[i]; });
    if (!seen) out.members.push_back({xs[i], fs[i]});
  }
  std::sort(out.members.begin(), out.members.end(),
            [](const Solution& a, const Solution& b) { return a.f[0] < b.f[0] || (a.f[0] == b.f[0] && a.f[1] < b.f[1]); });
  return out;
}

}  // namespace bemopt::opt
