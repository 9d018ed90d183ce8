#pragma once

// Two-atom Hong-Ou-Mandel experiment: analytic outcome probabilities, a
// forward Monte Carlo of the measurement sequence, and the least-squares
// extraction of the bunching probability from counted outcomes.

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <boost/random/binomial_distribution.hpp>

#include "absim/errors.hpp"
#include "absim/parallel.hpp"
#include "absim/rng.hpp"

namespace absim {

struct HomParams {
  double survival_s = 1;
  double p_lic0 = 1;  // both atoms lost in a light-induced collision
  double gamma = 1;   // indistinguishability
  double p_addr = 1;
  double p_rec = 1;

  double p_bunch() const { return gamma + (1 - gamma) / 2; }

  void validate() const {
    auto check = [](double v, const char* name) {
      if (!(v >= 0 && v <= 1)) {
        throw ValidationError(std::string("HOM parameter ") + name + " must lie in [0,1], got " +
                              std::to_string(v));
      }
    };
    check(survival_s, "survival_s");
    check(p_lic0, "p_lic0");
    check(gamma, "gamma");
    check(p_addr, "p_addr");
    check(p_rec, "p_rec");
  }
};

// Outcome triple over post-selected trials: zero, one or two atoms detected.
struct HomOutcomes {
  std::uint64_t trials_kept = 0;
  double p0 = 0;
  double p1 = 0;
  double p2 = 0;
  std::array<std::uint64_t, 3> counts{};

  double operator[](int k) const { return k == 0 ? p0 : (k == 1 ? p1 : p2); }
};

inline HomOutcomes outcomes_from_counts(std::uint64_t n0, std::uint64_t n1, std::uint64_t n2) {
  HomOutcomes o;
  o.counts = {n0, n1, n2};
  o.trials_kept = n0 + n1 + n2;
  if (o.trials_kept > 0) {
    const double t = static_cast<double>(o.trials_kept);
    o.p0 = n0 / t;
    o.p1 = n1 / t;
    o.p2 = n2 / t;
  }
  return o;
}

// Addressing and reconstruction are post-selection stages and drop out of
// the conditional probabilities.
inline HomOutcomes hom_analytic(const HomParams& p) {
  p.validate();
  const double s = p.survival_s;
  const double b = p.p_bunch();
  HomOutcomes o;
  o.p2 = s * s * (1 - b);
  o.p1 = s * s * b * (1 - p.p_lic0) + 2 * s * (1 - s);
  o.p0 = s * s * b * p.p_lic0 + (1 - s) * (1 - s);
  return o;
}

enum class ReconstructionFailure {
  discard,      // the trial is post-selected out
  misclassify,  // one detected atom is missed: k atoms are recorded as k - 1
};

namespace detail {

inline constexpr std::uint64_t kHomChunk = 1u << 16;

// Every trial consumes exactly six uniforms, so two runs with the same seed
// and different parameters see the same random numbers trial by trial.
inline void hom_chunk(const HomParams& p, std::uint64_t trials, std::uint64_t seed,
                      ReconstructionFailure mode, std::array<std::uint64_t, 3>& counts) {
  Rng rng(seed);
  const double bunch = p.p_bunch();
  for (std::uint64_t i = 0; i < trials; ++i) {
    const double u_addr = rng.uniform();
    const double u_a = rng.uniform();
    const double u_b = rng.uniform();
    const double u_bunch = rng.uniform();
    const double u_lic = rng.uniform();
    const double u_rec = rng.uniform();
    if (u_addr >= p.p_addr) continue;
    const int alive = (u_a < p.survival_s) + (u_b < p.survival_s);
    int detected = alive;
    // Two survivors either bunch onto one site, where the light-induced
    // collision leaves zero or one atom, or exit on separate sites
    // (0 and 10) and are both detected.
    if (alive == 2 && u_bunch < bunch) detected = u_lic < p.p_lic0 ? 0 : 1;
    if (u_rec >= p.p_rec) {
      if (mode == ReconstructionFailure::discard) continue;
      if (detected > 0) --detected;
    }
    ++counts[static_cast<std::size_t>(detected)];
  }
}

}  // namespace detail

// Trials run in chunks of 2^16; chunk c draws from derive_seed(seed, c) and
// the counts are summed, so results do not depend on the worker count.
inline HomOutcomes hom_monte_carlo(const HomParams& p, std::uint64_t trials, std::uint64_t seed,
                                   unsigned workers = 1,
                                   ReconstructionFailure mode = ReconstructionFailure::discard) {
  p.validate();
  if (trials < 1) throw ValidationError("hom_monte_carlo needs at least one trial");
  const std::uint64_t chunks = (trials + detail::kHomChunk - 1) / detail::kHomChunk;
  std::vector<std::array<std::uint64_t, 3>> part(chunks, {0, 0, 0});
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::uint64_t begin = c * detail::kHomChunk;
    const std::uint64_t n = std::min(detail::kHomChunk, trials - begin);
    detail::hom_chunk(p, n, derive_seed(seed, c), mode, part[c]);
  });
  std::array<std::uint64_t, 3> total{0, 0, 0};
  for (const auto& c : part)
    for (int k = 0; k < 3; ++k) total[k] += c[k];
  HomOutcomes o = outcomes_from_counts(total[0], total[1], total[2]);
  if (o.trials_kept == 0) {
    throw DegenerateDataError("no HOM trials survived post-selection out of " +
                              std::to_string(trials));
  }
  return o;
}

struct FitOptions {
  // Monte Carlo trials per model evaluation; 0 evaluates the analytic model.
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int bootstrap = 200;
  double tolerance = 1e-4;
};

struct BunchingFit {
  double p_bunch = 0;
  double sigma = 0;  // bootstrap standard deviation
  double gamma = 0;
  std::uint64_t trials_kept = 0;
  double residual = 0;  // squared deviation at the optimum

  // Distance of P_bunch from the distinguishable value 1/2 in units of sigma.
  double significance() const { return sigma > 0 ? (p_bunch - 0.5) / sigma : 0.0; }
};

namespace detail {

template <typename Objective>
double golden_section(Objective&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  // The bracket endpoints are candidates too: the optimum may sit on them.
  double best = (a + b) / 2, fbest = f(best);
  for (double x : {lo, hi}) {
    const double fx = f(x);
    if (fx < fbest) {
      best = x;
      fbest = fx;
    }
  }
  return best;
}

inline double squared_deviation(const HomOutcomes& model, const std::array<double, 3>& target) {
  double s = 0;
  for (int k = 0; k < 3; ++k) s += (model[k] - target[k]) * (model[k] - target[k]);
  return s;
}

inline HomParams bunching_params(double p_bunch, double s, double p_lic0) {
  return {s, p_lic0, 2 * p_bunch - 1, 1, 1};
}

inline double fit_point(const std::array<double, 3>& target, double s, double p_lic0,
                        const FitOptions& opt) {
  auto objective = [&](double pb) {
    const HomParams hp = bunching_params(pb, s, p_lic0);
    const HomOutcomes model = opt.trials == 0
                                  ? hom_analytic(hp)
                                  : hom_monte_carlo(hp, opt.trials, opt.seed, opt.workers);
    return squared_deviation(model, target);
  };
  return golden_section(objective, 0.5, 1.0, opt.tolerance);
}

}  // namespace detail

// Least-squares P_bunch on [1/2, 1] against the measured (P0, P1, P2). The
// Monte Carlo model reuses one seed for every evaluation, so the objective
// sees common random numbers. The uncertainty comes from refitting, with the
// analytic model, multinomial resamples of the measured counts.
inline BunchingFit fit_bunching(const HomOutcomes& measured, double s, double p_lic0,
                                const FitOptions& opt = {}) {
  if (measured.trials_kept == 0 ||
      measured.counts[0] + measured.counts[1] + measured.counts[2] == 0) {
    throw DegenerateDataError("cannot fit P_bunch: all outcome counts are zero");
  }
  if (!(s > 0 && s <= 1) || !(p_lic0 >= 0 && p_lic0 <= 1)) {
    throw ValidationError("fit needs S in (0,1] and P_LIC0 in [0,1]");
  }
  if (opt.bootstrap < 0) throw ValidationError("bootstrap count must be >= 0");

  BunchingFit fit;
  const std::array<double, 3> target{measured.p0, measured.p1, measured.p2};
  fit.p_bunch = detail::fit_point(target, s, p_lic0, opt);
  fit.gamma = 2 * fit.p_bunch - 1;
  fit.trials_kept = measured.trials_kept;
  fit.residual = detail::squared_deviation(
      hom_analytic(detail::bunching_params(fit.p_bunch, s, p_lic0)), target);

  if (opt.bootstrap > 1) {
    const std::uint64_t n = measured.counts[0] + measured.counts[1] + measured.counts[2];
    const double f0 = static_cast<double>(measured.counts[0]) / n;
    const double f1 = static_cast<double>(measured.counts[1]) / n;
    FitOptions analytic = opt;
    analytic.trials = 0;
    std::vector<double> est(static_cast<std::size_t>(opt.bootstrap));
    parallel_for(est.size(), opt.workers, [&](std::size_t b) {
      std::mt19937_64 eng(derive_seed(derive_seed(opt.seed, 0xB007), b));
      using Binomial = boost::random::binomial_distribution<std::int64_t>;
      const auto total = static_cast<std::int64_t>(n);
      const std::int64_t k0 = Binomial(total, f0)(eng);
      const double rest = f0 < 1 ? std::min(f1 / (1 - f0), 1.0) : 0.0;
      const std::int64_t k1 = Binomial(total - k0, rest)(eng);
      const double t = static_cast<double>(n);
      est[b] = detail::fit_point({k0 / t, k1 / t, (total - k0 - k1) / t}, s, p_lic0, analytic);
    });
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
    double var = 0;
    for (double e : est) var += (e - mean) * (e - mean);
    fit.sigma = std::sqrt(var / (est.size() - 1));
  }
  return fit;
}

inline double bunching_from_p2(double p2, double s) {
  if (!(s > 0 && s <= 1)) throw ValidationError("survival S must lie in (0,1]");
  if (!(p2 >= 0)) throw ValidationError("P2 must be >= 0");
  if (p2 > s * s) {
    throw ValidationError("P2=" + std::to_string(p2) + " exceeds S^2=" + std::to_string(s * s) +
                          ": no bunching probability reproduces it");
  }
  return 1 - p2 / (s * s);
}

inline double purity_from_bunching(double p_bunch) {
  if (!(p_bunch >= 0.5 && p_bunch <= 1)) {
    throw ValidationError("P_bunch must lie in [1/2, 1], got " + std::to_string(p_bunch));
  }
  return 2 * p_bunch - 1;
}

inline double expected_purity(double p3d) {
  if (!(p3d >= 0 && p3d <= 1)) throw ValidationError("P_3D must lie in [0,1]");
  return p3d * p3d;
}

}  // namespace absim
