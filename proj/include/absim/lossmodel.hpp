#pragma once

// Closed-form loss and sampling-rate models for an atom boson sampler.
//
// Occupancy statistics assume the uniform bosonic mixture: every N-particle
// configuration over the M modes is equally likely. A lattice site holds
// two modes, so a site holding a pair has 3 spin configurations and a
// trio 4.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "absim/errors.hpp"
#include "absim/fock.hpp"
#include "absim/parallel.hpp"

namespace absim {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct LossScenario {
  std::string name;
  double t_step = 33e-6;   // s, duration of one circuit step
  double tau_bg = 360.0;   // s, background-gas lifetime of one atom
  double tau_tb = 0.4;     // s, on-site two-body lifetime of a pair
  double t_init = 0.5;     // s
  double t_det = 0.1;      // s
  double eta_init = 0.99;  // ground-state preparation efficiency
  double eta_det = 0.99;   // detection efficiency
  double mode_ratio_c = 1.0;  // c = M / N^2

  void validate() const {
    auto positive = [](double v, const char* f) {
      if (!(v > 0)) throw ValidationError(std::string(f) + " must be > 0");
    };
    auto non_negative = [](double v, const char* f) {
      if (!(v >= 0) || !std::isfinite(v)) throw ValidationError(std::string(f) + " must be >= 0");
    };
    auto probability = [](double v, const char* f) {
      if (!(v > 0 && v <= 1)) throw ValidationError(std::string(f) + " must lie in (0, 1]");
    };
    positive(t_step, "t_step");
    if (!std::isfinite(t_step)) throw ValidationError("t_step must be finite");
    positive(tau_bg, "tau_bg");
    positive(tau_tb, "tau_tb");
    non_negative(t_init, "t_init");
    non_negative(t_det, "t_det");
    probability(eta_init, "eta_init");
    probability(eta_det, "eta_det");
    positive(mode_ratio_c, "mode_ratio_c");
  }
};

struct PhotonicScenario {
  std::string name;
  double r0 = 76e6;     // Hz, single-photon source rate
  double eta_f = 0.14;  // fixed preparation and detection efficiency
  double eta_c = 1.0;   // transmission per circuit element

  void validate() const {
    if (!(r0 > 0)) throw ValidationError("r0 must be > 0");
    if (!(eta_f > 0 && eta_f <= 1)) throw ValidationError("eta_f must lie in (0, 1]");
    if (!(eta_c > 0 && eta_c <= 1)) throw ValidationError("eta_c must lie in (0, 1]");
  }
};

struct ClassicalScenario {
  std::string name;
  double a_tilde = 3e-15;  // s per elementary operation

  void validate() const {
    if (!(a_tilde > 0)) throw ValidationError("a_tilde must be > 0");
  }
};

namespace presets {

inline LossScenario conservative() {
  return {"conservative", 170e-6, 360.0, 40e-3, 0.5, 0.1, 0.90, 0.99, 1.0};
}
inline LossScenario state_of_the_art() {
  return {"state-of-the-art", 33e-6, 360.0, 400e-3, 0.5, 0.1, 0.99, 0.99, 1.0};
}
inline LossScenario lossless() {
  return {"lossless", 33e-6, kInfinity, kInfinity, 0.5, 0.1, 1.0, 1.0, 1.0};
}
// 98.7 % transmission through a 60-element circuit.
inline double source_experiment_eta_c() { return std::pow(0.987, 1.0 / 60.0); }
inline PhotonicScenario photonic_conservative() {
  return {"photonic-conservative", 76e6, 0.14, source_experiment_eta_c()};
}
inline PhotonicScenario photonic_state_of_the_art() {
  return {"photonic-state-of-the-art", 76e6, 0.65, source_experiment_eta_c()};
}
inline ClassicalScenario tianhe2() { return {"tianhe-2", 3e-15}; }
inline ClassicalScenario laptop() { return {"laptop", 3e-9}; }

}  // namespace presets

// Number of modes M = c N^2, rounded to the nearest integer (at least 1).
inline std::int64_t mode_count(double c, int n) {
  const double m = c * static_cast<double>(n) * n;
  return std::max<std::int64_t>(1, std::llround(m));
}

// Mode count used for site combinatorics: M rounded up to even, so that
// M/2 sites exist.
inline std::int64_t even_mode_count(std::int64_t m) { return m + (m % 2); }

// Exact probability of k2 doubly- and k3 triply-occupied sites (all other
// sites holding at most one atom) under the uniform mixture:
//   4^k3 C(S,k3) 3^k2 C(S-k3,k2) 2^r C(S-k2-k3, r) / C(M+N-1, N)
// with S = M/2 sites and r = N - 2 k2 - 3 k3 singly occupied sites.
inline Rational pair_trio_probability_exact(int n, std::int64_t m, int k2, int k3) {
  if (m % 2 != 0) {
    throw ValidationError("pair/trio statistics need an even mode count, got M=" +
                          std::to_string(m));
  }
  if (n < 0 || m < 2 || k2 < 0 || k3 < 0) return 0;
  const std::int64_t sites = m / 2;
  const std::int64_t singles = static_cast<std::int64_t>(n) - 2 * k2 - 3 * k3;
  if (singles < 0 || singles > sites - k2 - k3) return 0;
  BigInt count = binomial_big(sites, k3) * binomial_big(sites - k3, k2) *
                 binomial_big(sites - k2 - k3, singles);
  count *= boost::multiprecision::pow(BigInt(4), static_cast<unsigned>(k3));
  count *= boost::multiprecision::pow(BigInt(3), static_cast<unsigned>(k2));
  count *= boost::multiprecision::pow(BigInt(2), static_cast<unsigned>(singles));
  return Rational(count, binomial_big(m + n - 1, n));
}

inline double p_pairs_trios(int n, std::int64_t m, int k2, int k3) {
  return pair_trio_probability_exact(n, m, k2, k3).convert_to<double>();
}

// Large-N limit of P(k2, 0): Poisson with mean 3 / (2c).
inline double poisson_pair_limit(double c, int k2) {
  if (!(c > 0)) throw ValidationError("c must be > 0");
  const double lambda = 1.5 / c;
  return std::exp(k2 * std::log(lambda) - lambda - std::lgamma(k2 + 1.0));
}

enum class TwoBodyModel {
  automatic,      // finite-N sum up to the switch point, closed form above
  finite_n,       // pair + trio sum over P(k2, k3)
  large_n,        // exp[(3/(2c)) (e^{-t/tau} - 1)]
};

struct TwoBodyOptions {
  TwoBodyModel model = TwoBodyModel::automatic;
  int switch_n = 40;  // largest N evaluated with the finite-N sum
};

struct TwoBodyStep {
  double p = 1;
  // Uniform-mixture mass outside the pair/trio sectors (quartets and up);
  // zero for the closed form.
  double excluded_mass = 0;
  bool closed_form = false;
};

// Probability weights P(k2, k3) of every pair/trio sector at (n, m).
struct SectorWeight {
  int k2;
  int k3;
  double p;
};

inline std::vector<SectorWeight> pair_trio_sectors(int n, std::int64_t m) {
  std::vector<SectorWeight> out;
  for (int k3 = 0; 3 * k3 <= n; ++k3) {
    for (int k2 = 0; 2 * k2 + 3 * k3 <= n; ++k2) {
      const Rational p = pair_trio_probability_exact(n, m, k2, k3);
      if (p != 0) out.push_back({k2, k3, p.convert_to<double>()});
    }
  }
  return out;
}

inline TwoBodyStep two_body_step(int n, std::int64_t m, double t, double tau_tb,
                                 TwoBodyOptions opt = {}) {
  if (!(t >= 0)) throw ValidationError("step time must be >= 0");
  if (n < 0 || m < 1) throw ValidationError("need N >= 0 and M >= 1");
  const bool closed = opt.model == TwoBodyModel::large_n ||
                      (opt.model == TwoBodyModel::automatic && n > opt.switch_n);
  const double decay = std::isinf(tau_tb) ? 1.0 : std::exp(-t / tau_tb);
  TwoBodyStep out;
  out.closed_form = closed;
  if (closed) {
    const double c = static_cast<double>(m) / (static_cast<double>(n) * n);
    out.p = std::exp(1.5 / c * (decay - 1.0));
    return out;
  }
  const std::int64_t me = even_mode_count(m);
  double mass = 0;
  double surviving = 0;
  for (const auto& s : pair_trio_sectors(n, me)) {
    mass += s.p;
    surviving += s.p * std::pow(decay, s.k2 + 3 * s.k3);
  }
  out.p = surviving / mass;
  out.excluded_mass = std::max(0.0, 1.0 - mass);
  return out;
}

inline double p_step_twobody(int n, std::int64_t m, double t, double tau_tb,
                             TwoBodyOptions opt = {}) {
  return two_body_step(n, m, t, tau_tb, opt).p;
}

inline double p_step_background(int n, double t, double tau_bg) {
  if (!(t >= 0)) throw ValidationError("step time must be >= 0");
  if (std::isinf(tau_bg)) return 1.0;
  return std::exp(-static_cast<double>(n) * t / tau_bg);
}

// (P_step^BG P_step^TB)^M over the M = c N^2 steps of the circuit.
inline double p_survival(const LossScenario& s, int n, TwoBodyOptions opt = {}) {
  s.validate();
  if (n < 1) throw ValidationError("N must be >= 1");
  const std::int64_t m = mode_count(s.mode_ratio_c, n);
  const double step =
      p_step_background(n, s.t_step, s.tau_bg) * p_step_twobody(n, m, s.t_step, s.tau_tb, opt);
  return std::pow(step, static_cast<double>(m));
}

// Atom number below which two-body loss dominates background-gas loss.
inline double n_threshold(const LossScenario& s) { return 3.0 * s.tau_bg / (2.0 * s.tau_tb); }

// Collision-free repetition rate: (1/e) / (c N^2 t_step + t_init + t_det).
inline double r_ideal(const LossScenario& s, int n) {
  s.validate();
  if (n < 1) throw ValidationError("N must be >= 1");
  const double t_exec = static_cast<double>(mode_count(s.mode_ratio_c, n)) * s.t_step;
  return std::exp(-1.0) / (t_exec + s.t_init + s.t_det);
}

inline double r_nisq(const LossScenario& s, int n, TwoBodyOptions opt = {}) {
  return std::pow(s.eta_init * s.eta_det, n) * p_survival(s, n, opt) * r_ideal(s, n);
}

// (1/e) (R0/N) eta^N with eta = eta_f eta_c^{elements}; the circuit depth
// defaults to M = N^2 elements.
inline double r_photonic(const PhotonicScenario& p, int n,
                         std::optional<double> circuit_elements = std::nullopt) {
  p.validate();
  if (n < 1) throw ValidationError("N must be >= 1");
  const double elements = circuit_elements.value_or(static_cast<double>(n) * n);
  const double eta = p.eta_f * std::pow(p.eta_c, elements);
  return std::exp(-1.0) * (p.r0 / n) * std::pow(eta, n);
}

// Metropolised independence sampler: 2^{-N} / (100 a N^2).
inline double r_classical(const ClassicalScenario& c, int n) {
  c.validate();
  if (n < 1) throw ValidationError("N must be >= 1");
  return std::exp2(-n) / (100.0 * c.a_tilde * static_cast<double>(n) * n);
}

// Smallest N in [n_min, n_max] with r_nisq(N) > r_classical(N); nullopt when
// the atomic machine never overtakes the classical one in range.
inline std::optional<int> crossover(const LossScenario& s, const ClassicalScenario& c,
                                    TwoBodyOptions opt = {}, int n_min = 2, int n_max = 200) {
  for (int n = n_min; n <= n_max; ++n) {
    if (r_nisq(s, n, opt) > r_classical(c, n)) return n;
  }
  return std::nullopt;
}

struct RateRow {
  int n = 0;
  double r_atomic = 0;
  double r_photonic = 0;
  double r_classical = 0;
};

inline std::vector<RateRow> rate_curve(const LossScenario& s, const PhotonicScenario& p,
                                       const ClassicalScenario& c, int n_min, int n_max,
                                       TwoBodyOptions opt = {}, unsigned workers = 1) {
  if (n_min < 1 || n_max < n_min) throw ValidationError("invalid N range");
  std::vector<RateRow> rows(static_cast<std::size_t>(n_max - n_min + 1));
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    const int n = n_min + static_cast<int>(i);
    rows[i] = {n, r_nisq(s, n, opt), r_photonic(p, n), r_classical(c, n)};
  });
  return rows;
}

}  // namespace absim
