#pragma once

// Exact state-vector simulation of the stepped, lossy circuit
//
//     |psi> = U_M V(t) U_{M-1} ... U_1 V(t) |psi_0>,  V(t) = exp(-H t),
//     H = N / (2 tau_BG) + sum_s n_s (n_s - 1) / (4 tau_TB),
//
// restricted to the N-particle sector. Loss only removes norm; the
// surviving norm squared is the post-selected survival probability.

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absim/errors.hpp"
#include "absim/fock.hpp"
#include "absim/interferometer.hpp"
#include "absim/lossmodel.hpp"
#include "absim/parallel.hpp"
#include "absim/rng.hpp"

namespace absim {

using VectorXc = Eigen::VectorXcd;

struct SimState {
  VectorXc amplitudes;
  int n = 0;
  int m = 0;

  double norm_squared() const { return amplitudes.squaredNorm(); }
};

struct DecayDiagonal {
  int n = 0;
  int m = 0;
  std::vector<double> rates;  // amplitude decay rate per basis state
};

struct SurvivalTrace {
  std::vector<double> p_j;
  double p_total = 1;
  int steps = 0;
};

inline DecayDiagonal build_decay_diagonal(const FockBasis& basis, double tau_bg, double tau_tb) {
  if (!(tau_bg > 0) || !(tau_tb > 0)) throw ValidationError("decay times must be > 0");
  const double bg = std::isinf(tau_bg) ? 0.0 : basis.particles() / (2.0 * tau_bg);
  const double tb = std::isinf(tau_tb) ? 0.0 : 1.0 / (4.0 * tau_tb);
  DecayDiagonal d{basis.particles(), basis.modes(), {}};
  d.rates.reserve(basis.size());
  // Without two-body loss the site structure is irrelevant, so odd M is fine.
  if (tb == 0) {
    d.rates.assign(basis.size(), bg);
    return d;
  }
  for (const auto& s : basis.states()) {
    const auto occ = site_occupancy(s);
    double pairs = 0;
    for (int k : occ.site_counts) pairs += static_cast<double>(k) * (k - 1);
    d.rates.push_back(bg + tb * pairs);
  }
  return d;
}

inline DecayDiagonal build_decay_diagonal(int n, int m, double tau_bg, double tau_tb,
                                          std::uint64_t cap = kDefaultBasisCap) {
  if (m % 2 != 0 && !std::isinf(tau_tb)) {
    throw ValidationError("two-body decay needs an even mode count, got M=" + std::to_string(m));
  }
  return build_decay_diagonal(FockBasis(n, m, cap), tau_bg, tau_tb);
}

inline void apply_decay(SimState& state, const DecayDiagonal& diag, double t) {
  if (!(t >= 0)) throw ValidationError("decay time must be >= 0");
  if (diag.rates.size() != static_cast<std::size_t>(state.amplitudes.size())) {
    throw ValidationError("decay diagonal does not match the state dimension");
  }
  if (t == 0) return;
  for (std::size_t i = 0; i < diag.rates.size(); ++i) {
    state.amplitudes[static_cast<Eigen::Index>(i)] *= std::exp(-diag.rates[i] * t);
  }
}

// For every adjacent mode pair (a, a+1), the basis splits into fibers of
// states that agree outside the pair. A fiber with k particles on the pair
// lists its members by n_a = 0..k. A coupling acts independently on each
// fiber through the (k+1)x(k+1) symmetric-power block of T.
class FiberTable {
 public:
  explicit FiberTable(const FockBasis& basis) : n_(basis.particles()), m_(basis.modes()) {
    pairs_.resize(static_cast<std::size_t>(std::max(m_ - 1, 0)));
    for (int a = 0; a + 1 < m_; ++a) {
      auto& pf = pairs_[static_cast<std::size_t>(a)];
      pf.offsets.push_back(0);
      for (const auto& s : basis.states()) {
        if (s[a + 1] != 0 || s[a] == 0) continue;
        const int k = s[a];
        auto occ = s.occupations();
        for (int p = 0; p <= k; ++p) {
          occ[a] = p;
          occ[a + 1] = k - p;
          pf.indices.push_back(state_rank(FockState(occ)));
        }
        pf.offsets.push_back(pf.indices.size());
      }
    }
  }

  int particles() const noexcept { return n_; }
  int modes() const noexcept { return m_; }

  struct PairFibers {
    std::vector<std::uint64_t> indices;
    std::vector<std::size_t> offsets;
  };
  const PairFibers& pair(int a) const { return pairs_[static_cast<std::size_t>(a)]; }

 private:
  int n_;
  int m_;
  std::vector<PairFibers> pairs_;
};

// Block B(p, q) = <p, k-p| T |q, k-q> for the mode transformation
// a_i^dagger -> sum_j T(j, i) a_j^dagger.
inline MatrixXc coupling_block(const Mat2& t, int k) {
  std::vector<double> fact(static_cast<std::size_t>(k) + 1, 1.0);
  for (int i = 1; i <= k; ++i) fact[i] = fact[i - 1] * i;
  auto binom = [&](int n, int r) { return fact[n] / (fact[r] * fact[n - r]); };
  auto ipow = [](cplx z, int e) {
    cplx r = 1.0;
    for (int i = 0; i < e; ++i) r *= z;
    return r;
  };
  MatrixXc b = MatrixXc::Zero(k + 1, k + 1);
  for (int q = 0; q <= k; ++q) {
    for (int r = 0; r <= q; ++r) {
      const cplx left = binom(q, r) * ipow(t(0, 0), r) * ipow(t(1, 0), q - r);
      for (int s = 0; s <= k - q; ++s) {
        const cplx right = binom(k - q, s) * ipow(t(0, 1), s) * ipow(t(1, 1), k - q - s);
        b(r + s, q) += left * right;
      }
    }
    for (int p = 0; p <= k; ++p) {
      b(p, q) *= std::sqrt(fact[p] * fact[k - p] / (fact[q] * fact[k - q]));
    }
  }
  return b;
}

inline void apply_layer(SimState& state, const Layer& layer, const FiberTable& fibers) {
  if (fibers.particles() != state.n || fibers.modes() != state.m) {
    throw ValidationError("fiber table does not match the state's N and M");
  }
  validate_layer(layer, state.m);
  std::vector<cplx> in;
  for (const auto& c : layer) {
    const Mat2 t = coupling_matrix(c.theta, c.phi);
    std::vector<MatrixXc> blocks;
    for (int k = 0; k <= state.n; ++k) blocks.push_back(coupling_block(t, k));
    const auto& pf = fibers.pair(c.mode);
    for (std::size_t f = 0; f + 1 < pf.offsets.size(); ++f) {
      const std::size_t begin = pf.offsets[f];
      const int size = static_cast<int>(pf.offsets[f + 1] - begin);
      const MatrixXc& b = blocks[static_cast<std::size_t>(size - 1)];
      in.resize(static_cast<std::size_t>(size));
      for (int q = 0; q < size; ++q) {
        in[q] = state.amplitudes[static_cast<Eigen::Index>(pf.indices[begin + q])];
      }
      for (int p = 0; p < size; ++p) {
        cplx acc = 0;
        for (int q = 0; q < size; ++q) acc += b(p, q) * in[q];
        state.amplitudes[static_cast<Eigen::Index>(pf.indices[begin + p])] = acc;
      }
    }
  }
}

inline void apply_layer(SimState& state, const Layer& layer) {
  apply_layer(state, layer, FiberTable(FockBasis(state.n, state.m)));
}

// Output phases e^{i alpha_k} on each mode give a Fock state the phase
// exp(i sum_k alpha_k n_k).
inline void apply_output_phases(SimState& state, const FockBasis& basis,
                                const std::vector<double>& phases) {
  if (phases.empty()) return;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    double a = 0;
    for (int k = 0; k < state.m; ++k) a += phases[static_cast<std::size_t>(k)] * basis[i][k];
    state.amplitudes[static_cast<Eigen::Index>(i)] *= std::polar(1.0, a);
  }
}

inline SimState basis_state(const FockBasis& basis, const FockState& s) {
  SimState out{VectorXc::Zero(static_cast<Eigen::Index>(basis.size())), basis.particles(),
               basis.modes()};
  out.amplitudes[static_cast<Eigen::Index>(basis.index_of(s))] = 1.0;
  return out;
}

// Equal-weight superposition over the whole basis. With random_phases each
// amplitude carries an independent uniform phase drawn from `seed`.
inline SimState uniform_state(const FockBasis& basis, bool random_phases = false,
                              std::uint64_t seed = 0) {
  const auto dim = static_cast<Eigen::Index>(basis.size());
  SimState out{VectorXc::Constant(dim, cplx(1.0 / std::sqrt(static_cast<double>(dim)), 0.0)),
               basis.particles(), basis.modes()};
  if (random_phases) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < dim; ++i) out.amplitudes[i] *= std::polar(1.0, kTwoPi * rng.uniform());
  }
  return out;
}

struct CircuitRun {
  SimState state;
  SurvivalTrace trace;
};

// V(t_step) before each layer, no decay after the last one; output phases
// are applied at the end and do not change any norm.
inline CircuitRun run_circuit(const SimState& initial, const CircuitPlan& plan,
                              const FockBasis& basis, const FiberTable& fibers,
                              const DecayDiagonal& diag, double t_step) {
  if (plan.m != initial.m) {
    throw ValidationError("plan has M=" + std::to_string(plan.m) + " but the state has M=" +
                          std::to_string(initial.m));
  }
  if (static_cast<std::size_t>(initial.amplitudes.size()) != basis.size() ||
      basis.particles() != initial.n || basis.modes() != initial.m) {
    throw ValidationError("state dimension does not match the N=" + std::to_string(basis.particles()) +
                          ", M=" + std::to_string(basis.modes()) + " basis");
  }
  CircuitRun run{initial, {}};
  double prev = run.state.norm_squared();
  for (const auto& layer : plan.layers) {
    apply_decay(run.state, diag, t_step);
    apply_layer(run.state, layer, fibers);
    const double now = run.state.norm_squared();
    run.trace.p_j.push_back(prev > 0 ? now / prev : 0.0);
    prev = now;
  }
  apply_output_phases(run.state, basis, plan.output_phases);
  run.trace.steps = static_cast<int>(plan.layers.size());
  run.trace.p_total = 1;
  for (double p : run.trace.p_j) run.trace.p_total *= p;
  return run;
}

inline CircuitRun run_circuit(const SimState& initial, const CircuitPlan& plan, double t_step,
                              double tau_bg, double tau_tb) {
  if (plan.m != initial.m) {
    throw ValidationError("plan has M=" + std::to_string(plan.m) + " but the state has M=" +
                          std::to_string(initial.m));
  }
  const FockBasis basis(initial.n, initial.m);
  return run_circuit(initial, plan, basis, FiberTable(basis),
                     build_decay_diagonal(basis, tau_bg, tau_tb), t_step);
}

struct BenchmarkConfig {
  int n = 4;
  int m = 16;
  double tau_tb_over_texec = 1;
  int realizations = 30;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool random_phases = false;
  std::uint64_t cap = kDefaultBasisCap;
};

struct BenchmarkResult {
  BenchmarkConfig config;
  double t_step = 1;
  double tau_tb = 0;
  std::vector<SurvivalTrace> traces;  // one per realization
  std::vector<double> mean_p_j;
  double mean_p_total = 0;
  double model_p_step = 0;
  double model_p_step_pow_m = 0;
};

// Realization r uses the Haar unitary seeded by derive_seed(seed, r) and,
// with random phases, an initial state seeded by derive_seed(that seed, 0).
// Units: t_step = 1, t_exec = M t_step, tau_BG infinite.
inline BenchmarkResult benchmark_vs_model(const BenchmarkConfig& cfg) {
  if (cfg.realizations < 1) throw ValidationError("need at least one realization");
  if (cfg.n < 1) throw ValidationError("need N >= 1");
  if (!(cfg.tau_tb_over_texec > 0)) throw ValidationError("tau_TB / t_exec must be > 0");
  const FockBasis basis(cfg.n, cfg.m, cfg.cap);
  const FiberTable fibers(basis);
  BenchmarkResult res;
  res.config = cfg;
  res.tau_tb = cfg.tau_tb_over_texec * cfg.m * res.t_step;
  const DecayDiagonal diag = build_decay_diagonal(basis, kInfinity, res.tau_tb);

  res.traces.resize(static_cast<std::size_t>(cfg.realizations));
  parallel_for(res.traces.size(), cfg.workers, [&](std::size_t r) {
    const std::uint64_t s = derive_seed(cfg.seed, r);
    const CircuitPlan plan = clements_decompose(haar_random_unitary(cfg.m, s));
    const SimState psi0 = uniform_state(basis, cfg.random_phases, derive_seed(s, 0));
    res.traces[r] = run_circuit(psi0, plan, basis, fibers, diag, res.t_step).trace;
  });

  const std::size_t steps = res.traces.front().p_j.size();
  res.mean_p_j.assign(steps, 0.0);
  for (const auto& tr : res.traces) {
    for (std::size_t j = 0; j < steps; ++j) res.mean_p_j[j] += tr.p_j[j];
    res.mean_p_total += tr.p_total;
  }
  for (double& p : res.mean_p_j) p /= cfg.realizations;
  res.mean_p_total /= cfg.realizations;

  res.model_p_step =
      p_step_twobody(cfg.n, cfg.m, res.t_step, res.tau_tb, {TwoBodyModel::finite_n, 0});
  res.model_p_step_pow_m = std::pow(res.model_p_step, cfg.m);
  return res;
}

}  // namespace absim
