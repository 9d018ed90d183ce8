#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "absim/exactsim.hpp"
#include "absim/permanent.hpp"
#include "oracles.hpp"

using namespace absim;

namespace {

CircuitPlan random_plan(int m, std::uint64_t seed) {
  return clements_decompose(haar_random_unitary(m, seed));
}

}  // namespace

TEST(ExactSim, HomDipAmplitudes) {
  const FockBasis basis(2, 2);
  SimState s = basis_state(basis, FockState{1, 1});
  apply_layer(s, {{0, std::numbers::pi / 2, 0.0}});
  const double r = 1 / std::sqrt(2.0);
  EXPECT_EQ(basis[0], (FockState{2, 0}));
  EXPECT_NEAR(std::abs(s.amplitudes[0]), r, 1e-14);
  EXPECT_LT(std::abs(s.amplitudes[1]), 1e-15);
  EXPECT_NEAR(std::abs(s.amplitudes[2]), r, 1e-14);

  // Phases as well as magnitudes agree with the creation-operator expansion.
  const auto amps =
      oracle::propagate_fock(coupling_matrix(std::numbers::pi / 2, 0.0), FockState{1, 1});
  for (std::size_t i = 0; i < basis.size(); ++i) {
    auto it = amps.find(basis[i].occupations());
    const cplx want = it == amps.end() ? cplx(0) : it->second;
    EXPECT_LT(std::abs(s.amplitudes[static_cast<Eigen::Index>(i)] - want), 1e-14);
  }
}

TEST(ExactSim, CouplingBlocksAreUnitary) {
  Rng rng(5);
  for (int k = 0; k <= 6; ++k) {
    const MatrixXc b = coupling_block(coupling_matrix(kTwoPi * rng.uniform(), kTwoPi * rng.uniform()), k);
    EXPECT_LT(unitarity_deviation(b), 1e-13) << "k=" << k;
  }
}

TEST(ExactSim, IdentityLayerLeavesStateUnchanged) {
  const FockBasis basis(3, 6);
  const SimState psi = uniform_state(basis, true, 17);
  SimState s = psi;
  apply_layer(s, {{0, 0, 0}, {2, 0, 0}, {4, 0, 0}});
  EXPECT_LT((s.amplitudes - psi.amplitudes).norm(), 1e-15);
}

TEST(ExactSim, OverlappingCouplingsRejected) {
  const FockBasis basis(2, 4);
  SimState s = uniform_state(basis);
  EXPECT_THROW(apply_layer(s, {{0, 1.0, 0.0}, {1, 1.0, 0.0}}), ValidationError);
  EXPECT_THROW(apply_layer(s, {{3, 1.0, 0.0}}), ValidationError);
}

TEST(ExactSim, LosslessMatchesPermanentProbabilities) {
  Rng rng(2718);
  int circuits = 0;
  for (int m = 2; m <= 6; ++m) {
    for (int n = 1; n <= 3; ++n) {
      const FockBasis basis(n, m);
      const FiberTable fibers(basis);
      const auto diag = build_decay_diagonal(basis, kInfinity, kInfinity);
      for (int rep = 0; rep < 2; ++rep, ++circuits) {
        const CircuitPlan plan = random_plan(m, rng.next_u64());
        const ModeUnitary u = reconstruct(plan);
        const FockState input = basis[rng.next_u64() % basis.size()];
        const auto run = run_circuit(basis_state(basis, input), plan, basis, fibers, diag, 1.0);
        for (std::size_t i = 0; i < basis.size(); ++i) {
          const double sim = std::norm(run.state.amplitudes[static_cast<Eigen::Index>(i)]);
          EXPECT_NEAR(sim, outcome_probability(u, input, basis[i]), 1e-10)
              << "M=" << m << " input " << input.to_string() << " output " << basis[i].to_string();
        }
      }
    }
  }
  EXPECT_GE(circuits, 20);
}

TEST(ExactSim, LosslessAmplitudesMatchOperatorExpansion) {
  const int n = 3, m = 5;
  const FockBasis basis(n, m);
  const CircuitPlan plan = random_plan(m, 404);
  const FockState input{1, 0, 2, 0, 0};
  const auto run = run_circuit(basis_state(basis, input), plan, 1.0, kInfinity, kInfinity);
  const auto amps = oracle::propagate_fock(reconstruct(plan).matrix(), input);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    EXPECT_LT(std::abs(run.state.amplitudes[static_cast<Eigen::Index>(i)] -
                       amps.at(basis[i].occupations())),
              1e-12);
  }
}

TEST(ExactSim, DecayRates) {
  const double bg = 7.0, tb = 3.0;
  const FockBasis b2(2, 4);
  const auto d2 = build_decay_diagonal(b2, bg, tb);
  EXPECT_DOUBLE_EQ(d2.rates[b2.index_of({1, 0, 1, 0})], 1 / bg);
  EXPECT_DOUBLE_EQ(d2.rates[b2.index_of({1, 1, 0, 0})], 1 / bg + 1 / (2 * tb));
  EXPECT_DOUBLE_EQ(d2.rates[b2.index_of({0, 2, 0, 0})], 1 / bg + 1 / (2 * tb));

  const FockBasis b3(3, 4);
  const auto d3 = build_decay_diagonal(b3, bg, tb);
  EXPECT_DOUBLE_EQ(d3.rates[b3.index_of({2, 1, 0, 0})], 3 / (2 * bg) + 3 / (2 * tb));
  for (double r : d3.rates) EXPECT_GE(r, 3 / (2 * bg));

  const auto none = build_decay_diagonal(3, 4, kInfinity, kInfinity);
  for (double r : none.rates) EXPECT_EQ(r, 0.0);
  EXPECT_THROW(build_decay_diagonal(2, 5, bg, tb), ValidationError);
  EXPECT_NO_THROW(build_decay_diagonal(2, 5, bg, kInfinity));
  EXPECT_THROW(build_decay_diagonal(2, 4, 0.0, tb), ValidationError);
  EXPECT_THROW(build_decay_diagonal(8, 64, bg, tb, 1000), SizeError);
}

TEST(ExactSim, PairSectorDecayLaw) {
  const int n = 4, m = 8;
  const double bg = 11.0, tb = 2.5, t = 1.7;
  const FockBasis basis(n, m);
  const auto diag = build_decay_diagonal(basis, bg, tb);
  // k pairs, no higher occupancy (sites are mode pairs (2s, 2s+1)).
  const std::vector<std::pair<FockState, int>> cases = {
      {{1, 0, 1, 0, 1, 0, 1, 0}, 0},
      {{1, 1, 0, 1, 1, 0, 0, 0}, 1},
      {{2, 0, 0, 0, 0, 1, 1, 0}, 1},
      {{0, 2, 1, 1, 0, 0, 0, 0}, 2},
  };
  for (const auto& [state, k] : cases) {
    SimState s = basis_state(basis, state);
    apply_decay(s, diag, t);
    EXPECT_NEAR(s.norm_squared(), std::exp(-n * t / bg) * std::exp(-k * t / tb), 1e-15)
        << state.to_string();
  }
  SimState s = uniform_state(basis);
  const SimState before = s;
  apply_decay(s, diag, 0.0);
  EXPECT_EQ(s.amplitudes, before.amplitudes);
  EXPECT_THROW(apply_decay(s, diag, -1.0), ValidationError);
}

TEST(ExactSim, NormConservedWithoutLoss) {
  Rng rng(99);
  for (int m : {2, 4, 8, 12}) {
    for (int n = 1; n <= 4; ++n) {
      const FockBasis basis(n, m);
      const auto run = run_circuit(uniform_state(basis, true, rng.next_u64()),
                                   random_plan(m, rng.next_u64()), 1.0, kInfinity, kInfinity);
      EXPECT_LT(std::abs(std::sqrt(run.state.norm_squared()) - 1), 1e-12) << n << " " << m;
      for (double p : run.trace.p_j) EXPECT_NEAR(p, 1.0, 1e-12);
    }
  }
}

TEST(ExactSim, LossyTraceConsistent) {
  const int n = 3, m = 8;
  const FockBasis basis(n, m);
  const FiberTable fibers(basis);
  const auto diag = build_decay_diagonal(basis, 40.0, 4.0);
  const CircuitPlan plan = random_plan(m, 8);
  SimState s = uniform_state(basis);
  double prev = s.norm_squared();
  for (const auto& layer : plan.layers) {
    apply_decay(s, diag, 1.0);
    apply_layer(s, layer, fibers);
    EXPECT_LE(s.norm_squared(), prev + 1e-15);
    prev = s.norm_squared();
  }
  const auto run = run_circuit(uniform_state(basis), plan, basis, fibers, diag, 1.0);
  EXPECT_EQ(run.trace.steps, m);
  double prod = 1;
  for (double p : run.trace.p_j) {
    EXPECT_GT(p, 0.0);
    EXPECT_LE(p, 1.0);
    prod *= p;
  }
  EXPECT_NEAR(run.trace.p_total, prod, 1e-10);
  EXPECT_NEAR(run.trace.p_total, run.state.norm_squared(), 1e-12);
  EXPECT_NEAR(run.state.norm_squared(), s.norm_squared(), 1e-14);
}

TEST(ExactSim, FirstStepOfPairFreeState) {
  const int n = 4, m = 8;
  const double bg = 5.0, t = 0.3;
  const FockBasis basis(n, m);
  const auto run = run_circuit(basis_state(basis, {1, 0, 1, 0, 1, 0, 1, 0}), random_plan(m, 1),
                               t, bg, 0.01);
  EXPECT_NEAR(run.trace.p_j[0], std::exp(-n * t / bg), 1e-14);
  for (double p : run.trace.p_j) EXPECT_LE(p, std::exp(-n * t / bg) + 1e-14);
}

TEST(ExactSim, DimensionMismatchRejected) {
  const FockBasis basis(2, 4);
  EXPECT_THROW(run_circuit(uniform_state(basis), random_plan(6, 1), 1.0, kInfinity, kInfinity),
               ValidationError);
}

// At N = 4 the only configuration outside the pair/trio sectors is one site
// holding all four atoms (amplitude rate 12/(4 tau)), so the first-step
// survival from the uniform state is fixed by the exact sector weights.
TEST(ExactSim, BenchmarkFirstStepMatchesSectorWeights) {
  BenchmarkConfig cfg;
  cfg.realizations = 4;
  cfg.tau_tb_over_texec = 0.25;
  const auto res = benchmark_vs_model(cfg);
  const double d = std::exp(-res.t_step / res.tau_tb);
  Rational mass = 0;
  double want = 0;
  for (int k3 = 0; k3 <= 1; ++k3) {
    for (int k2 = 0; 2 * k2 + 3 * k3 <= 4; ++k2) {
      const Rational p = pair_trio_probability_exact(4, 16, k2, k3);
      mass += p;
      want += p.convert_to<double>() * std::pow(d, k2 + 3 * k3);
    }
  }
  want += (1 - mass).convert_to<double>() * std::pow(d, 6);
  for (const auto& tr : res.traces) EXPECT_NEAR(tr.p_j[0], want, 1e-12);
}

TEST(ExactSim, BenchmarkIndependentOfWorkers) {
  BenchmarkConfig cfg;
  cfg.realizations = 6;
  cfg.seed = 77;
  const auto a = benchmark_vs_model(cfg);
  cfg.workers = 4;
  const auto b = benchmark_vs_model(cfg);
  EXPECT_EQ(a.mean_p_j, b.mean_p_j);
  EXPECT_EQ(a.mean_p_total, b.mean_p_total);
  ASSERT_EQ(a.traces.size(), b.traces.size());
  for (std::size_t r = 0; r < a.traces.size(); ++r) EXPECT_EQ(a.traces[r].p_j, b.traces[r].p_j);
}

TEST(ExactSim, BenchmarkStrongLossOnlyFirstStepMatches) {
  BenchmarkConfig cfg;
  cfg.tau_tb_over_texec = 1.0 / 20;
  cfg.workers = 4;
  const auto res = benchmark_vs_model(cfg);
  ASSERT_EQ(res.mean_p_j.size(), 16u);
  EXPECT_NEAR(res.mean_p_j[0], res.model_p_step, 0.01);
  for (std::size_t j = 1; j < res.mean_p_j.size(); ++j) {
    EXPECT_LT(res.model_p_step, res.mean_p_j[j]) << "step " << j + 1;
  }
  EXPECT_GE(res.mean_p_total, res.model_p_step_pow_m - 0.01);
}

TEST(ExactSim, BenchmarkSeedsAgreeWithinStatistics) {
  BenchmarkConfig cfg;
  cfg.workers = 4;
  auto stats = [](const BenchmarkResult& r) {
    double var = 0;
    for (const auto& tr : r.traces) var += std::pow(tr.p_total - r.mean_p_total, 2);
    return var / (r.traces.size() - 1) / r.traces.size();
  };
  cfg.seed = 1;
  const auto a = benchmark_vs_model(cfg);
  cfg.seed = 2;
  const auto b = benchmark_vs_model(cfg);
  EXPECT_LT(std::abs(a.mean_p_total - b.mean_p_total), 3 * std::sqrt(stats(a) + stats(b)));
}

TEST(ExactSim, RandomPhasesOnlyChangeLaterSteps) {
  BenchmarkConfig cfg;
  cfg.realizations = 3;
  cfg.tau_tb_over_texec = 0.2;
  const auto flat = benchmark_vs_model(cfg);
  cfg.random_phases = true;
  const auto phased = benchmark_vs_model(cfg);
  EXPECT_NEAR(flat.mean_p_j[0], phased.mean_p_j[0], 1e-14);
  EXPECT_NE(flat.mean_p_total, phased.mean_p_total);
}

TEST(ExactSim, BenchmarkPreconditions) {
  BenchmarkConfig cfg;
  cfg.realizations = 0;
  EXPECT_THROW(benchmark_vs_model(cfg), ValidationError);
  cfg.realizations = 1;
  cfg.n = 10;
  cfg.m = 40;
  cfg.cap = 1000;
  EXPECT_THROW(benchmark_vs_model(cfg), SizeError);
}
