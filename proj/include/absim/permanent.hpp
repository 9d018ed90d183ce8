#pragma once

// Matrix permanents and the exact boson-sampling output distribution
// P(n) = |perm(U_{S,T})|^2 / (prod n_j! prod m_i!).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "absim/errors.hpp"
#include "absim/fock.hpp"
#include "absim/interferometer.hpp"
#include "absim/parallel.hpp"
#include "absim/rng.hpp"

namespace absim {

inline constexpr int kDefaultPermanentCap = 28;
inline constexpr int kNaivePermanentCap = 9;

namespace detail {

inline void require_square(const MatrixXc& a) {
  if (a.rows() != a.cols()) {
    throw ValidationError("permanent needs a square matrix, got " + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()));
  }
}

// Gray-code steps per chunk. Fixed so that the summation order, and hence
// the rounded result, depends only on n.
inline constexpr std::uint64_t kGlynnChunk = std::uint64_t{1} << 14;

// Partial Glynn sum over Gray-code indices [begin, end).
inline cplx glynn_chunk(const MatrixXc& a, std::uint64_t begin, std::uint64_t end) {
  const Eigen::Index n = a.rows();
  std::vector<int> delta(static_cast<std::size_t>(n), 1);
  const std::uint64_t gray = begin ^ (begin >> 1);
  int sign = 1;
  for (Eigen::Index r = 1; r < n; ++r) {
    if ((gray >> (r - 1)) & 1U) {
      delta[r] = -1;
      sign = -sign;
    }
  }
  std::vector<cplx> colsum(static_cast<std::size_t>(n), cplx(0, 0));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) colsum[j] += static_cast<double>(delta[i]) * a(i, j);
  }
  auto term = [&] {
    cplx p = colsum[0];
    for (Eigen::Index j = 1; j < n; ++j) p *= colsum[j];
    return sign > 0 ? p : -p;
  };
  cplx sum = term();
  for (std::uint64_t k = begin + 1; k < end; ++k) {
    // Gray code k and k-1 differ in the lowest set bit of k.
    const Eigen::Index r = std::countr_zero(k) + 1;
    delta[r] = -delta[r];
    sign = -sign;
    const double twice = 2.0 * delta[r];
    for (Eigen::Index j = 0; j < n; ++j) colsum[j] += twice * a(r, j);
    sum += term();
  }
  return sum;
}

}  // namespace detail

// Glynn's formula with Gray-code delta updates, O(2^{n-1} n). The walk is
// cut into fixed-size chunks which may run on `workers` threads; chunk sums
// are added in chunk order, so the result does not depend on `workers`.
inline cplx permanent_glynn(const MatrixXc& a, unsigned workers = 1,
                            int cap = kDefaultPermanentCap) {
  detail::require_square(a);
  const int n = static_cast<int>(a.rows());
  if (n > cap) {
    throw SizeError("permanent of order " + std::to_string(n) + " exceeds the cap of " +
                    std::to_string(cap));
  }
  if (n == 0) return 1;
  if (n == 1) return a(0, 0);
  const std::uint64_t total = std::uint64_t{1} << (n - 1);
  const std::uint64_t chunk = std::min(total, detail::kGlynnChunk);
  const std::uint64_t n_chunks = total / chunk;
  std::vector<cplx> partial(n_chunks);
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    partial[c] = detail::glynn_chunk(a, c * chunk, (c + 1) * chunk);
  });
  cplx sum(0, 0);
  for (const cplx& p : partial) sum += p;
  return sum / static_cast<double>(total);
}

// Sum over all n! permutations; the factorial-time reference.
inline cplx permanent_naive(const MatrixXc& a) {
  detail::require_square(a);
  const int n = static_cast<int>(a.rows());
  if (n > kNaivePermanentCap) {
    throw SizeError("naive permanent of order " + std::to_string(n) + " exceeds the cap of " +
                    std::to_string(kNaivePermanentCap));
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  cplx sum(0, 0);
  do {
    cplx p(1, 0);
    for (int i = 0; i < n; ++i) p *= a(i, perm[i]);
    sum += p;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return sum;
}

// Rows of U repeated per output occupation, columns per input occupation.
inline MatrixXc sampling_submatrix(const ModeUnitary& u, const FockState& input,
                                   const FockState& output) {
  const int m = u.modes();
  if (input.modes() != m || output.modes() != m) {
    throw ValidationError("states over " + std::to_string(input.modes()) + "/" +
                          std::to_string(output.modes()) + " modes do not match an M=" +
                          std::to_string(m) + " unitary");
  }
  if (input.total() != output.total()) {
    throw ValidationError("particle number mismatch: input has " + std::to_string(input.total()) +
                          ", output has " + std::to_string(output.total()));
  }
  std::vector<int> rows, cols;
  for (int k = 0; k < m; ++k) {
    rows.insert(rows.end(), static_cast<std::size_t>(output[k]), k);
    cols.insert(cols.end(), static_cast<std::size_t>(input[k]), k);
  }
  const int n = input.total();
  MatrixXc sub(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) sub(r, c) = u(rows[r], cols[c]);
  }
  return sub;
}

inline double factorial_product(const FockState& s) {
  double f = 1;
  for (int n : s.occupations()) f *= std::tgamma(n + 1.0);
  return f;
}

inline double outcome_probability(const ModeUnitary& u, const FockState& input,
                                  const FockState& output, int cap = kDefaultPermanentCap) {
  const cplx p = permanent_glynn(sampling_submatrix(u, input, output), 1, cap);
  return std::norm(p) / (factorial_product(input) * factorial_product(output));
}

struct Outcome {
  FockState state;
  double probability = 0;
};

struct OutputDistribution {
  FockState input;
  std::vector<Outcome> outcomes;
  bool collision_free_only = false;
  double total_mass = 0;
};

inline OutputDistribution output_distribution(const ModeUnitary& u, const FockState& input,
                                              bool collision_free_only, unsigned workers = 1,
                                              std::uint64_t cap = kDefaultBasisCap) {
  if (input.modes() != u.modes()) {
    throw ValidationError("input state has " + std::to_string(input.modes()) +
                          " modes, unitary has " + std::to_string(u.modes()));
  }
  std::vector<FockState> states = collision_free_only
                                      ? enumerate_collision_free(input.total(), u.modes(), cap)
                                      : enumerate_basis(input.total(), u.modes(), cap);
  OutputDistribution dist;
  dist.input = input;
  dist.collision_free_only = collision_free_only;
  dist.outcomes.resize(states.size());
  parallel_for(states.size(), workers, [&](std::size_t i) {
    dist.outcomes[i].probability = outcome_probability(u, input, states[i]);
    dist.outcomes[i].state = std::move(states[i]);
  });
  for (const auto& o : dist.outcomes) dist.total_mass += o.probability;
  return dist;
}

// Inverse-CDF draws; with a collision-free distribution the draws are
// conditional on that sector, since sampling is relative to total_mass.
inline std::vector<FockState> draw_samples(const OutputDistribution& dist, std::uint64_t shots,
                                           std::uint64_t seed) {
  if (!(dist.total_mass > 0) || dist.outcomes.empty()) {
    throw ValidationError("cannot sample from an empty distribution (total mass 0)");
  }
  std::vector<double> cdf(dist.outcomes.size());
  double acc = 0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    acc += dist.outcomes[i].probability;
    cdf[i] = acc;
  }
  Rng rng(seed);
  std::vector<FockState> out;
  out.reserve(shots);
  for (std::uint64_t s = 0; s < shots; ++s) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    // upper_bound never lands on a zero-width bin; the guard covers u
    // rounding up to the final CDF value.
    if (it == cdf.end()) --it;
    out.push_back(dist.outcomes[static_cast<std::size_t>(it - cdf.begin())].state);
  }
  return out;
}

// Collision-free probability under the uniform bosonic mixture,
// C(M, N) / C(M+N-1, N) = prod_{i<N} (M - i) / (M + i).
inline double collision_free_mass(int n_particles, int n_modes) {
  if (n_particles < 0 || n_modes < 1) throw ValidationError("need N >= 0 and M >= 1");
  double p = 1;
  for (int i = 0; i < n_particles; ++i) {
    p *= static_cast<double>(n_modes - i) / static_cast<double>(n_modes + i);
  }
  return std::max(p, 0.0);
}

}  // namespace absim
