#pragma once

// Bosonic Fock states over M modes and their canonical enumeration.
//
// Mode convention: mode m = 2s + sigma belongs to lattice site s, with
// sigma = 0 for the |+> and sigma = 1 for the |-> internal state. Site-local
// couplings and on-site loss both rely on this pairing.
//
// The canonical basis order is reverse-lexicographic on occupation vectors,
// so for N = 2, M = 2 the basis reads (2,0), (1,1), (0,2).

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "absim/errors.hpp"

namespace absim {

using BigInt = boost::multiprecision::cpp_int;

inline constexpr std::uint64_t kDefaultBasisCap = 10'000'000;

inline BigInt binomial_big(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

// Exact binomial coefficient; throws SizeError if it does not fit in 64 bits.
inline std::uint64_t binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    // r * (n-k+i) / i is exact at every step; the intermediate product is
    // bounded by C(n, i) * n which is checked against the 128-bit range.
    const unsigned __int128 f = static_cast<unsigned __int128>(n - k + i);
    if (r > std::numeric_limits<unsigned __int128>::max() / f) {
      throw SizeError("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                      ") overflows the 64-bit range");
    }
    r = r * f / static_cast<unsigned __int128>(i);
  }
  if (r > std::numeric_limits<std::uint64_t>::max()) {
    throw SizeError("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                    ") overflows the 64-bit range");
  }
  return static_cast<std::uint64_t>(r);
}

// Number of N-particle bosonic states over M modes, C(M+N-1, N).
inline std::uint64_t multiset_dimension(int n_particles, int n_modes) {
  if (n_particles < 0) throw ValidationError("particle count must be non-negative");
  if (n_modes < 1) throw ValidationError("mode count must be at least 1");
  return binomial(static_cast<std::int64_t>(n_modes) + n_particles - 1, n_particles);
}

class FockState {
 public:
  FockState() = default;

  explicit FockState(std::vector<int> occupations) : occ_(std::move(occupations)) {
    for (std::size_t i = 0; i < occ_.size(); ++i) {
      if (occ_[i] < 0) {
        throw ValidationError("negative occupation " + std::to_string(occ_[i]) + " in mode " +
                              std::to_string(i));
      }
    }
    total_ = std::accumulate(occ_.begin(), occ_.end(), 0);
  }

  FockState(std::initializer_list<int> occupations)
      : FockState(std::vector<int>(occupations)) {}

  const std::vector<int>& occupations() const noexcept { return occ_; }
  int operator[](std::size_t mode) const { return occ_[mode]; }
  int modes() const noexcept { return static_cast<int>(occ_.size()); }
  int total() const noexcept { return total_; }

  friend bool operator==(const FockState&, const FockState&) = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < occ_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(occ_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<int> occ_;
  int total_ = 0;
};

struct SiteOccupancy {
  std::vector<int> site_counts;
  int k2 = 0;
  int k3 = 0;
  int max_occ = 0;
};

inline SiteOccupancy site_occupancy(const FockState& state) {
  const int m = state.modes();
  if (m % 2 != 0) {
    throw ValidationError("site occupancy needs an even mode count, got M=" + std::to_string(m));
  }
  SiteOccupancy out;
  out.site_counts.resize(static_cast<std::size_t>(m / 2));
  for (int s = 0; s < m / 2; ++s) {
    const int n = state[2 * s] + state[2 * s + 1];
    out.site_counts[s] = n;
    out.k2 += (n == 2);
    out.k3 += (n == 3);
    out.max_occ = std::max(out.max_occ, n);
  }
  return out;
}

inline bool is_collision_free(const FockState& state) {
  const auto& occ = state.occupations();
  return std::all_of(occ.begin(), occ.end(), [](int n) { return n <= 1; });
}

namespace detail {

// Number of states of `k` particles over `m` modes, with m == 0 allowed.
inline std::uint64_t count_states(std::int64_t k, std::int64_t m) {
  if (m == 0) return k == 0 ? 1 : 0;
  return binomial(m + k - 1, k);
}

// Advances `occ` to its successor in reverse-lexicographic order.
inline bool next_state(std::span<int> occ) {
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(occ.size()) - 1;
  std::ptrdiff_t j = last - 1;
  while (j >= 0 && occ[j] == 0) --j;
  if (j < 0) return false;
  // One particle leaves mode j and joins everything to its right in mode j+1.
  int moved = 1;
  for (std::ptrdiff_t i = j + 1; i <= last; ++i) {
    moved += occ[i];
    occ[i] = 0;
  }
  --occ[j];
  occ[j + 1] = moved;
  return true;
}

}  // namespace detail

// Index of `state` in the canonical order of its (N, M) basis.
inline std::uint64_t state_rank(const FockState& state) {
  const auto& occ = state.occupations();
  const std::int64_t m = state.modes();
  if (m < 1) throw ValidationError("state has no modes");
  std::uint64_t rank = 0;
  std::int64_t remaining = state.total();
  for (std::int64_t i = 0; i + 1 < m; ++i) {
    const std::int64_t n = occ[static_cast<std::size_t>(i)];
    if (n > remaining) throw ValidationError("inconsistent state " + state.to_string());
    if (n < remaining) {
      // States sharing the prefix but holding more than n particles in mode i
      // precede this one; by the hockey-stick identity there are
      // C((m-i-1) + (remaining-n-1), remaining-n-1) of them.
      rank += binomial((m - i - 1) + (remaining - n - 1), remaining - n - 1);
    }
    remaining -= n;
  }
  return rank;
}

// Inverse of state_rank.
inline FockState state_unrank(std::uint64_t index, int n_particles, int n_modes) {
  const std::uint64_t dim = multiset_dimension(n_particles, n_modes);
  if (index >= dim) {
    throw ValidationError("rank " + std::to_string(index) + " outside basis of dimension " +
                          std::to_string(dim));
  }
  std::vector<int> occ(static_cast<std::size_t>(n_modes), 0);
  std::int64_t remaining = n_particles;
  for (int i = 0; i + 1 < n_modes; ++i) {
    for (std::int64_t v = remaining; v >= 0; --v) {
      const std::uint64_t block = detail::count_states(remaining - v, n_modes - i - 1);
      if (index < block) {
        occ[static_cast<std::size_t>(i)] = static_cast<int>(v);
        remaining -= v;
        break;
      }
      index -= block;
    }
  }
  occ.back() = static_cast<int>(remaining);
  return FockState(std::move(occ));
}

inline void check_basis_cap(std::uint64_t dim, std::uint64_t cap, const char* what) {
  if (dim > cap) {
    throw SizeError(std::string(what) + " dimension " + std::to_string(dim) +
                    " exceeds the cap of " + std::to_string(cap));
  }
}

// Cap check on the exact count, so oversized requests name the cap rather
// than overflowing first.
inline void check_basis_cap(const BigInt& dim, std::uint64_t cap, const char* what) {
  if (dim > cap) {
    throw SizeError(std::string(what) + " dimension " + dim.str() + " exceeds the cap of " +
                    std::to_string(cap));
  }
}

inline std::vector<FockState> enumerate_basis(int n_particles, int n_modes,
                                              std::uint64_t cap = kDefaultBasisCap) {
  if (n_particles >= 0 && n_modes >= 1) {
    check_basis_cap(binomial_big(std::int64_t{n_modes} + n_particles - 1, n_particles), cap, "basis");
  }
  const std::uint64_t dim = multiset_dimension(n_particles, n_modes);
  std::vector<FockState> basis;
  basis.reserve(dim);
  std::vector<int> occ(static_cast<std::size_t>(n_modes), 0);
  occ[0] = n_particles;
  do {
    basis.emplace_back(occ);
  } while (detail::next_state(occ));
  return basis;
}

// Collision-free states (all occupations <= 1) in canonical order.
inline std::vector<FockState> enumerate_collision_free(int n_particles, int n_modes,
                                                       std::uint64_t cap = kDefaultBasisCap) {
  if (n_particles > n_modes) return {};
  check_basis_cap(binomial_big(n_modes, n_particles), cap, "collision-free basis");
  const std::uint64_t dim = binomial(n_modes, n_particles);
  std::vector<FockState> out;
  out.reserve(dim);
  // Reverse-lex order of 0/1 vectors is the lexicographic order of the
  // occupied-mode index sets.
  std::vector<int> modes(static_cast<std::size_t>(n_particles));
  std::iota(modes.begin(), modes.end(), 0);
  for (;;) {
    std::vector<int> occ(static_cast<std::size_t>(n_modes), 0);
    for (int m : modes) occ[static_cast<std::size_t>(m)] = 1;
    out.emplace_back(std::move(occ));
    int i = n_particles - 1;
    while (i >= 0 && modes[i] == n_modes - n_particles + i) --i;
    if (i < 0) break;
    ++modes[i];
    for (int j = i + 1; j < n_particles; ++j) modes[j] = modes[j - 1] + 1;
  }
  return out;
}

// The full canonical basis plus per-state site data, shared by the
// state-vector simulator.
class FockBasis {
 public:
  FockBasis(int n_particles, int n_modes, std::uint64_t cap = kDefaultBasisCap)
      : n_(n_particles), m_(n_modes), states_(enumerate_basis(n_particles, n_modes, cap)) {}

  int particles() const noexcept { return n_; }
  int modes() const noexcept { return m_; }
  std::size_t size() const noexcept { return states_.size(); }
  const FockState& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<FockState>& states() const noexcept { return states_; }

  std::uint64_t index_of(const FockState& s) const {
    if (s.modes() != m_ || s.total() != n_) {
      throw ValidationError("state " + s.to_string() + " is not in the N=" + std::to_string(n_) +
                            ", M=" + std::to_string(m_) + " basis");
    }
    return state_rank(s);
  }

 private:
  int n_;
  int m_;
  std::vector<FockState> states_;
};

}  // namespace absim
