#pragma once

// Mode unitaries, the site-local coupling T(theta, phi), its composite-pulse
// realization, Haar sampling, and the rectangular (Clements) mesh
// decomposition into M layers of adjacent-pair couplings.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absim/errors.hpp"
#include "absim/rng.hpp"

namespace absim {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using MatrixXc = Eigen::MatrixXcd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Max-abs entry of U^dagger U - I.
inline double unitarity_deviation(const MatrixXc& u) {
  if (u.rows() != u.cols()) return std::numeric_limits<double>::infinity();
  return (u.adjoint() * u - MatrixXc::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

// An M x M unitary; U(j, i) is the amplitude for input mode i -> output mode j.
class ModeUnitary {
 public:
  static constexpr double kTolerance = 1e-10;

  ModeUnitary() = default;

  explicit ModeUnitary(MatrixXc entries, double tolerance = kTolerance)
      : u_(std::move(entries)) {
    if (u_.rows() != u_.cols() || u_.rows() < 1) {
      throw ValidationError("mode unitary must be a non-empty square matrix");
    }
    const double dev = unitarity_deviation(u_);
    if (!(dev <= tolerance)) {
      throw ValidationError("matrix is not unitary: max |U^dagger U - I| = " + std::to_string(dev));
    }
  }

  static ModeUnitary identity(int m) { return ModeUnitary(MatrixXc::Identity(m, m)); }

  int modes() const noexcept { return static_cast<int>(u_.rows()); }
  const MatrixXc& matrix() const noexcept { return u_; }
  cplx operator()(int row, int col) const { return u_(row, col); }

 private:
  MatrixXc u_;
};

// T(theta, phi) = [[e^{-i phi} cos(theta/2), -sin(theta/2)],
//                  [e^{-i phi} sin(theta/2),  cos(theta/2)]]
inline Mat2 coupling_matrix(double theta, double phi) {
  const double c = std::cos(theta / 2);
  const double s = std::sin(theta / 2);
  const cplx e = std::polar(1.0, -phi);
  Mat2 t;
  t << e * c, -s, e * s, c;
  return t;
}

// Global microwave pi/2 pulse H = exp(-i sigma_x pi/4).
inline Mat2 hadamard_pulse() {
  const double r = std::numbers::sqrt2 / 2;
  Mat2 h;
  h << cplx(r, 0), cplx(0, -r), cplx(0, -r), cplx(r, 0);
  return h;
}

// Local differential phase imprint A(a) = exp(-i sigma_z a/2).
inline Mat2 phase_imprint(double angle) {
  Mat2 a = Mat2::Zero();
  a(0, 0) = std::polar(1.0, -angle / 2);
  a(1, 1) = std::polar(1.0, angle / 2);
  return a;
}

// T realized as e^{-i phi/2} H^dagger A(theta) H A(phi): first imprint phi,
// then a global pulse, then imprint theta, then the inverse global pulse.
struct PulseSequence {
  double phi_imprint = 0;
  double theta_imprint = 0;
  double global_phase = 0;  // -phi/2

  Mat2 product() const {
    const Mat2 h = hadamard_pulse();
    return std::polar(1.0, global_phase) *
           (h.adjoint() * phase_imprint(theta_imprint) * h * phase_imprint(phi_imprint));
  }
};

inline PulseSequence composite_pulse(double theta, double phi) {
  return PulseSequence{phi, theta, -phi / 2};
}

inline ModeUnitary haar_random_unitary(int m, std::uint64_t seed) {
  if (m < 1) throw ValidationError("mode count must be at least 1");
  Rng rng(seed);
  MatrixXc z(m, m);
  const double scale = std::numbers::sqrt2 / 2;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) z(i, j) = cplx(rng.normal(), rng.normal()) * scale;
  }
  Eigen::HouseholderQR<MatrixXc> qr(z);
  MatrixXc q = qr.householderQ();
  const MatrixXc& r = qr.matrixQR();
  // Rotate column phases so that R has a positive real diagonal; without this
  // the Householder convention biases the distribution away from Haar.
  for (int j = 0; j < m; ++j) {
    const cplx d = r(j, j);
    const double a = std::abs(d);
    q.col(j) *= a > 0 ? d / a : cplx(1, 0);
  }
  return ModeUnitary(std::move(q));
}

// One T(theta, phi) acting on modes (mode, mode + 1).
struct LocalCoupling {
  int mode = 0;
  double theta = 0;
  double phi = 0;

  friend bool operator==(const LocalCoupling&, const LocalCoupling&) = default;
};

using Layer = std::vector<LocalCoupling>;

// A mesh of M layers; layer l couples pairs (m, m+1) with m = l (mod 2).
// reconstruct() applies layer 0 first and the output phases last.
struct CircuitPlan {
  int m = 0;
  std::vector<Layer> layers;
  std::vector<double> output_phases;

  std::size_t coupling_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.size();
    return n;
  }
};

inline double wrap_phase(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0) w += kTwoPi;
  // fmod can land exactly on 2*pi after the correction above.
  if (w >= kTwoPi) w -= kTwoPi;
  return w;
}

inline void validate_layer(const Layer& layer, int m) {
  std::vector<bool> used(static_cast<std::size_t>(m), false);
  for (const auto& c : layer) {
    if (c.mode < 0 || c.mode + 1 >= m) {
      throw ValidationError("coupling on modes (" + std::to_string(c.mode) + "," +
                            std::to_string(c.mode + 1) + ") outside M=" + std::to_string(m));
    }
    if (!std::isfinite(c.theta) || !std::isfinite(c.phi)) {
      throw ValidationError("coupling angles must be finite");
    }
    if (used[c.mode] || used[c.mode + 1]) {
      throw ValidationError("overlapping couplings on mode " + std::to_string(c.mode) +
                            " within one layer");
    }
    used[c.mode] = used[c.mode + 1] = true;
  }
}

// Applies T on rows (mode, mode+1) of `u` from the left.
inline void apply_rows(MatrixXc& u, int mode, const Mat2& t) {
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    const cplx a = u(mode, k);
    const cplx b = u(mode + 1, k);
    u(mode, k) = t(0, 0) * a + t(0, 1) * b;
    u(mode + 1, k) = t(1, 0) * a + t(1, 1) * b;
  }
}

// Applies T on columns (mode, mode+1) of `u` from the right.
inline void apply_cols(MatrixXc& u, int mode, const Mat2& t) {
  for (Eigen::Index k = 0; k < u.rows(); ++k) {
    const cplx a = u(k, mode);
    const cplx b = u(k, mode + 1);
    u(k, mode) = a * t(0, 0) + b * t(1, 0);
    u(k, mode + 1) = a * t(0, 1) + b * t(1, 1);
  }
}

inline ModeUnitary reconstruct(const CircuitPlan& plan) {
  if (plan.m < 1) throw ValidationError("plan has no modes");
  if (!plan.output_phases.empty() && static_cast<int>(plan.output_phases.size()) != plan.m) {
    throw ValidationError("plan has " + std::to_string(plan.output_phases.size()) +
                          " output phases for M=" + std::to_string(plan.m));
  }
  MatrixXc u = MatrixXc::Identity(plan.m, plan.m);
  for (const auto& layer : plan.layers) {
    validate_layer(layer, plan.m);
    for (const auto& c : layer) apply_rows(u, c.mode, coupling_matrix(c.theta, c.phi));
  }
  for (std::size_t i = 0; i < plan.output_phases.size(); ++i) {
    u.row(static_cast<Eigen::Index>(i)) *= std::polar(1.0, plan.output_phases[i]);
  }
  return ModeUnitary(std::move(u), 1e-9);
}

namespace detail {

// Angles for T^{-1} applied from the right on columns (m, m+1) that zero
// the entry in column m of the given row: tan(theta/2) = |x_m| / |x_n|.
inline LocalCoupling null_from_right(const MatrixXc& u, int row, int mode) {
  const cplx xm = u(row, mode);
  const cplx xn = u(row, mode + 1);
  LocalCoupling c{mode, 0, 0};
  if (xm == cplx(0, 0)) return c;
  c.theta = 2 * std::atan2(std::abs(xm), std::abs(xn));
  c.phi = xn == cplx(0, 0) ? 0.0 : wrap_phase(std::arg(xn) - std::arg(xm));
  return c;
}

// Angles for T applied from the left on rows (m, m+1) that zero the entry in
// row m+1 of the given column.
inline LocalCoupling null_from_left(const MatrixXc& u, int col, int mode) {
  const cplx xm = u(mode, col);
  const cplx xn = u(mode + 1, col);
  LocalCoupling c{mode, 0, 0};
  if (xn == cplx(0, 0)) return c;
  c.theta = 2 * std::atan2(std::abs(xn), std::abs(xm));
  c.phi = xm == cplx(0, 0) ? 0.0 : wrap_phase(std::arg(xm) - std::arg(xn) + std::numbers::pi);
  return c;
}

}  // namespace detail

// Factorizes U = D * L_{M-1} ... L_1 L_0 with D diagonal and every L_l a
// layer of T couplings on alternating even/odd adjacent pairs. Elements are
// nulled along anti-diagonals alternately from the right (columns) and from
// the left (rows); the left-hand couplings are then commuted through the
// diagonal so that all of them act before the output phases.
inline CircuitPlan clements_decompose(const ModeUnitary& unitary) {
  const int m = unitary.modes();
  MatrixXc u = unitary.matrix();
  const double dev = unitarity_deviation(u);
  if (!(dev <= 1e-10)) {
    throw ValidationError("clements_decompose needs a unitary input; max |U^dagger U - I| = " +
                          std::to_string(dev));
  }

  std::vector<LocalCoupling> right;  // applied to U as U T^{-1}, in order
  std::vector<LocalCoupling> left;   // applied to U as T U, in order
  for (int i = 1; i < m; ++i) {
    if (i % 2 == 1) {
      for (int j = 0; j < i; ++j) {
        const int row = m - 1 - j;
        const int mode = i - 1 - j;
        const LocalCoupling c = detail::null_from_right(u, row, mode);
        apply_cols(u, mode, coupling_matrix(c.theta, c.phi).adjoint());
        right.push_back(c);
      }
    } else {
      for (int j = 1; j <= i; ++j) {
        const int col = j - 1;
        const int mode = m + j - i - 2;
        const LocalCoupling c = detail::null_from_left(u, col, mode);
        apply_rows(u, mode, coupling_matrix(c.theta, c.phi));
        left.push_back(c);
      }
    }
  }

  // Now L U R^{-1} = D, i.e. U = T_{l,0}^{-1} ... T_{l,k}^{-1} D R. Move D to
  // the far left using T^{-1}(theta, phi) D = D' T(theta, phi').
  std::vector<cplx> d(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const cplx x = u(k, k);
    d[k] = x / std::abs(x);
  }
  std::vector<LocalCoupling> pushed(left.size());
  for (std::size_t idx = left.size(); idx-- > 0;) {
    const LocalCoupling& c = left[idx];
    cplx& dm = d[c.mode];
    cplx& dn = d[c.mode + 1];
    LocalCoupling out{c.mode, c.theta, 0};
    if (c.theta == 0) {
      // Diagonal coupling: fold its phase into D and keep phi' = 0.
      dm *= std::polar(1.0, c.phi);
    } else {
      out.phi = wrap_phase(std::arg(dn) - std::arg(dm) + std::numbers::pi);
      dm = -std::polar(1.0, c.phi) * dn;
    }
    pushed[idx] = out;
  }

  // Application order: right couplings first-to-last, then the pushed left
  // couplings last-to-first.
  std::vector<LocalCoupling> sequence = right;
  for (std::size_t idx = pushed.size(); idx-- > 0;) sequence.push_back(pushed[idx]);

  // Schedule each coupling into the earliest layer after the last one that
  // touched either of its modes, respecting layer parity.
  CircuitPlan plan;
  plan.m = m;
  plan.layers.assign(static_cast<std::size_t>(m), Layer{});
  std::vector<int> last(static_cast<std::size_t>(m), -1);
  for (const LocalCoupling& c : sequence) {
    int layer = std::max(last[c.mode], last[c.mode + 1]) + 1;
    if (layer % 2 != c.mode % 2) ++layer;
    if (layer >= m) throw Error("mesh scheduling exceeded M layers");
    plan.layers[layer].push_back(c);
    last[c.mode] = last[c.mode + 1] = layer;
  }
  for (auto& layer : plan.layers) {
    std::sort(layer.begin(), layer.end(),
              [](const LocalCoupling& a, const LocalCoupling& b) { return a.mode < b.mode; });
  }
  plan.output_phases.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) plan.output_phases[k] = wrap_phase(std::arg(d[k]));
  return plan;
}

}  // namespace absim
