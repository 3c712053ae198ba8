#pragma once

// Entanglement and mixedness measures: tangle, linear entropy, fidelity,
// negativity, purity, and fringe visibility. Eigenvalues of intermediate
// PSD matrices may round slightly negative; values in [-1e-9, 0) are
// clamped to zero, anything lower is treated as a real defect and throws.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "hyperpair/qcore.hpp"

namespace hyperpair {

inline constexpr double kMetricEigenFloor = 1e-9;

namespace detail {

inline RealVector clamped_psd_spectrum(const Matrix& m, const char* what) {
  EigResult eig = eig_hermitian(hermitize(m), 1e-8);
  // Eigenvalues within solver noise of zero must become exactly zero: the
  // callers take square roots, which would turn 1e-17 of noise into 3e-9
  // of metric error on rank-deficient inputs.
  const double scale = eig.values.cwiseAbs().maxCoeff();
  const double zero_band = 1e-12 * scale;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) < -kMetricEigenFloor)
      throw NumericalError(std::string(what) + ": eigenvalue below the clamping floor");
    if (eig.values(i) <= zero_band) eig.values(i) = 0.0;
  }
  return eig.values;
}

inline void check_two_qubit(const DensityOperator& rho, const char* what) {
  if (rho.dim() != 4 || rho.layout.party_dim(Party::A) != 2 || rho.layout.party_dim(Party::B) != 2)
    throw ValidationError(std::string(what) + ": input must be a two-qubit operator");
}

}  // namespace detail

/// Squared concurrence of a two-qubit state. Computed through the Hermitian
/// form sqrt(rho).(sy x sy).conj(rho).(sy x sy).sqrt(rho), which shares its
/// spectrum with the textbook non-Hermitian product but keeps the
/// eigenproblem well conditioned.
inline double tangle(const DensityOperator& rho) {
  detail::check_two_qubit(rho, "tangle");
  const Matrix yy = kron(sigma_y(), sigma_y());
  const Matrix root = sqrt_psd(rho.matrix, kMetricEigenFloor);
  const Matrix m = root * yy * rho.matrix.conjugate() * yy * root;
  RealVector vals = detail::clamped_psd_spectrum(m, "tangle");
  const double c = std::sqrt(vals(0)) - std::sqrt(vals(1)) - std::sqrt(vals(2)) - std::sqrt(vals(3));
  const double concurrence = std::max(0.0, c);
  return concurrence * concurrence;
}

/// Mixedness d/(d-1).(1 - Tr rho^2): 0 for pure states, 1 for the
/// maximally mixed state in any dimension (the familiar 4/3 prefactor is
/// the d=4 case).
inline double linear_entropy(const DensityOperator& rho) {
  const double d = static_cast<double>(rho.dim());
  if (d < 2) throw ValidationError("linear_entropy: dimension must be at least 2");
  return std::clamp(d / (d - 1.0) * (1.0 - purity(rho)), 0.0, 1.0);
}

/// Uhlmann fidelity (Tr sqrt(sqrt(t).rho.sqrt(t)))^2. Symmetric, in [0,1],
/// and equal to <psi|rho|psi> for a pure target.
inline double fidelity(const DensityOperator& rho, const DensityOperator& target) {
  if (rho.dim() != target.dim())
    throw ValidationError("fidelity: operators must have equal dimension");
  const Matrix root = sqrt_psd(target.matrix, kMetricEigenFloor);
  const RealVector vals = detail::clamped_psd_spectrum(root * rho.matrix * root, "fidelity");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < vals.size(); ++i) sum += std::sqrt(vals(i));
  return std::clamp(sum * sum, 0.0, 1.0);
}

/// Negativity across the A|B split: trace norm of the partial transpose
/// minus one. Zero for all PPT (hence all separable) states; reaches d-1
/// for a maximally entangled d x d pair.
inline double negativity(const DensityOperator& rho, Party transposed = Party::B) {
  const Matrix pt = partial_transpose(rho, transposed);
  const EigResult eig = eig_hermitian(hermitize(pt), 1e-8);
  double trace_norm = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) trace_norm += std::abs(eig.values(i));
  return std::max(0.0, trace_norm - 1.0);
}

struct FringePoint {
  double phase = 0.0;  // radians
  double rate = 0.0;   // counts/second (or counts at fixed duration)
};

/// Fringe contrast from a least-squares fit of a + b.cos(phase + c).
/// Requires at least 4 samples covering at least three quarters of a
/// period, so equally spaced samplings of one period qualify for any n >= 4.
inline double visibility(const std::vector<FringePoint>& fringe) {
  const int n = static_cast<int>(fringe.size());
  if (n < 4) throw ValidationError("visibility: need at least 4 fringe samples");
  double lo = fringe.front().phase, hi = fringe.front().phase;
  for (const auto& p : fringe) {
    if (!std::isfinite(p.phase) || !std::isfinite(p.rate))
      throw ValidationError("visibility: fringe samples must be finite");
    lo = std::min(lo, p.phase);
    hi = std::max(hi, p.phase);
  }
  if (hi - lo < 1.5 * std::numbers::pi - 1e-9)
    throw ValidationError("visibility: fringe phases must cover at least 3/4 of a period");

  // a + b cos(phi + c) == a + B cos(phi) + C sin(phi); fit the linear form
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rates(n);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(fringe[static_cast<size_t>(i)].phase);
    design(i, 2) = std::sin(fringe[static_cast<size_t>(i)].phase);
    rates(i) = fringe[static_cast<size_t>(i)].rate;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3) throw NumericalError("visibility: fringe phases do not determine a fit");
  const Eigen::Vector3d coef = qr.solve(rates);
  const double offset = coef(0);
  const double amplitude = std::hypot(coef(1), coef(2));
  if (offset <= 0.0) throw NumericalError("visibility: degenerate fit with nonpositive mean rate");
  return std::clamp(amplitude / offset, 0.0, 1.0);
}

struct MetricReport {
  std::optional<double> tangle;    // two-qubit inputs only
  double linear_entropy = 0.0;
  std::optional<double> fidelity;  // present when a target was supplied
  double negativity = 0.0;
  double purity = 0.0;
};

inline MetricReport metric_report(const DensityOperator& rho,
                                  const std::optional<DensityOperator>& target = std::nullopt) {
  MetricReport r;
  r.linear_entropy = linear_entropy(rho);
  r.negativity = negativity(rho);
  r.purity = purity(rho);
  const bool two_qubit = rho.dim() == 4 && rho.layout.party_dim(Party::A) == 2 &&
                         rho.layout.party_dim(Party::B) == 2;
  if (two_qubit) r.tangle = tangle(rho);
  if (target) r.fidelity = fidelity(rho, *target);
  return r;
}

}  // namespace hyperpair
