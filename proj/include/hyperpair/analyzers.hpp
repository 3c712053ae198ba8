#pragma once

// Per-photon analysis chains: wave plates and a polarizer for polarization,
// hologram plus single-mode fiber for spatial mode, and an unbalanced
// interferometer phase for energy-time. Settings resolve to rank-1
// projector kets; the joint two-photon element tensors them, with identity
// on DOFs left unanalyzed.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperpair/qcore.hpp"

namespace hyperpair {

struct PolarizationSetting {
  double qwp_angle = 0.0;
  double hwp_angle = 0.0;
};

struct SpatialSetting {
  Vector ket;  // local spatial amplitudes in basis (l,g,r), or (l,r) when truncated
};

struct EnergyTimeSetting {
  double phase = 0.0;  // interferometer phase delta for this photon
};

// One photon's analysis chain. A DOF left unset passes through unanalyzed
// and contributes identity to the joint element. `ket` is the escape hatch
// for projections that are not products across the photon's DOFs; it spans
// the photon's full local space and excludes the per-DOF fields.
struct AnalyzerSetting {
  std::optional<PolarizationSetting> poln;
  std::optional<SpatialSetting> spatial;
  std::optional<EnergyTimeSetting> etime;
  std::optional<Vector> ket;
};

namespace detail {

inline void check_finite_angle(double theta, const char* what) {
  if (!std::isfinite(theta)) throw ValidationError(std::string(what) + ": angle must be finite");
}

inline Vector unit_ket(const Vector& v, Eigen::Index expected_dim, const char* what) {
  if (v.size() != expected_dim)
    throw ValidationError(std::string(what) + ": ket dimension does not match the analyzed space");
  const double n = v.norm();
  if (std::abs(n - 1.0) > 1e-6)
    throw ValidationError(std::string(what) + ": ket must be unit norm");
  return v / n;
}

}  // namespace detail

/// Half-wave plate with fast axis at `theta`: R(theta).diag(1,-1).R(-theta).
/// Linear polarization at angle phi maps to angle 2*theta - phi.
inline Matrix hwp_jones(double theta) {
  detail::check_finite_angle(theta, "hwp_jones");
  const double c = std::cos(2.0 * theta);
  const double s = std::sin(2.0 * theta);
  Matrix m(2, 2);
  m << c, s, s, -c;
  return m;
}

/// Quarter-wave plate with fast axis at `theta`: R(theta).diag(1,i).R(-theta).
inline Matrix qwp_jones(double theta) {
  detail::check_finite_angle(theta, "qwp_jones");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const Complex i(0.0, 1.0);
  const Complex off = s * c * (1.0 - i);
  Matrix m(2, 2);
  m << c * c + i * s * s, off, off, s * s + i * c * c;
  return m;
}

/// Polarization state transmitted with probability 1 through the chain
/// qwp -> hwp -> horizontal polarizer: (qwp.hwp)^dag |H>.
inline Vector poln_projector(const PolarizationSetting& s) {
  return (qwp_jones(s.qwp_angle) * hwp_jones(s.hwp_angle)).adjoint() * basis_ket(2, 0);
}

/// Energy-time projector ket (|s> + e^{i delta} |f>)/sqrt(2). The Franson
/// interferometer only reaches this equatorial family; early/late
/// populations are not measurable here.
inline Vector etime_projector(const EnergyTimeSetting& s) {
  detail::check_finite_angle(s.phase, "etime_projector");
  Vector v(2);
  v << 1.0, std::exp(Complex(0.0, s.phase));
  return v / std::numbers::sqrt2;
}

/// Wave-plate angles whose poln_projector reproduces `target` up to global
/// phase. Closed form on the Bloch sphere: the qwp fixes the y component,
/// the hwp reflects the remaining xz part onto the target.
inline PolarizationSetting poln_setting_for(const Vector& target) {
  if (target.size() != 2) throw ValidationError("poln_setting_for: target must be a qubit ket");
  const double norm = target.norm();
  if (norm <= 0.0) throw ValidationError("poln_setting_for: target must be nonzero");
  const Vector v = target / norm;
  const Complex cross = std::conj(v(0)) * v(1);
  const double x = 2.0 * cross.real();
  const double y = 2.0 * cross.imag();
  const double z = std::norm(v(0)) - std::norm(v(1));

  // produced ket: Bloch y = -sin(2q), xz part at angle 4h - atan2(x_q, z_q)
  // with (x_q, z_q) = (sin2q cos2q, cos^2 2q) the pre-reflection vector
  const double sin2q = std::clamp(-y, -1.0, 1.0);
  const double q = 0.5 * std::asin(sin2q);
  double h = 0.0;
  if (std::hypot(x, z) > 1e-12) {
    const double c2q = std::cos(2.0 * q);
    const double phi_target = std::atan2(x, z);
    const double phi_pre = std::atan2(sin2q * c2q, c2q * c2q);
    h = 0.25 * (phi_target + phi_pre);
  }
  return {q, h};
}

struct NamedPolnSetting {
  std::string name;
  PolarizationSetting setting;
};

/// Wave-plate angles realizing the six standard polarization analyzer
/// states. Convention: R = (|H> - i|V>)/sqrt(2), L = (|H> + i|V>)/sqrt(2).
inline const std::vector<NamedPolnSetting>& named_poln_settings() {
  static const std::vector<NamedPolnSetting> table = {
      {"H", {0.0, 0.0}},
      {"V", {0.0, std::numbers::pi / 4}},
      {"D", {0.0, std::numbers::pi / 8}},
      {"A", {0.0, -std::numbers::pi / 8}},
      {"R", {std::numbers::pi / 4, 0.0}},
      {"L", {-std::numbers::pi / 4, 0.0}},
  };
  return table;
}

inline PolarizationSetting named_poln_setting(const std::string& name) {
  for (const auto& entry : named_poln_settings())
    if (entry.name == name) return entry.setting;
  throw ValidationError("unknown polarization setting name: " + name);
}

inline Vector named_poln_ket(const std::string& name) {
  const Complex i(0.0, 1.0);
  Vector v(2);
  if (name == "H") v << 1.0, 0.0;
  else if (name == "V") v << 0.0, 1.0;
  else if (name == "D") v << 1.0, 1.0;
  else if (name == "A") v << 1.0, -1.0;
  else if (name == "R") v << 1.0, -i;
  else if (name == "L") v << 1.0, i;
  else throw ValidationError("unknown polarization state name: " + name);
  return v / v.norm();
}

namespace detail {

// Analysis element for one photon over its subsystems in layout order.
inline Matrix photon_element(const AnalyzerSetting& s, const SubsystemLayout& layout, Party party) {
  const std::vector<int> subs = layout.party_indices(party);
  if (subs.empty())
    throw ValidationError("joint_projector: layout has no subsystems for photon " + to_string(party));

  const bool has_dof_setting = s.poln || s.spatial || s.etime;
  if (s.ket) {
    if (has_dof_setting)
      throw ValidationError("analyzer setting mixes a raw ket with per-DOF settings");
    Eigen::Index d = 1;
    for (int i : subs) d *= layout.dim_of(i);
    const Vector k = unit_ket(*s.ket, d, "raw analyzer ket");
    return k * k.adjoint();
  }
  if (!has_dof_setting)
    throw ValidationError("analyzer setting must analyze at least one DOF");

  bool used_poln = false, used_spatial = false, used_etime = false;
  Matrix op = Matrix::Identity(1, 1);
  for (int i : subs) {
    const int d = layout.dim_of(i);
    Matrix factor = Matrix::Identity(d, d);
    switch (layout.sub(i).dof) {
      case Dof::Poln:
        if (s.poln) {
          const Vector k = poln_projector(*s.poln);
          factor = k * k.adjoint();
          used_poln = true;
        }
        break;
      case Dof::Spatial:
        if (s.spatial) {
          const Vector k = unit_ket(s.spatial->ket, d, "spatial setting");
          factor = k * k.adjoint();
          used_spatial = true;
        }
        break;
      case Dof::Etime:
        if (s.etime) {
          const Vector k = etime_projector(*s.etime);
          factor = k * k.adjoint();
          used_etime = true;
        }
        break;
      case Dof::Generic:
        break;  // reachable only through raw kets; passes through here
    }
    op = kron(op, factor);
  }
  if (s.poln && !used_poln)
    throw ValidationError("polarization setting given but the photon has no polarization subsystem");
  if (s.spatial && !used_spatial)
    throw ValidationError("spatial setting given but the photon has no spatial subsystem");
  if (s.etime && !used_etime)
    throw ValidationError("energy-time setting given but the photon has no energy-time subsystem");
  return op;
}

}  // namespace detail

/// Joint two-photon measurement element over `layout`. Analyzed DOFs
/// contribute rank-1 projectors, pass-through DOFs identity, so the trace
/// equals the product of passed-through dimensions.
inline Matrix joint_projector(const AnalyzerSetting& a, const AnalyzerSetting& b,
                              const SubsystemLayout& layout) {
  const Matrix op_a = detail::photon_element(a, layout, Party::A);
  const Matrix op_b = detail::photon_element(b, layout, Party::B);

  std::vector<int> grouped = layout.party_indices(Party::A);
  const std::vector<int> idx_b = layout.party_indices(Party::B);
  grouped.insert(grouped.end(), idx_b.begin(), idx_b.end());

  return detail::interleave_grouped(kron(op_a, op_b), layout, grouped);
}

}  // namespace hyperpair
