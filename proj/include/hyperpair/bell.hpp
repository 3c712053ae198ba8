#pragma once

// CHSH Bell tests: correlations and the Bell parameter S from states or
// from coincidence counts, optimal-setting search on a two-qubit state,
// counting-statistics error propagation, and projection of a larger state
// onto a two-qubit subspace.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hyperpair/qcore.hpp"
#include "hyperpair/rng.hpp"
#include "hyperpair/source.hpp"

namespace hyperpair {

// One local measurement basis: the chosen outcome ket and its orthogonal
// complement.
struct LocalBasis {
  Vector ket;
  Vector perp;
};

// Orthogonal complement of a qubit ket, phase-fixed by convention.
inline Vector orthogonal_ket(const Vector& ket) {
  if (ket.size() != 2) throw ValidationError("orthogonal_ket: expected a qubit ket");
  Vector p(2);
  p << -std::conj(ket(1)), std::conj(ket(0));
  return p;
}

inline LocalBasis local_basis(Vector ket) {
  if (ket.size() != 2) throw ValidationError("local_basis: expected a qubit ket");
  const double n = ket.norm();
  if (n < 1e-12) throw ValidationError("local_basis: zero ket");
  ket /= n;
  return LocalBasis{ket, orthogonal_ket(ket)};
}

// Basis measuring along the Bloch direction (theta, phi).
inline LocalBasis bloch_basis(double theta, double phi) {
  Vector ket(2);
  ket << std::cos(theta / 2.0), std::exp(Complex(0.0, phi)) * std::sin(theta / 2.0);
  return local_basis(std::move(ket));
}

struct ChshSettings {
  LocalBasis a;
  LocalBasis a_prime;
  LocalBasis b;
  LocalBasis b_prime;
};

inline void validate(const ChshSettings& s) {
  const auto check = [](const LocalBasis& basis, const char* which) {
    if (basis.ket.size() != 2 || basis.perp.size() != 2)
      throw ValidationError(std::string("chsh settings: ") + which + " is not a qubit basis");
    const bool unit = std::abs(basis.ket.norm() - 1.0) <= 1e-10 &&
                      std::abs(basis.perp.norm() - 1.0) <= 1e-10;
    const double overlap = std::abs((basis.ket.adjoint() * basis.perp)(0));
    if (!unit || overlap > 1e-10)
      throw ValidationError(std::string("chsh settings: ") + which +
                            " pair is not orthonormal within 1e-10");
  };
  check(s.a, "a");
  check(s.a_prime, "a_prime");
  check(s.b, "b");
  check(s.b_prime, "b_prime");
}

struct BellResult {
  double S = 0.0;
  std::optional<double> sigma;  // present when derived from counts
  std::array<double, 4> E{};    // E(a,b), E(a,b'), E(a',b), E(a',b')
};

namespace detail {

inline void check_bell_pair(const DensityOperator& rho) {
  if (rho.dim() != 4 || rho.layout.size() != 2 || rho.layout.dim_of(0) != 2 ||
      rho.layout.dim_of(1) != 2)
    throw ValidationError("expected a two-qubit state (2x2 subsystems)");
  if (rho.layout.party_of(0) != Party::A || rho.layout.party_of(1) != Party::B)
    throw ValidationError("expected subsystem order photon A then photon B");
}

inline double outcome_probability(const DensityOperator& rho, const Vector& a, const Vector& b) {
  const Vector joint = kron(a, b);
  return (joint.adjoint() * rho.matrix * joint)(0).real();
}

}  // namespace detail

/// Correlation estimate from the four joint outcome probabilities,
/// renormalized by their sum as in coincidence-based analysis.
inline double correlation_between(const DensityOperator& rho, const LocalBasis& a,
                                  const LocalBasis& b) {
  detail::check_bell_pair(rho);
  const double pp = detail::outcome_probability(rho, a.ket, b.ket);
  const double mm = detail::outcome_probability(rho, a.perp, b.perp);
  const double pm = detail::outcome_probability(rho, a.ket, b.perp);
  const double mp = detail::outcome_probability(rho, a.perp, b.ket);
  const double total = pp + mm + pm + mp;
  if (total <= 1e-12) throw NumericalError("correlation: zero total outcome probability");
  return (pp + mm - pm - mp) / total;
}

inline double correlation_from_state(const DensityOperator& rho, const Vector& a,
                                     const Vector& b) {
  return correlation_between(rho, local_basis(a), local_basis(b));
}

/// S = E(a,b) + E(a,b') + E(a',b) - E(a',b').
inline BellResult chsh_from_state(const DensityOperator& rho, const ChshSettings& s) {
  validate(s);
  BellResult r;
  r.E[0] = correlation_between(rho, s.a, s.b);
  r.E[1] = correlation_between(rho, s.a, s.b_prime);
  r.E[2] = correlation_between(rho, s.a_prime, s.b);
  r.E[3] = correlation_between(rho, s.a_prime, s.b_prime);
  r.S = r.E[0] + r.E[1] + r.E[2] - r.E[3];
  return r;
}

namespace detail {

inline Eigen::Matrix3d correlation_matrix(const DensityOperator& rho) {
  const std::array<Matrix, 3> sig = {sigma_x(), sigma_y(), sigma_z()};
  Eigen::Matrix3d t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j) = (rho.matrix * kron(sig[i], sig[j])).trace().real();
  return t;
}

inline Eigen::Vector3d bloch_direction(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

// S as a function of the four measurement directions: for unit-trace rho
// and complete local outcome pairs the renormalized correlation estimator
// reduces to a.T b.
inline double chsh_of_angles(const Eigen::Matrix3d& t, const std::array<double, 8>& x) {
  const Eigen::Vector3d a = bloch_direction(x[0], x[1]);
  const Eigen::Vector3d ap = bloch_direction(x[2], x[3]);
  const Eigen::Vector3d b = bloch_direction(x[4], x[5]);
  const Eigen::Vector3d bp = bloch_direction(x[6], x[7]);
  return a.dot(t * (b + bp)) + ap.dot(t * (b - bp));
}

inline std::pair<double, double> angles_of_direction(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (n < 1e-14) return {0.0, 0.0};
  const Eigen::Vector3d u = v / n;
  return {std::acos(std::clamp(u.z(), -1.0, 1.0)), std::atan2(u.y(), u.x())};
}

// Coordinate ascent over the eight Bloch angles. S restricted to any one
// angle is A cos x + B sin x + C, so each coordinate step is an exact line
// maximization; S never decreases.
inline double ascend(const Eigen::Matrix3d& t, std::array<double, 8>& x) {
  double s = chsh_of_angles(t, x);
  for (int sweep = 0; sweep < 500; ++sweep) {
    for (int k = 0; k < 8; ++k) {
      const auto at = [&](double v) {
        std::array<double, 8> y = x;
        y[k] = v;
        return chsh_of_angles(t, y);
      };
      const double s0 = at(0.0);
      const double s1 = at(std::numbers::pi / 2.0);
      const double s2 = at(std::numbers::pi);
      const double amp_cos = 0.5 * (s0 - s2);
      const double offset = 0.5 * (s0 + s2);
      const double amp_sin = s1 - offset;
      x[k] = std::atan2(amp_sin, amp_cos);
    }
    const double next = chsh_of_angles(t, x);
    if (next - s < 1e-10) return next;
    s = next;
  }
  return s;
}

}  // namespace detail

struct OptimalChsh {
  double s_max = 0.0;     // analytic value 2 sqrt(m1 + m2)
  double s_search = 0.0;  // value realized by the returned settings
  ChshSettings settings;
};

/// Largest CHSH value of a two-qubit state: the closed form from the two
/// largest eigenvalues of T^T T, plus realizing settings found by seeded
/// coordinate ascent (16 restarts around the analytic optimum, deterministic
/// best-value reduction with ties broken by lowest restart index).
inline OptimalChsh optimal_chsh(const DensityOperator& rho) {
  detail::check_bell_pair(rho);
  const Eigen::Matrix3d t = detail::correlation_matrix(rho);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(t, Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  const double s_max = 2.0 * std::hypot(sv(0), sv(1));

  const Eigen::Vector3d c1 = svd.matrixV().col(0);
  const Eigen::Vector3d c2 = svd.matrixV().col(1);
  const auto image_direction = [&](const Eigen::Vector3d& c, double s) {
    return s > 1e-14 ? Eigen::Vector3d(t * c / s) : Eigen::Vector3d(0.0, 0.0, 1.0);
  };
  const double mix = std::atan2(sv(1), sv(0));
  std::array<double, 8> seed{};
  const auto [ta, pa] = detail::angles_of_direction(image_direction(c1, sv(0)));
  const auto [tap, pap] = detail::angles_of_direction(image_direction(c2, sv(1)));
  const auto [tb, pb] = detail::angles_of_direction(std::cos(mix) * c1 + std::sin(mix) * c2);
  const auto [tbp, pbp] = detail::angles_of_direction(std::cos(mix) * c1 - std::sin(mix) * c2);
  seed = {ta, pa, tap, pap, tb, pb, tbp, pbp};

  SplitMix64 jitter(0xC45ull);
  double best = -1e300;
  std::array<double, 8> best_x{};
  for (int restart = 0; restart < 16; ++restart) {
    std::array<double, 8> x = seed;
    if (restart > 0)
      for (double& v : x) v += 0.8 * (jitter.uniform01() - 0.5);
    const double s = detail::ascend(t, x);
    if (s > best) {  // strict: ties keep the earliest restart
      best = s;
      best_x = x;
    }
  }

  OptimalChsh out;
  out.s_max = s_max;
  out.settings.a = bloch_basis(best_x[0], best_x[1]);
  out.settings.a_prime = bloch_basis(best_x[2], best_x[3]);
  out.settings.b = bloch_basis(best_x[4], best_x[5]);
  out.settings.b_prime = bloch_basis(best_x[6], best_x[7]);
  out.s_search = chsh_from_state(rho, out.settings).S;
  return out;
}

// Record ids expected by chsh_from_counts: each of the 16 records pairs one
// A-side id with one B-side id.
inline const std::array<std::string, 4>& chsh_ids_a() {
  static const std::array<std::string, 4> ids = {"a", "a_perp", "ap", "ap_perp"};
  return ids;
}
inline const std::array<std::string, 4>& chsh_ids_b() {
  static const std::array<std::string, 4> ids = {"b", "b_perp", "bp", "bp_perp"};
  return ids;
}

/// Bell parameter from the 16 coincidence counts of a CHSH run, with the
/// statistical error from first-order Poisson propagation (var(n) =
/// max(n,1), settings independent).
inline BellResult chsh_from_counts(const std::vector<CountRecord>& records) {
  const auto side_index = [](const std::array<std::string, 4>& ids, const std::string& id,
                             const char* side) {
    for (int i = 0; i < 4; ++i)
      if (ids[i] == id) return i;
    throw ValidationError(std::string("chsh counts: unknown ") + side + " setting id '" + id +
                          "'");
  };
  std::array<std::array<std::optional<double>, 4>, 4> n{};
  for (const CountRecord& rec : records) {
    const int i = side_index(chsh_ids_a(), rec.setting_id_a, "A");
    const int j = side_index(chsh_ids_b(), rec.setting_id_b, "B");
    if (n[i][j].has_value())
      throw ValidationError("chsh counts: duplicate record for (" + rec.setting_id_a + ", " +
                            rec.setting_id_b + ")");
    if (rec.counts < 0) throw ValidationError("chsh counts: negative count");
    n[i][j] = static_cast<double>(rec.counts);
  }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (!n[i][j].has_value())
        throw ValidationError("chsh counts: missing record for (" + chsh_ids_a()[i] + ", " +
                              chsh_ids_b()[j] + ")");

  BellResult r;
  double var_s = 0.0;
  // setting pairs in result order: (a,b), (a,bp), (ap,b), (ap,bp)
  const std::array<std::pair<int, int>, 4> pairs = {{{0, 0}, {0, 2}, {2, 0}, {2, 2}}};
  for (int k = 0; k < 4; ++k) {
    const auto [i, j] = pairs[k];
    const double npp = *n[i][j];
    const double npm = *n[i][j + 1];
    const double nmp = *n[i + 1][j];
    const double nmm = *n[i + 1][j + 1];
    const double total = npp + npm + nmp + nmm;
    if (total <= 0.0)
      throw ValidationError("chsh counts: zero total counts for setting pair (" +
                            chsh_ids_a()[i] + ", " + chsh_ids_b()[j] + ")");
    const double plus = npp + nmm;
    const double minus = npm + nmp;
    r.E[k] = (plus - minus) / total;
    const double dplus = 2.0 * minus / (total * total);   // dE/dn for agreeing counts
    const double dminus = 2.0 * plus / (total * total);   // |dE/dn| for disagreeing counts
    const auto var = [](double c) { return std::max(c, 1.0); };
    var_s += dplus * dplus * (var(npp) + var(nmm)) + dminus * dminus * (var(npm) + var(nmp));
  }
  r.S = r.E[0] + r.E[1] + r.E[2] - r.E[3];
  r.sigma = std::sqrt(var_s);
  return r;
}

/// Projects the listed subsystems onto pure kets and returns the
/// renormalized state of the remaining subsystems.
inline DensityOperator subspace_project(const DensityOperator& rho,
                                        const std::vector<std::pair<int, Vector>>& projections) {
  if (projections.empty()) throw ValidationError("subspace_project: no projections given");
  std::vector<int> projected;
  projected.reserve(projections.size());
  for (const auto& [sub, ket] : projections) projected.push_back(sub);
  detail::check_subsystem_indices(rho.layout, projected);
  if (static_cast<int>(projections.size()) == rho.layout.size())
    throw ValidationError("subspace_project: at least one subsystem must survive");

  Matrix pi = Matrix::Identity(1, 1);
  for (int i = 0; i < rho.layout.size(); ++i) {
    const int d = rho.layout.dim_of(i);
    const auto it = std::find(projected.begin(), projected.end(), i);
    if (it == projected.end()) {
      pi = kron(pi, Matrix::Identity(d, d));
      continue;
    }
    Vector ket = projections[static_cast<size_t>(it - projected.begin())].second;
    if (ket.size() != d) {
      std::ostringstream msg;
      msg << "subspace_project: ket for subsystem " << i << " has dimension " << ket.size()
          << ", expected " << d;
      throw ValidationError(msg.str());
    }
    const double norm = ket.norm();
    if (norm < 1e-12) throw ValidationError("subspace_project: zero projection ket");
    ket /= norm;
    pi = kron(pi, Matrix(ket * ket.adjoint()));
  }

  Matrix projected_matrix = pi * rho.matrix * pi;
  const double prob = projected_matrix.trace().real();
  if (prob <= 1e-12)
    throw NumericalError("subspace_project: projection probability is zero within tolerance");
  projected_matrix /= prob;
  return partial_trace(DensityOperator(std::move(projected_matrix), rho.layout),
                       detail::complement(rho.layout, projected));
}

}  // namespace hyperpair
