#pragma once

// Photon-pair source model: the ideal three-DOF entangled state, a noise
// model (per-DOF visibility, polarization dephasing and depolarization,
// global white noise), a catalog of named target states, and Poissonian
// coincidence counting under analyzer settings.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperpair/analyzers.hpp"
#include "hyperpair/qcore.hpp"
#include "hyperpair/rng.hpp"

namespace hyperpair {

struct SourceConfig {
  Complex alpha = 1.0;        // |gg> amplitude relative to |rl> and |lr>
  int spatial_truncation = 3; // 3 keeps |g>, 2 restricts to (l,r)
  double visibility_poln = 1.0;
  double visibility_spa = 1.0;
  double visibility_et = 1.0;
  double dephase_poln_A = 0.0;    // H/V phase damping strength per photon
  double dephase_poln_B = 0.0;
  double depolarize_poln_A = 0.0; // white noise on one photon's polarization
  double depolarize_poln_B = 0.0;
  double white_noise = 0.0;       // global admixture of I/dim
  double pair_rate = 1000.0;      // coincidences/second at a unit-probability element
  double background_rate = 0.0;   // flat accidental rate added per setting
  std::uint64_t seed = 0;
};

inline void validate(const SourceConfig& cfg) {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!std::isfinite(cfg.alpha.real()) || !std::isfinite(cfg.alpha.imag()))
    throw ValidationError("source config: alpha must be finite");
  if (cfg.spatial_truncation != 2 && cfg.spatial_truncation != 3)
    throw ValidationError("source config: spatial_truncation must be 2 or 3");
  if (!in_unit(cfg.visibility_poln) || !in_unit(cfg.visibility_spa) || !in_unit(cfg.visibility_et))
    throw ValidationError("source config: visibilities must lie in [0,1]");
  if (!in_unit(cfg.dephase_poln_A) || !in_unit(cfg.dephase_poln_B))
    throw ValidationError("source config: dephasing strengths must lie in [0,1]");
  if (!in_unit(cfg.depolarize_poln_A) || !in_unit(cfg.depolarize_poln_B))
    throw ValidationError("source config: depolarizing strengths must lie in [0,1]");
  if (!in_unit(cfg.white_noise))
    throw ValidationError("source config: white_noise must lie in [0,1]");
  if (!std::isfinite(cfg.pair_rate) || cfg.pair_rate < 0.0)
    throw ValidationError("source config: pair_rate must be nonnegative");
  if (!std::isfinite(cfg.background_rate) || cfg.background_rate < 0.0)
    throw ValidationError("source config: background_rate must be nonnegative");
}

struct CountRecord {
  std::string setting_id_a;
  std::string setting_id_b;
  std::int64_t counts = 0;
  double duration = 1.0;           // seconds
  std::optional<double> expected;  // diagnostic: mean of the count distribution
};

// One row of a settings file: analyzer settings for both photons plus the
// string ids that key the resulting count records.
struct SettingsEntry {
  std::string id_a;
  std::string id_b;
  AnalyzerSetting a;
  AnalyzerSetting b;
};

namespace detail {

// (I/d on `subs`) tensored with the marginal on the rest: erases the named
// subsystems' state and correlations.
inline DensityOperator mix_subsystems(const DensityOperator& rho, const std::vector<int>& subs) {
  const std::vector<int> keep = complement(rho.layout, subs);
  const DensityOperator reduced = partial_trace(rho, keep);
  int d = 1;
  for (int s : subs) d *= rho.layout.dim_of(s);
  Matrix grouped = kron(Matrix::Identity(d, d) / static_cast<double>(d), reduced.matrix);
  std::vector<int> grouped_order = subs;
  grouped_order.insert(grouped_order.end(), keep.begin(), keep.end());
  return DensityOperator(interleave_grouped(std::move(grouped), rho.layout, grouped_order),
                         rho.layout);
}

// One-subsystem operator embedded in the full space.
inline Matrix embed_local(const SubsystemLayout& layout, int sub, const Matrix& local) {
  Matrix op = Matrix::Identity(1, 1);
  for (int i = 0; i < layout.size(); ++i) {
    const int d = layout.dim_of(i);
    op = kron(op, i == sub ? local : Matrix::Identity(d, d));
  }
  return op;
}

inline std::vector<int> dof_indices(const SubsystemLayout& layout, Dof dof) {
  std::vector<int> idx;
  for (int i = 0; i < layout.size(); ++i)
    if (layout.sub(i).dof == dof) idx.push_back(i);
  return idx;
}

inline Vector spatial_factor_ket(const SourceConfig& cfg) {
  if (cfg.spatial_truncation == 2) {
    // basis (l,r) per photon: (|rl> + |lr>)/sqrt(2)
    Vector v = Vector::Zero(4);
    v(1 * 2 + 0) = 1.0;
    v(0 * 2 + 1) = 1.0;
    return v / v.norm();
  }
  // basis (l,g,r) per photon: (|rl> + alpha|gg> + |lr>)/norm
  Vector v = Vector::Zero(9);
  v(2 * 3 + 0) = 1.0;
  v(1 * 3 + 1) = cfg.alpha;
  v(0 * 3 + 2) = 1.0;
  const double n = v.norm();
  if (n <= 0.0) throw ValidationError("spatial factor has zero norm");
  return v / n;
}

}  // namespace detail

/// The three-DOF entangled pair of the source with its imperfection model.
/// Channels apply in a fixed, documented order: per-DOF white-noise
/// visibility, polarization dephasing per photon, polarization
/// depolarization per photon, then global white noise.
inline DensityOperator build_hyper_state(const SourceConfig& cfg) {
  validate(cfg);
  const int sdim = cfg.spatial_truncation;

  Vector bell2(4);
  bell2 << 1, 0, 0, 1;
  bell2 /= std::numbers::sqrt2;

  // DOF-major assembly, then permutation into the canonical per-photon order
  const SubsystemLayout dof_major({{2, Party::A, Dof::Poln},
                                   {2, Party::B, Dof::Poln},
                                   {sdim, Party::A, Dof::Spatial},
                                   {sdim, Party::B, Dof::Spatial},
                                   {2, Party::A, Dof::Etime},
                                   {2, Party::B, Dof::Etime}});
  StateVector psi(kron(kron(bell2, detail::spatial_factor_ket(cfg)), bell2), dof_major);
  DensityOperator rho = outer(permute_subsystems(psi, {0, 2, 4, 1, 3, 5}));

  const auto visibility_channel = [&rho](double v, const std::vector<int>& subs) {
    if (v >= 1.0) return;
    const DensityOperator mixed = detail::mix_subsystems(rho, subs);
    rho.matrix = v * rho.matrix + (1.0 - v) * mixed.matrix;
  };
  visibility_channel(cfg.visibility_poln, detail::dof_indices(rho.layout, Dof::Poln));
  visibility_channel(cfg.visibility_spa, detail::dof_indices(rho.layout, Dof::Spatial));
  visibility_channel(cfg.visibility_et, detail::dof_indices(rho.layout, Dof::Etime));

  const std::vector<int> poln_subs = detail::dof_indices(rho.layout, Dof::Poln);
  const auto dephase = [&rho](double p, int sub) {
    if (p <= 0.0) return;
    const Matrix z = detail::embed_local(rho.layout, sub, sigma_z());
    rho.matrix = (1.0 - 0.5 * p) * rho.matrix + 0.5 * p * (z * rho.matrix * z);
  };
  dephase(cfg.dephase_poln_A, poln_subs[0]);
  dephase(cfg.dephase_poln_B, poln_subs[1]);

  const auto depolarize = [&rho](double w, int sub) {
    if (w <= 0.0) return;
    const DensityOperator mixed = detail::mix_subsystems(rho, {sub});
    rho.matrix = (1.0 - w) * rho.matrix + w * mixed.matrix;
  };
  depolarize(cfg.depolarize_poln_A, poln_subs[0]);
  depolarize(cfg.depolarize_poln_B, poln_subs[1]);

  if (cfg.white_noise > 0.0) {
    const double d = static_cast<double>(rho.dim());
    rho.matrix = (1.0 - cfg.white_noise) * rho.matrix +
                 cfg.white_noise * Matrix::Identity(rho.dim(), rho.dim()) / d;
  }
  rho.matrix = hermitize(rho.matrix);
  return rho;
}

namespace detail {

// Spatial-mode qubits use anticorrelated logical labels (photon A: 0=r,
// 1=l; photon B: 0=l, 1=r), so the source's (|rl>+|lr>)/sqrt(2) reads as
// the logical Phi+. Polarization uses 0=H,1=V; energy-time 0=s,1=f.
inline StateVector bell_state(char kind, int sign, Dof dof) {
  SubsystemLayout layout({{2, Party::A, dof}, {2, Party::B, dof}});
  auto flat = [dof](int la, int lb) {
    const int a = (dof == Dof::Spatial) ? 1 - la : la;
    const int b = lb;
    return a * 2 + b;
  };
  Vector v = Vector::Zero(4);
  if (kind == 'p') {  // Phi: |00> +/- |11>
    v(flat(0, 0)) = 1.0;
    v(flat(1, 1)) = sign;
  } else {  // Psi: |01> +/- |10>
    v(flat(0, 1)) = 1.0;
    v(flat(1, 0)) = sign;
  }
  v /= std::numbers::sqrt2;
  return StateVector(std::move(v), std::move(layout));
}

inline DensityOperator poln_spatial_product(const DensityOperator& poln,
                                            const DensityOperator& spatial) {
  // tensor gives [polnA, polnB, spaA, spaB]; canonical order interleaves
  return permute_subsystems(tensor(poln, spatial), {0, 2, 1, 3});
}

}  // namespace detail

inline const std::vector<std::string>& named_state_catalog() {
  static const std::vector<std::string> names = {
      "phi+_poln", "phi-_poln", "psi+_poln", "psi-_poln",
      "phi+_spa",  "phi-_spa",  "psi+_spa",  "psi-_spa",
      "phi+_et",   "phi-_et",   "psi+_et",   "psi-_et",
      "fig3a",     "fig3b",     "fig3c",     "fig3d",
      "eq1_ideal", "eq1_poln_spa", "fig2_fit",
  };
  return names;
}

/// Exact density operators for the documented catalog: the four Bell states
/// per DOF, the four 16-dimensional polarization x spatial-qubit targets,
/// the ideal 144-dimensional three-DOF state, its 36-dimensional
/// polarization x spatial restriction, and the fitted 36-dimensional state
/// with alpha = 1.88 exp(0.16 i pi).
inline DensityOperator make_named_state(const std::string& name) {
  using detail::bell_state;
  static const struct {
    const char* name;
    char kind;
    int sign;
    Dof dof;
  } kBellNames[] = {
      {"phi+_poln", 'p', 1, Dof::Poln},  {"phi-_poln", 'p', -1, Dof::Poln},
      {"psi+_poln", 's', 1, Dof::Poln},  {"psi-_poln", 's', -1, Dof::Poln},
      {"phi+_spa", 'p', 1, Dof::Spatial}, {"phi-_spa", 'p', -1, Dof::Spatial},
      {"psi+_spa", 's', 1, Dof::Spatial}, {"psi-_spa", 's', -1, Dof::Spatial},
      {"phi+_et", 'p', 1, Dof::Etime},   {"phi-_et", 'p', -1, Dof::Etime},
      {"psi+_et", 's', 1, Dof::Etime},   {"psi-_et", 's', -1, Dof::Etime},
  };
  for (const auto& e : kBellNames)
    if (name == e.name) return outer(bell_state(e.kind, e.sign, e.dof));

  const DensityOperator phi_spa = outer(bell_state('p', 1, Dof::Spatial));
  if (name == "fig3a")
    return detail::poln_spatial_product(outer(bell_state('p', 1, Dof::Poln)), phi_spa);
  if (name == "fig3b")
    return detail::poln_spatial_product(outer(bell_state('s', 1, Dof::Poln)), phi_spa);
  if (name == "fig3c") {
    Matrix classical = Matrix::Zero(4, 4);
    classical(0, 0) = 0.5;  // |HH><HH|
    classical(3, 3) = 0.5;  // |VV><VV|
    DensityOperator poln(std::move(classical),
                         SubsystemLayout({{2, Party::A, Dof::Poln}, {2, Party::B, Dof::Poln}}));
    return detail::poln_spatial_product(poln, phi_spa);
  }
  if (name == "fig3d") {
    DensityOperator poln(Matrix::Identity(4, 4) / 4.0,
                         SubsystemLayout({{2, Party::A, Dof::Poln}, {2, Party::B, Dof::Poln}}));
    return detail::poln_spatial_product(poln, phi_spa);
  }

  if (name == "eq1_ideal") return build_hyper_state(SourceConfig{});

  if (name == "eq1_poln_spa" || name == "fig2_fit") {
    SourceConfig cfg;
    if (name == "fig2_fit")
      cfg.alpha = 1.88 * std::exp(Complex(0.0, 0.16 * std::numbers::pi));
    Vector bell2(4);
    bell2 << 1, 0, 0, 1;
    bell2 /= std::numbers::sqrt2;
    const SubsystemLayout dof_major({{2, Party::A, Dof::Poln},
                                     {2, Party::B, Dof::Poln},
                                     {3, Party::A, Dof::Spatial},
                                     {3, Party::B, Dof::Spatial}});
    StateVector psi(kron(bell2, detail::spatial_factor_ket(cfg)), dof_major);
    return outer(permute_subsystems(psi, {0, 2, 1, 3}));
  }

  throw ValidationError("unknown state name: " + name +
                        " (see named_state_catalog for the documented names)");
}

/// Born-rule coincidence rate: pair_rate.Tr(rho element) + background_rate.
inline double expected_rate(const DensityOperator& rho, const Matrix& element,
                            const SourceConfig& cfg) {
  validate(cfg);
  if (element.rows() != rho.dim() || element.cols() != rho.dim())
    throw ValidationError("expected_rate: element dimension does not match the state");
  const double born = (rho.matrix * element).trace().real();
  return cfg.pair_rate * std::max(born, 0.0) + cfg.background_rate;
}

/// Poissonian coincidence counting. Every record draws from its own stream
/// keyed by (cfg.seed, record index), so output is deterministic and
/// independent of evaluation order.
inline std::vector<CountRecord> simulate_counts(const DensityOperator& rho,
                                                const std::vector<SettingsEntry>& settings,
                                                const SourceConfig& cfg, double duration) {
  validate(cfg);
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw ValidationError("simulate_counts: duration must be positive");
  std::vector<CountRecord> records;
  records.reserve(settings.size());
  for (size_t k = 0; k < settings.size(); ++k) {
    const SettingsEntry& entry = settings[k];
    const Matrix element = joint_projector(entry.a, entry.b, rho.layout);
    const double mu = expected_rate(rho, element, cfg) * duration;
    SplitMix64 stream = record_stream(cfg.seed, static_cast<std::uint64_t>(k));
    CountRecord rec;
    rec.setting_id_a = entry.id_a;
    rec.setting_id_b = entry.id_b;
    rec.counts = poisson(mu, stream);
    rec.duration = duration;
    rec.expected = mu;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace hyperpair
