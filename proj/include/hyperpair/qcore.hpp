#pragma once

// Dense complex linear algebra over multipartite Hilbert spaces: tensor
// products, subsystem permutation, partial trace, partial transpose,
// Hermitian eigendecomposition and PSD square root. Everything here is a
// pure function on immutable values; dimensions stay small (<= a few
// hundred), so all storage is dense and row-major indexed.

#include <cmath>
#include <utility>
#include <vector>

#include "hyperpair/layout.hpp"
#include "hyperpair/types.hpp"

namespace hyperpair {

struct ValidationOptions {
  double hermiticity_tol = 1e-10;  // max elementwise deviation from m.adjoint()
  double trace_tol = 1e-10;
  double eigenvalue_floor = 1e-9;  // min eigenvalue >= -floor
};

struct StateVector {
  Vector amplitudes;
  SubsystemLayout layout;

  StateVector() = default;
  StateVector(Vector amps, SubsystemLayout lay) : amplitudes(std::move(amps)), layout(std::move(lay)) {
    if (amplitudes.size() != layout.total_dim())
      throw ValidationError("amplitude vector length does not match layout dimension");
  }

  int dim() const { return static_cast<int>(amplitudes.size()); }

  StateVector& normalize() {
    const double n = amplitudes.norm();
    if (n <= 0.0) throw NumericalError("cannot normalize a zero state vector");
    amplitudes /= n;
    return *this;
  }
};

struct DensityOperator {
  Matrix matrix;
  SubsystemLayout layout;

  DensityOperator() = default;
  DensityOperator(Matrix m, SubsystemLayout lay) : matrix(std::move(m)), layout(std::move(lay)) {
    if (matrix.rows() != matrix.cols() || matrix.rows() != layout.total_dim())
      throw ValidationError("matrix shape does not match layout dimension");
  }

  int dim() const { return static_cast<int>(matrix.rows()); }
};

inline Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline double trace_real(const Matrix& m) { return m.trace().real(); }

/// Purity Tr(rho^2) of a Hermitian matrix.
inline double purity(const Matrix& m) { return (m * m).trace().real(); }
inline double purity(const DensityOperator& rho) { return purity(rho.matrix); }

// ---------------------------------------------------------------------------
// Eigendecomposition

struct EigResult {
  RealVector values;  // descending
  Matrix vectors;     // columns aligned with values
};

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
/// The input is checked against `herm_tol` (max elementwise deviation from
/// its adjoint) and symmetrized before solving, so the reconstruction
/// residual is limited only by the solver.
inline EigResult eig_hermitian(const Matrix& m, double herm_tol = 1e-8) {
  if (m.rows() != m.cols()) throw ValidationError("eig_hermitian: matrix must be square");
  const double dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (dev > herm_tol) throw ValidationError("eig_hermitian: input is not Hermitian within tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitize(m));
  if (solver.info() != Eigen::Success) throw NumericalError("eig_hermitian: solver failed to converge");
  const int n = static_cast<int>(m.rows());
  EigResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  // Eigen sorts ascending; flip to descending.
  for (int i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues in
/// [-floor_err, 0) are clamped to zero; anything below -floor_err is a
/// material violation and throws.
inline Matrix sqrt_psd(const Matrix& m, double floor_err = 1e-6) {
  EigResult eig = eig_hermitian(m, 1e-8);
  const int n = static_cast<int>(eig.values.size());
  RealVector roots(n);
  for (int i = 0; i < n; ++i) {
    double v = eig.values(i);
    if (v < -floor_err)
      throw NumericalError("sqrt_psd: materially negative eigenvalue " + std::to_string(v));
    roots(i) = std::sqrt(std::max(v, 0.0));
  }
  return eig.vectors * roots.asDiagonal() * eig.vectors.adjoint();
}

// ---------------------------------------------------------------------------
// Construction helpers

inline Matrix sigma_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline Matrix sigma_y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

inline Matrix sigma_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline Vector basis_ket(int dim, int index) {
  if (index < 0 || index >= dim) throw ValidationError("basis index out of range");
  Vector v = Vector::Zero(dim);
  v(index) = 1.0;
  return v;
}

inline DensityOperator outer(const StateVector& psi) {
  return DensityOperator(psi.amplitudes * psi.amplitudes.adjoint(), psi.layout);
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Tensor product; layouts concatenate. Mixing value kinds is a type error.
inline StateVector tensor(const StateVector& a, const StateVector& b) {
  return StateVector(kron(a.amplitudes, b.amplitudes), a.layout.concat(b.layout));
}

inline DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  return DensityOperator(kron(a.matrix, b.matrix), a.layout.concat(b.layout));
}

// ---------------------------------------------------------------------------
// Subsystem index machinery

namespace detail {

// Linear offsets contributed by every joint value of the given subsystems:
// offsets[k] = sum_j component_j(k) * stride(subsystem_j). Any full linear
// index decomposes as offset(selected) + offset(complement).
inline std::vector<int> subset_offsets(const SubsystemLayout& layout, const std::vector<int>& subsys) {
  const std::vector<int> strides = layout.strides();
  int count = 1;
  for (int s : subsys) count *= layout.dim_of(s);
  std::vector<int> offsets(static_cast<size_t>(count), 0);
  int repeat = count;
  for (int s : subsys) {
    const int d = layout.dim_of(s);
    repeat /= d;
    const int stride = strides[static_cast<size_t>(s)];
    int pos = 0;
    while (pos < count) {
      for (int v = 0; v < d; ++v)
        for (int r = 0; r < repeat; ++r) offsets[static_cast<size_t>(pos++)] += v * stride;
    }
  }
  return offsets;
}

inline std::vector<int> complement(const SubsystemLayout& layout, const std::vector<int>& subsys) {
  std::vector<char> in(static_cast<size_t>(layout.size()), 0);
  for (int s : subsys) in[static_cast<size_t>(s)] = 1;
  std::vector<int> rest;
  for (int i = 0; i < layout.size(); ++i)
    if (!in[static_cast<size_t>(i)]) rest.push_back(i);
  return rest;
}

inline void check_subsystem_indices(const SubsystemLayout& layout, const std::vector<int>& subsys) {
  std::vector<char> seen(static_cast<size_t>(layout.size()), 0);
  for (int s : subsys) {
    if (s < 0 || s >= layout.size()) throw ValidationError("subsystem index out of range");
    if (seen[static_cast<size_t>(s)]++) throw ValidationError("duplicate subsystem index");
  }
}

}  // namespace detail

/// Reduced operator over the kept subsystems (in their original relative
/// order); the complement is traced out. Trace is preserved.
inline DensityOperator partial_trace(const DensityOperator& rho, std::vector<int> keep) {
  if (keep.empty()) throw ValidationError("partial_trace: keep set must be nonempty");
  detail::check_subsystem_indices(rho.layout, keep);
  std::sort(keep.begin(), keep.end());
  const std::vector<int> traced = detail::complement(rho.layout, keep);
  const std::vector<int> keep_off = detail::subset_offsets(rho.layout, keep);
  const std::vector<int> traced_off = detail::subset_offsets(rho.layout, traced);

  const int dk = static_cast<int>(keep_off.size());
  Matrix out = Matrix::Zero(dk, dk);
  for (int r = 0; r < dk; ++r) {
    for (int c = 0; c < dk; ++c) {
      Complex sum = 0.0;
      for (int t : traced_off) sum += rho.matrix(keep_off[static_cast<size_t>(r)] + t, keep_off[static_cast<size_t>(c)] + t);
      out(r, c) = sum;
    }
  }
  return DensityOperator(std::move(out), rho.layout.selected(keep));
}

/// Transpose applied to one party's joint index. The result is Hermitian
/// when the input is, but generally not positive, so it is returned as a
/// bare matrix in the same basis ordering.
inline Matrix partial_transpose(const DensityOperator& rho, Party party) {
  const std::vector<int> p_sub = rho.layout.party_indices(party);
  if (p_sub.empty()) throw ValidationError("partial_transpose: party has no subsystems");
  const std::vector<int> rest = detail::complement(rho.layout, p_sub);
  const std::vector<int> p_off = detail::subset_offsets(rho.layout, p_sub);
  const std::vector<int> r_off = detail::subset_offsets(rho.layout, rest);

  Matrix out(rho.dim(), rho.dim());
  for (int pr : p_off)
    for (int pc : p_off)
      for (int qr : r_off)
        for (int qc : r_off)
          out(pc + qr, pr + qc) = rho.matrix(pr + qr, pc + qc);
  return out;
}

namespace detail {

// Row-major re-indexing table for a subsystem permutation: element i of the
// result is the old linear index mapped to new linear index i, where
// new subsystem k carries old subsystem perm[k].
inline std::vector<int> permutation_table(const SubsystemLayout& layout, const std::vector<int>& perm) {
  const SubsystemLayout new_layout = layout.permuted(perm);
  const std::vector<int> old_strides = layout.strides();
  const std::vector<int> new_dims = new_layout.dims();
  const int total = layout.total_dim();
  const int n = layout.size();
  std::vector<int> table(static_cast<size_t>(total));
  std::vector<int> digits(static_cast<size_t>(n), 0);
  for (int lin = 0; lin < total; ++lin) {
    int old_lin = 0;
    for (int k = 0; k < n; ++k)
      old_lin += digits[static_cast<size_t>(k)] * old_strides[static_cast<size_t>(perm[static_cast<size_t>(k)])];
    table[static_cast<size_t>(lin)] = old_lin;
    // increment mixed-radix counter (row-major: last digit fastest)
    for (int k = n - 1; k >= 0; --k) {
      if (++digits[static_cast<size_t>(k)] < new_dims[static_cast<size_t>(k)]) break;
      digits[static_cast<size_t>(k)] = 0;
    }
  }
  return table;
}

// Operator assembled over the subsystem order `grouped_order` (a
// permutation of the layout's indices), re-expressed in layout order.
inline Matrix interleave_grouped(Matrix grouped, const SubsystemLayout& layout,
                                 const std::vector<int>& grouped_order) {
  if (std::is_sorted(grouped_order.begin(), grouped_order.end())) return grouped;
  std::vector<int> perm(grouped_order.size());
  for (int k = 0; k < static_cast<int>(grouped_order.size()); ++k)
    perm[static_cast<size_t>(grouped_order[static_cast<size_t>(k)])] = k;
  const SubsystemLayout grouped_layout = layout.selected(grouped_order);
  const std::vector<int> table = permutation_table(grouped_layout, perm);
  Matrix out(grouped.rows(), grouped.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      out(r, c) = grouped(table[static_cast<size_t>(r)], table[static_cast<size_t>(c)]);
  return out;
}

}  // namespace detail

/// Reorder subsystems: new subsystem k is old subsystem perm[k].
inline StateVector permute_subsystems(const StateVector& psi, const std::vector<int>& perm) {
  const std::vector<int> table = detail::permutation_table(psi.layout, perm);
  Vector out(psi.dim());
  for (int i = 0; i < psi.dim(); ++i) out(i) = psi.amplitudes(table[static_cast<size_t>(i)]);
  return StateVector(std::move(out), psi.layout.permuted(perm));
}

inline DensityOperator permute_subsystems(const DensityOperator& rho, const std::vector<int>& perm) {
  const std::vector<int> table = detail::permutation_table(rho.layout, perm);
  Matrix out(rho.dim(), rho.dim());
  for (int r = 0; r < rho.dim(); ++r)
    for (int c = 0; c < rho.dim(); ++c)
      out(r, c) = rho.matrix(table[static_cast<size_t>(r)], table[static_cast<size_t>(c)]);
  return DensityOperator(std::move(out), rho.layout.permuted(perm));
}

// ---------------------------------------------------------------------------
// Validation

/// Check the DensityOperator contract: Hermitian, unit trace, eigenvalues
/// above the configured floor. Throws ValidationError on violation.
inline void validate(const DensityOperator& rho, const ValidationOptions& opts = {}) {
  const double herm = (rho.matrix - rho.matrix.adjoint()).cwiseAbs().maxCoeff();
  if (herm > opts.hermiticity_tol)
    throw ValidationError("density operator is not Hermitian within tolerance");
  if (std::abs(rho.matrix.trace() - Complex(1.0)) > opts.trace_tol)
    throw ValidationError("density operator trace deviates from 1");
  const EigResult eig = eig_hermitian(rho.matrix, opts.hermiticity_tol * 10);
  if (eig.values(eig.values.size() - 1) < -opts.eigenvalue_floor)
    throw ValidationError("density operator has eigenvalue below the floor");
}

inline bool is_valid(const DensityOperator& rho, const ValidationOptions& opts = {}) {
  try {
    validate(rho, opts);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

}  // namespace hyperpair
