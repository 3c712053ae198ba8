#pragma once

// State tomography: tomographically complete projector sets, linear
// inversion, iterative maximum-likelihood reconstruction with a monotone
// likelihood trace, and parametric bootstrap error bars for derived
// metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hyperpair/metrics.hpp"
#include "hyperpair/qcore.hpp"
#include "hyperpair/rng.hpp"
#include "hyperpair/source.hpp"

namespace hyperpair {

struct ProjectorKet {
  std::string id;
  Vector ket;
};

// Per-photon analysis set: d^2 unit kets whose projectors span the d x d
// Hermitian operators. Both photons use the same list; the joint elements
// are all ket pairs, A index major.
struct ProjectorSet {
  int local_dim = 0;
  std::vector<ProjectorKet> kets;
};

namespace detail {

// Gram matrix of the vectorized projectors: Tr(P_i P_j) = |<k_i|k_j>|^2.
inline Eigen::MatrixXd projector_gram(const std::vector<ProjectorKet>& kets) {
  const int m = static_cast<int>(kets.size());
  Eigen::MatrixXd s(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const double overlap = std::abs((kets[static_cast<size_t>(i)].ket.adjoint() *
                                       kets[static_cast<size_t>(j)].ket)(0));
      s(i, j) = s(j, i) = overlap * overlap;
    }
  }
  return s;
}

inline int matrix_rank(const Eigen::MatrixXd& sym, double rel_tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (top <= 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()(i) > rel_tol * top) ++rank;
  return rank;
}

}  // namespace detail

/// Validated construction: d^2 distinct-id unit kets of dimension d whose
/// projectors are linearly independent.
inline ProjectorSet make_projector_set(int local_dim, std::vector<ProjectorKet> kets) {
  if (local_dim < 2) throw ValidationError("projector set: local dimension must be at least 2");
  const int expected = local_dim * local_dim;
  if (static_cast<int>(kets.size()) != expected) {
    std::ostringstream msg;
    msg << "projector set: expected " << expected << " kets for local dimension " << local_dim
        << ", got " << kets.size();
    throw ValidationError(msg.str());
  }
  std::map<std::string, int> seen;
  for (ProjectorKet& entry : kets) {
    if (entry.id.empty()) throw ValidationError("projector set: empty ket id");
    if (seen.count(entry.id)) throw ValidationError("projector set: duplicate ket id " + entry.id);
    seen[entry.id] = 1;
    if (entry.ket.size() != local_dim)
      throw ValidationError("projector set: ket " + entry.id + " has the wrong dimension");
    const double n = entry.ket.norm();
    if (std::abs(n - 1.0) > 1e-6)
      throw ValidationError("projector set: ket " + entry.id + " is not unit length");
    entry.ket /= n;
  }
  if (detail::matrix_rank(detail::projector_gram(kets)) != expected)
    throw NumericalError("projector set: projectors are linearly dependent");
  return ProjectorSet{local_dim, std::move(kets)};
}

/// The standard complete set: the d basis states plus (|j>+|k>)/sqrt(2) and
/// (|j>+i|k>)/sqrt(2) for every j < k, giving d^2 kets per photon.
inline ProjectorSet canonical_set(int local_dim) {
  if (local_dim < 2) throw ValidationError("canonical_set: local dimension must be at least 2");
  std::vector<ProjectorKet> kets;
  for (int j = 0; j < local_dim; ++j)
    kets.push_back({"b" + std::to_string(j), basis_ket(local_dim, j)});
  for (int j = 0; j < local_dim; ++j) {
    for (int k = j + 1; k < local_dim; ++k) {
      const std::string suffix = std::to_string(j) + "_" + std::to_string(k);
      Vector real_sum = (basis_ket(local_dim, j) + basis_ket(local_dim, k)) / std::numbers::sqrt2;
      kets.push_back({"s" + suffix, std::move(real_sum)});
      Vector imag_sum =
          (basis_ket(local_dim, j) + Complex(0.0, 1.0) * basis_ket(local_dim, k)) /
          std::numbers::sqrt2;
      kets.push_back({"i" + suffix, std::move(imag_sum)});
    }
  }
  return make_projector_set(local_dim, std::move(kets));
}

enum class TomographyMethod { Linear, Mle };

struct TomographyOptions {
  int max_iterations = 10000;
  double tolerance = 1e-10;  // stop when the log-likelihood gain drops below this
};

struct TomographyProblem {
  ProjectorSet set;
  std::vector<CountRecord> counts;
  TomographyMethod method = TomographyMethod::Mle;
  TomographyOptions options;
};

struct LinearInversionResult {
  DensityOperator rho;
  double intensity = 0.0;  // counts per mean acquisition at unit Born weight
  double min_eigenvalue = 0.0;
  bool physical = true;  // false when min eigenvalue < -1e-6
};

struct TomographyResult {
  DensityOperator rho;
  std::vector<double> log_likelihood;  // Poisson, one entry per accepted iterate
  int iterations = 0;
  bool converged = false;
  double intensity = 0.0;
};

namespace detail {

struct AlignedCounts {
  std::vector<double> counts;     // element order: A ket index major
  std::vector<double> durations;  // seconds
  double mean_duration = 0.0;
  double total = 0.0;
};

// Matches records to joint elements by (id_a, id_b); every element must be
// covered exactly once, so downstream iteration order is independent of the
// record order in the input.
inline AlignedCounts align_counts(const ProjectorSet& set,
                                  const std::vector<CountRecord>& records) {
  const int m1 = static_cast<int>(set.kets.size());
  std::map<std::string, int> index;
  for (int i = 0; i < m1; ++i) index[set.kets[static_cast<size_t>(i)].id] = i;
  const size_t m = static_cast<size_t>(m1) * static_cast<size_t>(m1);
  AlignedCounts out;
  out.counts.assign(m, -1.0);
  out.durations.assign(m, 0.0);
  for (const CountRecord& rec : records) {
    const auto ia = index.find(rec.setting_id_a);
    const auto ib = index.find(rec.setting_id_b);
    if (ia == index.end() || ib == index.end())
      throw ValidationError("tomography: record (" + rec.setting_id_a + ", " + rec.setting_id_b +
                            ") does not match any projector pair");
    const size_t e =
        static_cast<size_t>(ia->second) * static_cast<size_t>(m1) + static_cast<size_t>(ib->second);
    if (out.counts[e] >= 0.0)
      throw ValidationError("tomography: duplicate record for (" + rec.setting_id_a + ", " +
                            rec.setting_id_b + ")");
    if (rec.counts < 0) throw ValidationError("tomography: negative count");
    if (!(rec.duration > 0.0) || !std::isfinite(rec.duration))
      throw ValidationError("tomography: record duration must be positive");
    out.counts[e] = static_cast<double>(rec.counts);
    out.durations[e] = rec.duration;
    out.total += static_cast<double>(rec.counts);
  }
  for (size_t e = 0; e < m; ++e) {
    if (out.counts[e] < 0.0) {
      const int i = static_cast<int>(e) / m1;
      const int j = static_cast<int>(e) % m1;
      throw ValidationError("tomography: missing record for (" +
                            set.kets[static_cast<size_t>(i)].id + ", " +
                            set.kets[static_cast<size_t>(j)].id + ")");
    }
    out.mean_duration += out.durations[e];
  }
  out.mean_duration /= static_cast<double>(m);
  return out;
}

// Joint kets as columns, element order matching align_counts.
inline Matrix joint_ket_columns(const ProjectorSet& set) {
  const int m1 = static_cast<int>(set.kets.size());
  const int dim = set.local_dim * set.local_dim;
  Matrix k(dim, m1 * m1);
  for (int i = 0; i < m1; ++i)
    for (int j = 0; j < m1; ++j)
      k.col(i * m1 + j) =
          kron(set.kets[static_cast<size_t>(i)].ket, set.kets[static_cast<size_t>(j)].ket);
  return k;
}

}  // namespace detail

inline void validate(const TomographyProblem& problem) {
  if (problem.set.local_dim < 2 ||
      static_cast<int>(problem.set.kets.size()) != problem.set.local_dim * problem.set.local_dim)
    throw ValidationError("tomography: projector set is not a complete per-photon set");
  detail::align_counts(problem.set, problem.counts);
  if (problem.options.max_iterations < 1)
    throw ValidationError("tomography: max_iterations must be positive");
  if (!(problem.options.tolerance > 0.0))
    throw ValidationError("tomography: tolerance must be positive");
}

/// Least-squares inversion of counts_e = flux * duration_e * Tr(rho P_e).
/// The joint Gram factorizes over photons, so the solve reduces to two
/// per-photon Gram solves. The output is Hermitian and unit trace but may
/// carry negative eigenvalues; `physical` flags min eigenvalue >= -1e-6.
inline LinearInversionResult linear_inversion(const TomographyProblem& problem) {
  validate(problem);
  const auto aligned = detail::align_counts(problem.set, problem.counts);
  const int m1 = static_cast<int>(problem.set.kets.size());
  const int dim = problem.set.local_dim * problem.set.local_dim;

  const Eigen::MatrixXd gram = detail::projector_gram(problem.set.kets);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (top <= 0.0 || eig.eigenvalues().minCoeff() <= 1e-9 * top)
    throw NumericalError("linear inversion: projector set is rank-deficient");

  // rates, reshaped with the A index as rows
  Eigen::MatrixXd y(m1, m1);
  for (int i = 0; i < m1; ++i)
    for (int j = 0; j < m1; ++j) {
      const size_t e = static_cast<size_t>(i) * static_cast<size_t>(m1) + static_cast<size_t>(j);
      y(i, j) = aligned.counts[e] / aligned.durations[e];
    }

  // X solves (gram x gram) vec(X) = vec(y): X = gram^-1 y gram^-1
  const Eigen::MatrixXd inv =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  const Eigen::MatrixXd coeff = inv * y * inv;

  Matrix op = Matrix::Zero(dim, dim);
  for (int i = 0; i < m1; ++i) {
    for (int j = 0; j < m1; ++j) {
      const Vector joint =
          kron(problem.set.kets[static_cast<size_t>(i)].ket,
               problem.set.kets[static_cast<size_t>(j)].ket);
      op += coeff(i, j) * (joint * joint.adjoint());
    }
  }
  op = hermitize(op);

  const double flux = op.trace().real();
  if (flux <= 1e-12)
    throw NumericalError("linear inversion: inferred flux is not positive");
  op /= flux;

  LinearInversionResult out{DensityOperator(std::move(op), pair_layout(problem.set.local_dim)),
                            flux * aligned.mean_duration, 0.0, true};
  const EigResult spectrum = eig_hermitian(out.rho.matrix);
  out.min_eigenvalue = spectrum.values.minCoeff();
  out.physical = out.min_eigenvalue >= -1e-6;
  return out;
}

namespace detail {

// Multinomial log-likelihood of the duration-weighted outcome distribution;
// predicted probabilities floored at 1e-12. Fills p with the floored
// probabilities and q with the raw weighted Born values.
inline double multinomial_ll(const Matrix& rho, const Matrix& kets, const RealVector& weights,
                             const std::vector<double>& counts, RealVector& p, RealVector& q) {
  const Matrix image = rho * kets;
  q = (kets.conjugate().cwiseProduct(image)).colwise().sum().real().transpose();
  q = q.cwiseProduct(weights).cwiseMax(0.0);
  const double total = q.sum();
  if (total <= 0.0) throw NumericalError("tomography: state predicts zero flux");
  p = (q / total).cwiseMax(1e-12);
  double ll = 0.0;
  for (int e = 0; e < p.size(); ++e)
    if (counts[static_cast<size_t>(e)] > 0.0)
      ll += counts[static_cast<size_t>(e)] * std::log(p(e));
  return ll;
}

}  // namespace detail

/// Iterative maximum-likelihood reconstruction. Each step sandwiches the
/// state with G^-1 R, where R = sum_e (f_e/p_e) P_e and G = sum_e P_e: this
/// is the plain R rho R iteration carried out in the frame where the
/// projector sum is the identity, so the data-consistent state is its fixed
/// point even though the analysis projectors do not resolve the identity.
/// Steps are accepted only if the likelihood does not drop (backtracking on
/// the step size), so the reported trace is non-decreasing. The total flux
/// is a nuisance parameter profiled out each iteration; the reported
/// log-likelihood is the Poisson value at the profiled flux.
inline TomographyResult mle_reconstruct(const TomographyProblem& problem) {
  validate(problem);
  const auto aligned = detail::align_counts(problem.set, problem.counts);
  const int dim = problem.set.local_dim * problem.set.local_dim;
  const int m = static_cast<int>(aligned.counts.size());
  if (aligned.total <= 0.0) throw ValidationError("tomography: all counts are zero");

  const Matrix kets = detail::joint_ket_columns(problem.set);
  RealVector weights(m);
  for (int e = 0; e < m; ++e)
    weights(e) = aligned.durations[static_cast<size_t>(e)] / aligned.mean_duration;

  const Matrix gram_op =
      kets * weights.cast<Complex>().asDiagonal() * kets.adjoint();
  const Eigen::LDLT<Matrix> gram_solver(gram_op);

  // Poisson log-likelihood at the profiled flux differs from the
  // multinomial value by a state-independent constant.
  double ll_const = aligned.total * std::log(aligned.total) - aligned.total;
  for (double n : aligned.counts) ll_const -= std::lgamma(n + 1.0);

  Matrix rho = Matrix::Identity(dim, dim) / static_cast<double>(dim);
  RealVector p(m), q(m);
  double ll = detail::multinomial_ll(rho, kets, weights, aligned.counts, p, q);

  TomographyResult result;
  result.log_likelihood.push_back(ll + ll_const);

  bool converged = false;
  int iterations = 0;
  RealVector p_cand(m), q_cand(m);
  for (int iter = 0; iter < problem.options.max_iterations; ++iter) {
    RealVector scale(m);
    for (int e = 0; e < m; ++e)
      scale(e) = weights(e) * (aligned.counts[static_cast<size_t>(e)] / aligned.total) / p(e);
    const Matrix r_op = kets * scale.cast<Complex>().asDiagonal() * kets.adjoint();
    const Matrix step = gram_solver.solve(r_op);

    bool accepted = false;
    double ll_next = ll;
    Matrix rho_next;
    for (double eps = 1.0; eps > 1e-10; eps *= 0.25) {
      const Matrix mix = (1.0 - eps) * Matrix::Identity(dim, dim) + eps * step;
      Matrix cand = hermitize(mix * rho * mix.adjoint());
      const double tr = cand.trace().real();
      if (!(tr > 0.0)) continue;
      cand /= tr;
      const double cand_ll =
          detail::multinomial_ll(cand, kets, weights, aligned.counts, p_cand, q_cand);
      if (cand_ll >= ll) {
        accepted = true;
        ll_next = cand_ll;
        rho_next = std::move(cand);
        break;
      }
    }
    if (!accepted) {  // no ascent direction left: stationary point
      converged = true;
      break;
    }
    const double gain = ll_next - ll;
    rho = std::move(rho_next);
    ll = ll_next;
    p = p_cand;
    q = q_cand;
    ++iterations;
    result.log_likelihood.push_back(ll + ll_const);
    if (gain < problem.options.tolerance) {
      converged = true;
      break;
    }
  }

  result.rho = DensityOperator(std::move(rho), pair_layout(problem.set.local_dim));
  result.iterations = iterations;
  result.converged = converged;
  result.intensity = aligned.total / q.sum();
  return result;
}

inline TomographyResult reconstruct(const TomographyProblem& problem) {
  if (problem.method == TomographyMethod::Mle) return mle_reconstruct(problem);
  const LinearInversionResult lin = linear_inversion(problem);
  TomographyResult result;
  result.rho = lin.rho;
  result.iterations = 0;
  result.converged = true;
  result.intensity = lin.intensity;
  return result;
}

struct BootstrapReport {
  int resamples = 0;
  std::optional<double> tangle_std;
  std::optional<double> linear_entropy_std;
  std::optional<double> fidelity_std;  // only when a target is supplied
  std::optional<double> negativity_std;
};

/// Parametric bootstrap: redraw every count from Poisson(mu_hat) with
/// mu_hat the fitted means, re-run the reconstruction, and report sample
/// standard deviations of the derived metrics. Needs at least two
/// resamples to produce values.
inline BootstrapReport bootstrap_errors(const TomographyProblem& problem,
                                        const TomographyResult& result, int n_resamples,
                                        std::uint64_t seed = 0,
                                        const std::optional<DensityOperator>& target = std::nullopt) {
  if (!result.converged)
    throw ValidationError("bootstrap: reconstruction did not converge");
  if (n_resamples < 0) throw ValidationError("bootstrap: negative resample count");
  BootstrapReport report;
  report.resamples = n_resamples;
  if (n_resamples == 0) return report;

  const auto aligned = detail::align_counts(problem.set, problem.counts);
  const int m1 = static_cast<int>(problem.set.kets.size());
  const int m = static_cast<int>(aligned.counts.size());
  const Matrix kets = detail::joint_ket_columns(problem.set);
  RealVector weights(m);
  for (int e = 0; e < m; ++e)
    weights(e) = aligned.durations[static_cast<size_t>(e)] / aligned.mean_duration;
  RealVector p(m), q(m);
  detail::multinomial_ll(result.rho.matrix, kets, weights, aligned.counts, p, q);
  const RealVector mu = result.intensity * q;

  std::vector<double> tangles, entropies, fidelities, negativities;
  for (int r = 0; r < n_resamples; ++r) {
    SplitMix64 stream = record_stream(seed, static_cast<std::uint64_t>(r));
    TomographyProblem redraw = problem;
    redraw.counts.clear();
    for (int i = 0; i < m1; ++i) {
      for (int j = 0; j < m1; ++j) {
        const size_t e = static_cast<size_t>(i) * static_cast<size_t>(m1) +
                         static_cast<size_t>(j);
        CountRecord rec;
        rec.setting_id_a = problem.set.kets[static_cast<size_t>(i)].id;
        rec.setting_id_b = problem.set.kets[static_cast<size_t>(j)].id;
        rec.counts = poisson(mu(static_cast<int>(e)), stream);
        rec.duration = aligned.durations[e];
        redraw.counts.push_back(std::move(rec));
      }
    }
    const TomographyResult refit = mle_reconstruct(redraw);
    const MetricReport metrics = metric_report(refit.rho, target);
    if (metrics.tangle) tangles.push_back(*metrics.tangle);
    entropies.push_back(metrics.linear_entropy);
    if (metrics.fidelity) fidelities.push_back(*metrics.fidelity);
    negativities.push_back(metrics.negativity);
  }

  const auto sample_std = [](const std::vector<double>& xs) -> std::optional<double> {
    if (xs.size() < 2) return std::nullopt;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
  };
  if (tangles.size() == static_cast<size_t>(n_resamples)) report.tangle_std = sample_std(tangles);
  report.linear_entropy_std = sample_std(entropies);
  if (fidelities.size() == static_cast<size_t>(n_resamples))
    report.fidelity_std = sample_std(fidelities);
  report.negativity_std = sample_std(negativities);
  return report;
}

}  // namespace hyperpair
