#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "hyperpair/metrics.hpp"
#include "hyperpair/source.hpp"
#include "hyperpair/tomography.hpp"
#include "test_helpers.hpp"
#include "properties.hpp"

using namespace hyperpair;

namespace {

std::vector<CountRecord> noiseless_records(const ProjectorSet& set, const DensityOperator& rho,
                                           double scale) {
  return hpprop::detail::noiseless_counts_for(set, rho, scale);
}

std::vector<CountRecord> poisson_records(const ProjectorSet& set, const DensityOperator& rho,
                                         double scale, std::uint64_t seed) {
  return hpprop::detail::poisson_counts_for(set, rho, scale, seed);
}

TomographyProblem problem_for(const ProjectorSet& set, std::vector<CountRecord> counts) {
  TomographyProblem problem;
  problem.set = set;
  problem.counts = std::move(counts);
  return problem;
}

}  // namespace

TEST_CASE("canonical projector sets") {
  SECTION("qubit set lists basis, real, and imaginary superpositions") {
    const ProjectorSet set = canonical_set(2);
    REQUIRE(set.local_dim == 2);
    REQUIRE(set.kets.size() == 4);
    REQUIRE(set.kets[0].id == "b0");
    REQUIRE(set.kets[1].id == "b1");
    REQUIRE(set.kets[2].id == "s0_1");
    REQUIRE(set.kets[3].id == "i0_1");

    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    CHECK(std::abs(set.kets[0].ket(0) - 1.0) < 1e-15);
    CHECK(std::abs(set.kets[0].ket(1)) < 1e-15);
    CHECK(std::abs(set.kets[2].ket(0) - inv_sqrt2) < 1e-15);
    CHECK(std::abs(set.kets[2].ket(1) - inv_sqrt2) < 1e-15);
    CHECK(std::abs(set.kets[3].ket(0) - inv_sqrt2) < 1e-15);
    CHECK(std::abs(set.kets[3].ket(1) - Complex(0.0, inv_sqrt2)) < 1e-15);
  }

  SECTION("set sizes are the squared local dimension") {
    for (int d : {2, 3, 4, 6}) {
      const ProjectorSet set = canonical_set(d);
      REQUIRE(static_cast<int>(set.kets.size()) == d * d);
      for (const ProjectorKet& entry : set.kets)
        CHECK(std::abs(entry.ket.norm() - 1.0) < 1e-12);
    }
  }

  SECTION("pair ids enumerate ordered index pairs") {
    const ProjectorSet set = canonical_set(3);
    int superpositions = 0;
    for (const ProjectorKet& entry : set.kets)
      if (entry.id[0] == 's' || entry.id[0] == 'i') ++superpositions;
    CHECK(superpositions == 6);  // two kets per unordered pair of three levels
  }

  SECTION("degenerate local dimension is rejected") {
    CHECK_THROWS_AS(canonical_set(1), ValidationError);
    CHECK_THROWS_AS(canonical_set(0), ValidationError);
  }
}

TEST_CASE("projector set validation") {
  const Vector e0 = basis_ket(2, 0);
  const Vector e1 = basis_ket(2, 1);
  const Vector diag = (e0 + e1) / std::numbers::sqrt2;
  const Vector anti = (e0 - e1) / std::numbers::sqrt2;
  const Vector circ = (e0 + Complex(0.0, 1.0) * e1) / std::numbers::sqrt2;

  SECTION("wrong ket count") {
    CHECK_THROWS_AS(make_projector_set(2, {{"a", e0}, {"b", e1}, {"c", diag}}), ValidationError);
  }

  SECTION("duplicate or empty ids") {
    CHECK_THROWS_AS(
        make_projector_set(2, {{"a", e0}, {"a", e1}, {"c", diag}, {"d", circ}}), ValidationError);
    CHECK_THROWS_AS(
        make_projector_set(2, {{"", e0}, {"b", e1}, {"c", diag}, {"d", circ}}), ValidationError);
  }

  SECTION("wrong dimension or non-unit kets") {
    CHECK_THROWS_AS(
        make_projector_set(2, {{"a", basis_ket(3, 0)}, {"b", e1}, {"c", diag}, {"d", circ}}),
        ValidationError);
    CHECK_THROWS_AS(
        make_projector_set(2, {{"a", 2.0 * e0}, {"b", e1}, {"c", diag}, {"d", circ}}),
        ValidationError);
  }

  SECTION("kets within the norm tolerance are renormalized") {
    const ProjectorSet set =
        make_projector_set(2, {{"a", (1.0 + 1e-8) * e0}, {"b", e1}, {"c", diag}, {"d", circ}});
    CHECK(std::abs(set.kets[0].ket.norm() - 1.0) < 1e-12);
  }

  SECTION("projectors that do not span are rejected") {
    // P_diag + P_anti = P_0 + P_1, so only three projectors are independent.
    CHECK_THROWS_AS(
        make_projector_set(2, {{"a", e0}, {"b", e1}, {"c", diag}, {"d", anti}}), NumericalError);
  }
}

TEST_CASE("joint projector family spans the two-photon operators") {
  SECTION("explicit joint rank for small dimensions") {
    for (int d : {2, 3}) {
      const ProjectorSet set = canonical_set(d);
      const int m1 = d * d;
      std::vector<ProjectorKet> joint;
      for (int i = 0; i < m1; ++i)
        for (int j = 0; j < m1; ++j)
          joint.push_back({set.kets[i].id + "/" + set.kets[j].id,
                           kron(set.kets[i].ket, set.kets[j].ket)});
      CHECK(hyperpair::detail::matrix_rank(hyperpair::detail::projector_gram(joint)) == m1 * m1);
    }
  }

  SECTION("spatial-pair dimension via the product structure") {
    // The joint Gram is the Kronecker square of the per-photon Gram, and the
    // rank of a Kronecker product is the product of the ranks, so a full
    // per-photon rank of 36 gives the full joint rank of 1296.
    const ProjectorSet set = canonical_set(6);
    const Eigen::MatrixXd gram = hyperpair::detail::projector_gram(set.kets);
    REQUIRE(hyperpair::detail::matrix_rank(gram) == 36);

    SplitMix64 pick(4821);
    for (int sample = 0; sample < 12; ++sample) {
      const int i = static_cast<int>(pick.next() % 36);
      const int j = static_cast<int>(pick.next() % 36);
      const int k = static_cast<int>(pick.next() % 36);
      const int l = static_cast<int>(pick.next() % 36);
      const Vector left = kron(set.kets[i].ket, set.kets[j].ket);
      const Vector right = kron(set.kets[k].ket, set.kets[l].ket);
      const double overlap = std::norm((left.adjoint() * right)(0));
      CHECK(std::abs(overlap - gram(i, k) * gram(j, l)) < 1e-12);
    }
  }
}

TEST_CASE("linear inversion") {
  const ProjectorSet set = canonical_set(2);
  const DensityOperator phi = make_named_state("phi+_poln");

  SECTION("noiseless counts reproduce the state") {
    const LinearInversionResult out =
        linear_inversion(problem_for(set, noiseless_records(set, phi, 0x1p40)));
    CHECK(hptest::frobenius_diff(out.rho.matrix, phi.matrix) < 1e-9);
    CHECK(out.physical);
    CHECK(out.min_eigenvalue > -1e-9);
    CHECK(std::abs(out.intensity / 0x1p40 - 1.0) < 1e-9);
  }

  SECTION("noiseless counts reproduce the maximally mixed state") {
    const DensityOperator white(Matrix::Identity(4, 4) / 4.0, pair_layout(2));
    const LinearInversionResult out =
        linear_inversion(problem_for(set, noiseless_records(set, white, 0x1p40)));
    CHECK(hptest::frobenius_diff(out.rho.matrix, white.matrix) < 1e-9);
    CHECK(out.physical);
  }

  SECTION("statistical error shrinks into the expected band at 1e4 counts") {
    for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
      const LinearInversionResult out =
          linear_inversion(problem_for(set, poisson_records(set, phi, 1e4, seed)));
      CHECK(hptest::frobenius_diff(out.rho.matrix, phi.matrix) < 0.08);
      CHECK(std::abs(out.intensity - 1e4) < 600.0);
    }
  }

  SECTION("sparse counts can leave the physical set") {
    const LinearInversionResult out =
        linear_inversion(problem_for(set, poisson_records(set, phi, 100.0, 1)));
    CHECK_FALSE(out.physical);
    CHECK(out.min_eigenvalue < -1e-6);
    CHECK(std::abs(trace_real(out.rho.matrix) - 1.0) < 1e-12);
    CHECK(hptest::max_abs_diff(out.rho.matrix, out.rho.matrix.adjoint()) == 0.0);
  }

  SECTION("per-record durations divide out of the rates") {
    std::vector<CountRecord> records = noiseless_records(set, phi, 0x1p30);
    for (size_t e = 0; e < records.size(); ++e) {
      const double duration = (e % 2 == 0) ? 1.0 : 3.0;
      records[e].duration = duration;
      records[e].counts = std::llround(
          static_cast<double>(records[e].counts) * duration);
    }
    const LinearInversionResult out = linear_inversion(problem_for(set, records));
    CHECK(hptest::frobenius_diff(out.rho.matrix, phi.matrix) < 1e-6);
    CHECK(std::abs(out.intensity / (0x1p30 * 2.0) - 1.0) < 1e-6);  // mean duration is 2
  }

  SECTION("all-zero counts have no positive flux solution") {
    std::vector<CountRecord> records = noiseless_records(set, phi, 0x1p40);
    for (CountRecord& rec : records) rec.counts = 0;
    CHECK_THROWS_AS(linear_inversion(problem_for(set, records)), NumericalError);
  }

  SECTION("record bookkeeping is validated") {
    const std::vector<CountRecord> records = noiseless_records(set, phi, 0x1p40);

    std::vector<CountRecord> missing(records.begin(), records.end() - 1);
    CHECK_THROWS_AS(linear_inversion(problem_for(set, missing)), ValidationError);

    std::vector<CountRecord> duplicated = records;
    duplicated.push_back(records.front());
    CHECK_THROWS_AS(linear_inversion(problem_for(set, duplicated)), ValidationError);

    std::vector<CountRecord> unknown = records;
    unknown.front().setting_id_a = "nope";
    CHECK_THROWS_AS(linear_inversion(problem_for(set, unknown)), ValidationError);

    std::vector<CountRecord> negative = records;
    negative.front().counts = -1;
    CHECK_THROWS_AS(linear_inversion(problem_for(set, negative)), ValidationError);

    std::vector<CountRecord> stopped = records;
    stopped.front().duration = 0.0;
    CHECK_THROWS_AS(linear_inversion(problem_for(set, stopped)), ValidationError);
  }

  SECTION("a dependent projector family cannot be inverted") {
    const Vector e0 = basis_ket(2, 0);
    const Vector e1 = basis_ket(2, 1);
    ProjectorSet dependent;
    dependent.local_dim = 2;
    dependent.kets = {{"a", e0},
                      {"b", e1},
                      {"c", (e0 + e1) / std::numbers::sqrt2},
                      {"d", (e0 - e1) / std::numbers::sqrt2}};
    std::vector<CountRecord> records;
    for (const ProjectorKet& a : dependent.kets)
      for (const ProjectorKet& b : dependent.kets)
        records.push_back({a.id, b.id, 100, 1.0, std::nullopt});
    CHECK_THROWS_AS(linear_inversion(problem_for(dependent, std::move(records))), NumericalError);
  }
}

TEST_CASE("iterative maximum-likelihood reconstruction") {
  const ProjectorSet set = canonical_set(2);
  const DensityOperator phi = make_named_state("phi+_poln");

  SECTION("noiseless counts recover the pure state") {
    const TomographyResult out =
        mle_reconstruct(problem_for(set, noiseless_records(set, phi, 0x1p40)));
    CHECK(fidelity(out.rho, phi) > 1.0 - 1e-8);
    CHECK(out.converged);
    CHECK(out.iterations < 1000);
    CHECK(std::abs(out.intensity / 0x1p40 - 1.0) < 1e-9);
    REQUIRE(out.log_likelihood.size() == static_cast<size_t>(out.iterations) + 1);
    for (size_t i = 1; i < out.log_likelihood.size(); ++i)
      CHECK(out.log_likelihood[i] >= out.log_likelihood[i - 1]);
  }

  SECTION("uniform counts settle on the maximally mixed state immediately") {
    std::vector<CountRecord> records;
    for (const ProjectorKet& a : set.kets)
      for (const ProjectorKet& b : set.kets)
        records.push_back({a.id, b.id, 500, 1.0, std::nullopt});
    const TomographyResult out = mle_reconstruct(problem_for(set, records));
    CHECK(hptest::frobenius_diff(out.rho.matrix, Matrix::Identity(4, 4) / 4.0) < 1e-12);
    CHECK(out.converged);
    CHECK(out.iterations == 1);
    // 8000 counts against a uniform Born weight of 1/4 per element
    CHECK(std::abs(out.intensity - 2000.0) < 1e-9);
  }

  SECTION("per-record durations reweight the fit") {
    std::vector<CountRecord> records = noiseless_records(set, phi, 0x1p30);
    for (size_t e = 0; e < records.size(); ++e) {
      const double duration = (e % 2 == 0) ? 1.0 : 3.0;
      records[e].duration = duration;
      records[e].counts = std::llround(
          static_cast<double>(records[e].counts) * duration);
    }
    const TomographyResult out = mle_reconstruct(problem_for(set, records));
    CHECK(fidelity(out.rho, phi) > 1.0 - 1e-6);
    CHECK(std::abs(out.intensity / (0x1p30 * 2.0) - 1.0) < 1e-6);
  }

  SECTION("iteration cap reports an unconverged fit") {
    TomographyProblem problem = problem_for(set, poisson_records(set, phi, 1e4, 21));
    problem.options.max_iterations = 1;
    const TomographyResult out = mle_reconstruct(problem);
    CHECK_FALSE(out.converged);
    CHECK(out.iterations == 1);
  }

  SECTION("method dispatch") {
    TomographyProblem problem = problem_for(set, poisson_records(set, phi, 1e4, 21));
    problem.method = TomographyMethod::Linear;
    const TomographyResult via_dispatch = reconstruct(problem);
    const LinearInversionResult direct = linear_inversion(problem);
    CHECK(hptest::max_abs_diff(via_dispatch.rho.matrix, direct.rho.matrix) == 0.0);
    CHECK(via_dispatch.converged);
    CHECK(via_dispatch.iterations == 0);
    CHECK(via_dispatch.intensity == direct.intensity);

    problem.method = TomographyMethod::Mle;
    const TomographyResult via_mle = reconstruct(problem);
    CHECK(via_mle.iterations > 0);
  }

  SECTION("degenerate problems are rejected") {
    std::vector<CountRecord> zeros = noiseless_records(set, phi, 0x1p40);
    for (CountRecord& rec : zeros) rec.counts = 0;
    CHECK_THROWS_AS(mle_reconstruct(problem_for(set, zeros)), ValidationError);

    TomographyProblem bad_iter = problem_for(set, noiseless_records(set, phi, 0x1p40));
    bad_iter.options.max_iterations = 0;
    CHECK_THROWS_AS(mle_reconstruct(bad_iter), ValidationError);

    TomographyProblem bad_tol = problem_for(set, noiseless_records(set, phi, 0x1p40));
    bad_tol.options.tolerance = 0.0;
    CHECK_THROWS_AS(mle_reconstruct(bad_tol), ValidationError);
  }

  SECTION("full spatial-pair reconstruction from noisy counts") {
    const ProjectorSet spatial_set = canonical_set(6);
    DensityOperator target = make_named_state("fig2_fit");
    target.layout = pair_layout(6);

    TomographyProblem problem =
        problem_for(spatial_set, poisson_records(spatial_set, target, 1e4, 99));
    problem.options.tolerance = 1e-6;
    problem.options.max_iterations = 600;
    const TomographyResult out = mle_reconstruct(problem);

    CHECK(fidelity(out.rho, target) > 0.995);
    CHECK(std::abs(negativity(out.rho) - negativity(target)) < 0.03);
    CHECK(std::abs(out.intensity - 1e4) < 500.0);
    CHECK(is_valid(out.rho));
  }
}

TEST_CASE("bootstrap error bars") {
  const ProjectorSet set = canonical_set(2);
  const DensityOperator phi = make_named_state("phi+_poln");
  const TomographyProblem noisy = problem_for(set, poisson_records(set, phi, 1e4, 5));
  const TomographyResult fit = mle_reconstruct(noisy);
  REQUIRE(fit.converged);

  SECTION("zero resamples yield an empty report") {
    const BootstrapReport report = bootstrap_errors(noisy, fit, 0, 11);
    CHECK(report.resamples == 0);
    CHECK_FALSE(report.tangle_std.has_value());
    CHECK_FALSE(report.linear_entropy_std.has_value());
    CHECK_FALSE(report.fidelity_std.has_value());
    CHECK_FALSE(report.negativity_std.has_value());
  }

  SECTION("invalid inputs are rejected") {
    CHECK_THROWS_AS(bootstrap_errors(noisy, fit, -1, 11), ValidationError);
    TomographyResult unconverged = fit;
    unconverged.converged = false;
    CHECK_THROWS_AS(bootstrap_errors(noisy, unconverged, 8, 11), ValidationError);
  }

  SECTION("noisy qubit-pair data produce finite spreads") {
    const BootstrapReport report =
        bootstrap_errors(noisy, fit, 40, 11, std::optional<DensityOperator>(phi));
    REQUIRE(report.tangle_std.has_value());
    REQUIRE(report.linear_entropy_std.has_value());
    REQUIRE(report.fidelity_std.has_value());
    REQUIRE(report.negativity_std.has_value());
    CHECK(*report.tangle_std > 1e-5);
    CHECK(*report.tangle_std < 1e-3);
    CHECK(*report.linear_entropy_std > 1e-6);
    CHECK(*report.linear_entropy_std < 1e-3);
    CHECK(*report.fidelity_std > 1e-6);
    CHECK(*report.fidelity_std < 1e-3);
    CHECK(*report.negativity_std > 1e-6);
    CHECK(*report.negativity_std < 1e-3);
  }

  SECTION("without a target the fidelity spread is absent") {
    const BootstrapReport report = bootstrap_errors(noisy, fit, 8, 11);
    CHECK_FALSE(report.fidelity_std.has_value());
    CHECK(report.negativity_std.has_value());
  }

  SECTION("resampling is deterministic in the seed") {
    const BootstrapReport first =
        bootstrap_errors(noisy, fit, 12, 11, std::optional<DensityOperator>(phi));
    const BootstrapReport second =
        bootstrap_errors(noisy, fit, 12, 11, std::optional<DensityOperator>(phi));
    CHECK(*first.tangle_std == *second.tangle_std);
    CHECK(*first.negativity_std == *second.negativity_std);
  }

  SECTION("spreads shrink with the count scale") {
    const BootstrapReport small =
        bootstrap_errors(noisy, fit, 16, 12, std::optional<DensityOperator>(phi));

    TomographyProblem giant = problem_for(set, noiseless_records(set, phi, 1e6));
    giant.options.max_iterations = 1500;
    const TomographyResult giant_fit = mle_reconstruct(giant);
    const BootstrapReport large =
        bootstrap_errors(giant, giant_fit, 16, 12, std::optional<DensityOperator>(phi));

    CHECK(*large.tangle_std < *small.tangle_std / 3.0);
    CHECK(*large.fidelity_std < *small.fidelity_std / 3.0);
    CHECK(*large.negativity_std < *small.negativity_std / 3.0);
  }
}

TEST_CASE("tomography properties hold across seeded runs") {
  CHECK_NOTHROW(hpprop::mle_trace_monotone_and_physical());
  CHECK_NOTHROW(hpprop::linear_matches_mle_on_noiseless());
  CHECK_NOTHROW(hpprop::mle_record_order_invariance());
}
