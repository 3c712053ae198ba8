#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "hyperpair/metrics.hpp"
#include "properties.hpp"
#include "test_helpers.hpp"

using namespace hyperpair;
using namespace hptest;

namespace {

DensityOperator bell_phi_plus_op() {
  Vector v(4);
  v << 1, 0, 0, 1;
  v /= std::numbers::sqrt2;
  return outer(StateVector(v, pair_layout(2, Dof::Poln)));
}

}  // namespace

TEST_CASE("tangle of the reference states") {
  REQUIRE_THAT(tangle(bell_phi_plus_op()), Catch::Matchers::WithinAbs(1.0, 1e-10));

  std::mt19937_64 rng(82001);
  StateVector a(random_ket(2, rng), SubsystemLayout({{2, Party::A}}));
  StateVector b(random_ket(2, rng), SubsystemLayout({{2, Party::B}}));
  REQUIRE_THAT(tangle(outer(tensor(a, b))), Catch::Matchers::WithinAbs(0.0, 1e-9));
}

TEST_CASE("tangle of a Werner state matches the closed form") {
  // p Phi+ + (1-p) I/4 has concurrence max(0, (3p-1)/2)
  const double p = 0.9;
  DensityOperator werner(p * bell_phi_plus_op().matrix + (1.0 - p) * Matrix::Identity(4, 4) / 4.0,
                         pair_layout(2, Dof::Poln));
  REQUIRE_THAT(tangle(werner), Catch::Matchers::WithinAbs(0.85 * 0.85, 1e-10));
}

TEST_CASE("tangle rejects non-two-qubit inputs") {
  DensityOperator big(Matrix::Identity(9, 9) / 9.0, pair_layout(3));
  REQUIRE_THROWS_AS(tangle(big), ValidationError);
  // dimension 4 but a 4x1 party split is still not two qubits
  SubsystemLayout lopsided({{4, Party::A}, {1, Party::B}});
  DensityOperator skew(Matrix::Identity(4, 4) / 4.0, lopsided);
  REQUIRE_THROWS_AS(tangle(skew), ValidationError);
}

TEST_CASE("linear entropy endpoints") {
  std::mt19937_64 rng(82002);
  DensityOperator pure = outer(random_state_vector(pair_layout(6), rng));
  REQUIRE_THAT(linear_entropy(pure), Catch::Matchers::WithinAbs(0.0, 1e-10));

  DensityOperator mixed4(Matrix::Identity(4, 4) / 4.0, pair_layout(2));
  REQUIRE_THAT(linear_entropy(mixed4), Catch::Matchers::WithinAbs(1.0, 1e-12));

  DensityOperator mixed36(Matrix::Identity(36, 36) / 36.0, pair_layout(6));
  REQUIRE_THAT(linear_entropy(mixed36), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("fidelity basics") {
  std::mt19937_64 rng(82003);
  DensityOperator rho = random_density_operator(pair_layout(2), rng);
  REQUIRE_THAT(fidelity(rho, rho), Catch::Matchers::WithinAbs(1.0, 1e-9));

  SubsystemLayout qubit({{2, Party::A}});
  DensityOperator h(outer(StateVector(basis_ket(2, 0), qubit)));
  DensityOperator v(outer(StateVector(basis_ket(2, 1), qubit)));
  REQUIRE_THAT(fidelity(h, v), Catch::Matchers::WithinAbs(0.0, 1e-12));

  DensityOperator other(Matrix::Identity(3, 3) / 3.0, SubsystemLayout({{3, Party::A}}));
  REQUIRE_THROWS_AS(fidelity(h, other), ValidationError);
}

TEST_CASE("pure-target fidelity equals the direct overlap") {
  std::mt19937_64 rng(82004);
  const SubsystemLayout layout = pair_layout(2);
  for (int t = 0; t < 100; ++t) {
    DensityOperator rho = random_density_operator(layout, rng);
    StateVector psi = random_state_vector(layout, rng);
    const double direct = (psi.amplitudes.adjoint() * rho.matrix * psi.amplitudes)(0).real();
    REQUIRE_THAT(fidelity(rho, outer(psi)), Catch::Matchers::WithinAbs(direct, 1e-9));
  }
}

TEST_CASE("negativity anchors") {
  // maximally entangled 6x6 pair: N = 5
  Vector me = Vector::Zero(36);
  for (int j = 0; j < 6; ++j) me(j * 6 + j) = 1.0 / std::sqrt(6.0);
  DensityOperator big = outer(StateVector(me, pair_layout(6)));
  REQUIRE_THAT(negativity(big), Catch::Matchers::WithinAbs(5.0, 1e-9));

  DensityOperator phi = bell_phi_plus_op();
  REQUIRE_THAT(negativity(phi), Catch::Matchers::WithinAbs(1.0, 1e-10));
  REQUIRE_THAT(negativity(phi), Catch::Matchers::WithinAbs(std::sqrt(tangle(phi)), 1e-8));

  // transposing either party gives the same value
  std::mt19937_64 rng(82005);
  DensityOperator rnd = random_density_operator(pair_layout(3), rng);
  REQUIRE_THAT(negativity(rnd, Party::A), Catch::Matchers::WithinAbs(negativity(rnd, Party::B), 1e-10));
}

TEST_CASE("negativity of the balanced polarization-spatial pure state") {
  // Phi+ in polarization tensored with (|lr> + alpha|gg> + |rl>)/norm at
  // alpha = 1.88 exp(0.16 i pi). Closed form for the pure state:
  // N = 2 (2+|alpha|)^2 / (2+|alpha|^2) - 1 = 4.4403
  const Complex alpha = 1.88 * std::exp(Complex(0.0, 0.16 * std::numbers::pi));
  Vector poln(4);
  poln << 1, 0, 0, 1;
  Vector spa = Vector::Zero(9);
  spa(0 * 3 + 2) = 1.0;    // |l r>
  spa(1 * 3 + 1) = alpha;  // |g g>
  spa(2 * 3 + 0) = 1.0;    // |r l>
  StateVector psi(kron(poln, spa),
                  SubsystemLayout({{2, Party::A, Dof::Poln},
                                   {2, Party::B, Dof::Poln},
                                   {3, Party::A, Dof::Spatial},
                                   {3, Party::B, Dof::Spatial}}));
  psi.normalize();
  StateVector canonical = permute_subsystems(psi, {0, 2, 1, 3});
  const double n_pt = negativity(outer(canonical));
  REQUIRE_THAT(n_pt, Catch::Matchers::WithinAbs(4.44, 0.01));

  // Schmidt oracle: for pure states N = (sum of Schmidt roots)^2 - 1, and
  // the Schmidt spectrum is the spectrum of either marginal.
  DensityOperator marginal = partial_trace(outer(canonical), {0, 1});
  EigResult eig = eig_hermitian(marginal.matrix);
  double root_sum = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i)
    root_sum += std::sqrt(std::max(0.0, eig.values(i)));
  REQUIRE_THAT(n_pt, Catch::Matchers::WithinAbs(root_sum * root_sum - 1.0, 1e-9));
}

TEST_CASE("visibility of clean fringes") {
  std::vector<FringePoint> fringe;
  for (int k = 0; k < 8; ++k) {
    double phase = 2.0 * std::numbers::pi * k / 8.0;
    fringe.push_back({phase, 100.0 * (1.0 + std::cos(phase))});
  }
  REQUIRE_THAT(visibility(fringe), Catch::Matchers::WithinAbs(1.0, 1e-9));

  for (auto& p : fringe) p.rate = 42.0;
  REQUIRE_THAT(visibility(fringe), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("visibility recovers a damped phase-shifted fringe") {
  std::vector<FringePoint> fringe;
  for (int k = 0; k < 12; ++k) {
    double phase = 2.0 * std::numbers::pi * k / 12.0;
    fringe.push_back({phase, 250.0 * (1.0 + 0.985 * std::cos(phase + 0.7))});
  }
  REQUIRE_THAT(visibility(fringe), Catch::Matchers::WithinAbs(0.985, 1e-9));
}

TEST_CASE("visibility input validation") {
  std::vector<FringePoint> three = {{0.0, 1.0}, {2.0, 1.0}, {4.0, 1.0}};
  REQUIRE_THROWS_AS(visibility(three), ValidationError);

  std::vector<FringePoint> narrow = {{0.0, 1.0}, {0.3, 1.2}, {0.6, 1.1}, {0.9, 0.9}};
  REQUIRE_THROWS_AS(visibility(narrow), ValidationError);

  // negative-mean fringes cannot yield a contrast
  std::vector<FringePoint> negative;
  for (int k = 0; k < 8; ++k)
    negative.push_back({2.0 * std::numbers::pi * k / 8.0, -5.0});
  REQUIRE_THROWS_AS(visibility(negative), NumericalError);
}

TEST_CASE("metric report fields follow the input shape") {
  DensityOperator phi = bell_phi_plus_op();
  MetricReport with_target = metric_report(phi, phi);
  REQUIRE(with_target.tangle.has_value());
  REQUIRE(with_target.fidelity.has_value());
  REQUIRE_THAT(*with_target.fidelity, Catch::Matchers::WithinAbs(1.0, 1e-9));
  REQUIRE_THAT(with_target.purity, Catch::Matchers::WithinAbs(1.0, 1e-12));

  DensityOperator big(Matrix::Identity(36, 36) / 36.0, pair_layout(6));
  MetricReport plain = metric_report(big);
  REQUIRE_FALSE(plain.tangle.has_value());
  REQUIRE_FALSE(plain.fidelity.has_value());
  REQUIRE_THAT(plain.negativity, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("metrics property suite") {
  REQUIRE_NOTHROW(hpprop::negativity_vanishes_on_products());
  REQUIRE_NOTHROW(hpprop::negativity_is_root_tangle_on_pure());
  REQUIRE_NOTHROW(hpprop::entropy_purity_identity());
  REQUIRE_NOTHROW(hpprop::fidelity_symmetry());
}
