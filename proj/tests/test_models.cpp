#include "renyiqnn/models.hpp"
#include "test_util.hpp"

#include <catch_amalgamated.hpp>

using namespace renyiqnn;
using namespace testutil;
using Catch::Approx;

namespace {

UQNNParams single_gate(char axis, double theta) {
  UQNNParams p{1, 0, {PauliTerm{1.0, {{0, axis_from_char(axis)}}}}, RealVector::Constant(1, theta)};
  return p;
}

}  // namespace

TEST_CASE("zero angles leave the register in |0...0>", "[models]") {
  std::mt19937_64 rng(1);
  auto p = make_uqnn(2, 1, Layout::exhaustive, 1, rng);
  p.thetas.setZero();
  const auto s = uqnn_full_state(p);
  REQUIRE(max_abs(s.mat() - DensityMatrix::basis_state(3, 0).mat()) < 1e-14);
  const auto v = uqnn_visible_state(p);
  REQUIRE(max_abs(v.mat() - DensityMatrix::basis_state(2, 0).mat()) < 1e-14);
}

TEST_CASE("x rotation by pi/2 flips a qubit", "[models]") {
  const auto s = uqnn_full_state(single_gate('x', M_PI / 2));
  REQUIRE(max_abs(s.mat() - DensityMatrix::basis_state(1, 1).mat()) < 1e-14);
}

TEST_CASE("angles are 2 pi periodic", "[models]") {
  std::mt19937_64 rng(2);
  auto p = make_uqnn(2, 1, Layout::exhaustive, 1, rng);
  auto q = p;
  q.thetas[3] += 2 * M_PI;
  REQUIRE(max_abs(uqnn_full_state(p).mat() - uqnn_full_state(q).mat()) < 1e-12);
}

TEST_CASE("full state is pure for random parameters", "[models]") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    auto p = make_uqnn(2, 2, t % 2 ? Layout::brick : Layout::exhaustive, 1 + t % 3, rng);
    REQUIRE(uqnn_full_state(p).purity() == Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("visible state of n_h = 0 equals the full state", "[models]") {
  std::mt19937_64 rng(4);
  auto p = make_uqnn(3, 0, Layout::exhaustive, 1, rng);
  REQUIRE(max_abs(uqnn_visible_state(p).mat() - uqnn_full_state(p).mat()) < 1e-15);
}

TEST_CASE("Bell-generating parameters give a maximally mixed visible qubit", "[models]") {
  // exp(-i pi/4 x0 y1) |00> = (|00> - |11>)/sqrt 2 up to phases
  UQNNParams p{1, 1, {PauliTerm{1.0, {{0, Axis::x}, {1, Axis::y}}}}, RealVector::Constant(1, M_PI / 4)};
  const auto v = uqnn_visible_state(p);
  REQUIRE(max_abs(v.mat() - ComplexMatrix::Identity(2, 2) / 2.0) < 1e-14);
}

TEST_CASE("statevector applies the first-listed gate last", "[models]") {
  // G_1 = exp(-i pi/2 z), G_2 = exp(-i pi/2 x): G_1 G_2 |0> = -i z (-i x)|0> = -|1>·(-1)
  UQNNParams p{1, 0, {PauliTerm{1.0, {{0, Axis::z}}}, PauliTerm{1.0, {{0, Axis::x}}}},
               RealVector::Constant(2, M_PI / 2)};
  const auto psi = uqnn_statevector(p);
  const ComplexMatrix g1 = herm_expm(pauli('z'), 0.0) * std::cos(M_PI / 2) - kI * std::sin(M_PI / 2) * pauli('z');
  const ComplexMatrix g2 = herm_expm(pauli('x'), 0.0) * std::cos(M_PI / 2) - kI * std::sin(M_PI / 2) * pauli('x');
  ComplexVector zero = ComplexVector::Zero(2);
  zero[0] = 1;
  REQUIRE((psi - g1 * g2 * zero).norm() < 1e-14);
}

TEST_CASE("conjugated generator", "[models]") {
  std::mt19937_64 rng(5);
  auto p = make_uqnn(2, 1, Layout::exhaustive, 1, rng);
  SECTION("first index is not conjugated") {
    REQUIRE(max_abs(conjugated_generator(p, 0) - dense(p.generators[0], 3)) == 0.0);
  }
  SECTION("zero angles leave every generator unchanged") {
    auto q = p;
    q.thetas.setZero();
    for (long k = 0; k < q.size(); k += 7)
      REQUIRE(max_abs(conjugated_generator(q, k) - dense(q.generators[k], 3)) < 1e-14);
  }
  SECTION("Hermitian involution with the spectrum of the bare generator") {
    for (long k : {3L, 17L, 35L}) {
      const ComplexMatrix h = conjugated_generator(p, k);
      REQUIRE(hermiticity_defect(h) < 1e-12);
      REQUIRE(max_abs(h * h - ComplexMatrix::Identity(8, 8)) < 1e-10);
      HermitianEigen a(h), b(dense(p.generators[k], 3));
      REQUIRE((a.values - b.values).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SECTION("matches the literal product of dense gate unitaries") {
    const long k = 11;
    ComplexMatrix v = ComplexMatrix::Identity(8, 8);
    for (long j = 0; j < k; ++j) {
      const ComplexMatrix hj = dense(p.generators[j], 3);
      v = v * (std::cos(p.thetas[j]) * ComplexMatrix::Identity(8, 8) - kI * std::sin(p.thetas[j]) * hj);
    }
    const ComplexMatrix expect = v * dense(p.generators[k], 3) * v.adjoint();
    REQUIRE(max_abs(conjugated_generator(p, k) - expect) < 1e-12);
  }
  SECTION("index out of range") {
    REQUIRE_THROWS_AS(conjugated_generator(p, p.size()), Error);
    REQUIRE_THROWS_AS(conjugated_generator(p, -1), Error);
  }
}

TEST_CASE("state derivative matches central differences", "[models]") {
  std::mt19937_64 rng(6);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int nv = 1 + trial % 2, nh = trial % 3 == 0 ? 0 : 1;
    auto p = make_uqnn(nv, nh, trial % 2 ? Layout::brick : Layout::exhaustive, 1, rng);
    const long k = std::uniform_int_distribution<long>(0, p.size() - 1)(rng);
    const ComplexMatrix d = uqnn_state_derivative(p, k);
    REQUIRE(std::abs(d.trace()) < 1e-12);
    REQUIRE(hermiticity_defect(d) < 1e-12);
    const double h = 1e-5;
    auto up = p, dn = p;
    up.thetas[k] += h;
    dn.thetas[k] -= h;
    const ComplexMatrix fd = (uqnn_full_state(up).mat() - uqnn_full_state(dn).mat()) / (2 * h);
    worst = std::max(worst, max_abs(d - fd));
  }
  REQUIRE(worst < 1e-8);
}

TEST_CASE("state derivative vanishes for a z generator acting first on |0>", "[models]") {
  UQNNParams p{1, 0, {PauliTerm{1.0, {{0, Axis::x}}}, PauliTerm{1.0, {{0, Axis::z}}}},
               RealVector::Constant(2, 0.7)};
  REQUIRE(max_abs(uqnn_state_derivative(p, 1)) < 1e-14);
}

TEST_CASE("adjoint pullback equals the dense trace contraction", "[models]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int nv = 1 + trial % 3, nh = trial % 3;
    auto p = make_uqnn(nv, nh, Layout::exhaustive, 1, rng);
    const ComplexMatrix lambda = random_hermitian(pow2(nv), rng);
    const RealVector g = uqnn_pullback(p, lambda);
    for (long k = 0; k < p.size(); k += 5) {
      const ComplexMatrix dv = partial_trace(uqnn_state_derivative(p, k), nv, nh);
      REQUIRE(g[k] == Approx(trace_product(lambda, dv).real()).margin(1e-11));
    }
  }
}

TEST_CASE("generators must be Hermitian unitaries", "[models]") {
  UQNNParams p{1, 0, {PauliTerm{0.5, {{0, Axis::x}}}}, RealVector::Zero(1)};
  REQUIRE_THROWS_AS(uqnn_full_state(p), Error);
  UQNNParams q{1, 0, {PauliTerm{-1.0, {{0, Axis::x}}}}, RealVector::Zero(2)};
  REQUIRE_THROWS_AS(uqnn_full_state(q), Error);
}

TEST_CASE("negative generators flip the rotation direction", "[models]") {
  UQNNParams a{1, 0, {PauliTerm{-1.0, {{0, Axis::y}}}}, RealVector::Constant(1, 0.3)};
  UQNNParams b{1, 0, {PauliTerm{1.0, {{0, Axis::y}}}}, RealVector::Constant(1, -0.3)};
  REQUIRE((uqnn_statevector(a) - uqnn_statevector(b)).norm() < 1e-15);
}

TEST_CASE("brick layout gate counts", "[models]") {
  // 3n singles; 9 per neighbouring pair
  REQUIRE(ansatz_generators(4, Layout::brick).size() == 12 + 9 * 3);
  REQUIRE(ansatz_generators(4, Layout::brick, 2).size() == 2 * (12 + 27));
  REQUIRE(ansatz_generators(3, Layout::exhaustive).size() == 9 + 27);
  REQUIRE_THROWS_AS(ansatz_generators(3, Layout::brick, 0), Error);
  REQUIRE(layout_from_string("brick") == Layout::brick);
  REQUIRE_THROWS_AS(layout_from_string("ladder"), Error);
}

TEST_CASE("QBM visible state", "[models]") {
  std::mt19937_64 rng(8);
  SECTION("zero weights give the maximally mixed state") {
    auto p = make_qbm(2, 1, rng);
    p.thetas.setZero();
    REQUIRE(max_abs(qbm_visible_state(p).mat() - ComplexMatrix::Identity(4, 4) / 4.0) < 1e-14);
  }
  SECTION("ln2 z on one qubit") {
    // e^{-H} = diag(1/2, 2)
    QBMParams p{1, 0, {PauliTerm{1.0, {{0, Axis::z}}}}, RealVector::Constant(1, std::log(2.0))};
    const auto s = qbm_visible_state(p);
    REQUIRE(s.mat()(0, 0).real() == Approx(1.0 / 5).margin(1e-14));
    REQUIRE(s.mat()(1, 1).real() == Approx(4.0 / 5).margin(1e-14));
    p.thetas[0] = std::log(2.0) / 2;
    const auto t = qbm_visible_state(p);
    REQUIRE(t.mat()(0, 0).real() == Approx(1.0 / 3).margin(1e-14));
    REQUIRE(t.mat()(1, 1).real() == Approx(2.0 / 3).margin(1e-14));
  }
  SECTION("random weights give a valid full-rank state") {
    for (int t = 0; t < 10; ++t) {
      auto p = make_qbm(2, 2, rng);
      const auto s = qbm_visible_state(p);
      REQUIRE_NOTHROW(s.validate());
      REQUIRE(HermitianEigen(s.mat()).values.minCoeff() > 0);
    }
  }
  SECTION("initial Hamiltonian has unit norm") {
    auto p = make_qbm(3, 1, rng);
    REQUIRE(op_norm(qbm_hamiltonian(p)) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("checkpoint round trip", "[models]") {
  std::mt19937_64 rng(9);
  auto p = make_uqnn(2, 1, Layout::brick, 1, rng);
  const auto c = make_checkpoint(p, 42, 17);
  const auto j = to_json(c);
  const auto back = checkpoint_from_json(nlohmann::json::parse(j.dump()));
  REQUIRE(back.kind == "uqnn");
  REQUIRE(back.epoch == 17);
  REQUIRE(back.rng_seed == 42);
  REQUIRE(back.generators.size() == p.generators.size());
  REQUIRE((back.thetas - p.thetas).cwiseAbs().maxCoeff() == 0.0);
  auto bad = j;
  bad["kind"] = "rbm";
  REQUIRE_THROWS_AS(checkpoint_from_json(bad), Error);
}
