#include "renyiqnn/swaptest.hpp"
#include "test_util.hpp"

#include <catch_amalgamated.hpp>

using namespace renyiqnn;
using namespace testutil;
using Catch::Approx;

namespace {

SwapTestSpec random_spec(int n, int m, std::mt19937_64& rng) {
  SwapTestSpec s;
  for (int i = 0; i < n; ++i) {
    s.registers.push_back(random_state(m, rng));
    s.unitaries.push_back(haar_unitary(m, rng));
  }
  return s;
}

}  // namespace

TEST_CASE("cyclic shift", "[swaptest]") {
  REQUIRE(max_abs(cyclic_shift(1, 2) - ComplexMatrix::Identity(4, 4)) == 0.0);
  ComplexMatrix swap = ComplexMatrix::Zero(4, 4);
  swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1;
  REQUIRE(max_abs(cyclic_shift(2, 1) - swap) == 0.0);

  std::mt19937_64 rng(31);
  for (auto [n, m] : {std::pair{3, 1}, {3, 2}, {4, 1}}) {
    const ComplexMatrix s = cyclic_shift(n, m);
    const long d = s.rows();
    REQUIRE(max_abs(s.adjoint() * s - ComplexMatrix::Identity(d, d)) < 1e-15);
    ComplexMatrix p = ComplexMatrix::Identity(d, d);
    for (int i = 0; i < n; ++i) p = s * p;
    REQUIRE(max_abs(p - ComplexMatrix::Identity(d, d)) == 0.0);
    if (n == 1) continue;
    // S (A1 ⊗ ... ⊗ An) S† = An ⊗ A1 ⊗ ... ⊗ A_{n-1}
    std::vector<ComplexMatrix> a;
    for (int i = 0; i < n; ++i) a.push_back(random_complex(pow2(m), rng));
    ComplexMatrix lhs = a[0], rhs = a[n - 1];
    for (int i = 1; i < n; ++i) lhs = kron(lhs, a[i]);
    for (int i = 0; i < n - 1; ++i) rhs = kron(rhs, a[i]);
    REQUIRE(max_abs(s * lhs * s.adjoint() - rhs) < 1e-12);
  }
  REQUIRE_THROWS_AS(cyclic_shift(0, 1), Error);
}

TEST_CASE("swap test closed-form examples", "[swaptest]") {
  std::mt19937_64 rng(32);
  const ComplexMatrix i2 = ComplexMatrix::Identity(2, 2);
  SECTION("one register, pure state") {
    SwapTestSpec s{{random_pure(1, rng)}, {i2}};
    REQUIRE(swap_test_probability(s) == Approx(1.0).margin(1e-12));
  }
  SECTION("two maximally mixed qubits") {
    const auto mm = DensityMatrix::maximally_mixed(1);
    SwapTestSpec s{{mm, mm}, {i2, i2}};
    REQUIRE(swap_test_probability(s) == Approx(0.75).margin(1e-12));
  }
  SECTION("orthogonal pure states") {
    SwapTestSpec s{{DensityMatrix::basis_state(1, 0), DensityMatrix::basis_state(1, 1)}, {i2, i2}};
    REQUIRE(swap_test_probability(s) == Approx(0.5).margin(1e-12));
  }
}

TEST_CASE("circuit and closed form agree on random configurations", "[swaptest]") {
  std::mt19937_64 rng(33);
  double worst = 0;
  for (int n = 1; n <= 3; ++n)
    for (int m = 1; m <= 2; ++m)
      for (int t = 0; t < 5; ++t) {
        const auto s = random_spec(n, m, rng);
        worst = std::max(worst, std::abs(swap_test_circuit_probability(s) - swap_test_closed_form(s)));
        REQUIRE_NOTHROW(swap_test_probability(s));
      }
  REQUIRE(worst < 1e-10);
}

TEST_CASE("forward cyclic shift produces the reversed product", "[swaptest]") {
  std::mt19937_64 rng(34);
  const auto s = random_spec(3, 1, rng);
  ComplexMatrix rev = ComplexMatrix::Identity(2, 2);
  for (int i = 2; i >= 0; --i) rev = rev * s.unitaries[i] * s.registers[i].mat();
  const double expect = 0.5 * (1 + rev.trace().real());
  REQUIRE(swap_test_circuit_probability(s, ShiftDirection::forward) == Approx(expect).margin(1e-12));
  // and differs from the ordered product for non-commuting operators
  REQUIRE(std::abs(expect - swap_test_closed_form(s)) > 1e-4);
}

TEST_CASE("swap test input validation", "[swaptest]") {
  SwapTestSpec empty;
  REQUIRE_THROWS_AS(swap_test_probability(empty), Error);
  SwapTestSpec bad{{DensityMatrix::maximally_mixed(1)}, {2.0 * ComplexMatrix::Identity(2, 2)}};
  REQUIRE_THROWS_AS(swap_test_probability(bad), Error);
  SwapTestSpec mismatch{{DensityMatrix::maximally_mixed(1), DensityMatrix::maximally_mixed(2)},
                        {ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(4, 4)}};
  REQUIRE_THROWS_AS(swap_test_probability(mismatch), DimensionError);
}

TEST_CASE("trace power estimates", "[swaptest]") {
  std::mt19937_64 rng(35);
  SECTION("pure states give exactly one with zero error") {
    const auto e = trace_power_estimate(random_pure(2, rng), 3, 1000, rng);
    REQUIRE(e.mean == 1.0);
    REQUIRE(e.std_error == 0.0);
  }
  SECTION("maximally mixed qubit, m = 2") {
    const auto e = trace_power_estimate(DensityMatrix::maximally_mixed(1), 2, 200000, rng);
    REQUIRE(std::abs(e.mean - 0.5) < 4 * e.std_error);
    REQUIRE(e.std_error < 0.01);
  }
  SECTION("m = 1 is the trace") {
    const auto e = trace_power_estimate(random_state(2, rng), 1, 5000, rng);
    REQUIRE(e.mean == 1.0);
  }
  SECTION("coverage over seeded repetitions") {
    const auto rho = random_state(2, rng);
    for (int m : {2, 3, 4}) {
      ComplexMatrix pw = rho.mat();
      for (int i = 1; i < m; ++i) pw = pw * rho.mat();
      const double exact = pw.trace().real();
      int hits = 0;
      for (int t = 0; t < 100; ++t) {
        const auto e = trace_power_estimate(rho, m, 10000, rng);
        hits += std::abs(e.mean - exact) <= 4 * e.std_error;
      }
      REQUIRE(hits >= 95);
    }
  }
  SECTION("invalid arguments") {
    REQUIRE_THROWS_AS(trace_power_estimate(random_state(1, rng), 2, 0, rng), Error);
    REQUIRE_THROWS_AS(trace_power_estimate(random_state(1, rng), 0, 10, rng), Error);
  }
}

TEST_CASE("importance-sampled thermal gradient", "[swaptest]") {
  std::mt19937_64 rng(36);
  auto p = make_uqnn(2, 0, Layout::exhaustive, 1, rng);
  SECTION("zero target Hamiltonian") {
    LCUHamiltonian h{2, {}};
    const double exact = uqnn_grad_reverse(p, DensityMatrix::maximally_mixed(2))[3];
    const auto e = mc_reverse_gradient_thermal(p, h, 3, 100000, 30, rng);
    REQUIRE(std::abs(e.mean - exact) < 4 * e.std_error);
    REQUIRE(e.tail_bound == 0.0);
  }
  SECTION("unit-norm target with mixed-sign coefficients") {
    LCUHamiltonian h = random_two_local(2, 1.0, 1.0, rng);
    const double l1 = h.l1_norm();
    for (auto& t : h.terms) t.coeff /= l1;
    const long k = 7;
    const double exact = uqnn_grad_reverse(p, thermal_state(h))[k];
    const auto e = mc_reverse_gradient_thermal(p, h, k, 100000, 30, rng);
    INFO("estimate " << e.mean << " ± " << e.std_error << " exact " << exact);
    REQUIRE(std::abs(e.mean - exact) < 4 * e.std_error);
    REQUIRE(e.tail_bound < 1e-20);
    const auto e4 = mc_reverse_gradient_thermal(p, h, k, 400000, 30, rng);
    REQUIRE(e.std_error / e4.std_error == Approx(2.0).epsilon(0.2));
  }
  SECTION("hidden units are supported") {
    auto q = make_uqnn(2, 1, Layout::exhaustive, 1, rng);
    LCUHamiltonian h{2, {PauliTerm{0.4, {{0, Axis::x}}}, PauliTerm{-0.5, {{0, Axis::z}, {1, Axis::y}}}}};
    const double exact = uqnn_grad_reverse(q, thermal_state(h))[10];
    const auto e = mc_reverse_gradient_thermal(q, h, 10, 100000, 30, rng);
    REQUIRE(std::abs(e.mean - exact) < 4 * e.std_error);
  }
  SECTION("guards") {
    LCUHamiltonian big{2, {PauliTerm{25.0, {{0, Axis::x}}}}};
    REQUIRE_THROWS_AS(mc_reverse_gradient_thermal(p, big, 0, 100, 30, rng), Error);
    LCUHamiltonian wrong{3, {}};
    REQUIRE_THROWS_AS(mc_reverse_gradient_thermal(p, wrong, 0, 100, 30, rng), DimensionError);
    REQUIRE_THROWS_AS(mc_reverse_gradient_thermal(p, LCUHamiltonian{2, {}}, p.size(), 100, 30, rng), Error);
  }
}
