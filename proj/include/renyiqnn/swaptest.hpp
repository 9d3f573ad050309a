#pragma once

// Extended swap test, trace-power estimation and the importance-sampled
// reverse-divergence gradient for thermal targets.

#include "renyiqnn/divergence.hpp"
#include "renyiqnn/hamiltonians.hpp"
#include "renyiqnn/models.hpp"
#include "renyiqnn/states.hpp"

#include <random>
#include <vector>

namespace renyiqnn {

/// S₊|y₁ y₂ ... y_n> = |y_n y₁ ... y_{n-1}> on n registers of m qubits, so
/// S₊ (A₁ ⊗ ... ⊗ A_n) S₊† = A_n ⊗ A₁ ⊗ ... ⊗ A_{n-1}.
inline ComplexMatrix cyclic_shift(int n_regs, int m_qubits) {
  if (n_regs < 1 || m_qubits < 1) throw Error("cyclic_shift: need n_regs, m_qubits >= 1");
  const long dr = pow2(m_qubits);
  long d = 1;
  for (int i = 0; i < n_regs; ++i) d *= dr;
  check_dim(d);
  ComplexMatrix s = ComplexMatrix::Zero(d, d);
  std::vector<long> y(n_regs);
  for (long x = 0; x < d; ++x) {
    long r = x;
    for (int i = n_regs - 1; i >= 0; --i) {
      y[i] = r % dr;
      r /= dr;
    }
    long out = y[n_regs - 1];
    for (int i = 0; i < n_regs - 1; ++i) out = out * dr + y[i];
    s(out, x) = 1.0;
  }
  return s;
}

struct SwapTestSpec {
  std::vector<DensityMatrix> registers;
  std::vector<ComplexMatrix> unitaries;

  int n() const { return static_cast<int>(registers.size()); }

  void validate() const {
    if (registers.empty()) throw Error("swap test needs at least one register");
    if (registers.size() != unitaries.size())
      throw Error("swap test needs one unitary per register");
    const long d = registers.front().dim();
    for (std::size_t i = 0; i < registers.size(); ++i) {
      if (registers[i].dim() != d || unitaries[i].rows() != d || unitaries[i].cols() != d)
        throw DimensionError("swap test registers and unitaries must share one dimension");
      if (max_abs_unitarity_defect(unitaries[i]) > 1e-10)
        throw Error("swap test operator " + std::to_string(i) + " is not unitary");
    }
  }

 private:
  static double max_abs_unitarity_defect(const ComplexMatrix& u) {
    return (u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
  }
};

enum class ShiftDirection { forward, backward };

/// Explicit circuit: H on the ancilla, controlled-U_i on register i,
/// controlled cyclic shift of the registers, H on the ancilla. Returns the
/// probability of reading the ancilla as 0 from |0><0| ⊗ ρ₁ ⊗ ... ⊗ ρ_n.
///
/// With the backward shift S₊† this equals (1 + Re Tr(U₁ρ₁ U₂ρ₂ ... U_nρ_n))/2.
/// With S₊ the product comes out in the reverse register order.
inline double swap_test_circuit_probability(const SwapTestSpec& spec,
                                            ShiftDirection dir = ShiftDirection::backward) {
  spec.validate();
  const int n = spec.n();
  const int m = spec.registers.front().n_qubits();
  const long dr = spec.registers.front().dim();
  long d = 1;
  for (int i = 0; i < n; ++i) d *= dr;
  check_dim(2 * d);

  ComplexMatrix regs = spec.registers[0].mat();
  for (int i = 1; i < n; ++i) regs = kron(regs, spec.registers[i].mat());
  ComplexMatrix state = ComplexMatrix::Zero(2 * d, 2 * d);
  state.topLeftCorner(d, d) = regs;

  // Controlled gates are block-diagonal diag(I, W) with the ancilla as the
  // leading qubit.
  auto controlled = [d](const ComplexMatrix& w) {
    ComplexMatrix c = ComplexMatrix::Zero(2 * d, 2 * d);
    c.topLeftCorner(d, d).setIdentity();
    c.bottomRightCorner(d, d) = w;
    return c;
  };
  const double r2 = 1.0 / std::sqrt(2.0);
  ComplexMatrix had = ComplexMatrix::Zero(2 * d, 2 * d);
  had.topLeftCorner(d, d).setIdentity();
  had.topRightCorner(d, d).setIdentity();
  had.bottomLeftCorner(d, d).setIdentity();
  had.bottomRightCorner(d, d) = -ComplexMatrix::Identity(d, d);
  had *= r2;

  ComplexMatrix chi = had;
  for (int i = 0; i < n; ++i) {
    ComplexMatrix w = ComplexMatrix::Identity(1, 1);
    for (int j = 0; j < n; ++j)
      w = kron(w, j == i ? spec.unitaries[i] : ComplexMatrix::Identity(dr, dr));
    chi = controlled(w) * chi;
  }
  const ComplexMatrix s = cyclic_shift(n, m);
  chi = controlled(dir == ShiftDirection::backward ? ComplexMatrix(s.adjoint()) : s) * chi;
  chi = had * chi;

  const ComplexMatrix out = chi * state * chi.adjoint();
  return out.topLeftCorner(d, d).trace().real();
}

/// (1 + Re Tr(U₁ρ₁ ... U_nρ_n)) / 2.
inline double swap_test_closed_form(const SwapTestSpec& spec) {
  spec.validate();
  ComplexMatrix prod = spec.unitaries[0] * spec.registers[0].mat();
  for (int i = 1; i < spec.n(); ++i) prod = prod * spec.unitaries[i] * spec.registers[i].mat();
  return 0.5 * (1.0 + prod.trace().real());
}

class SwapTestMismatch : public Error {
 public:
  using Error::Error;
};

/// Evaluates the circuit and the closed form, requires them to agree to 1e-10
/// and returns the closed form.
inline double swap_test_probability(const SwapTestSpec& spec) {
  const double a = swap_test_circuit_probability(spec);
  const double b = swap_test_closed_form(spec);
  if (std::abs(a - b) >= 1e-10)
    throw SwapTestMismatch("swap test circuit " + std::to_string(a) + " != closed form " +
                           std::to_string(b));
  return b;
}

// --- shot-based estimators --------------------------------------------------

struct MCEstimate {
  double mean = 0;
  double std_error = 0;
  long shots = 0;
  int q_max = 0;
  double tail_bound = 0;  // truncated weight of the order expansion
};

namespace detail {

/// Mean and standard error of ±1-valued shots with the given number of +1s.
inline void pm_one_stats(long plus, long shots, double& mean, double& se) {
  mean = (2.0 * plus - shots) / shots;
  if (shots < 2) {
    se = 0;
    return;
  }
  const double var = (1.0 - mean * mean) * shots / (shots - 1.0);
  se = std::sqrt(std::max(0.0, var) / shots);
}

}  // namespace detail

/// Estimates Tr(ρ^m) from `shots` ancilla readouts of the swap test on m
/// copies of ρ with trivial unitaries.
template <class Rng>
MCEstimate trace_power_estimate(const DensityMatrix& rho, int m, long shots, Rng& rng) {
  if (m < 1) throw Error("trace_power_estimate: m must be >= 1");
  if (shots < 1) throw Error("trace_power_estimate: shots must be >= 1");
  const long d = rho.dim();
  SwapTestSpec spec{std::vector<DensityMatrix>(m, rho),
                    std::vector<ComplexMatrix>(m, ComplexMatrix::Identity(d, d))};
  const double p = std::clamp(swap_test_closed_form(spec), 0.0, 1.0);
  const long plus = std::binomial_distribution<long>(shots, p)(rng);
  MCEstimate e;
  e.shots = shots;
  detail::pm_one_stats(plus, shots, e.mean, e.std_error);
  return e;
}

inline constexpr double kMaxLcuNorm = 20.0;

/// Importance-sampled estimate of ∂_{θ_k} D(σ_v‖ρ) for ρ = e^{-H}/Tr e^{-H}.
///
/// With ρ⁻¹ ∝ e^{H} = Σ_q ‖α‖₁^q/q! · E_{j⃗~Q}[U_{j1}...U_{jq}] and
/// A = Tr_h(H̃_k σ), the gradient is N / D with
///   N = -i [Tr(A σ_v e^H) + Tr(A e^H σ_v) - Tr(A† σ_v e^H) - Tr(A† e^H σ_v)]
///   D = Tr(σ_v² e^H).
/// Each shot draws q with weight ‖α‖₁^q/q! (q ≤ q_max), a string j⃗ with
/// probability Π|α_{j_p}|/‖α‖₁^q, and one ancilla readout per trace term whose
/// success probability is computed exactly. Negative coefficients are folded
/// into their Pauli strings. N and D use independent shots; the returned
/// standard error propagates both to first order.
template <class Rng>
MCEstimate mc_reverse_gradient_thermal(const UQNNParams& p, const LCUHamiltonian& target_h,
                                       long k, long shots, int q_max, Rng& rng) {
  if (shots < 2) throw Error("mc estimator needs at least two shots");
  if (q_max < 0) throw Error("q_max must be >= 0");
  if (k < 0 || k >= p.size()) throw Error("generator index out of range");
  if (target_h.n_qubits != p.n_v) throw DimensionError("target acts on the wrong register");
  target_h.validate();
  const double a = target_h.l1_norm();
  if (a > kMaxLcuNorm) throw Error("mc estimator: ‖α‖₁ exceeds 20");

  const long dv = pow2(p.n_v);
  std::vector<ComplexMatrix> us;
  std::vector<double> weights;
  for (const auto& t : target_h.terms) {
    if (t.coeff == 0.0) continue;
    PauliTerm unit = t;
    unit.coeff = t.coeff < 0 ? -1.0 : 1.0;
    us.push_back(dense(unit, p.n_v));
    weights.push_back(std::abs(t.coeff));
  }

  // stratum weights ‖α‖^q/q!; their total replaces e^{‖α‖} after truncation
  std::vector<double> qw(q_max + 1);
  double wq = 1.0, total = 0.0;
  for (int q = 0; q <= q_max; ++q) {
    if (q > 0) wq *= a / q;
    qw[q] = us.empty() && q > 0 ? 0.0 : wq;
    total += qw[q];
  }
  std::discrete_distribution<int> pick_q(qw.begin(), qw.end());
  std::discrete_distribution<int> pick_j;
  if (!us.empty()) pick_j = std::discrete_distribution<int>(weights.begin(), weights.end());

  const DensityMatrix full = uqnn_full_state(p);
  const DensityMatrix sv = partial_trace(full, p.n_v);
  const ComplexMatrix amat =
      partial_trace(ComplexMatrix(conjugated_generator(p, k) * full.mat()), p.n_v, p.n_h);
  const ComplexMatrix adag = amat.adjoint();
  const ComplexMatrix& s = sv.mat();
  const ComplexMatrix s2 = s * s;

  auto sample_u = [&]() {
    ComplexMatrix u = ComplexMatrix::Identity(dv, dv);
    const int q = pick_q(rng);
    for (int i = 0; i < q; ++i) u = u * us[pick_j(rng)];
    return u;
  };
  auto shot = [&](double re_c) {
    const double prob = std::clamp(0.5 * (1.0 + re_c), 0.0, 1.0);
    return std::bernoulli_distribution(prob)(rng) ? 1.0 : -1.0;
  };

  double nsum = 0, nsq = 0, dsum = 0, dsq = 0;
  for (long i = 0; i < shots; ++i) {
    const ComplexMatrix u = sample_u();
    // c_t = -i s_t T_t and Re(-i T) = Im T
    const double t1 = trace_product(amat, s * u).imag();
    const double t2 = trace_product(amat, u * s).imag();
    const double t3 = trace_product(adag, s * u).imag();
    const double t4 = trace_product(adag, u * s).imag();
    const double x = total * (shot(t1) + shot(t2) + shot(-t3) + shot(-t4));
    nsum += x;
    nsq += x * x;
  }
  for (long i = 0; i < shots; ++i) {
    const ComplexMatrix u = sample_u();
    const double y = total * shot(trace_product(u, s2).real());
    dsum += y;
    dsq += y * y;
  }
  const double n = static_cast<double>(shots);
  const double nm = nsum / n, dm = dsum / n;
  const double nvar = std::max(0.0, (nsq - n * nm * nm) / (n - 1));
  const double dvar = std::max(0.0, (dsq - n * dm * dm) / (n - 1));
  if (!(std::abs(dm) > 0)) throw Error("mc estimator: denominator estimate is zero");
  MCEstimate e;
  e.mean = nm / dm;
  e.std_error = std::sqrt(nvar / n / (dm * dm) + nm * nm * dvar / n / (dm * dm * dm * dm));
  e.shots = shots;
  e.q_max = q_max;
  e.tail_bound = us.empty() ? 0.0 : std::max(0.0, std::exp(a) - total);
  return e;
}

}  // namespace renyiqnn
