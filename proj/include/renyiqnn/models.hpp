#pragma once

// Unitary QNNs and quantum Boltzmann machines.
//
// A UQNN prepares σ(θ) = G_1 G_2 ... G_N |0><0| G_N† ... G_1† with
// G_j = exp(-i θ_j H_j). G_N therefore acts on |0...0> first and G_1 last;
// H̃_k is H_k conjugated by G_1 ... G_{k-1}. Generator indices are 0-based in
// the API.

#include "renyiqnn/hamiltonians.hpp"
#include "renyiqnn/states.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace renyiqnn {

/// A Hermitian-unitary generator ±P for a Pauli string P.
class Generator {
 public:
  Generator(const PauliTerm& term, int n_qubits)
      : term_(term), string_(term, n_qubits), sign_(term.coeff < 0 ? -1.0 : 1.0) {
    if (std::abs(std::abs(term.coeff) - 1.0) > 1e-12)
      throw Error("UQNN generator '" + term.label() +
                  "' must have coefficient ±1 (Hermitian and unitary)");
  }

  const PauliTerm& term() const { return term_; }
  const PauliString& string() const { return string_; }
  double sign() const { return sign_; }

  /// out = H v
  void apply(const ComplexVector& v, ComplexVector& out) const {
    string_.apply(v, out);
    if (sign_ < 0) out = -out;
  }

  /// v <- exp(-i θ H) v, using H² = I. Pass -θ for the adjoint.
  void rotate(ComplexVector& v, double theta, ComplexVector& scratch) const {
    apply(v, scratch);
    v = std::cos(theta) * v - kI * std::sin(theta) * scratch;
  }

  cplx sandwich(const ComplexVector& a, const ComplexVector& b) const {
    return sign_ * string_.sandwich(a, b);
  }

  ComplexMatrix dense() const { return sign_ * string_.dense(); }

 private:
  PauliTerm term_;
  PauliString string_;
  double sign_;
};

enum class Layout { exhaustive, brick };

inline Layout layout_from_string(const std::string& s) {
  if (s == "exhaustive") return Layout::exhaustive;
  if (s == "brick") return Layout::brick;
  throw Error("unknown layout '" + s + "'");
}

inline std::string to_string(Layout l) {
  return l == Layout::exhaustive ? "exhaustive" : "brick";
}

/// Generator sequence for a UQNN on n qubits.
///
/// exhaustive: the full canonical two-local basis, repeated `repetitions` times.
/// brick: per repetition, in the order the gates act on |0...0>: single-qubit
/// x/y/z on every qubit, then the nine two-qubit products on even pairs
/// (0,1),(2,3),..., then on odd pairs (1,2),(3,4),... The returned list is in
/// product order, so it is the reverse of that sequence.
inline std::vector<PauliTerm> ansatz_generators(int n, Layout layout,
                                                int repetitions = 1) {
  if (n < 1) throw Error("ansatz needs at least one qubit");
  if (repetitions < 1) throw Error("repetitions must be >= 1");
  std::vector<PauliTerm> one;
  if (layout == Layout::exhaustive) {
    one = two_local_basis(n);
  } else {
    for (int q = 0; q < n; ++q)
      for (Axis a : kAxes) one.push_back({1.0, {{q, a}}});
    for (int parity = 0; parity < 2; ++parity)
      for (int q = parity; q + 1 < n; q += 2)
        for (Axis a : kAxes)
          for (Axis b : kAxes) one.push_back({1.0, {{q, a}, {q + 1, b}}});
    std::reverse(one.begin(), one.end());
  }
  std::vector<PauliTerm> out;
  for (int r = 0; r < repetitions; ++r) out.insert(out.end(), one.begin(), one.end());
  return out;
}

struct UQNNParams {
  int n_v = 0;
  int n_h = 0;
  std::vector<PauliTerm> generators;
  RealVector thetas;

  int n_qubits() const { return n_v + n_h; }
  long size() const { return static_cast<long>(generators.size()); }

  void validate() const {
    if (n_v < 1 || n_h < 0) throw Error("UQNN needs n_v >= 1 and n_h >= 0");
    if (thetas.size() != size())
      throw Error("UQNN: one angle per generator required");
    check_dim(pow2(n_qubits()));
  }

  std::vector<Generator> compiled() const {
    validate();
    std::vector<Generator> g;
    g.reserve(generators.size());
    for (const auto& t : generators) g.emplace_back(t, n_qubits());
    return g;
  }
};

template <class Rng>
UQNNParams make_uqnn(int n_v, int n_h, Layout layout, int repetitions, Rng& rng) {
  UQNNParams p{n_v, n_h, ansatz_generators(n_v + n_h, layout, repetitions), {}};
  std::normal_distribution<double> g(0.0, 1.0);
  p.thetas.resize(p.size());
  for (long i = 0; i < p.size(); ++i) p.thetas[i] = g(rng);
  return p;
}

namespace detail {

inline ComplexVector uqnn_statevector(const std::vector<Generator>& gens,
                                      const RealVector& thetas, int n_qubits) {
  ComplexVector psi = ComplexVector::Zero(pow2(n_qubits));
  psi[0] = 1.0;
  ComplexVector scratch;
  for (long j = static_cast<long>(gens.size()) - 1; j >= 0; --j)
    gens[j].rotate(psi, thetas[j], scratch);
  return psi;
}

}  // namespace detail

inline ComplexVector uqnn_statevector(const UQNNParams& p) {
  return detail::uqnn_statevector(p.compiled(), p.thetas, p.n_qubits());
}

inline DensityMatrix uqnn_full_state(const UQNNParams& p) {
  return DensityMatrix::pure(uqnn_statevector(p));
}

inline DensityMatrix uqnn_visible_state(const UQNNParams& p) {
  return partial_trace(uqnn_full_state(p), p.n_v);
}

/// H̃_k = (G_1...G_{k-1}) H_k (G_1...G_{k-1})†, dense.
inline ComplexMatrix conjugated_generator(const UQNNParams& p, long k) {
  if (k < 0 || k >= p.size()) throw Error("generator index out of range");
  auto gens = p.compiled();
  ComplexMatrix m = gens[k].dense();
  ComplexVector col, scratch;
  auto left = [&](ComplexMatrix& a, double theta, const Generator& g) {
    for (long c = 0; c < a.cols(); ++c) {
      col = a.col(c);
      g.rotate(col, theta, scratch);
      a.col(c) = col;
    }
  };
  for (long j = k - 1; j >= 0; --j) {
    left(m, p.thetas[j], gens[j]);           // G M
    ComplexMatrix t = m.adjoint();           // M G†  ->  (G M)† with M Hermitian
    left(t, p.thetas[j], gens[j]);           // G (G M)† = G M G†
    m = t;
  }
  return m;
}

/// ∂σ/∂θ_k = -i [H̃_k, σ] on the full register.
inline ComplexMatrix uqnn_state_derivative(const UQNNParams& p, long k) {
  ComplexMatrix ht = conjugated_generator(p, k);
  ComplexMatrix sigma = uqnn_full_state(p).mat();
  return -kI * commutator(ht, sigma);
}

/// For a loss L(σ_v), returns ∂L/∂θ_k for all k given the visible cotangent
/// Λ = dL/dσ_v (so dL = Tr(Λ dσ_v)). Uses one backward sweep over the circuit:
/// ∂_k L = 2 Im <ψ|(Λ⊗I) H̃_k|ψ>.
inline RealVector uqnn_pullback(const UQNNParams& p, const ComplexMatrix& visible_cotangent) {
  auto gens = p.compiled();
  const int n = p.n_qubits();
  const long dv = pow2(p.n_v), dh = pow2(p.n_h);
  if (visible_cotangent.rows() != dv) throw DimensionError("cotangent dimension mismatch");
  ComplexVector phi = detail::uqnn_statevector(gens, p.thetas, n);
  // mu = (Λ ⊗ I) ψ; viewing ψ as a dv×dh matrix, this is Λ·Ψ.
  ComplexVector mu(phi.size());
  Eigen::Map<const ComplexMatrix> psi_mat(phi.data(), dh, dv);  // column-major: (h, v)
  Eigen::Map<ComplexMatrix> mu_mat(mu.data(), dh, dv);
  mu_mat = psi_mat * visible_cotangent.transpose();
  RealVector grad(p.size());
  ComplexVector scratch;
  for (long k = 0; k < p.size(); ++k) {
    grad[k] = 2.0 * gens[k].sandwich(mu, phi).imag();
    gens[k].rotate(phi, -p.thetas[k], scratch);
    gens[k].rotate(mu, -p.thetas[k], scratch);
  }
  return grad;
}

// ---------------------------------------------------------------------------

struct QBMParams {
  int n_v = 0;
  int n_h = 0;
  std::vector<PauliTerm> basis;  // unit-coefficient Pauli strings
  RealVector thetas;

  int n_qubits() const { return n_v + n_h; }
  long size() const { return static_cast<long>(basis.size()); }

  void validate() const {
    if (n_v < 1 || n_h < 0) throw Error("QBM needs n_v >= 1 and n_h >= 0");
    if (thetas.size() != size()) throw Error("QBM: one weight per basis term required");
    check_dim(pow2(n_qubits()));
  }

  LCUHamiltonian hamiltonian() const {
    validate();
    LCUHamiltonian h{n_qubits(), basis};
    for (long m = 0; m < size(); ++m) h.terms[m].coeff = thetas[m] * basis[m].coeff;
    return h;
  }
};

/// QBM with the two-local basis on n_v + n_h qubits, weights ~ N(0,1), then
/// rescaled so the initial Hamiltonian has unit operator norm.
template <class Rng>
QBMParams make_qbm(int n_v, int n_h, Rng& rng, bool unit_norm = true) {
  QBMParams p{n_v, n_h, two_local_basis(n_v + n_h), {}};
  std::normal_distribution<double> g(0.0, 1.0);
  p.thetas.resize(p.size());
  for (long i = 0; i < p.size(); ++i) p.thetas[i] = g(rng);
  if (unit_norm) {
    const double nrm = op_norm(dense(p.hamiltonian()));
    if (nrm > 0) p.thetas /= nrm;
  }
  return p;
}

inline ComplexMatrix qbm_hamiltonian(const QBMParams& p) { return dense(p.hamiltonian()); }

/// Full Gibbs state e^{-H}/Tr e^{-H} on n_v + n_h qubits.
inline DensityMatrix qbm_full_state(const QBMParams& p) {
  return thermal_state(qbm_hamiltonian(p));
}

inline DensityMatrix qbm_visible_state(const QBMParams& p) {
  return partial_trace(qbm_full_state(p), p.n_v);
}

// --- checkpoints ------------------------------------------------------------

struct Checkpoint {
  std::string kind;  // "uqnn" | "qbm"
  int n_v = 0;
  int n_h = 0;
  std::vector<PauliTerm> generators;
  RealVector thetas;
  std::uint64_t rng_seed = 0;
  int epoch = 0;
};

inline nlohmann::json to_json(const Checkpoint& c) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& t : c.generators) gens.push_back(term_to_json(t));
  return {{"kind", c.kind},
          {"n_v", c.n_v},
          {"n_h", c.n_h},
          {"generators", gens},
          {"thetas", std::vector<double>(c.thetas.data(), c.thetas.data() + c.thetas.size())},
          {"rng_seed", c.rng_seed},
          {"epoch", c.epoch}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  c.kind = j.at("kind").get<std::string>();
  if (c.kind != "uqnn" && c.kind != "qbm") throw Error("unknown checkpoint kind " + c.kind);
  c.n_v = j.at("n_v").get<int>();
  c.n_h = j.at("n_h").get<int>();
  for (const auto& t : j.at("generators")) c.generators.push_back(term_from_json(t));
  auto th = j.at("thetas").get<std::vector<double>>();
  c.thetas = Eigen::Map<RealVector>(th.data(), static_cast<long>(th.size()));
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.epoch = j.at("epoch").get<int>();
  if (c.thetas.size() != static_cast<long>(c.generators.size()))
    throw Error("checkpoint: thetas/generators length mismatch");
  return c;
}

inline Checkpoint make_checkpoint(const UQNNParams& p, std::uint64_t seed, int epoch) {
  return {"uqnn", p.n_v, p.n_h, p.generators, p.thetas, seed, epoch};
}

inline Checkpoint make_checkpoint(const QBMParams& p, std::uint64_t seed, int epoch) {
  return {"qbm", p.n_v, p.n_h, p.basis, p.thetas, seed, epoch};
}

}  // namespace renyiqnn
