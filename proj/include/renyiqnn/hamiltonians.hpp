#pragma once

// Pauli-string Hamiltonians in linear-combination-of-unitaries form.

#include "renyiqnn/qmath.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace renyiqnn {

enum class Axis : std::uint8_t { x, y, z };

inline char axis_char(Axis a) { return "xyz"[static_cast<int>(a)]; }

inline Axis axis_from_char(char c) {
  switch (c) {
    case 'x': case 'X': return Axis::x;
    case 'y': case 'Y': return Axis::y;
    case 'z': case 'Z': return Axis::z;
  }
  throw Error(std::string("unknown Pauli axis '") + c + "'");
}

inline constexpr Axis kAxes[3] = {Axis::x, Axis::y, Axis::z};

struct PauliFactor {
  int qubit;
  Axis axis;
  friend bool operator==(const PauliFactor&, const PauliFactor&) = default;
  friend auto operator<=>(const PauliFactor&, const PauliFactor&) = default;
};

/// coeff · σ_{a1}^{q1} σ_{a2}^{q2} ... with strictly increasing qubits.
struct PauliTerm {
  double coeff = 1.0;
  std::vector<PauliFactor> axes;

  int locality() const { return static_cast<int>(axes.size()); }

  void validate(int n_qubits) const {
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (axes[i].qubit < 0 || axes[i].qubit >= n_qubits)
        throw Error("Pauli term qubit index out of range");
      if (i > 0 && axes[i].qubit <= axes[i - 1].qubit)
        throw Error("Pauli term qubit indices must be strictly increasing");
    }
  }

  std::string label() const {
    if (axes.empty()) return "I";
    std::string s;
    for (const auto& f : axes) {
      if (!s.empty()) s += ' ';
      s += axis_char(f.axis);
      s += std::to_string(f.qubit);
    }
    return s;
  }
};

/// Bit-mask form of a unit-coefficient Pauli string, acting on statevectors in
/// O(2^n) time: P|x> = phase(x) |x ^ flip>.
class PauliString {
 public:
  PauliString() = default;
  PauliString(const PauliTerm& t, int n_qubits) : n_(n_qubits) {
    t.validate(n_qubits);
    for (const auto& f : t.axes) {
      const std::uint64_t bit = std::uint64_t{1} << (n_qubits - 1 - f.qubit);
      if (f.axis != Axis::z) flip_ |= bit;
      if (f.axis != Axis::x) phase_mask_ |= bit;
      if (f.axis == Axis::y) ++n_y_;
    }
    static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    global_ = kIPow[n_y_ % 4];
  }

  int n_qubits() const { return n_; }
  long dim() const { return pow2(n_); }
  std::uint64_t flip_mask() const { return flip_; }

  cplx phase(std::uint64_t x) const {
    return (std::popcount(x & phase_mask_) & 1) ? -global_ : global_;
  }

  void apply(const ComplexVector& in, ComplexVector& out) const {
    const long d = dim();
    out.resize(d);
    for (long x = 0; x < d; ++x)
      out[static_cast<long>(x ^ flip_)] = phase(x) * in[x];
  }

  ComplexVector apply(const ComplexVector& in) const {
    ComplexVector out;
    apply(in, out);
    return out;
  }

  /// Tr(P W).
  cplx trace_with(const ComplexMatrix& w) const {
    const long d = dim();
    cplx s = 0;
    for (long x = 0; x < d; ++x) s += phase(x) * w(x, static_cast<long>(x ^ flip_));
    return s;
  }

  /// <a| P |b>.
  cplx sandwich(const ComplexVector& a, const ComplexVector& b) const {
    const long d = dim();
    cplx s = 0;
    for (long x = 0; x < d; ++x)
      s += std::conj(a[static_cast<long>(x ^ flip_)]) * phase(x) * b[x];
    return s;
  }

  ComplexMatrix dense() const {
    check_dim(dim());
    const long d = dim();
    ComplexMatrix m = ComplexMatrix::Zero(d, d);
    for (long x = 0; x < d; ++x) m(static_cast<long>(x ^ flip_), x) = phase(x);
    return m;
  }

 private:
  int n_ = 0;
  std::uint64_t flip_ = 0;
  std::uint64_t phase_mask_ = 0;
  int n_y_ = 0;
  cplx global_{1, 0};
};

/// H = Σ_l coeff_l · P_l on n_qubits.
struct LCUHamiltonian {
  int n_qubits = 0;
  std::vector<PauliTerm> terms;

  double l1_norm() const {
    double s = 0;
    for (const auto& t : terms) s += std::abs(t.coeff);
    return s;
  }

  void validate() const {
    if (n_qubits < 1) throw Error("Hamiltonian needs at least one qubit");
    std::set<std::vector<PauliFactor>> seen;
    for (const auto& t : terms) {
      t.validate(n_qubits);
      if (!seen.insert(t.axes).second)
        throw Error("duplicate Pauli term '" + t.label() + "'");
    }
  }

  /// Term-wise concatenation; the operands must not share axis-sets.
  LCUHamiltonian operator+(const LCUHamiltonian& other) const {
    if (other.n_qubits != n_qubits) throw DimensionError("qubit count mismatch");
    LCUHamiltonian out = *this;
    out.terms.insert(out.terms.end(), other.terms.begin(), other.terms.end());
    out.validate();
    return out;
  }
};

inline ComplexMatrix dense(const PauliTerm& t, int n_qubits) {
  return t.coeff * PauliString(t, n_qubits).dense();
}

inline ComplexMatrix dense(const LCUHamiltonian& h) {
  const long d = pow2(h.n_qubits);
  check_dim(d);
  ComplexMatrix m = ComplexMatrix::Zero(d, d);
  for (const auto& t : h.terms) {
    PauliString p(t, h.n_qubits);
    for (long x = 0; x < d; ++x)
      m(static_cast<long>(x ^ p.flip_mask()), x) += t.coeff * p.phase(x);
  }
  return m;
}

namespace detail {

// All unit-coefficient k-local strings in canonical order: increasing qubit
// tuples, then axes in x<y<z order with the first qubit varying slowest.
inline void append_k_local(int n, int k, std::vector<PauliTerm>& out) {
  std::vector<int> q(k);
  for (int i = 0; i < k; ++i) q[i] = i;
  if (k > n) return;
  while (true) {
    int combos = 1;
    for (int i = 0; i < k; ++i) combos *= 3;
    for (int c = 0; c < combos; ++c) {
      PauliTerm t;
      int rem = c;
      std::vector<Axis> ax(k);
      for (int i = k - 1; i >= 0; --i) {
        ax[i] = kAxes[rem % 3];
        rem /= 3;
      }
      for (int i = 0; i < k; ++i) t.axes.push_back({q[i], ax[i]});
      out.push_back(std::move(t));
    }
    int i = k - 1;
    while (i >= 0 && q[i] == n - k + i) --i;
    if (i < 0) break;
    ++q[i];
    for (int j = i + 1; j < k; ++j) q[j] = q[j - 1] + 1;
  }
}

}  // namespace detail

/// Every single- and two-qubit Pauli string on n qubits, unit coefficients,
/// in canonical order (singles first).
inline std::vector<PauliTerm> two_local_basis(int n) {
  if (n < 1) throw Error("two_local_basis: n must be >= 1");
  std::vector<PauliTerm> out;
  detail::append_k_local(n, 1, out);
  detail::append_k_local(n, 2, out);
  return out;
}

inline std::vector<PauliTerm> three_local_basis(int n) {
  if (n < 3) throw Error("three_local_basis: n must be >= 3");
  auto out = two_local_basis(n);
  detail::append_k_local(n, 3, out);
  return out;
}

/// Two-local model with J^i_a ~ N(0, std_single²), J^{ij}_{ab} ~ N(0, std_pair²).
template <class Rng>
LCUHamiltonian random_two_local(int n, double std_single, double std_pair,
                                Rng& rng) {
  if (n < 1) throw Error("random_two_local: n must be >= 1");
  LCUHamiltonian h{n, two_local_basis(n)};
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& t : h.terms)
    t.coeff = (t.locality() == 1 ? std_single : std_pair) * g(rng);
  return h;
}

/// Three-local model, every coefficient ~ N(0, std²).
template <class Rng>
LCUHamiltonian random_three_local(int n, double std, Rng& rng) {
  if (n < 3) throw Error("random_three_local: n must be >= 3");
  LCUHamiltonian h{n, three_local_basis(n)};
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& t : h.terms) t.coeff = std * g(rng);
  return h;
}

/// Rescales h so that its dense realization has operator norm tau.
inline LCUHamiltonian normalize(const LCUHamiltonian& h, double tau) {
  const double norm = op_norm(dense(h));
  if (!(norm > 0.0)) throw Error("normalize: zero Hamiltonian");
  LCUHamiltonian out = h;
  for (auto& t : out.terms) t.coeff *= tau / norm;
  return out;
}

// JSON: {"n_qubits": n, "terms": [{"coeff": c, "axes": [[q, "x"], ...]}]}

inline nlohmann::json term_to_json(const PauliTerm& t) {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& f : t.axes)
    axes.push_back({f.qubit, std::string(1, axis_char(f.axis))});
  return {{"coeff", t.coeff}, {"axes", axes}};
}

inline PauliTerm term_from_json(const nlohmann::json& j) {
  PauliTerm t;
  t.coeff = j.at("coeff").get<double>();
  for (const auto& a : j.at("axes")) {
    const auto s = a.at(1).get<std::string>();
    if (s.size() != 1) throw Error("Pauli axis must be a single character");
    t.axes.push_back({a.at(0).get<int>(), axis_from_char(s[0])});
  }
  return t;
}

inline nlohmann::json to_json(const LCUHamiltonian& h) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : h.terms) terms.push_back(term_to_json(t));
  return {{"n_qubits", h.n_qubits}, {"terms", terms}};
}

inline LCUHamiltonian hamiltonian_from_json(const nlohmann::json& j) {
  LCUHamiltonian h;
  h.n_qubits = j.at("n_qubits").get<int>();
  for (const auto& t : j.at("terms")) h.terms.push_back(term_from_json(t));
  h.validate();
  return h;
}

}  // namespace renyiqnn
