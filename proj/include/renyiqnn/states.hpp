#pragma once

#include "renyiqnn/hamiltonians.hpp"
#include "renyiqnn/qmath.hpp"

#include <random>

namespace renyiqnn {

/// Unit-trace, Hermitian, positive semi-definite operator on n qubits.
class DensityMatrix {
 public:
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kEigenTol = 1e-10;

  DensityMatrix() = default;

  /// Validates m and throws if it is not a state.
  static DensityMatrix from_matrix(ComplexMatrix m) {
    DensityMatrix d(std::move(m));
    d.validate();
    return d;
  }

  /// Wraps a matrix produced by a state-preserving computation. Only the
  /// Hermitian part is kept; no spectral check is made.
  static DensityMatrix assume_valid(const ComplexMatrix& m) {
    return DensityMatrix(symmetrize(m));
  }

  static DensityMatrix maximally_mixed(int n_qubits) {
    const long d = pow2(n_qubits);
    return DensityMatrix(ComplexMatrix::Identity(d, d) / static_cast<double>(d));
  }

  static DensityMatrix pure(const ComplexVector& psi) {
    ComplexVector v = psi / psi.norm();
    return DensityMatrix(v * v.adjoint());
  }

  static DensityMatrix basis_state(int n_qubits, long index) {
    ComplexVector v = ComplexVector::Zero(pow2(n_qubits));
    v[index] = 1.0;
    return pure(v);
  }

  int n_qubits() const { return n_; }
  long dim() const { return mat_.rows(); }
  const ComplexMatrix& mat() const { return mat_; }

  double purity() const { return trace_product(mat_, mat_).real(); }

  void validate() const {
    if (hermiticity_defect(mat_) > kHermitianTol)
      throw Error("density matrix is not Hermitian");
    if (std::abs(mat_.trace() - cplx(1.0)) > kTraceTol)
      throw Error("density matrix trace is not 1");
    HermitianEigen eig(mat_);
    if (eig.values.minCoeff() < -kEigenTol)
      throw Error("density matrix has a negative eigenvalue");
  }

 private:
  explicit DensityMatrix(ComplexMatrix m) : mat_(std::move(m)) {
    if (mat_.rows() != mat_.cols()) throw DimensionError("matrix is not square");
    n_ = qubit_count(mat_.rows());
  }

  int n_ = 0;
  ComplexMatrix mat_;
};

inline DensityMatrix partial_trace(const DensityMatrix& rho, int n_keep) {
  return DensityMatrix::assume_valid(
      partial_trace(rho.mat(), n_keep, rho.n_qubits() - n_keep));
}

/// Gibbs state of a dense Hermitian h.
inline DensityMatrix thermal_state(const ComplexMatrix& h) {
  HermitianEigen eig(h);
  const double spread = eig.values.maxCoeff() - eig.values.minCoeff();
  if (spread > 1400.0 || eig.values.cwiseAbs().maxCoeff() > 700.0)
    throw Error("thermal_state: Hamiltonian norm too large (> 700)");
  const double shift = eig.values.minCoeff();
  ComplexMatrix e = eig.apply([shift](double x) { return std::exp(-(x - shift)); });
  return DensityMatrix::assume_valid(e / e.trace().real());
}

inline DensityMatrix thermal_state(const LCUHamiltonian& h) {
  return thermal_state(dense(h));
}

/// Uhlmann fidelity, squared convention: (Tr √(√ρ σ √ρ))².
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw DimensionError("fidelity: dimension mismatch");
  ComplexMatrix sr = sqrt_psd(rho.mat());
  HermitianEigen eig(sr * sigma.mat() * sr);
  double t = 0;
  for (long i = 0; i < eig.values.size(); ++i)
    if (eig.values[i] > 0) t += std::sqrt(eig.values[i]);
  return t * t;
}

/// Haar-random unitary: QR of a complex Ginibre matrix with R's diagonal
/// phases absorbed into Q.
template <class Rng>
ComplexMatrix haar_unitary(int n_qubits, Rng& rng) {
  const long d = pow2(n_qubits);
  check_dim(d);
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix z(d, d);
  for (long j = 0; j < d; ++j)
    for (long i = 0; i < d; ++i) z(i, j) = cplx(g(rng), g(rng)) / std::sqrt(2.0);
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(d, d);
  const ComplexMatrix& r = qr.matrixQR();
  for (long j = 0; j < d; ++j) {
    const cplx rjj = r(j, j);
    const double a = std::abs(rjj);
    q.col(j) *= (a > 0 ? rjj / a : cplx(1.0));
  }
  return q;
}

/// -Tr(ρ ln ρ) in nats.
inline double von_neumann_entropy(const DensityMatrix& rho) {
  HermitianEigen eig(rho.mat());
  double s = 0;
  for (long i = 0; i < eig.values.size(); ++i) {
    const double p = eig.values[i];
    if (p > 1e-300) s -= p * std::log(p);
  }
  return s;
}

/// Entropy of the leading n_v qubits of a pure state.
inline double entanglement_entropy(const DensityMatrix& sigma, int n_v) {
  if (sigma.purity() < 1.0 - 1e-8)
    throw Error("entropy defined for pure σ only");
  if (n_v < 0 || n_v > sigma.n_qubits()) throw DimensionError("n_v out of range");
  return von_neumann_entropy(partial_trace(sigma, n_v));
}

/// Quantum relative entropy S(ρ‖σ) = Tr ρ ln ρ − Tr ρ ln σ; σ must be full rank.
inline double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  HermitianEigen er(rho.mat());
  ComplexMatrix log_rho =
      er.apply([](double x) { return x > 1e-300 ? std::log(x) : 0.0; });
  HermitianEigen es(sigma.mat());
  if (es.values.minCoeff() <= 0) throw Error("relative_entropy: σ not full rank");
  ComplexMatrix log_sigma = es.apply([](double x) { return std::log(x); });
  return trace_product(rho.mat(), log_rho - log_sigma).real();
}

}  // namespace renyiqnn
