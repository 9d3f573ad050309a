#pragma once

// Dense complex linear algebra for 2^n-dimensional operators.
//
// Qubit ordering: the first tensor factor is the most significant bit of the
// basis index and is called qubit 0. Visible registers always occupy the
// leading factors, hidden registers the trailing ones.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace renyiqnn {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr double kHermitianTol = 1e-12;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline long env_dim_cap() {
  if (const char* env = std::getenv("RENYIQNN_DIM_CAP")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return v;
  }
  return 1L << 12;
}

inline std::atomic<long>& dim_cap_storage() {
  static std::atomic<long> cap{env_dim_cap()};
  return cap;
}

}  // namespace detail

/// Largest Hilbert-space dimension any dense operator may have.
/// Defaults to 2^12, overridable by RENYIQNN_DIM_CAP or set_dim_cap().
inline long dim_cap() { return detail::dim_cap_storage().load(); }
inline void set_dim_cap(long cap) {
  if (cap < 1) throw Error("dimension cap must be positive");
  detail::dim_cap_storage().store(cap);
}

inline void check_dim(long dim) {
  if (dim > dim_cap())
    throw DimensionError("dimension " + std::to_string(dim) +
                         " exceeds cap " + std::to_string(dim_cap()));
}

inline long pow2(int n) { return 1L << n; }

inline bool is_power_of_two(long d) { return d > 0 && (d & (d - 1)) == 0; }

inline int qubit_count(long dim) {
  if (!is_power_of_two(dim))
    throw DimensionError("dimension " + std::to_string(dim) +
                         " is not a power of two");
  int n = 0;
  while ((1L << n) < dim) ++n;
  return n;
}

inline double hermiticity_defect(const ComplexMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const ComplexMatrix& m, double tol = kHermitianTol) {
  return m.rows() == m.cols() && hermiticity_defect(m) <= tol;
}

inline ComplexMatrix symmetrize(const ComplexMatrix& m) {
  return 0.5 * (m + m.adjoint());
}

inline cplx trace_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  // Tr(A B) without forming the product.
  return (a.transpose().cwiseProduct(b)).sum();
}

/// Eigendecomposition of the Hermitian part of m.
struct HermitianEigen {
  RealVector values;      // ascending
  ComplexMatrix vectors;  // columns

  explicit HermitianEigen(const ComplexMatrix& m) {
    if (m.rows() != m.cols()) throw DimensionError("matrix is not square");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(symmetrize(m));
    if (es.info() != Eigen::Success)
      throw Error("eigendecomposition did not converge");
    values = es.eigenvalues();
    vectors = es.eigenvectors();
  }

  template <class F>
  ComplexMatrix apply(F&& f) const {
    RealVector fv = values.unaryExpr(f);
    return vectors * fv.asDiagonal() * vectors.adjoint();
  }
};

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const long ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  check_dim(ra * rb);
  check_dim(ca * cb);
  ComplexMatrix out(ra * rb, ca * cb);
  for (long i = 0; i < ra; ++i)
    for (long j = 0; j < ca; ++j)
      out.block(i * rb, j * cb, rb, cb) = a(i, j) * b;
  return out;
}

/// Traces out the trailing n_drop qubits, keeping the leading n_keep.
inline ComplexMatrix partial_trace(const ComplexMatrix& m, int n_keep,
                                   int n_drop) {
  if (n_keep < 0 || n_drop < 0) throw DimensionError("negative qubit count");
  const long dk = pow2(n_keep), dd = pow2(n_drop);
  if (m.rows() != dk * dd || m.cols() != dk * dd)
    throw DimensionError("partial_trace: matrix dimension " +
                         std::to_string(m.rows()) + " does not match 2^" +
                         std::to_string(n_keep + n_drop));
  if (n_drop == 0) return m;
  ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
  for (long i = 0; i < dk; ++i)
    for (long j = 0; j < dk; ++j) {
      cplx s = 0;
      for (long h = 0; h < dd; ++h) s += m(i * dd + h, j * dd + h);
      out(i, j) = s;
    }
  return out;
}

/// Returns A ⊗ I on the trailing n_extra qubits.
inline ComplexMatrix extend_identity(const ComplexMatrix& a, int n_extra) {
  if (n_extra == 0) return a;
  return kron(a, ComplexMatrix::Identity(pow2(n_extra), pow2(n_extra)));
}

/// e^{scale·h} for Hermitian h.
inline ComplexMatrix herm_expm(const ComplexMatrix& h, double scale) {
  HermitianEigen eig(h);
  return eig.apply([scale](double x) { return std::exp(scale * x); });
}

/// Moore-Penrose pseudo-inverse of a PSD matrix. Eigenvalues below
/// rel_cutoff·λ_max are treated as zero.
inline ComplexMatrix pinv_psd(const ComplexMatrix& m, double rel_cutoff) {
  HermitianEigen eig(m);
  const double lmax = eig.values.cwiseAbs().maxCoeff();
  if (!(lmax > 0.0)) throw Error("pinv_psd: rank zero");
  const double cut = rel_cutoff * lmax;
  return eig.apply([cut](double x) { return x >= cut && x > 0.0 ? 1.0 / x : 0.0; });
}

/// Largest absolute eigenvalue of a Hermitian matrix.
inline double op_norm(const ComplexMatrix& m) {
  HermitianEigen eig(m);
  return eig.values.cwiseAbs().maxCoeff();
}

/// PSD square root with negative roundoff eigenvalues clamped to zero.
inline ComplexMatrix sqrt_psd(const ComplexMatrix& m) {
  HermitianEigen eig(m);
  return eig.apply([](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a * b - b * a;
}

inline ComplexMatrix anticommutator(const ComplexMatrix& a,
                                    const ComplexMatrix& b) {
  return a * b + b * a;
}

}  // namespace renyiqnn
