#pragma once

// Maximal Rényi-2 divergence losses and their parameter gradients.
//
//   forward: D(ρ‖σ) = ln Tr(ρ² σ⁻¹)
//   reverse: D(σ‖ρ) = ln Tr(σ² ρ⁻¹)
//
// ρ is the target state, σ the model's visible state.

#include "renyiqnn/models.hpp"
#include "renyiqnn/states.hpp"

#include <functional>
#include <string>

namespace renyiqnn {

enum class Direction { forward, reverse };

inline Direction direction_from_string(const std::string& s) {
  if (s == "forward") return Direction::forward;
  if (s == "reverse") return Direction::reverse;
  throw Error("unknown divergence direction '" + s + "'");
}

inline std::string to_string(Direction d) {
  return d == Direction::forward ? "forward" : "reverse";
}

inline constexpr double kPinvCutoff = 1e-12;

struct LossValue {
  double value = 0;        // nats
  double numerator = 0;    // the trace inside the log
  double conditioning = 0; // smallest eigenvalue of the inverted state
};

class SingularStateError : public Error {
 public:
  SingularStateError(const std::string& what, double conditioning)
      : Error(what + " (smallest eigenvalue " + std::to_string(conditioning) + ")"),
        conditioning_(conditioning) {}
  double conditioning() const { return conditioning_; }

 private:
  double conditioning_;
};

/// Inverse of a full-rank state; rank deficiency beyond the relative cutoff
/// raises SingularStateError.
struct StateInverse {
  ComplexMatrix inv;
  double min_eigenvalue = 0;

  StateInverse(const DensityMatrix& s, const char* what, double rel_cutoff = kPinvCutoff) {
    HermitianEigen eig(s.mat());
    min_eigenvalue = eig.values.minCoeff();
    const double lmax = eig.values.cwiseAbs().maxCoeff();
    if (!(min_eigenvalue > rel_cutoff * lmax)) throw SingularStateError(what, min_eigenvalue);
    inv = eig.apply([](double x) { return 1.0 / x; });
  }
};

/// Optional target regularization ρ ← (1-ε)ρ + ε I/d.
inline DensityMatrix regularize(const DensityMatrix& rho, double eps) {
  if (eps == 0.0) return rho;
  if (eps < 0.0 || eps > 1.0) throw Error("regularization ε must lie in [0,1]");
  const long d = rho.dim();
  return DensityMatrix::assume_valid((1.0 - eps) * rho.mat() +
                                     eps * ComplexMatrix::Identity(d, d) / static_cast<double>(d));
}

inline LossValue renyi2_forward(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw DimensionError("renyi2: dimension mismatch");
  StateInverse si(sigma, "singular model state");
  const ComplexMatrix rho2 = rho.mat() * rho.mat();
  const double t = trace_product(rho2, si.inv).real();
  return {std::log(t), t, si.min_eigenvalue};
}

/// D(σ‖ρ) = ln Tr(σ² ρ⁻¹); argument order follows the divergence.
inline LossValue renyi2_reverse(const DensityMatrix& sigma, const DensityMatrix& rho) {
  if (rho.dim() != sigma.dim()) throw DimensionError("renyi2: dimension mismatch");
  StateInverse ri(rho, "singular target state");
  const ComplexMatrix s2 = sigma.mat() * sigma.mat();
  const double t = trace_product(s2, ri.inv).real();
  return {std::log(t), t, ri.min_eigenvalue};
}

inline LossValue renyi2(Direction dir, const DensityMatrix& rho, const DensityMatrix& sigma) {
  return dir == Direction::forward ? renyi2_forward(rho, sigma) : renyi2_reverse(sigma, rho);
}

/// Visible cotangent Λ = dD/dσ_v, i.e. dD = Tr(Λ dσ_v).
///   forward: Λ = -σ⁻¹ρ²σ⁻¹ / Tr(ρ²σ⁻¹)
///   reverse: Λ = {σ, ρ⁻¹} / Tr(σ²ρ⁻¹)
inline ComplexMatrix divergence_cotangent(Direction dir, const DensityMatrix& rho,
                                          const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw DimensionError("cotangent: dimension mismatch");
  if (dir == Direction::forward) {
    StateInverse si(sigma, "singular model state");
    const ComplexMatrix a = si.inv * rho.mat() * rho.mat() * si.inv;
    return -a / trace_product(rho.mat() * rho.mat(), si.inv).real();
  }
  StateInverse ri(rho, "singular target state");
  const ComplexMatrix& s = sigma.mat();
  return anticommutator(s, ri.inv) / trace_product(s * s, ri.inv).real();
}

// --- UQNN -------------------------------------------------------------------

/// ∂_θ D(ρ‖σ_v(θ)) for every generator.
inline RealVector uqnn_grad_forward(const UQNNParams& p, const DensityMatrix& rho) {
  return uqnn_pullback(p, divergence_cotangent(Direction::forward, rho, uqnn_visible_state(p)));
}

/// ∂_θ D(σ_v(θ)‖ρ) for every generator.
inline RealVector uqnn_grad_reverse(const UQNNParams& p, const DensityMatrix& rho) {
  return uqnn_pullback(p, divergence_cotangent(Direction::reverse, rho, uqnn_visible_state(p)));
}

inline RealVector uqnn_grad(Direction dir, const UQNNParams& p, const DensityMatrix& rho) {
  return dir == Direction::forward ? uqnn_grad_forward(p, rho) : uqnn_grad_reverse(p, rho);
}

namespace detail {

inline double checked_real(cplx z, long k) {
  if (std::abs(z.imag()) > 1e-10 * std::max(1.0, std::abs(z.real())))
    throw Error("gradient entry " + std::to_string(k) + " has imaginary residue " +
                std::to_string(z.imag()));
  return z.real();
}

}  // namespace detail

/// Commutator form evaluated with dense matrices, one generator at a time:
///   i Tr(ρ² σ_v⁻¹ Tr_h([H̃_k, σ]) σ_v⁻¹) / Tr(ρ² σ_v⁻¹)
/// Intended for verification; cost is O(N d³).
inline RealVector uqnn_grad_forward_dense(const UQNNParams& p, const DensityMatrix& rho) {
  const DensityMatrix full = uqnn_full_state(p);
  const DensityMatrix sv = partial_trace(full, p.n_v);
  StateInverse si(sv, "singular model state");
  const ComplexMatrix rho2 = rho.mat() * rho.mat();
  const double denom = trace_product(rho2, si.inv).real();
  const ComplexMatrix left = rho2 * si.inv;
  RealVector g(p.size());
  for (long k = 0; k < p.size(); ++k) {
    const ComplexMatrix c =
        partial_trace(commutator(conjugated_generator(p, k), full.mat()), p.n_v, p.n_h);
    g[k] = detail::checked_real(kI * trace_product(left, c * si.inv) / denom, k);
  }
  return g;
}

///   -i Tr({Tr_h([H̃_k, σ]), σ_v} ρ⁻¹) / Tr(σ_v² ρ⁻¹)
inline RealVector uqnn_grad_reverse_dense(const UQNNParams& p, const DensityMatrix& rho) {
  const DensityMatrix full = uqnn_full_state(p);
  const DensityMatrix sv = partial_trace(full, p.n_v);
  StateInverse ri(rho, "singular target state");
  const double denom = trace_product(sv.mat() * sv.mat(), ri.inv).real();
  RealVector g(p.size());
  for (long k = 0; k < p.size(); ++k) {
    const ComplexMatrix c =
        partial_trace(commutator(conjugated_generator(p, k), full.mat()), p.n_v, p.n_h);
    g[k] = detail::checked_real(-kI * trace_product(anticommutator(c, sv.mat()), ri.inv) / denom, k);
  }
  return g;
}

// --- QBM --------------------------------------------------------------------

enum class QbmGradMethod {
  series,   // truncated nested-commutator series, one generator at a time
  frechet,  // exact eigenbasis integral, contracted once against all generators
};

inline constexpr int kSeriesMaxOrder = 60;

/// (Σ_{p≥0} ad^p_{-H}(B) / (p+1)!) · e^{-H}, truncated at the first p with
/// ‖ad^p_{-H}(B)‖_F / (p+1)! < tol · ‖B‖_F.
/// If `exp_minus_h` is supplied it replaces e^{-H} (e.g. the normalized Gibbs
/// state, which keeps the result finite for large ‖H‖). A non-negative
/// `fixed_order` sums exactly p = 0..fixed_order with no convergence test.
inline ComplexMatrix series_exp_integral(const ComplexMatrix& h, const ComplexMatrix& b,
                                         double tol, const ComplexMatrix* exp_minus_h = nullptr,
                                         int* order_used = nullptr, int fixed_order = -1) {
  const double bn = b.norm();
  ComplexMatrix sum = b;
  if (bn == 0.0) {
    if (order_used) *order_used = 0;
    return ComplexMatrix::Zero(b.rows(), b.cols());
  }
  ComplexMatrix ad = b;
  double fact = 1.0;  // (p+1)!
  int p = 0;
  const int p_max = fixed_order >= 0 ? fixed_order : kSeriesMaxOrder;
  for (p = 1; p <= p_max; ++p) {
    ad = commutator(-h, ad);
    fact *= (p + 1);
    const ComplexMatrix term = ad / fact;
    sum += term;
    if (fixed_order < 0 && term.norm() < tol * bn) break;
  }
  if (fixed_order >= 0) p = fixed_order;
  else if (p > kSeriesMaxOrder) throw Error("series not converged");
  if (order_used) *order_used = p;
  if (exp_minus_h) return sum * (*exp_minus_h);
  return sum * herm_expm(h, -1.0);
}

/// ∫₀¹ e^{-sH} B e^{-(1-s)H} ds via divided differences in the eigenbasis of H.
/// With `normalized` the result is divided by Tr e^{-H}.
inline ComplexMatrix frechet_exp_integral(const ComplexMatrix& h, const ComplexMatrix& b,
                                          bool normalized = false) {
  HermitianEigen eig(h);
  const RealVector& l = eig.values;
  const long d = l.size();
  const double shift = normalized ? l.minCoeff() : 0.0;
  double z = 1.0;
  if (normalized) {
    z = 0;
    for (long i = 0; i < d; ++i) z += std::exp(-(l[i] - shift));
  }
  ComplexMatrix bb = eig.vectors.adjoint() * b * eig.vectors;
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) {
      // ∫ e^{-s λ_i} e^{-(1-s) λ_j} ds = e^{-λ_j} (1 - e^{-δ}) / δ,  δ = λ_i - λ_j
      const double delta = l[i] - l[j];
      const double ej = std::exp(-(l[j] - shift));
      const double k = std::abs(delta) < 1e-12 ? ej * (1.0 - 0.5 * delta)
                                               : ej * (-std::expm1(-delta)) / delta;
      bb(i, j) *= k / z;
    }
  return eig.vectors * bb * eig.vectors.adjoint();
}

/// Gradient of the Rényi-2 divergence for a QBM:
///   forward:  Σ_p Tr(ρ²σ_v⁻¹ Tr_h(ad^p_{-H}(∂H) e^{-H}) σ_v⁻¹) / (Tr(ρ²σ_v⁻¹) Z (p+1)!) − <∂H>
///   reverse: −Σ_p Tr(ad^p_{-H}(∂H) e^{-H} ({σ_v, ρ⁻¹} ⊗ I_h)) / (Tr(σ_v²ρ⁻¹) Z (p+1)!) + 2<∂H>
/// `fixed_order` >= 0 truncates the series at that order (ablation only).
inline RealVector qbm_grad(Direction dir, const QBMParams& p, const DensityMatrix& rho,
                           QbmGradMethod method = QbmGradMethod::frechet,
                           double series_tol = 1e-10, int fixed_order = -1) {
  p.validate();
  const int n = p.n_qubits();
  const ComplexMatrix h = qbm_hamiltonian(p);
  const DensityMatrix omega = thermal_state(h);
  const DensityMatrix sv = partial_trace(omega, p.n_v);
  const ComplexMatrix lambda = divergence_cotangent(dir, rho, sv);
  const ComplexMatrix c = extend_identity(lambda, p.n_h);
  const double kappa = dir == Direction::forward ? -1.0 : 2.0;

  RealVector g(p.size());
  if (method == QbmGradMethod::frechet) {
    // Tr(F_H(B) C) = Tr(B F_H(C)) because the divided-difference kernel is symmetric.
    const ComplexMatrix w = frechet_exp_integral(h, c, /*normalized=*/true);
    for (long m = 0; m < p.size(); ++m) {
      PauliString ps(p.basis[m], n);
      const double s = p.basis[m].coeff;
      const double inner = (s * ps.trace_with(w)).real();
      const double expect = (s * ps.trace_with(omega.mat())).real();
      g[m] = -inner + kappa * expect;
    }
    return g;
  }
  for (long m = 0; m < p.size(); ++m) {
    const ComplexMatrix b = dense(p.basis[m], n);
    const ComplexMatrix term = series_exp_integral(h, b, series_tol, &omega.mat(), nullptr, fixed_order);
    const double inner = trace_product(term, c).real();
    const double expect = trace_product(b, omega.mat()).real();
    g[m] = -inner + kappa * expect;
  }
  return g;
}

inline RealVector qbm_grad_forward(const QBMParams& p, const DensityMatrix& rho,
                                   double series_tol = 1e-10,
                                   QbmGradMethod method = QbmGradMethod::series) {
  return qbm_grad(Direction::forward, p, rho, method, series_tol);
}

inline RealVector qbm_grad_reverse(const QBMParams& p, const DensityMatrix& rho,
                                   double series_tol = 1e-10,
                                   QbmGradMethod method = QbmGradMethod::series) {
  return qbm_grad(Direction::reverse, p, rho, method, series_tol);
}

// --- finite differences -----------------------------------------------------

using LossFunction = std::function<double(const RealVector&)>;

/// Central differences (L(θ + h e_k) − L(θ − h e_k)) / 2h.
inline RealVector fd_gradient(const LossFunction& loss, const RealVector& thetas, double h) {
  if (!(h > 0)) throw Error("fd_gradient: step must be positive");
  RealVector g(thetas.size());
  RealVector t = thetas;
  for (long k = 0; k < thetas.size(); ++k) {
    t[k] = thetas[k] + h;
    const double up = loss(t);
    t[k] = thetas[k] - h;
    const double down = loss(t);
    t[k] = thetas[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

inline LossFunction uqnn_loss(Direction dir, UQNNParams p, DensityMatrix rho) {
  return [dir, p = std::move(p), rho = std::move(rho)](const RealVector& th) mutable {
    p.thetas = th;
    return renyi2(dir, rho, uqnn_visible_state(p)).value;
  };
}

inline LossFunction qbm_loss(Direction dir, QBMParams p, DensityMatrix rho) {
  return [dir, p = std::move(p), rho = std::move(rho)](const RealVector& th) mutable {
    p.thetas = th;
    return renyi2(dir, rho, qbm_visible_state(p)).value;
  };
}

}  // namespace renyiqnn
