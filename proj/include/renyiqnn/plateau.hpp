#pragma once

// Gradient-magnitude statistics over Haar ensembles and random
// initializations, with the reference lower-bound expressions.

#include "renyiqnn/divergence.hpp"
#include "renyiqnn/models.hpp"
#include "renyiqnn/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace renyiqnn {

namespace detail {

/// ∂D for a fixed derivative direction of the model state, n_h = 0.
inline double directional_gradient(Direction dir, const DensityMatrix& sigma,
                                   const ComplexMatrix& dsigma, const DensityMatrix& rho) {
  return trace_product(divergence_cotangent(dir, rho, sigma), dsigma).real();
}

}  // namespace detail

struct MomentEstimate {
  double mean = 0;
  double std_error = 0;
  long samples = 0;
};

/// Monte-Carlo estimate of E_U[(∂D(UσU†, U∂σU†; ρ))²] for U Haar on the
/// register of σ.
template <class Rng>
MomentEstimate haar_gradient_moment_stats(const DensityMatrix& sigma, const ComplexMatrix& dsigma,
                                          const DensityMatrix& rho, Direction dir,
                                          long n_samples, Rng& rng) {
  if (n_samples < 1) throw Error("haar_gradient_moment: n_samples must be >= 1");
  if (sigma.dim() != dsigma.rows() || sigma.dim() != rho.dim())
    throw DimensionError("haar_gradient_moment: dimension mismatch");
  // Validate invertibility once; a unitary orbit preserves the spectrum.
  StateInverse(dir == Direction::forward ? sigma : rho,
               dir == Direction::forward ? "singular model state" : "singular target state");
  double s = 0, ss = 0;
  for (long i = 0; i < n_samples; ++i) {
    const ComplexMatrix u = haar_unitary(sigma.n_qubits(), rng);
    const auto su = DensityMatrix::assume_valid(u * sigma.mat() * u.adjoint());
    const ComplexMatrix du = u * dsigma * u.adjoint();
    const double g = detail::directional_gradient(dir, su, du, rho);
    s += g * g;
    ss += g * g * g * g;
  }
  MomentEstimate e;
  e.samples = n_samples;
  e.mean = s / n_samples;
  if (n_samples > 1) {
    const double var = std::max(0.0, (ss - n_samples * e.mean * e.mean) / (n_samples - 1));
    e.std_error = std::sqrt(var / n_samples);
  }
  return e;
}

template <class Rng>
double haar_gradient_moment(const DensityMatrix& sigma, const ComplexMatrix& dsigma,
                            const DensityMatrix& rho, Direction dir, long n_samples, Rng& rng) {
  return haar_gradient_moment_stats(sigma, dsigma, rho, dir, n_samples, rng).mean;
}

struct Lemma1Bounds {
  double inverse_form;  // Tr²(σ⁻²∂σ) / (4^n Tr²(σ⁻¹))
  double power_form;    // Tr²(σ∂σ) / (4^n ‖σ‖⁴)
};

/// Both reference expressions, without Ω constants. The inverse form pairs with
/// the forward divergence and the power form with the reverse one.
inline Lemma1Bounds lemma1_bounds(const DensityMatrix& sigma, const ComplexMatrix& dsigma, int n) {
  if (sigma.dim() != dsigma.rows()) throw DimensionError("lemma1_bounds: dimension mismatch");
  StateInverse si(sigma, "singular model state");
  const double four_n = std::pow(4.0, n);
  const ComplexMatrix inv2 = si.inv * si.inv;
  const double a = trace_product(inv2, dsigma).real();
  const double tinv = si.inv.trace().real();
  const double b = trace_product(sigma.mat(), dsigma).real();
  const double nrm = op_norm(sigma.mat());
  return {a * a / (four_n * tinv * tinv), b * b / (four_n * std::pow(nrm, 4))};
}

// --- initialization scans ---------------------------------------------------

struct PlateauRecord {
  int n_v = 0;
  int n_h = 0;
  std::string loss_kind;
  std::string stat_name;
  double value = 0;
};

struct PlateauReport {
  int ensemble_size = 0;
  std::vector<PlateauRecord> records;

  std::optional<double> find(int n_v, int n_h, const std::string& kind,
                             const std::string& stat) const {
    for (const auto& r : records)
      if (r.n_v == n_v && r.n_h == n_h && r.loss_kind == kind && r.stat_name == stat)
        return r.value;
    return std::nullopt;
  }
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

inline constexpr const char* kPlateauHeader = "n_v,n_h,loss_kind,stat_name,value";

inline std::string plateau_csv(const PlateauReport& r) {
  std::string out = std::string(kPlateauHeader) + "\n";
  char buf[256];
  for (const auto& x : r.records) {
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%s,%.17g\n", x.n_v, x.n_h, x.loss_kind.c_str(),
                  x.stat_name.c_str(), x.value);
    out += buf;
  }
  return out;
}

inline nlohmann::json to_json(const PlateauReport& r) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& x : r.records)
    recs.push_back({{"n_v", x.n_v},
                    {"n_h", x.n_h},
                    {"loss_kind", x.loss_kind},
                    {"stat_name", x.stat_name},
                    {"value", x.value}});
  return {{"ensemble_size", r.ensemble_size}, {"records", recs}};
}

/// Epoch-0 gradient statistics of UQNNs over random initializations, for each
/// hidden-register size. `arch` supplies n_v, layout and repetitions. The
/// reverse divergence toward the thermal state of `target` is the main loss; a
/// linear loss Tr((Z ⊗ I)σ_v) on visible qubit 0 is recorded as a baseline.
inline PlateauReport init_gradient_scan(const TrainConfig& arch, const LCUHamiltonian& target,
                                        const std::vector<int>& n_h_list, int ensemble,
                                        std::uint64_t seed) {
  if (ensemble < 1) throw Error("ensemble must be >= 1");
  if (target.n_qubits != arch.n_v) throw DimensionError("target acts on the wrong register");
  const DensityMatrix rho = thermal_state(target);
  const int nv = arch.n_v;
  ComplexMatrix lin = dense(PauliTerm{1.0, {{0, Axis::z}}}, nv);
  PlateauReport rep;
  rep.ensemble_size = ensemble;
  for (int nh : n_h_list) {
    if (nh < 0) throw Error("n_h must be >= 0");
    std::vector<double> inf_div, inf_lin;
    double abs_div = 0, sq_div = 0, abs_lin = 0, sq_lin = 0, bound = 0;
    long count = 0;
    for (int i = 0; i < ensemble; ++i) {
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(nh), i));
      const UQNNParams p = make_uqnn(nv, nh, arch.layout, arch.repetitions, rng);
      const RealVector g = uqnn_grad_reverse(p, rho);
      const RealVector gl = uqnn_pullback(p, lin);
      inf_div.push_back(g.cwiseAbs().maxCoeff());
      inf_lin.push_back(gl.cwiseAbs().maxCoeff());
      abs_div += g.cwiseAbs().sum();
      sq_div += g.squaredNorm();
      abs_lin += gl.cwiseAbs().sum();
      sq_lin += gl.squaredNorm();
      // Tr(σ_v ∂_kσ_v) for every k in one sweep
      const DensityMatrix sv = uqnn_visible_state(p);
      const RealVector tr = uqnn_pullback(p, sv.mat());
      const double s4 = std::pow(op_norm(sv.mat()), 4) * std::pow(4.0, nv);
      bound += tr.squaredNorm() / s4;
      count += g.size();
    }
    auto add = [&](const std::string& kind, const std::string& stat, double v) {
      rep.records.push_back({nv, nh, kind, stat, v});
    };
    const std::string div = "renyi2_reverse", linear = "linear";
    add(div, "mean_abs_grad", abs_div / count);
    add(div, "mean_sq_grad", sq_div / count);
    add(div, "lemma1_power_bound", bound / count);
    const std::pair<const char*, double> quantiles[] = {{"inf_norm_min", 0.0},
                                                        {"inf_norm_q25", 0.25},
                                                        {"inf_norm_median", 0.5},
                                                        {"inf_norm_q75", 0.75},
                                                        {"inf_norm_max", 1.0}};
    for (auto [name, q] : quantiles) add(div, name, quantile(inf_div, q));
    add(linear, "mean_abs_grad", abs_lin / count);
    add(linear, "mean_sq_grad", sq_lin / count);
    for (auto [name, q] : quantiles) add(linear, name, quantile(inf_lin, q));
  }
  return rep;
}

}  // namespace renyiqnn
