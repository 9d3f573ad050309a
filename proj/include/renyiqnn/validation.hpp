#pragma once

// Invariant suites behind `renyiqnn validate`: swap-test identity, analytic vs
// finite-difference gradients, and Monte-Carlo estimator consistency.

#include "renyiqnn/config.hpp"
#include "renyiqnn/divergence.hpp"
#include "renyiqnn/swaptest.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <string>
#include <vector>

namespace renyiqnn {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double metric = 0;     // the quantity compared against the tolerance
  double tolerance = 0;
  nlohmann::json failing_case;  // populated on failure
};

namespace detail {

template <class Rng>
DensityMatrix random_mixed_state(int n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const long d = pow2(n);
  ComplexMatrix a(d, d);
  for (long j = 0; j < d; ++j)
    for (long i = 0; i < d; ++i) a(i, j) = cplx(g(rng), g(rng));
  ComplexMatrix m = a * a.adjoint();
  return DensityMatrix::assume_valid(m / m.trace().real());
}

inline nlohmann::json matrix_json(const ComplexMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (long i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json vector_json(const RealVector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

/// Circuit vs closed form for n ≤ 3 registers of m ≤ 2 qubits, with random
/// mixed states and Haar unitaries.
inline std::vector<CheckResult> swap_suite(int n_instances, std::uint64_t seed) {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n_instances; ++i) {
    const int n = 1 + i % 3, m = 1 + (i / 3) % 2;
    SwapTestSpec spec;
    for (int r = 0; r < n; ++r) {
      spec.registers.push_back(detail::random_mixed_state(m, rng));
      spec.unitaries.push_back(haar_unitary(m, rng));
    }
    const double a = swap_test_circuit_probability(spec);
    const double b = swap_test_closed_form(spec);
    CheckResult c{"swap", "n=" + std::to_string(n) + ",m=" + std::to_string(m) + ",#" +
                              std::to_string(i),
                  std::abs(a - b) < 1e-10, std::abs(a - b), 1e-10, {}};
    if (!c.passed) {
      nlohmann::json regs = nlohmann::json::array(), us = nlohmann::json::array();
      for (int r = 0; r < n; ++r) {
        regs.push_back(detail::matrix_json(spec.registers[r].mat()));
        us.push_back(detail::matrix_json(spec.unitaries[r]));
      }
      c.failing_case = {{"registers", regs}, {"unitaries", us}, {"circuit", a}, {"closed_form", b}};
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Analytic gradients against central differences: UQNN (both directions)
/// and QBM (both directions, series and Fréchet), all at dimension ≤ 2^3.
inline std::vector<CheckResult> grad_suite(const ValidateConfig& v, std::uint64_t seed) {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(seed);
  auto compare = [&](const std::string& name, const RealVector& g, const RealVector& fd,
                     const RealVector& thetas) {
    double worst = 0, worst_tol = v.fd_tol;
    bool ok = true;
    for (long k = 0; k < g.size(); ++k) {
      const double tol = std::max(v.fd_tol, v.fd_rel_tol * std::abs(fd[k]));
      const double err = std::abs(g[k] - fd[k]);
      if (err > tol) ok = false;
      if (err / tol > worst / worst_tol) {
        worst = err;
        worst_tol = tol;
      }
    }
    CheckResult c{"grad", name, ok, worst, worst_tol, {}};
    if (!ok)
      c.failing_case = {{"thetas", detail::vector_json(thetas)},
                        {"analytic", detail::vector_json(g)},
                        {"finite_difference", detail::vector_json(fd)}};
    out.push_back(std::move(c));
  };
  for (int i = 0; i < v.n_instances; ++i) {
    const Direction dir = i % 2 ? Direction::reverse : Direction::forward;
    const int nv = dir == Direction::forward ? 1 : 1 + i % 3;
    const int nh = 3 - nv;
    auto p = make_uqnn(nv, nh, i % 4 < 2 ? Layout::exhaustive : Layout::brick, 1, rng);
    const auto rho = detail::random_mixed_state(nv, rng);
    compare("uqnn_" + to_string(dir) + "_#" + std::to_string(i), uqnn_grad(dir, p, rho),
            fd_gradient(uqnn_loss(dir, p, rho), p.thetas, v.fd_step), p.thetas);
  }
  for (int i = 0; i < v.n_instances; ++i) {
    const Direction dir = i % 2 ? Direction::reverse : Direction::forward;
    auto p = make_qbm(2, 1, rng);
    const auto rho = detail::random_mixed_state(2, rng);
    const auto method = i % 4 < 2 ? QbmGradMethod::series : QbmGradMethod::frechet;
    compare("qbm_" + to_string(dir) + "_" + to_string(method) + "_#" + std::to_string(i),
            qbm_grad(dir, p, rho, method), fd_gradient(qbm_loss(dir, p, rho), p.thetas, v.fd_step),
            p.thetas);
  }
  return out;
}

/// Coverage of the shot-based estimators: the exact value must fall within
/// 4 standard errors in at least 95% of trials (rounded down).
inline std::vector<CheckResult> mc_suite(const ValidateConfig& v, std::uint64_t seed) {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(seed);
  const int trials = v.mc_trials;
  const int allowed = trials - static_cast<int>(std::ceil(0.95 * trials));
  auto coverage = [&](const std::string& name, int misses, nlohmann::json info) {
    CheckResult c{"mc", name, misses <= allowed, static_cast<double>(misses),
                  static_cast<double>(allowed), {}};
    if (!c.passed) c.failing_case = std::move(info);
    out.push_back(std::move(c));
  };
  const auto rho = detail::random_mixed_state(2, rng);
  for (int m : {2, 3, 4}) {
    ComplexMatrix pw = rho.mat();
    for (int i = 1; i < m; ++i) pw = pw * rho.mat();
    const double exact = pw.trace().real();
    int misses = 0;
    for (int t = 0; t < trials; ++t) {
      const auto e = trace_power_estimate(rho, m, std::min<long>(v.mc_shots, 10000), rng);
      if (std::abs(e.mean - exact) > 4 * e.std_error) ++misses;
    }
    coverage("trace_power_m=" + std::to_string(m), misses,
             {{"rho", detail::matrix_json(rho.mat())}, {"exact", exact}});
  }
  // 2-qubit all-visible UQNN against a normalized ‖α‖₁ = 1 thermal target
  std::mt19937_64 trng(seed ^ 0x5bd1e995ULL);
  LCUHamiltonian h = random_two_local(2, 1.0, 1.0, trng);
  const double l1 = h.l1_norm();
  for (auto& t : h.terms) t.coeff /= l1;
  auto p = make_uqnn(2, 0, Layout::exhaustive, 1, trng);
  const long k = 4;
  const double exact = uqnn_grad_reverse(p, thermal_state(h))[k];
  int misses = 0;
  const int mc_trials = std::max(1, trials / 4);
  const int mc_allowed = mc_trials - static_cast<int>(std::ceil(0.95 * mc_trials));
  for (int t = 0; t < mc_trials; ++t) {
    const auto e = mc_reverse_gradient_thermal(p, h, k, v.mc_shots / 10, 30, rng);
    if (std::abs(e.mean - exact) > 4 * e.std_error) ++misses;
  }
  CheckResult c{"mc", "reverse_gradient_thermal", misses <= mc_allowed,
                static_cast<double>(misses), static_cast<double>(mc_allowed), {}};
  if (!c.passed) c.failing_case = {{"target", to_json(h)}, {"exact", exact}, {"k", k}};
  out.push_back(std::move(c));
  return out;
}

inline std::vector<CheckResult> run_validation(const ValidateConfig& v, std::uint64_t seed) {
  std::vector<CheckResult> all;
  auto append = [&](std::vector<CheckResult> r) {
    all.insert(all.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  };
  if (v.kind == "swap" || v.kind == "all") append(swap_suite(v.n_instances, seed));
  if (v.kind == "grad" || v.kind == "all") append(grad_suite(v, seed));
  if (v.kind == "mc" || v.kind == "all") append(mc_suite(v, seed));
  return all;
}

}  // namespace renyiqnn
