#pragma once

// ADAM, single-run training loops and seeded ensembles.

#include "renyiqnn/divergence.hpp"
#include "renyiqnn/models.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace renyiqnn {

// --- optimizer --------------------------------------------------------------

struct AdamState {
  long step = 0;
  RealVector m, v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;

  static AdamState for_size(long n, double lr = 1e-3) {
    AdamState s;
    s.m = RealVector::Zero(n);
    s.v = RealVector::Zero(n);
    s.lr = lr;
    return s;
  }
};

/// One bias-corrected ADAM update, in place.
inline void adam_update(AdamState& s, RealVector& params, const RealVector& grads) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw DimensionError("adam: size mismatch");
  for (long i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw Error("diverged gradient at index " + std::to_string(i));
  ++s.step;
  s.m = s.beta1 * s.m + (1 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1 - s.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1 - std::pow(s.beta2, static_cast<double>(s.step));
  for (long i = 0; i < params.size(); ++i) {
    const double mh = s.m[i] / c1;
    const double vh = s.v[i] / c2;
    params[i] -= s.lr * mh / (std::sqrt(vh) + s.eps_adam);
  }
}

inline std::pair<AdamState, RealVector> adam_step(AdamState s, RealVector params,
                                                  const RealVector& grads) {
  adam_update(s, params, grads);
  return {std::move(s), std::move(params)};
}

// --- seeds ------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (base, stream, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index);
}

inline constexpr std::uint64_t kTargetStream = 0x7461726765ULL;
inline constexpr std::uint64_t kInitStream = 0x696e6974ULL;

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// --- configuration ----------------------------------------------------------

enum class ModelKind { uqnn, qbm };

struct TargetSpec {
  std::string generator = "two_local";  // "two_local" | "three_local" | "explicit"
  int n_v = 3;
  double tau = 1.0;
  double std_single = 0.31622776601683794;  // √0.1
  double std_pair = 1.0;
  double std = 1.0;                          // three_local
  std::optional<LCUHamiltonian> hamiltonian; // generator = "explicit"
};

struct TrainConfig {
  ModelKind model = ModelKind::uqnn;
  int n_v = 3;
  int n_h = 3;
  Layout layout = Layout::exhaustive;
  int repetitions = 1;
  std::string qbm_init = "normal";  // "normal" | "zero"
  TargetSpec target;
  Direction direction = Direction::reverse;
  int epochs = 100;
  double lr = 1e-3;
  double l2_penalty = 0.0;
  std::uint64_t seed = 1;         // model initialization
  std::uint64_t target_seed = 1;  // target Hamiltonian draw
  double series_tol = 1e-10;
  QbmGradMethod qbm_grad_method = QbmGradMethod::frechet;
  double target_regularization = 0.0;
  int log_every = 1;

  void validate() const {
    if (epochs < 1) throw Error("epochs must be >= 1");
    if (!(lr >= 0)) throw Error("lr must be non-negative");
    if (!(l2_penalty >= 0)) throw Error("l2_penalty must be >= 0");
    if (log_every < 1) throw Error("log_every must be >= 1");
    if (n_v < 1 || n_h < 0) throw Error("n_v must be >= 1 and n_h >= 0");
    if (target.n_v != n_v) throw Error("target and model visible sizes differ");
    if (!(target.tau > 0)) throw Error("tau must be positive");
    if (!(series_tol > 0)) throw Error("series_tol must be positive");
    if (qbm_init != "normal" && qbm_init != "zero") throw Error("qbm_init must be normal or zero");
    if (target_regularization < 0 || target_regularization > 1)
      throw Error("target_regularization must lie in [0,1]");
  }
};

/// Draws (or passes through) the target Hamiltonian, normalized to operator norm τ.
inline LCUHamiltonian make_target_hamiltonian(const TargetSpec& t, std::uint64_t seed) {
  if (t.generator == "explicit") {
    if (!t.hamiltonian) throw Error("explicit target needs a Hamiltonian");
    if (t.hamiltonian->n_qubits != t.n_v) throw Error("explicit target has wrong qubit count");
    return normalize(*t.hamiltonian, t.tau);
  }
  std::mt19937_64 rng(seed);
  if (t.generator == "two_local")
    return normalize(random_two_local(t.n_v, t.std_single, t.std_pair, rng), t.tau);
  if (t.generator == "three_local")
    return normalize(random_three_local(t.n_v, t.std, rng), t.tau);
  throw Error("unknown target generator '" + t.generator + "'");
}

// --- metrics ----------------------------------------------------------------

struct MetricsRow {
  int epoch = 0;
  double loss = 0;            // raw divergence
  double penalized_loss = 0;  // divergence + λ‖θ‖²
  double fidelity = 0;
  double grad_inf_norm = 0;   // of the penalized gradient
  double wall_ms = 0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
  std::uint64_t seed = 0;
  std::uint64_t target_seed = 0;
  std::uint64_t config_hash = 0;
  Checkpoint final_checkpoint;
  LCUHamiltonian target;

  const MetricsRow& first() const { return rows.front(); }
  const MetricsRow& last() const { return rows.back(); }

  double max_grad_inf_norm(int up_to_epoch = -1) const {
    double m = 0;
    for (const auto& r : rows)
      if (up_to_epoch < 0 || r.epoch <= up_to_epoch) m = std::max(m, r.grad_inf_norm);
    return m;
  }
};

inline constexpr const char* kMetricsHeader =
    "epoch,loss,penalized_loss,fidelity,grad_inf_norm,wall_ms";

inline std::string metrics_csv(const MetricsLog& log) {
  std::string out = std::string(kMetricsHeader) + "\n";
  char buf[256];
  for (const auto& r : log.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.epoch, r.loss,
                  r.penalized_loss, r.fidelity, r.grad_inf_norm, r.wall_ms);
    out += buf;
  }
  return out;
}

// --- training loops ---------------------------------------------------------

namespace detail {

struct Evaluation {
  double loss;
  double penalized;
  double fidelity;
  RealVector grad;
};

template <class Eval, class Params>
MetricsLog run_loop(const TrainConfig& cfg, Params& p, Eval&& evaluate) {
  MetricsLog log;
  log.seed = cfg.seed;
  log.target_seed = cfg.target_seed;
  AdamState adam = AdamState::for_size(p.size(), cfg.lr);
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    Evaluation ev;
    try {
      ev = evaluate(p);
    } catch (const Error& e) {
      throw Error("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const auto t1 = clock::now();
    if (epoch % cfg.log_every == 0 || epoch == cfg.epochs) {
      MetricsRow r{epoch, ev.loss, ev.penalized, ev.fidelity, ev.grad.cwiseAbs().maxCoeff(),
                   std::chrono::duration<double, std::milli>(t1 - t0).count()};
      if (!std::isfinite(r.loss) || !std::isfinite(r.fidelity) || !std::isfinite(r.grad_inf_norm))
        throw Error("epoch " + std::to_string(epoch) + ": non-finite metrics");
      log.rows.push_back(r);
    }
    if (epoch == cfg.epochs) break;
    try {
      adam_update(adam, p.thetas, ev.grad);
    } catch (const Error& e) {
      throw Error("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    t0 = clock::now();
  }
  return log;
}

}  // namespace detail

/// Trains a UQNN toward the thermal state of the configured target. Row e holds
/// the metrics after e optimizer steps; grad_inf_norm is the gradient used for
/// the next step.
inline MetricsLog train_uqnn(const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.model != ModelKind::uqnn) throw Error("train_uqnn: config is not a UQNN run");
  const LCUHamiltonian th = make_target_hamiltonian(cfg.target, cfg.target_seed);
  const DensityMatrix rho = regularize(thermal_state(th), cfg.target_regularization);
  std::mt19937_64 rng(cfg.seed);
  UQNNParams p = make_uqnn(cfg.n_v, cfg.n_h, cfg.layout, cfg.repetitions, rng);
  const double lambda = cfg.l2_penalty;
  auto log = detail::run_loop(cfg, p, [&](const UQNNParams& q) {
    const DensityMatrix sv = uqnn_visible_state(q);
    const double loss = renyi2(cfg.direction, rho, sv).value;
    RealVector g = uqnn_grad(cfg.direction, q, rho);
    if (lambda > 0) g += 2 * lambda * q.thetas;
    return detail::Evaluation{loss, loss + lambda * q.thetas.squaredNorm(), fidelity(rho, sv),
                              std::move(g)};
  });
  log.final_checkpoint = make_checkpoint(p, cfg.seed, cfg.epochs);
  log.target = th;
  return log;
}

/// Trains a QBM with a two-local model Hamiltonian on n_v + n_h qubits.
inline MetricsLog train_qbm(const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.model != ModelKind::qbm) throw Error("train_qbm: config is not a QBM run");
  const LCUHamiltonian th = make_target_hamiltonian(cfg.target, cfg.target_seed);
  const DensityMatrix rho = regularize(thermal_state(th), cfg.target_regularization);
  std::mt19937_64 rng(cfg.seed);
  QBMParams p = make_qbm(cfg.n_v, cfg.n_h, rng);
  if (cfg.qbm_init == "zero") p.thetas.setZero();
  const double lambda = cfg.l2_penalty;
  auto log = detail::run_loop(cfg, p, [&](const QBMParams& q) {
    const DensityMatrix sv = qbm_visible_state(q);
    const double loss = renyi2(cfg.direction, rho, sv).value;
    RealVector g = qbm_grad(cfg.direction, q, rho, cfg.qbm_grad_method, cfg.series_tol);
    if (lambda > 0) g += 2 * lambda * q.thetas;
    return detail::Evaluation{loss, loss + lambda * q.thetas.squaredNorm(), fidelity(rho, sv),
                              std::move(g)};
  });
  log.final_checkpoint = make_checkpoint(p, cfg.seed, cfg.epochs);
  log.target = th;
  return log;
}

inline MetricsLog train(const TrainConfig& cfg) {
  return cfg.model == ModelKind::uqnn ? train_uqnn(cfg) : train_qbm(cfg);
}

// --- ensembles --------------------------------------------------------------

enum class Vary { target, init, both };

inline Vary vary_from_string(const std::string& s) {
  if (s == "target") return Vary::target;
  if (s == "init") return Vary::init;
  if (s == "both") return Vary::both;
  throw Error("unknown vary mode '" + s + "'");
}

inline std::string to_string(Vary v) {
  return v == Vary::target ? "target" : v == Vary::init ? "init" : "both";
}

struct SummaryRow {
  int epoch = 0;
  int n = 0;
  double loss_mean = 0, loss_std = 0;
  double penalized_loss_mean = 0, penalized_loss_std = 0;
  double fidelity_mean = 0, fidelity_std = 0;
  double grad_inf_norm_mean = 0, grad_inf_norm_std = 0;
};

struct RunFailure {
  int index;
  std::string message;
};

struct EnsembleResult {
  std::vector<std::optional<MetricsLog>> logs;  // one slot per run, empty on failure
  std::vector<RunFailure> failures;
  std::vector<SummaryRow> summary;

  std::vector<const MetricsLog*> successful() const {
    std::vector<const MetricsLog*> out;
    for (const auto& l : logs)
      if (l) out.push_back(&*l);
    return out;
  }
  const SummaryRow& final_summary() const { return summary.back(); }
  const SummaryRow& initial_summary() const { return summary.front(); }
};

/// Per-run config: run i draws its target and/or initialization from
/// independent streams derived from the base seeds.
inline TrainConfig ensemble_member(const TrainConfig& base, int index, Vary vary) {
  TrainConfig c = base;
  if (vary != Vary::init) c.target_seed = derive_seed(base.target_seed, kTargetStream, index);
  if (vary != Vary::target) c.seed = derive_seed(base.seed, kInitStream, index);
  return c;
}

inline std::vector<SummaryRow> summarize(const std::vector<const MetricsLog*>& logs) {
  std::vector<SummaryRow> out;
  if (logs.empty()) return out;
  const std::size_t rows = logs.front()->rows.size();
  const double n = static_cast<double>(logs.size());
  auto stats = [&](std::size_t i, double MetricsRow::*f, double& mean, double& sd) {
    double s = 0;
    for (auto* l : logs) s += l->rows[i].*f;
    mean = s / n;
    double ss = 0;
    for (auto* l : logs) ss += (l->rows[i].*f - mean) * (l->rows[i].*f - mean);
    sd = logs.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  };
  for (std::size_t i = 0; i < rows; ++i) {
    SummaryRow r;
    r.epoch = logs.front()->rows[i].epoch;
    r.n = static_cast<int>(logs.size());
    stats(i, &MetricsRow::loss, r.loss_mean, r.loss_std);
    stats(i, &MetricsRow::penalized_loss, r.penalized_loss_mean, r.penalized_loss_std);
    stats(i, &MetricsRow::fidelity, r.fidelity_mean, r.fidelity_std);
    stats(i, &MetricsRow::grad_inf_norm, r.grad_inf_norm_mean, r.grad_inf_norm_std);
    out.push_back(r);
  }
  return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "epoch,n_runs,loss_mean,loss_std,penalized_loss_mean,penalized_loss_std,"
      "fidelity_mean,fidelity_std,grad_inf_norm_mean,grad_inf_norm_std\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.n, r.loss_mean, r.loss_std, r.penalized_loss_mean,
                  r.penalized_loss_std, r.fidelity_mean, r.fidelity_std, r.grad_inf_norm_mean,
                  r.grad_inf_norm_std);
    out += buf;
  }
  return out;
}

inline unsigned default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs n_runs independent trainings on up to `jobs` threads. Individual
/// failures are recorded; more than 20% failures raises.
inline EnsembleResult run_ensemble(const TrainConfig& cfg, int n_runs, Vary vary,
                                   unsigned jobs = default_jobs()) {
  if (n_runs < 1) throw Error("n_runs must be >= 1");
  cfg.validate();
  EnsembleResult res;
  res.logs.resize(n_runs);
  std::vector<std::string> errors(n_runs);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n_runs; i = next++) {
      try {
        res.logs[i] = train(ensemble_member(cfg, i, vary));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned k = std::max(1u, std::min<unsigned>(jobs, n_runs));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int i = 0; i < n_runs; ++i)
    if (!res.logs[i]) res.failures.push_back({i, errors[i]});
  if (res.failures.size() * 5 > static_cast<std::size_t>(n_runs))
    throw Error("ensemble aborted: " + std::to_string(res.failures.size()) + " of " +
                std::to_string(n_runs) + " runs failed (first: " + res.failures.front().message +
                ")");
  res.summary = summarize(res.successful());
  return res;
}

}  // namespace renyiqnn
