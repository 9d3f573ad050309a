#pragma once

// Experiment configuration documents.
//
// A config is a JSON object with a mandatory "schema_version" (currently 1)
// and "experiment" field. Every object is checked for unknown keys. The
// resolved form written next to experiment outputs lists every field, so it
// reproduces the run when fed back in.

#include "renyiqnn/training.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace renyiqnn {

inline constexpr int kSchemaVersion = 1;

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct EnsembleConfig {
  int runs = 10;
  int full_runs = 50;  // used with --full
  Vary vary = Vary::both;
};

struct PlateauConfig {
  std::vector<int> n_h_list{0, 1, 2, 3};
  int ensemble = 20;
};

struct ValidateConfig {
  std::string kind = "all";  // swap | grad | mc | all
  int n_instances = 50;
  double fd_step = 1e-5;
  double fd_tol = 1e-6;
  double fd_rel_tol = 1e-4;  // defaults to 100 · fd_tol when not given
  long mc_shots = 100000;
  int mc_trials = 20;
};

struct MCConfig {
  long shots = 100000;
  int q_max = 30;
  long k = 0;
  int trials = 1;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string experiment;
  std::uint64_t seed = 1;
  std::uint64_t target_seed = 1;
  std::string output_dir = "out";
  TrainConfig train;
  EnsembleConfig ensemble;
  PlateauConfig plateau;
  ValidateConfig validate;
  MCConfig mc;
};

inline const std::set<std::string>& experiment_kinds() {
  static const std::set<std::string> k{"thermal-learn", "ham-learn",   "plateau-scan",
                                       "swap-validate", "grad-check",  "mc-estimate",
                                       "validate"};
  return k;
}

namespace detail {

/// Reads keys from one JSON object and reports any that were never consumed.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void require(const char* key, T& out) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    get(key, out);
  }

  bool has(const char* key) const { return j_.contains(key); }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline std::string to_string(ModelKind m) { return m == ModelKind::uqnn ? "uqnn" : "qbm"; }

inline std::string to_string(QbmGradMethod m) {
  return m == QbmGradMethod::frechet ? "frechet" : "series";
}

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json t = {{"generator", c.target.generator},
                      {"tau", c.target.tau},
                      {"std_single", c.target.std_single},
                      {"std_pair", c.target.std_pair},
                      {"std", c.target.std}};
  if (c.target.hamiltonian) t["hamiltonian"] = to_json(*c.target.hamiltonian);
  return {{"model", to_string(c.model)},
          {"n_v", c.n_v},
          {"n_h", c.n_h},
          {"layout", to_string(c.layout)},
          {"repetitions", c.repetitions},
          {"qbm_init", c.qbm_init},
          {"direction", to_string(c.direction)},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"l2_penalty", c.l2_penalty},
          {"series_tol", c.series_tol},
          {"qbm_grad_method", to_string(c.qbm_grad_method)},
          {"target_regularization", c.target_regularization},
          {"log_every", c.log_every},
          {"target", t}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  detail::ObjectReader r(j, "train");
  std::string model = "uqnn", layout = "exhaustive", direction = "reverse",
              method = "frechet";
  r.get("model", model);
  r.get("n_v", c.n_v);
  r.get("n_h", c.n_h);
  r.get("layout", layout);
  r.get("repetitions", c.repetitions);
  r.get("qbm_init", c.qbm_init);
  r.get("direction", direction);
  r.get("epochs", c.epochs);
  r.get("lr", c.lr);
  r.get("l2_penalty", c.l2_penalty);
  r.get("series_tol", c.series_tol);
  r.get("qbm_grad_method", method);
  r.get("target_regularization", c.target_regularization);
  r.get("log_every", c.log_every);
  if (model == "uqnn") c.model = ModelKind::uqnn;
  else if (model == "qbm") c.model = ModelKind::qbm;
  else throw ConfigError("train.model must be uqnn or qbm");
  if (method == "frechet") c.qbm_grad_method = QbmGradMethod::frechet;
  else if (method == "series") c.qbm_grad_method = QbmGradMethod::series;
  else throw ConfigError("train.qbm_grad_method must be frechet or series");
  try {
    c.layout = layout_from_string(layout);
    c.direction = direction_from_string(direction);
  } catch (const Error& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  if (const auto* t = r.child("target")) {
    detail::ObjectReader tr(*t, "train.target");
    tr.get("generator", c.target.generator);
    tr.get("tau", c.target.tau);
    tr.get("std_single", c.target.std_single);
    tr.get("std_pair", c.target.std_pair);
    tr.get("std", c.target.std);
    if (const auto* h = tr.child("hamiltonian")) {
      try {
        c.target.hamiltonian = hamiltonian_from_json(*h);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("train.target.hamiltonian: ") + e.what());
      }
    }
    tr.finish();
  }
  r.finish();
  c.target.n_v = c.n_v;
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = {{"schema_version", c.schema_version},
                      {"experiment", c.experiment},
                      {"seed", c.seed},
                      {"target_seed", c.target_seed},
                      {"output_dir", c.output_dir},
                      {"train", to_json(c.train)}};
  j["ensemble"] = {{"runs", c.ensemble.runs},
                   {"full_runs", c.ensemble.full_runs},
                   {"vary", to_string(c.ensemble.vary)}};
  j["plateau"] = {{"n_h_list", c.plateau.n_h_list}, {"ensemble", c.plateau.ensemble}};
  j["validate"] = {{"kind", c.validate.kind},
                   {"n_instances", c.validate.n_instances},
                   {"fd_step", c.validate.fd_step},
                   {"fd_tol", c.validate.fd_tol},
                   {"fd_rel_tol", c.validate.fd_rel_tol},
                   {"mc_shots", c.validate.mc_shots},
                   {"mc_trials", c.validate.mc_trials}};
  j["mc"] = {{"shots", c.mc.shots}, {"q_max", c.mc.q_max}, {"k", c.mc.k}, {"trials", c.mc.trials}};
  return j;
}

/// Checks ranges and cross-field constraints; throws ConfigError.
inline void validate(const ExperimentConfig& c) {
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  if (!experiment_kinds().count(c.experiment))
    throw ConfigError("unknown experiment '" + c.experiment + "'");
  try {
    c.train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  if (c.experiment == "thermal-learn" && c.train.model != ModelKind::uqnn)
    throw ConfigError("thermal-learn trains a uqnn model");
  if (c.experiment == "ham-learn" && c.train.model != ModelKind::qbm)
    throw ConfigError("ham-learn trains a qbm model");
  if (c.ensemble.runs < 1 || c.ensemble.full_runs < 1)
    throw ConfigError("ensemble.runs must be >= 1");
  if (c.plateau.ensemble < 1) throw ConfigError("plateau.ensemble must be >= 1");
  for (int nh : c.plateau.n_h_list)
    if (nh < 0) throw ConfigError("plateau.n_h_list entries must be >= 0");
  const auto& v = c.validate;
  if (v.kind != "swap" && v.kind != "grad" && v.kind != "mc" && v.kind != "all")
    throw ConfigError("validate.kind must be swap, grad, mc or all");
  if (v.n_instances < 1) throw ConfigError("validate.n_instances must be >= 1");
  if (!(v.fd_step > 0) || !(v.fd_tol > 0) || !(v.fd_rel_tol >= 0))
    throw ConfigError("validate tolerances must be positive");
  if (v.mc_shots < 2 || v.mc_trials < 1) throw ConfigError("validate.mc_shots must be >= 2");
  if (c.mc.shots < 2) throw ConfigError("mc.shots must be >= 2");
  if (c.mc.q_max < 0) throw ConfigError("mc.q_max must be >= 0");
  if (c.mc.k < 0) throw ConfigError("mc.k must be >= 0");
  if (c.mc.trials < 1) throw ConfigError("mc.trials must be >= 1");
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::ObjectReader r(j, "config");
  r.require("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  r.require("experiment", c.experiment);
  r.get("seed", c.seed);
  c.target_seed = c.seed;
  r.get("target_seed", c.target_seed);
  r.get("output_dir", c.output_dir);
  if (const auto* t = r.child("train")) c.train = train_config_from_json(*t);
  if (const auto* e = r.child("ensemble")) {
    detail::ObjectReader er(*e, "ensemble");
    std::string vary = to_string(c.ensemble.vary);
    er.get("runs", c.ensemble.runs);
    er.get("full_runs", c.ensemble.full_runs);
    er.get("vary", vary);
    er.finish();
    try {
      c.ensemble.vary = vary_from_string(vary);
    } catch (const Error& ex) {
      throw ConfigError(std::string("ensemble: ") + ex.what());
    }
  }
  if (const auto* p = r.child("plateau")) {
    detail::ObjectReader pr(*p, "plateau");
    pr.get("n_h_list", c.plateau.n_h_list);
    pr.get("ensemble", c.plateau.ensemble);
    pr.finish();
  }
  if (const auto* v = r.child("validate")) {
    detail::ObjectReader vr(*v, "validate");
    vr.get("kind", c.validate.kind);
    vr.get("n_instances", c.validate.n_instances);
    vr.get("fd_step", c.validate.fd_step);
    vr.get("fd_tol", c.validate.fd_tol);
    if (vr.has("fd_rel_tol")) vr.get("fd_rel_tol", c.validate.fd_rel_tol);
    else c.validate.fd_rel_tol = 100 * c.validate.fd_tol;
    vr.get("mc_shots", c.validate.mc_shots);
    vr.get("mc_trials", c.validate.mc_trials);
    vr.finish();
  }
  if (const auto* m = r.child("mc")) {
    detail::ObjectReader mr(*m, "mc");
    mr.get("shots", c.mc.shots);
    mr.get("q_max", c.mc.q_max);
    mr.get("k", c.mc.k);
    mr.get("trials", c.mc.trials);
    mr.finish();
  }
  r.finish();
  c.train.seed = c.seed;
  c.train.target_seed = c.target_seed;
  validate(c);
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace renyiqnn
