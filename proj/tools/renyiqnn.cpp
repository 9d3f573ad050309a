// renyiqnn command-line driver.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure,
// 3 failed validation check.

#include "renyiqnn/renyiqnn.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace renyiqnn;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitValidation = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out;
  bool full = false;
  std::optional<int> epochs;
  std::optional<int> runs;
  std::optional<std::string> kind;
  std::optional<int> n_instances;
  std::optional<double> fd_tol;
  std::optional<double> fd_rel_tol;
};

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f << s;
  if (!f) throw Error("write failed for '" + p.string() + "'");
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

bool experiment_matches(const std::string& command, const std::string& experiment) {
  if (command == "validate")
    return experiment == "validate" || experiment == "swap-validate" || experiment == "grad-check";
  return command == experiment;
}

/// Loads the file, applies flag overrides to the document, then parses it so
/// that overrides pass through the same checks as file keys.
ExperimentConfig resolve(const std::string& command, const Options& o) {
  json j = read_json(o.config);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (o.seed) {
    j["seed"] = *o.seed;
    j["target_seed"] = *o.seed;
  }
  if (o.out) j["output_dir"] = *o.out;
  auto section = [&](const char* key) -> json& {
    if (!j.contains(key)) j[key] = json::object();
    return j[key];
  };
  if (o.epochs) section("train")["epochs"] = *o.epochs;
  if (o.runs) section("ensemble")["runs"] = *o.runs;
  if (o.kind) section("validate")["kind"] = *o.kind;
  if (o.n_instances) section("validate")["n_instances"] = *o.n_instances;
  if (o.fd_tol) section("validate")["fd_tol"] = *o.fd_tol;
  if (o.fd_rel_tol) section("validate")["fd_rel_tol"] = *o.fd_rel_tol;
  if (j.contains("experiment") && j["experiment"] == "swap-validate" && !o.kind)
    section("validate")["kind"] = "swap";
  if (j.contains("experiment") && j["experiment"] == "grad-check" && !o.kind)
    section("validate")["kind"] = "grad";

  ExperimentConfig c = experiment_config_from_json(j);
  if (!experiment_matches(command, c.experiment))
    throw ConfigError("config describes a '" + c.experiment + "' experiment, not '" + command +
                      "'");
  if (o.full) {
    if (o.runs) throw ConfigError("--full and --runs are mutually exclusive");
    c.ensemble.runs = c.ensemble.full_runs;
  }
  return c;
}

fs::path prepare_output(const ExperimentConfig& c) {
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  write_json(dir / "resolved_config.json", to_json(c));
  return dir;
}

std::string run_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03d", i);
  return buf;
}

json summary_row_json(const SummaryRow& r) {
  return {{"epoch", r.epoch},
          {"n_runs", r.n},
          {"loss_mean", r.loss_mean},
          {"loss_std", r.loss_std},
          {"penalized_loss_mean", r.penalized_loss_mean},
          {"penalized_loss_std", r.penalized_loss_std},
          {"fidelity_mean", r.fidelity_mean},
          {"fidelity_std", r.fidelity_std},
          {"grad_inf_norm_mean", r.grad_inf_norm_mean},
          {"grad_inf_norm_std", r.grad_inf_norm_std}};
}

int cmd_learn(const ExperimentConfig& c, const Options& o) {
  const fs::path dir = prepare_output(c);
  const unsigned jobs = o.jobs ? *o.jobs : default_jobs();
  const auto t0 = std::chrono::steady_clock::now();
  const EnsembleResult res = run_ensemble(c.train, c.ensemble.runs, c.ensemble.vary, jobs);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path runs = dir / "runs";
  fs::create_directories(runs);
  json per_run = json::array();
  double max_grad = 0;
  for (std::size_t i = 0; i < res.logs.size(); ++i) {
    if (!res.logs[i]) continue;
    const MetricsLog& log = *res.logs[i];
    const std::string name = run_name(static_cast<int>(i));
    write_file(runs / (name + "_metrics.csv"), metrics_csv(log));
    write_json(runs / (name + "_checkpoint.json"), to_json(log.final_checkpoint));
    write_json(runs / (name + "_target.json"), to_json(log.target));
    max_grad = std::max(max_grad, log.max_grad_inf_norm());
    per_run.push_back({{"run", i},
                       {"seed", log.seed},
                       {"target_seed", log.target_seed},
                       {"initial_fidelity", log.first().fidelity},
                       {"final_fidelity", log.last().fidelity},
                       {"final_loss", log.last().loss},
                       {"max_grad_inf_norm", log.max_grad_inf_norm()}});
  }
  write_file(dir / "summary.csv", summary_csv(res.summary));
  json failures = json::array();
  for (const auto& f : res.failures) failures.push_back({{"run", f.index}, {"message", f.message}});
  const SummaryRow& first = res.initial_summary();
  const SummaryRow& last = res.final_summary();
  write_json(dir / "summary.json", {{"experiment", c.experiment},
                                    {"runs_requested", c.ensemble.runs},
                                    {"runs_succeeded", res.successful().size()},
                                    {"failures", failures},
                                    {"initial", summary_row_json(first)},
                                    {"final", summary_row_json(last)},
                                    {"max_grad_inf_norm", max_grad},
                                    {"wall_seconds", secs},
                                    {"runs", per_run}});

  std::printf("%s: %zu/%d runs, %d epochs, %.1f s\n", c.experiment.c_str(),
              res.successful().size(), c.ensemble.runs, c.train.epochs, secs);
  std::printf("  epoch %5d  loss %.6f ± %.6f  fidelity %.4f ± %.4f\n", first.epoch,
              first.loss_mean, first.loss_std, first.fidelity_mean, first.fidelity_std);
  std::printf("  epoch %5d  loss %.6f ± %.6f  fidelity %.4f ± %.4f\n", last.epoch, last.loss_mean,
              last.loss_std, last.fidelity_mean, last.fidelity_std);
  std::printf("  max gradient inf-norm %.4g\n", max_grad);
  for (const auto& f : res.failures)
    std::fprintf(stderr, "run %d failed: %s\n", f.index, f.message.c_str());
  std::printf("outputs in %s\n", dir.string().c_str());
  return 0;
}

int cmd_plateau(const ExperimentConfig& c) {
  const fs::path dir = prepare_output(c);
  const LCUHamiltonian target = make_target_hamiltonian(c.train.target, c.target_seed);
  const PlateauReport rep =
      init_gradient_scan(c.train, target, c.plateau.n_h_list, c.plateau.ensemble, c.seed);
  write_file(dir / "plateau.csv", plateau_csv(rep));
  json j = to_json(rep);
  j["target"] = to_json(target);
  write_json(dir / "plateau.json", j);
  std::printf("%-5s %-5s %-16s %-20s %s\n", "n_v", "n_h", "loss_kind", "stat_name", "value");
  for (const auto& r : rep.records)
    std::printf("%-5d %-5d %-16s %-20s %.6g\n", r.n_v, r.n_h, r.loss_kind.c_str(),
                r.stat_name.c_str(), r.value);
  std::printf("outputs in %s\n", dir.string().c_str());
  return 0;
}

int cmd_validate(const ExperimentConfig& c) {
  const fs::path dir = prepare_output(c);
  const auto checks = run_validation(c.validate, c.seed);
  json all = json::array();
  int failed = 0;
  std::printf("%-6s %-36s %-6s %-12s %s\n", "suite", "check", "result", "metric", "tolerance");
  for (const auto& r : checks) {
    std::printf("%-6s %-36s %-6s %-12.4g %.4g\n", r.suite.c_str(), r.name.c_str(),
                r.passed ? "PASS" : "FAIL", r.metric, r.tolerance);
    json e = {{"suite", r.suite},
              {"name", r.name},
              {"passed", r.passed},
              {"metric", r.metric},
              {"tolerance", r.tolerance}};
    if (!r.passed) {
      ++failed;
      e["failing_case"] = r.failing_case;
      std::fprintf(stderr, "FAILED %s/%s: %s\n", r.suite.c_str(), r.name.c_str(),
                   r.failing_case.dump().c_str());
    }
    all.push_back(std::move(e));
  }
  write_json(dir / "validation.json", {{"checks", all}, {"failed", failed}});
  std::printf("%zu checks, %d failed\n", checks.size(), failed);
  return failed ? kExitValidation : 0;
}

int cmd_mc(const ExperimentConfig& c) {
  if (c.train.model != ModelKind::uqnn) throw ConfigError("mc-estimate needs a uqnn model");
  const fs::path dir = prepare_output(c);
  const LCUHamiltonian target = make_target_hamiltonian(c.train.target, c.target_seed);
  std::mt19937_64 init(c.seed);
  const UQNNParams p = make_uqnn(c.train.n_v, c.train.n_h, c.train.layout, c.train.repetitions, init);
  if (c.mc.k >= p.size())
    throw ConfigError("mc.k = " + std::to_string(c.mc.k) + " exceeds the generator count " +
                      std::to_string(p.size()));
  const double exact = uqnn_grad_reverse(p, thermal_state(target))[c.mc.k];
  std::mt19937_64 rng(derive_seed(c.seed, 0x6d63ULL, 0));
  json trials = json::array();
  int within = 0;
  std::printf("exact gradient %.8g  (target l1 norm %.4g)\n", exact, target.l1_norm());
  for (int t = 0; t < c.mc.trials; ++t) {
    const MCEstimate e = mc_reverse_gradient_thermal(p, target, c.mc.k, c.mc.shots, c.mc.q_max, rng);
    const bool ok = std::abs(e.mean - exact) <= 4 * e.std_error;
    within += ok;
    std::printf("trial %3d  estimate %.8g ± %.3g  tail %.2g  %s\n", t, e.mean, e.std_error,
                e.tail_bound, ok ? "within 4σ" : "outside 4σ");
    trials.push_back({{"mean", e.mean},
                      {"std_error", e.std_error},
                      {"shots", e.shots},
                      {"q_max", e.q_max},
                      {"tail_bound", e.tail_bound},
                      {"within_4_sigma", ok}});
  }
  write_json(dir / "mc.json", {{"k", c.mc.k},
                               {"exact", exact},
                               {"target", to_json(target)},
                               {"checkpoint", to_json(make_checkpoint(p, c.seed, 0))},
                               {"trials", trials},
                               {"within_4_sigma", within}});
  std::printf("outputs in %s\n", dir.string().c_str());
  return 0;
}

int dispatch(const std::string& command, const Options& o) {
  ExperimentConfig c;
  try {
    c = resolve(command, o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  try {
    if (command == "thermal-learn" || command == "ham-learn") return cmd_learn(c, o);
    if (command == "plateau-scan") return cmd_plateau(c);
    if (command == "validate") return cmd_validate(c);
    if (command == "mc-estimate") return cmd_mc(c);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rényi-divergence training of quantum neural networks"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "experiment config (JSON)")->required();
    s->add_option("--seed", o.seed, "base seed for targets and initializations");
    s->add_option("--jobs", o.jobs, "parallel ensemble members")->check(CLI::PositiveNumber);
    s->add_option("--out", o.out, "output directory");
    s->add_flag("--full", o.full, "use the full ensemble size");
    s->add_option("--epochs", o.epochs, "override train.epochs");
    s->add_option("--runs", o.runs, "override ensemble.runs");
  };
  for (const char* name : {"thermal-learn", "ham-learn", "plateau-scan", "mc-estimate"}) {
    auto* s = app.add_subcommand(name);
    common(s);
  }
  auto* v = app.add_subcommand("validate", "swap-test, gradient and estimator checks");
  common(v);
  v->add_option("--kind", o.kind, "swap | grad | mc | all");
  v->add_option("--n-instances", o.n_instances, "random instances per suite");
  v->add_option("--fd-tol", o.fd_tol, "absolute finite-difference tolerance");
  v->add_option("--fd-rel-tol", o.fd_rel_tol, "relative finite-difference tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return dispatch(command, o);
}
