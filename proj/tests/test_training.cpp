#include "renyiqnn/training.hpp"
#include "test_util.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

using namespace renyiqnn;
using namespace testutil;
using Catch::Approx;

namespace {

TrainConfig small_uqnn(int n_v, int n_h, int epochs, double lr) {
  TrainConfig c;
  c.n_v = c.target.n_v = n_v;
  c.n_h = n_h;
  c.epochs = epochs;
  c.lr = lr;
  c.seed = 3;
  c.target_seed = 4;
  return c;
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size()), mean = (n - 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("ADAM", "[training]") {
  SECTION("zero gradient leaves parameters unchanged") {
    RealVector p(3);
    p << 1, -2, 3;
    auto [s, q] = adam_step(AdamState::for_size(3), p, RealVector::Zero(3));
    REQUIRE(s.step == 1);
    REQUIRE((q - p).norm() == 0.0);
  }
  SECTION("constant gradient approaches the lr-sized sign step") {
    AdamState s = AdamState::for_size(2, 0.01);
    RealVector p = RealVector::Zero(2), g(2);
    g << 3.0, -0.2;
    for (int i = 0; i < 2000; ++i) {
      const RealVector before = p;
      adam_update(s, p, g);
      if (i == 1999) {
        REQUIRE((before - p)[0] == Approx(0.01).epsilon(1e-6));
        REQUIRE((before - p)[1] == Approx(-0.01).epsilon(1e-6));
      }
    }
    // the first bias-corrected step is exactly lr·sign(g) up to eps
    AdamState t = AdamState::for_size(1, 0.5);
    RealVector x = RealVector::Zero(1), gx = RealVector::Constant(1, 7.0);
    adam_update(t, x, gx);
    REQUIRE(x[0] == Approx(-0.5).epsilon(1e-8));
  }
  SECTION("deterministic") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    std::vector<RealVector> grads;
    for (int i = 0; i < 50; ++i) {
      RealVector g(4);
      for (long k = 0; k < 4; ++k) g[k] = n(rng);
      grads.push_back(g);
    }
    auto run = [&] {
      AdamState s = AdamState::for_size(4);
      RealVector p = RealVector::Ones(4);
      for (const auto& g : grads) adam_update(s, p, g);
      return p;
    };
    const RealVector a = run(), b = run();
    REQUIRE(std::memcmp(a.data(), b.data(), sizeof(double) * 4) == 0);
  }
  SECTION("errors") {
    RealVector p = RealVector::Zero(2), g(2);
    g << 1.0, std::nan("");
    AdamState s = AdamState::for_size(2);
    REQUIRE_THROWS_WITH(adam_update(s, p, g),
                        Catch::Matchers::ContainsSubstring("diverged gradient at index 1"));
    REQUIRE_THROWS_AS(adam_update(s, p, RealVector::Zero(3)), DimensionError);
  }
}

TEST_CASE("seed derivation", "[training]") {
  REQUIRE(derive_seed(1, kTargetStream, 0) != derive_seed(1, kInitStream, 0));
  REQUIRE(derive_seed(1, kTargetStream, 0) != derive_seed(1, kTargetStream, 1));
  REQUIRE(derive_seed(1, kTargetStream, 0) != derive_seed(2, kTargetStream, 0));
  REQUIRE(derive_seed(7, 8, 9) == derive_seed(7, 8, 9));
  const TrainConfig base = small_uqnn(1, 1, 1, 1e-3);
  REQUIRE(ensemble_member(base, 2, Vary::init).target_seed == base.target_seed);
  REQUIRE(ensemble_member(base, 2, Vary::init).seed != base.seed);
  REQUIRE(ensemble_member(base, 2, Vary::target).seed == base.seed);
  REQUIRE(ensemble_member(base, 2, Vary::both).target_seed != base.target_seed);
  REQUIRE(vary_from_string(to_string(Vary::both)) == Vary::both);
  REQUIRE_THROWS_AS(vary_from_string("neither"), Error);
}

TEST_CASE("UQNN training", "[training]") {
  SECTION("lr = 0 keeps the loss fixed") {
    const auto log = train_uqnn(small_uqnn(2, 1, 1, 0.0));
    REQUIRE(log.rows.size() == 2);
    REQUIRE(log.rows[1].loss == log.rows[0].loss);
  }
  SECTION("loss decreases over the first epochs on a one-qubit target") {
    const auto log = train_uqnn(small_uqnn(1, 1, 10, 1e-2));
    for (std::size_t i = 1; i < log.rows.size(); ++i)
      REQUIRE(log.rows[i].loss < log.rows[i - 1].loss);
    REQUIRE(log.rows.back().epoch == 10);
  }
  SECTION("determinism and metric schema") {
    const auto cfg = small_uqnn(2, 2, 20, 1e-2);
    const auto a = train_uqnn(cfg), b = train_uqnn(cfg);
    REQUIRE(a.final_checkpoint.thetas == b.final_checkpoint.thetas);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      REQUIRE(a.rows[i].loss == b.rows[i].loss);
      REQUIRE(a.rows[i].fidelity == b.rows[i].fidelity);
      REQUIRE(a.rows[i].grad_inf_norm == b.rows[i].grad_inf_norm);
    }
    const std::string csv = metrics_csv(a);
    REQUIRE(csv.rfind("epoch,loss,penalized_loss,fidelity,grad_inf_norm,wall_ms\n", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 22);
    for (std::size_t i = 1; i < a.rows.size(); ++i) REQUIRE(a.rows[i].epoch > a.rows[i - 1].epoch);
    REQUIRE(a.rows[0].penalized_loss == a.rows[0].loss);
  }
  SECTION("log_every thins rows but keeps the last epoch") {
    auto cfg = small_uqnn(1, 1, 10, 1e-2);
    cfg.log_every = 4;
    const auto log = train_uqnn(cfg);
    std::vector<int> epochs;
    for (const auto& r : log.rows) epochs.push_back(r.epoch);
    REQUIRE(epochs == std::vector<int>{0, 4, 8, 10});
  }
  SECTION("fidelity and loss move in opposite directions") {
    const auto log = train_uqnn(small_uqnn(2, 2, 80, 1e-2));
    std::vector<double> l, f;
    for (const auto& r : log.rows) {
      l.push_back(r.loss);
      f.push_back(r.fidelity);
    }
    REQUIRE(spearman(l, f) < -0.8);
    REQUIRE(log.last().fidelity > log.first().fidelity);
  }
  SECTION("singular model states surface with epoch context") {
    auto cfg = small_uqnn(2, 0, 3, 1e-2);
    cfg.direction = Direction::forward;
    REQUIRE_THROWS_WITH(train_uqnn(cfg), Catch::Matchers::ContainsSubstring("epoch 0") &&
                                             Catch::Matchers::ContainsSubstring("singular"));
  }
}

TEST_CASE("QBM training", "[training]") {
  TrainConfig c;
  c.model = ModelKind::qbm;
  c.n_v = c.target.n_v = 3;
  c.n_h = 1;
  c.target.generator = "three_local";
  c.target.tau = 5;
  c.epochs = 30;
  c.lr = 0.02;
  c.l2_penalty = 2.0;
  SECTION("penalty enters the penalized loss") {
    const auto log = train_qbm(c);
    for (const auto& r : log.rows) REQUIRE(r.penalized_loss > r.loss);
    REQUIRE(log.last().penalized_loss < log.first().penalized_loss);
    REQUIRE(log.max_grad_inf_norm() < 10);
  }
  SECTION("zero and normal inits both give finite gradients") {
    c.epochs = 1;
    for (const std::string init : {"zero", "normal"}) {
      c.qbm_init = init;
      const auto log = train_qbm(c);
      REQUIRE(std::isfinite(log.first().grad_inf_norm));
      REQUIRE(log.first().grad_inf_norm > 0);
    }
  }
  SECTION("model kind is checked") {
    REQUIRE_THROWS_AS(train_uqnn(c), Error);
    REQUIRE_NOTHROW(train(c));
  }
}

TEST_CASE("config validation", "[training]") {
  auto c = small_uqnn(2, 1, 1, 1e-3);
  REQUIRE_NOTHROW(c.validate());
  auto bad = c;
  bad.epochs = 0;
  REQUIRE_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.target.tau = 0;
  REQUIRE_THROWS_WITH(bad.validate(), Catch::Matchers::ContainsSubstring("tau"));
  bad = c;
  bad.l2_penalty = -1;
  REQUIRE_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.target.n_v = 3;
  REQUIRE_THROWS_AS(bad.validate(), Error);
  TargetSpec t;
  t.generator = "explicit";
  t.n_v = 1;
  t.tau = 2;
  t.hamiltonian = LCUHamiltonian{1, {PauliTerm{0.5, {{0, Axis::x}}}}};
  REQUIRE(op_norm(dense(make_target_hamiltonian(t, 0))) == Approx(2.0));
  t.generator = "four_local";
  REQUIRE_THROWS_AS(make_target_hamiltonian(t, 0), Error);
}

TEST_CASE("ensembles", "[training]") {
  SECTION("a single run summarizes to itself") {
    const auto cfg = small_uqnn(1, 1, 5, 1e-2);
    const auto res = run_ensemble(cfg, 1, Vary::both, 1);
    const auto& log = *res.logs[0];
    REQUIRE(res.summary.size() == log.rows.size());
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
      REQUIRE(res.summary[i].loss_mean == log.rows[i].loss);
      REQUIRE(res.summary[i].fidelity_mean == log.rows[i].fidelity);
      REQUIRE(res.summary[i].loss_std == 0.0);
      REQUIRE(res.summary[i].n == 1);
    }
  }
  SECTION("threaded and sequential runs agree") {
    const auto cfg = small_uqnn(2, 1, 10, 1e-2);
    const auto a = run_ensemble(cfg, 4, Vary::both, 1);
    const auto b = run_ensemble(cfg, 4, Vary::both, 3);
    REQUIRE(summary_csv(a.summary) == summary_csv(b.summary));
    REQUIRE(a.summary.back().fidelity_std > 0);
    REQUIRE(summary_csv(a.summary).rfind("epoch,n_runs,loss_mean,", 0) == 0);
  }
  SECTION("vary = init with a fixed target converges to a common band") {
    const auto cfg = small_uqnn(2, 2, 150, 2e-2);
    const auto res = run_ensemble(cfg, 4, Vary::init, 2);
    double lo = 1e9, hi = -1e9;
    for (const auto* l : res.successful()) {
      REQUIRE(l->target_seed == cfg.target_seed);
      lo = std::min(lo, l->last().loss);
      hi = std::max(hi, l->last().loss);
    }
    INFO("final loss band [" << lo << ", " << hi << "]");
    REQUIRE(hi - lo < 0.05);
  }
  SECTION("penalized loss decreases over 50-epoch windows") {
    const auto res = run_ensemble(small_uqnn(2, 2, 100, 1e-2), 5, Vary::both, 2);
    int good = 0, total = 0;
    for (const auto* l : res.successful())
      for (std::size_t s = 0; s + 50 < l->rows.size(); s += 10) {
        ++total;
        good += l->rows[s + 50].penalized_loss < l->rows[s].penalized_loss;
      }
    REQUIRE(good >= 0.9 * total);
  }
  SECTION("too many failures abort the ensemble") {
    auto cfg = small_uqnn(2, 0, 2, 1e-2);
    cfg.direction = Direction::forward;
    REQUIRE_THROWS_WITH(run_ensemble(cfg, 3, Vary::both, 1),
                        Catch::Matchers::ContainsSubstring("3 of 3 runs failed"));
    REQUIRE_THROWS_AS(run_ensemble(cfg, 0, Vary::both, 1), Error);
  }
}
