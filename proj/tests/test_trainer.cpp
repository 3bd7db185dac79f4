#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lwsat/sweep.hpp"
#include "lwsat/trainer.hpp"
#include "test_util.hpp"

using namespace lwsat;
using test_util::TempDir;

namespace {

Clause lits(std::initializer_list<int> dimacs) {
  Clause cl;
  for (int d : dimacs)
    cl.push_back(Literal::make(static_cast<std::uint32_t>(std::abs(d)) - 1, d < 0));
  return cl;
}

std::vector<FeatureVector> random_features(Rng& rng, std::size_t width) {
  std::vector<FeatureVector> fv(width);
  for (FeatureVector& f : fv) {
    f.bk = rng.next_double();
    f.d1 = rng.next_double();
    f.d2 = rng.next_double();
  }
  return fv;
}

} // namespace

TEST_CASE("AdamW takes near-sign steps at first and converges on a parabola") {
  AdamW opt(1, 0.0);
  std::vector<double> x{0.0};
  opt.step(x, {3.0}, 0.05);
  CHECK(x[0] == Catch::Approx(-0.05).margin(1e-6)); // first step is lr * sign(grad)

  AdamW opt2(1, 0.0);
  std::vector<double> y{1.0};
  for (int i = 0; i < 300; ++i) opt2.step(y, {2.0 * y[0]}, 0.05);
  CHECK(std::abs(y[0]) < 1e-3);
}

TEST_CASE("AdamW weight decay is decoupled from the gradient") {
  AdamW opt(1, 0.1);
  std::vector<double> x{1.0};
  opt.step(x, {0.0}, 0.1);
  CHECK(x[0] == Catch::Approx(0.99).margin(1e-12)); // pure decay: 1 - lr*wd*1
}

TEST_CASE("AdamW rejects dimension mismatches") {
  AdamW opt(2, 0.0);
  std::vector<double> x{1.0};
  CHECK_THROWS_AS(opt.step(x, {1.0}, 0.1), Error);
  std::vector<double> y{1.0, 2.0};
  CHECK_THROWS_AS(opt.step(y, {1.0}, 0.1), Error);
}

TEST_CASE("one-cycle schedule ramps then decays on a cosine") {
  OneCycleSchedule s;
  s.lr_max = 1e-2;
  s.total_updates = 11; // x = u/10, ramp ends exactly at u = 3
  CHECK(s.lr(0) == Catch::Approx(1e-3).margin(1e-15));  // lr_max / 10
  CHECK(s.lr(3) == Catch::Approx(1e-2).margin(1e-15));  // peak at 30%
  CHECK(s.lr(10) == Catch::Approx(1e-5).margin(1e-15)); // lr_max / 1000
  CHECK(s.lr(1) < s.lr(2));
  CHECK(s.lr(2) < s.lr(3));
  CHECK(s.lr(3) > s.lr(5));
  CHECK(s.lr(5) > s.lr(8));
  CHECK(s.lr(8) > s.lr(10));

  OneCycleSchedule single;
  single.lr_max = 0.5;
  single.total_updates = 1;
  CHECK(single.lr(0) == 0.5);
}

TEST_CASE("parameter vectors round trip through the flat layout") {
  PolicyParams p;
  p.scoring = {0.5, -1.5, 2.5, -3.5, 4.5, -5.5};
  p.noise.w0 = 0.125;

  CHECK(param_dim(NoiseVariant::constant) == 7);
  CHECK(param_dim(NoiseVariant::delta) == 9);

  std::vector<double> flat = flatten_params(p);
  REQUIRE(flat.size() == 7);
  PolicyParams q;
  unflatten_params(q, flat);
  CHECK(q.scoring == p.scoring);
  CHECK(q.noise.w0 == p.noise.w0);

  p.noise.variant = NoiseVariant::delta;
  p.noise.w1 = -0.25;
  p.noise.w2 = 0.75;
  flat = flatten_params(p);
  REQUIRE(flat.size() == 9);
  PolicyParams r;
  r.noise.variant = NoiseVariant::delta;
  unflatten_params(r, flat);
  CHECK(r == PolicyParams{p.scoring, p.noise, "", ""});

  std::vector<double> wrong(8, 0.0);
  CHECK_THROWS_AS(unflatten_params(r, wrong), Error);

  PolicyGrad g;
  g.theta = {1, 2, 3, 4, 5, 6};
  g.w = {7, 8, 9};
  CHECK(flatten_grad(g, NoiseVariant::constant) == std::vector<double>{1, 2, 3, 4, 5, 6, 7});
  CHECK(flatten_grad(g, NoiseVariant::delta) ==
        std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("initial parameters are the neutral policy") {
  PolicyParams p = initial_params(NoiseVariant::constant);
  CHECK(p.scoring == ScoringParams{});
  CHECK(p.noise.w0 == 0.0);
  CHECK(noise(p.noise, 0.0) == 0.25);
  CHECK(initial_params(NoiseVariant::delta).noise.variant == NoiseVariant::delta);
}

TEST_CASE("episodes cache one step per flip and a binary reward") {
  CnfFormula sat;
  sat.num_vars = 3;
  sat.clauses = {lits({1}), lits({2}), lits({3})};
  PolicyParams params = initial_params(NoiseVariant::constant);
  EpisodeRecord ep = run_episode(sat, params, 1000, 17);
  CHECK(ep.reward == 1.0);
  for (const EpisodeStep& st : ep.steps) {
    REQUIRE(!st.dist.candidates.empty());
    REQUIRE(st.action < st.dist.candidates.size());
  }

  CnfFormula unsat;
  unsat.num_vars = 1;
  unsat.clauses = {lits({1}), lits({-1})};
  EpisodeRecord bad = run_episode(unsat, params, 100, 17);
  CHECK(bad.reward == 0.0);
  CHECK(bad.steps.size() == 100); // truncated at the flip budget
}

TEST_CASE("episode gradient weights actions by distance from the end") {
  Rng rng(81);
  PolicyParams params = initial_params(NoiseVariant::constant);
  params.scoring.theta1 = -1.0;
  params.scoring.theta3 = 0.5;

  EpisodeRecord ep;
  ep.reward = 1.0;
  for (int i = 0; i < 3; ++i) {
    EpisodeStep st;
    st.dist = distribution_from_features(params, random_features(rng, 3), 0.0);
    st.action = rng.next_below(3);
    ep.steps.push_back(std::move(st));
  }

  const double gamma = 0.5;
  PolicyGrad g0 = log_prob_grad(params, ep.steps[0].dist, ep.steps[0].action);
  PolicyGrad g1 = log_prob_grad(params, ep.steps[1].dist, ep.steps[1].action);
  PolicyGrad g2 = log_prob_grad(params, ep.steps[2].dist, ep.steps[2].action);
  PolicyGrad total = episode_grad(params, ep, gamma, 1.0);
  for (std::size_t j = 0; j < 6; ++j) {
    const double expect = g2.theta[j] + gamma * g1.theta[j] + gamma * gamma * g0.theta[j];
    CHECK(total.theta[j] == Catch::Approx(expect).margin(1e-15));
  }
  const double expect_w = g2.w[0] + gamma * g1.w[0] + gamma * gamma * g0.w[0];
  CHECK(total.w[0] == Catch::Approx(expect_w).margin(1e-15));

  // a one-step episode carries weight gamma^0 = 1 exactly
  EpisodeRecord single;
  single.reward = 1.0;
  single.steps.push_back(ep.steps[0]);
  PolicyGrad gs = episode_grad(params, single, gamma, 1.0);
  for (std::size_t j = 0; j < 6; ++j) CHECK(gs.theta[j] == g0.theta[j]);

  // the coefficient scales linearly
  PolicyGrad doubled = episode_grad(params, ep, gamma, 2.0);
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(doubled.theta[j] == Catch::Approx(2.0 * total.theta[j]).margin(1e-14));

  // zero coefficient short-circuits to zero
  PolicyGrad zero = episode_grad(params, ep, gamma, 0.0);
  for (std::size_t j = 0; j < 6; ++j) CHECK(zero.theta[j] == 0.0);
}

TEST_CASE("zero-reward batches leave the parameters in place") {
  Rng rng(83);
  PolicyParams params = initial_params(NoiseVariant::constant);
  params.scoring.theta1 = -0.75;
  const PolicyParams before = params;

  EpisodeRecord ep;
  ep.reward = 0.0;
  EpisodeStep st;
  st.dist = distribution_from_features(params, random_features(rng, 3), 0.0);
  st.action = 1;
  ep.steps.push_back(st);

  AdamW opt(param_dim(params.noise.variant), 0.0); // no decay: exact no-op expected
  reinforce_update({ep, ep}, params, opt, 1e-2, 0.5, false);
  CHECK(params == before);
}

TEST_CASE("the reward baseline cancels uniform batches") {
  Rng rng(85);
  PolicyParams params = initial_params(NoiseVariant::constant);
  const PolicyParams before = params;
  std::vector<EpisodeRecord> batch(3);
  for (EpisodeRecord& ep : batch) {
    ep.reward = 1.0;
    EpisodeStep st;
    st.dist = distribution_from_features(params, random_features(rng, 3), 0.0);
    st.action = 0;
    ep.steps.push_back(std::move(st));
  }

  PolicyParams with_baseline = params;
  AdamW opt1(param_dim(params.noise.variant), 0.0);
  reinforce_update(batch, with_baseline, opt1, 1e-2, 0.5, true);
  CHECK(with_baseline == before); // all rewards equal the mean

  PolicyParams without = params;
  AdamW opt2(param_dim(params.noise.variant), 0.0);
  reinforce_update(batch, without, opt2, 1e-2, 0.5, false);
  CHECK(without != before);
}

TEST_CASE("non-finite gradients are diagnosed, not propagated") {
  PolicyParams params = initial_params(NoiseVariant::constant);
  EpisodeRecord ep;
  ep.reward = 1.0;
  EpisodeStep st;
  st.dist.features.resize(2);
  st.dist.features[1].bk = 1.0;
  st.dist.softmax = {0.0, 1.0};
  st.dist.probs = {0.0, 1.0}; // impossible action: log-gradient divides by zero
  st.dist.p_noise = 0.0;
  st.action = 0;
  ep.steps.push_back(st);
  AdamW opt(param_dim(params.noise.variant), 0.0);
  CHECK_THROWS_AS(reinforce_update({ep}, params, opt, 1e-2, 0.5, false), NonFiniteGradient);
  CHECK_THROWS_AS(reinforce_update({}, params, opt, 1e-2, 0.5, false), Error);
}

TEST_CASE("warm-up fitting learns to imitate min-break targets") {
  Rng rng(87);
  std::vector<WarmupStep> steps;
  for (int i = 0; i < 40; ++i) {
    WarmupStep st;
    st.features.resize(2);
    st.features[0].bk = 0.3 * rng.next_double();       // low break
    st.features[1].bk = 0.7 + 0.3 * rng.next_double(); // high break
    st.features[0].d1 = st.features[1].d1 = rng.next_double();
    st.target = {1.0, 0.0};
    steps.push_back(std::move(st));
  }
  PolicyParams params = initial_params(NoiseVariant::constant);
  AdamW opt(6, 0.0);
  double first_loss = 0, last_loss = 0;
  for (int it = 0; it < 200; ++it) {
    const double loss = warmup_fit_episode(params, opt, steps, 5e-2);
    if (it == 0) first_loss = loss;
    last_loss = loss;
  }
  CHECK(last_loss < first_loss);
  CHECK(params.scoring.theta1 < -1.0); // break got a strongly negative weight
  CHECK(params.scoring.theta0 == 0.0); // bias cancels in the softmax gradient
  CHECK(params.noise.w0 == 0.0);       // imitation never touches the noise

  std::vector<FeatureVector> probe(2);
  probe[0].bk = 0.1;
  probe[1].bk = 0.9;
  ClauseDistribution d = distribution_from_features(params, probe, 0.0);
  CHECK(d.softmax[0] > 0.9);

  CHECK(warmup_fit_episode(params, opt, {}, 5e-2) == 0.0); // no greedy steps: no update
}

TEST_CASE("warm-up runs once per formula per epoch") {
  Dataset ds = build_dataset(make_spec(3, 12), {4, 2, 0}, 90);
  TrainConfig cfg;
  cfg.warmup_epochs = 3;
  cfg.max_flips_train = 2000;
  cfg.seed = 91;
  WarmupResult res = warmup(ds.train, cfg);
  REQUIRE(res.loss_curve.size() == 3);
  CHECK(res.params.scoring.theta1 < 0.0);
  CHECK(res.params.noise.w0 == 0.0);

  WarmupResult res2 = warmup(ds.train, cfg);
  CHECK(res.params == res2.params); // deterministic in the seed
  CHECK_THROWS_AS(warmup({}, cfg), Error);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(validate_train_config(cfg), Error);
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(validate_train_config(cfg), Error);
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS_AS(validate_train_config(cfg), Error);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate_train_config(cfg), Error);
  cfg = {};
  CHECK_NOTHROW(validate_train_config(cfg));
}

TEST_CASE("train produces a full report and checkpoints") {
  Dataset ds = build_dataset(make_spec(3, 15), {6, 3, 0}, 93);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 3;
  cfg.max_flips_train = 1500;
  cfg.seed = 94;
  TempDir dir;
  TrainReport rep = train(ds, cfg, dir.path);

  REQUIRE(rep.val_mflips.size() == 3); // after warm-up plus one per epoch
  REQUIRE(rep.best_so_far.size() == 3);
  double running = rep.val_mflips[0];
  for (std::size_t i = 0; i < 3; ++i) {
    running = std::min(running, rep.val_mflips[i]);
    CHECK(rep.best_so_far[i] == running);
  }
  CHECK(rep.selected_epoch < 3);
  CHECK(rep.val_mflips[rep.selected_epoch] == rep.best_so_far.back());
  CHECK(rep.warmup_loss.size() == 1);
  CHECK(rep.params.label == "rand3(15,64)");
  CHECK(rep.params.provenance.find("epochs=2") != std::string::npos);

  for (const char* name : {"epoch_000.policy", "epoch_001.policy", "epoch_002.policy"})
    CHECK(std::filesystem::exists(dir.path / name));
  char selected[32];
  std::snprintf(selected, sizeof(selected), "epoch_%03zu.policy", rep.selected_epoch);
  CHECK(load_policy(dir.path / selected) == rep.params);

  const nlohmann::json j = train_report_to_json(rep);
  CHECK(j.at("val_mflips").size() == 3);
  CHECK(j.at("selected_epoch").get<std::size_t>() == rep.selected_epoch);
}

TEST_CASE("training is deterministic and thread-count independent") {
  Dataset ds = build_dataset(make_spec(3, 15), {6, 3, 0}, 95);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 4;
  cfg.max_flips_train = 1500;
  cfg.seed = 96;

  TrainReport a = train(ds, cfg);
  TrainReport b = train(ds, cfg);
  CHECK(a.params == b.params);
  CHECK(a.val_mflips == b.val_mflips);

  TrainReport c = train(ds, cfg, {}, 3);
  CHECK(a.params == c.params); // slot-ordered reduction: threads cannot matter
  CHECK(a.val_mflips == c.val_mflips);
  CHECK(a.selected_epoch == c.selected_epoch);
}

TEST_CASE("train rejects empty splits") {
  Dataset ds = build_dataset(make_spec(3, 10), {2, 0, 0}, 97);
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(ds, cfg), Error);
}

TEST_CASE("sweeps train one row per value with distinct seeds") {
  Dataset ds = build_dataset(make_spec(3, 12), {4, 2, 3}, 98);
  TrainConfig base;
  base.epochs = 1;
  base.warmup_epochs = 1;
  base.batch_size = 4;
  base.max_flips_train = 500;
  base.seed = 99;
  EvalConfig eval_cfg;
  eval_cfg.max_flips = 2000;
  eval_cfg.seed = 100;

  SweepReport one = sweep(SweepAxis::discount, {0.5}, ds, base, eval_cfg);
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].value == 0.5);
  CHECK(one.rows[0].ci_lo <= one.rows[0].m_flips);
  CHECK(one.rows[0].m_flips <= one.rows[0].ci_hi);

  SweepReport dup = sweep(SweepAxis::discount, {0.5, 0.5}, ds, base, eval_cfg);
  REQUIRE(dup.rows.size() == 2);
  CHECK(dup.rows[0].seed != dup.rows[1].seed); // repeated values are independent repetitions
  CHECK(dup.rows[0].seed == one.rows[0].seed); // row index, not value, derives the seed

  const std::string csv = sweep_to_csv(dup);
  CHECK(csv.rfind("discount,seed,m_flips,ci_lo,ci_hi,a_flips,solved_pct\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 3);
}

TEST_CASE("train_size sweeps truncate the training split") {
  Dataset ds = build_dataset(make_spec(3, 12), {4, 2, 2}, 101);
  TrainConfig base;
  base.epochs = 1;
  base.warmup_epochs = 0;
  base.batch_size = 4;
  base.max_flips_train = 500;
  base.seed = 102;
  EvalConfig eval_cfg;
  eval_cfg.max_flips = 2000;

  SweepReport rep = sweep(SweepAxis::train_size, {2, 4}, ds, base, eval_cfg);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].value == 2.0);
  CHECK(sweep_to_csv(rep).rfind("train_size,", 0) == 0);

  CHECK_THROWS_AS(sweep(SweepAxis::train_size, {0}, ds, base, eval_cfg), Error);
  CHECK_THROWS_AS(sweep(SweepAxis::train_size, {2.5}, ds, base, eval_cfg), Error);
  CHECK_THROWS_AS(sweep(SweepAxis::train_size, {5}, ds, base, eval_cfg), Error);
  CHECK_THROWS_AS(sweep(SweepAxis::discount, {}, ds, base, eval_cfg), Error);

  Dataset no_test = build_dataset(make_spec(3, 12), {4, 2, 0}, 103);
  CHECK_THROWS_AS(sweep(SweepAxis::discount, {0.5}, no_test, base, eval_cfg), Error);
}
