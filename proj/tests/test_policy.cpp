#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "lwsat/gen.hpp"
#include "lwsat/policy.hpp"
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

std::uint64_t find_seed_for_assignment(std::uint32_t n, const Assignment& want) {
  for (std::uint64_t seed = 0; seed < 1u << 20; ++seed) {
    Rng rng(seed);
    if (random_assignment(n, rng) == want) return seed;
  }
  FAIL("no seed reproduces the wanted assignment");
  return 0;
}

// log-probability of one action, rebuilt from scratch (for finite differences)
double log_prob_at(const PolicyParams& params, const std::vector<FeatureVector>& features,
                   double delta, std::size_t action) {
  ClauseDistribution d = distribution_from_features(params, features, delta);
  return std::log(d.probs[action]);
}

} // namespace

TEST_CASE("features at the first pick of a fresh state") {
  CnfFormula f;
  f.num_vars = 3;
  f.clauses = {lits({1, 2, 3})};
  Rng rng(find_seed_for_assignment(3, {0, 0, 0}));
  SolverState s = init_state(f, rng);
  for (std::uint32_t x = 0; x < 3; ++x) {
    const FeatureVector fv = extract_features(s, x);
    CHECK(fv.bk == 0.0); // nothing breaks: no clause is critically satisfied
    CHECK(fv.d1 == 1.0); // never flipped, full normalized age
    CHECK(fv.d2 == 1.0);
    CHECK(fv.last5 == 0.0); // age2 = 0 means "never", not "recently"
    CHECK(fv.last10 == 0.0);
  }
}

TEST_CASE("break feature saturates at ten") {
  CnfFormula f;
  f.num_vars = 2;
  f.clauses = {lits({1, 2}), lits({-1})};
  for (int i = 0; i < 11; ++i) f.clauses.push_back(lits({-2}));
  Rng rng(find_seed_for_assignment(2, {0, 0}));
  SolverState s = init_state(f, rng);
  REQUIRE(break_value(s, 0) == 1);
  REQUIRE(break_value(s, 1) == 11);
  CHECK(extract_features(s, 0).bk == Catch::Approx(std::log1p(1.0) / std::log1p(10.0)).epsilon(1e-14));
  CHECK(extract_features(s, 1).bk == 1.0); // clamped at break = 10
}

TEST_CASE("age features use the pick-time counter") {
  CnfFormula f;
  f.num_vars = 2;
  f.clauses = {lits({1, 2})};
  Rng rng(find_seed_for_assignment(2, {0, 0}));
  SolverState s = init_state(f, rng);
  // picking flip number 10: nine flips happened, effective counter is 10
  s.t = 9;
  s.age1[0] = 4;

  s.age2[0] = 5; // five steps ago
  FeatureVector fv = extract_features(s, 0);
  CHECK(fv.d1 == Catch::Approx(0.6).epsilon(1e-14));
  CHECK(fv.d2 == Catch::Approx(0.5).epsilon(1e-14));
  CHECK(fv.last5 == 1.0);
  CHECK(fv.last10 == 1.0);

  s.age2[0] = 4; // six steps ago: outside the 5-window, inside the 10-window
  fv = extract_features(s, 0);
  CHECK(fv.last5 == 0.0);
  CHECK(fv.last10 == 1.0);

  s.age2[0] = 0; // never policy-flipped
  fv = extract_features(s, 0);
  CHECK(fv.d2 == 1.0);
  CHECK(fv.last5 == 0.0);
  CHECK(fv.last10 == 0.0);

  s.age2[0] = 9; // immediately preceding flip
  fv = extract_features(s, 0);
  CHECK(fv.d2 == Catch::Approx(0.1).epsilon(1e-14));
  CHECK(fv.last5 == 1.0);
}

TEST_CASE("score is the affine feature combination") {
  ScoringParams p{0.1, -21.1, -1.8, -2.9, -0.9, -1.3};
  FeatureVector ones{1, 1, 1, 1, 1};
  CHECK(score(p, ones) == Catch::Approx(-27.9).epsilon(1e-12));
  CHECK(score(p, FeatureVector{}) == Catch::Approx(0.1).epsilon(1e-12));

  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    ScoringParams q;
    double* coeffs[6] = {&q.theta0, &q.theta1, &q.theta2, &q.theta3, &q.theta4, &q.theta5};
    for (double* c : coeffs) *c = rng.next_double() * 6 - 3;
    FeatureVector fv{rng.next_double(), rng.next_double(), rng.next_double(),
                     rng.next_double(), rng.next_double()};
    const auto arr = fv.to_array();
    double expect = q.theta0; // reversed-order accumulation as the oracle
    const double thetas[5] = {q.theta1, q.theta2, q.theta3, q.theta4, q.theta5};
    for (int j = 4; j >= 0; --j) expect += thetas[j] * arr[j];
    CHECK(score(q, fv) == Catch::Approx(expect).margin(1e-12));
  }
}

TEST_CASE("sigmoid basics") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1.0) == Catch::Approx(0.7310585786300049).margin(1e-16));
  for (double z : {0.3, 1.7, 5.0, 20.0}) {
    CHECK(sigmoid(-z) == Catch::Approx(1.0 - sigmoid(z)).margin(1e-15));
  }
  CHECK(sigmoid(50.0) <= 1.0);
  CHECK(sigmoid(-50.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(700.0)));
  CHECK(std::isfinite(sigmoid(-700.0)));
}

TEST_CASE("noise maps weights into (0, 0.5)") {
  NoiseParams p;
  CHECK(noise(p, 0.0) == 0.25); // w0 = 0 halves the sigmoid midpoint

  p.w0 = 1.0;
  CHECK(noise(p, 0.0) == Catch::Approx(0.36552928931500245).margin(1e-16));

  // the constant variant ignores delta and the delta weights
  p.w1 = 1e6;
  p.w2 = -1e6;
  CHECK(noise(p, 0.9) == noise(p, 0.0));

  NoiseParams d;
  d.variant = NoiseVariant::delta;
  d.w0 = 0.25;
  d.w1 = 1.0;
  d.w2 = -0.5;
  const double delta = 0.8;
  const double z = 0.25 + 1.0 * 0.8 - 0.5 * 0.64;
  const double expect = 0.5 / (1.0 + std::exp(-z));
  CHECK(noise(d, delta) == Catch::Approx(expect).margin(1e-15));

  for (double w0 : {-1000.0, -40.0, -1.0, 0.0, 1.0, 40.0, 1000.0}) {
    NoiseParams q{NoiseVariant::constant, w0, 0, 0};
    const double v = noise(q, 0.0);
    CHECK(v > 0.0);
    CHECK(v < 0.5);
  }
  NoiseParams lo{NoiseVariant::constant, -2.0, 0, 0};
  NoiseParams mid{NoiseVariant::constant, 0.0, 0, 0};
  NoiseParams hi{NoiseVariant::constant, 2.0, 0, 0};
  CHECK(noise(lo, 0) < noise(mid, 0));
  CHECK(noise(mid, 0) < noise(hi, 0));
}

TEST_CASE("clause distributions are normalized mixtures") {
  // width-2 clause with known breaks: hand-computed mixture
  CnfFormula f;
  f.num_vars = 2;
  f.clauses = {lits({1, 2}), lits({-1})};
  Rng rng(find_seed_for_assignment(2, {0, 0}));
  SolverState s = init_state(f, rng);
  REQUIRE(break_value(s, 0) == 1);
  REQUIRE(break_value(s, 1) == 0);

  PolicyParams params;
  params.scoring.theta1 = -3.0;
  ClauseDistribution d = score_clause(params, s, 0);
  REQUIRE(d.candidates == std::vector<std::uint32_t>{0, 1});
  CHECK(d.p_noise == 0.25);
  CHECK(d.delta == 0.0);

  const double bk0 = std::log1p(1.0) / std::log1p(10.0);
  const double e0 = std::exp(-3.0 * bk0), e1 = 1.0;
  const double sm0 = e0 / (e0 + e1), sm1 = e1 / (e0 + e1);
  CHECK(d.softmax[0] == Catch::Approx(sm0).margin(1e-14));
  CHECK(d.probs[0] == Catch::Approx(0.25 / 2 + 0.75 * sm0).margin(1e-14));
  CHECK(d.probs[1] == Catch::Approx(0.25 / 2 + 0.75 * sm1).margin(1e-14));
  CHECK(d.probs[0] + d.probs[1] == Catch::Approx(1.0).margin(1e-12));

  CHECK(action_distribution(params, s, 0) == d.probs);
}

TEST_CASE("distributions stay normalized for wide clauses and wild scores") {
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t width = 2 + rng.next_below(63); // up to 64 candidates
    std::vector<FeatureVector> features(width);
    for (FeatureVector& fv : features) {
      fv.bk = rng.next_double();
      fv.d1 = rng.next_double();
      fv.d2 = rng.next_double();
      fv.last5 = rng.next_bool() ? 1.0 : 0.0;
      fv.last10 = std::max(fv.last5, rng.next_bool() ? 1.0 : 0.0);
    }
    PolicyParams params;
    params.scoring.theta1 = -500.0; // extreme scale stresses the softmax guard
    params.scoring.theta2 = 300.0;
    params.noise.w0 = rng.next_double() * 4 - 2;
    ClauseDistribution d = distribution_from_features(params, features, 0.0);
    double sum = 0;
    for (double p : d.probs) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
      CHECK(std::isfinite(p));
      sum += p;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("adding a constant to theta0 does not move the distribution") {
  std::vector<FeatureVector> features(4);
  Rng rng(29);
  for (FeatureVector& fv : features) {
    fv.bk = rng.next_double();
    fv.d1 = rng.next_double();
    fv.d2 = rng.next_double();
  }
  PolicyParams a;
  a.scoring = {0.0, -2.0, 1.0, -0.5, 0.3, 0.8};
  PolicyParams b = a;
  b.scoring.theta0 += 17.5;
  ClauseDistribution da = distribution_from_features(a, features, 0.0);
  ClauseDistribution db = distribution_from_features(b, features, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(da.probs[i] == Catch::Approx(db.probs[i]).margin(1e-12));
}

TEST_CASE("sample_action follows the mixture probabilities") {
  CnfFormula f;
  f.num_vars = 2;
  f.clauses = {lits({1, 2}), lits({-1})};
  Rng rng(find_seed_for_assignment(2, {0, 0}));
  SolverState s = init_state(f, rng);
  PolicyParams params;
  params.scoring.theta1 = -3.0;
  const ClauseDistribution d = score_clause(params, s, 0);

  Rng sample_rng(31);
  const std::size_t draws = 60'000;
  std::size_t var0 = 0, greedy_count = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    ActionSample a = sample_action(params, s, 0, sample_rng);
    REQUIRE(a.var == a.dist.candidates[a.index]);
    REQUIRE(a.log_prob == std::log(a.dist.probs[a.index]));
    if (a.var == 0) ++var0;
    if (a.greedy) ++greedy_count;
  }
  const double frac0 = static_cast<double>(var0) / draws;
  const double sd0 = std::sqrt(d.probs[0] * (1 - d.probs[0]) / draws);
  CHECK(frac0 > d.probs[0] - 3 * sd0);
  CHECK(frac0 < d.probs[0] + 3 * sd0);

  const double gfrac = static_cast<double>(greedy_count) / draws;
  const double gsd = std::sqrt(0.75 * 0.25 / draws);
  CHECK(gfrac > 0.75 - 3 * gsd); // greedy branch runs with probability 1 - p_noise
  CHECK(gfrac < 0.75 + 3 * gsd);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(37);
  const double h = 1e-5;
  std::size_t checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t width = 2 + rng.next_below(5);
    std::vector<FeatureVector> features(width);
    for (FeatureVector& fv : features) {
      fv.bk = rng.next_double();
      fv.d1 = rng.next_double();
      fv.d2 = rng.next_double();
      fv.last5 = rng.next_bool() ? 1.0 : 0.0;
      fv.last10 = std::max(fv.last5, rng.next_bool() ? 1.0 : 0.0);
    }
    PolicyParams params;
    double* thetas[6] = {&params.scoring.theta0, &params.scoring.theta1,
                         &params.scoring.theta2, &params.scoring.theta3,
                         &params.scoring.theta4, &params.scoring.theta5};
    for (double* t : thetas) *t = rng.next_double() * 6 - 3;
    params.noise.variant = rep % 2 == 0 ? NoiseVariant::constant : NoiseVariant::delta;
    params.noise.w0 = rng.next_double() * 4 - 2;
    params.noise.w1 = rng.next_double() * 4 - 2;
    params.noise.w2 = rng.next_double() * 4 - 2;
    const double delta = rng.next_double() * 2;
    const std::size_t action = rng.next_below(static_cast<std::uint32_t>(width));

    const ClauseDistribution d = distribution_from_features(params, features, delta);
    const PolicyGrad g = log_prob_grad(params, d, action);

    auto fd_check = [&](double* coord, double analytic) {
      const double saved = *coord;
      *coord = saved + h;
      const double up = log_prob_at(params, features, delta, action);
      *coord = saved - h;
      const double down = log_prob_at(params, features, delta, action);
      *coord = saved;
      const double fd = (up - down) / (2 * h);
      const double err = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-8});
      CHECK(err <= 1e-4);
      ++checked;
    };
    for (std::size_t j = 0; j < 6; ++j) fd_check(thetas[j], g.theta[j]);
    fd_check(&params.noise.w0, g.w[0]);
    if (params.noise.variant == NoiseVariant::delta) {
      fd_check(&params.noise.w1, g.w[1]);
      fd_check(&params.noise.w2, g.w[2]);
    } else {
      CHECK(g.w[1] == 0.0); // inactive coordinates carry no gradient
      CHECK(g.w[2] == 0.0);
    }
  }
  CHECK(checked >= 700);
}

TEST_CASE("theta0 has exactly zero gradient") {
  std::vector<FeatureVector> features(3);
  features[0].bk = 0.2;
  features[1].bk = 0.9;
  features[2].d1 = 0.4;
  PolicyParams params;
  params.scoring.theta1 = -2.0;
  const ClauseDistribution d = distribution_from_features(params, features, 0.0);
  for (std::size_t a = 0; a < 3; ++a) CHECK(log_prob_grad(params, d, a).theta[0] == 0.0);
}

TEST_CASE("policy text round trips exactly") {
  PolicyParams p;
  p.scoring = {0.1, -21.1, -1.8, -2.9, -0.9, -1.3};
  p.noise.variant = NoiseVariant::delta;
  p.noise.w0 = 0.123456789012345678;
  p.noise.w1 = -3.0000000000000004;
  p.noise.w2 = 1e-17;
  p.label = "rand3(50,213)";
  p.provenance = "60 epochs, 200 train instances";
  CHECK(policy_from_text(policy_to_text(p)) == p);

  PolicyParams c;
  c.scoring.theta1 = -0.5;
  c.label = "";
  c.provenance = "";
  CHECK(policy_from_text(policy_to_text(c)) == c);

  const std::string text = policy_to_text(p);
  CHECK(text.find("version = 1\n") == 0);
  CHECK(text.find("variant = delta\n") != std::string::npos);
  CHECK(text.find("theta1 = -21.100000000000001\n") != std::string::npos);

  // the constant variant does not write the delta weights
  CHECK(policy_to_text(c).find("w1") == std::string::npos);
}

TEST_CASE("policy files survive a disk round trip") {
  TempDir dir;
  PolicyParams p;
  p.scoring = {0, -2.5, -0.25, 0.75, -0.125, 0.5};
  p.noise.w0 = -0.375;
  p.label = "rand3(20,85)";
  p.provenance = "unit test";
  const auto path = dir.path / "a.policy";
  save_policy(p, path);
  CHECK(load_policy(path) == p);
  CHECK_THROWS_AS(load_policy(dir.path / "missing.policy"), Error);
}

TEST_CASE("policy parsing rejects malformed input") {
  PolicyParams p;
  p.noise.variant = NoiseVariant::delta;
  const std::string good = policy_to_text(p);

  SECTION("future version") {
    std::string bad = good;
    bad.replace(bad.find("version = 1"), 11, "version = 2");
    CHECK_THROWS_AS(policy_from_text(bad), VersionMismatch);
  }
  SECTION("truncated file") {
    const std::string bad = good.substr(0, good.find("provenance"));
    CHECK_THROWS_AS(policy_from_text(bad), ParseError);
  }
  SECTION("missing theta") {
    std::string bad = good;
    const auto pos = bad.find("theta3");
    bad.erase(pos, bad.find('\n', pos) - pos + 1);
    CHECK_THROWS_AS(policy_from_text(bad), ParseError);
  }
  SECTION("unknown key") {
    CHECK_THROWS_AS(policy_from_text(good + "mystery = 1\n"), ParseError);
  }
  SECTION("duplicate key") {
    CHECK_THROWS_AS(policy_from_text(good + "theta0 = 5\n"), ParseError);
  }
  SECTION("non-numeric value") {
    std::string bad = good;
    bad.replace(bad.find("theta1 = 0"), 10, "theta1 = x");
    CHECK_THROWS_AS(policy_from_text(bad), ParseError);
  }
  SECTION("line without equals") {
    CHECK_THROWS_AS(policy_from_text(good + "dangling\n"), ParseError);
  }
  SECTION("unknown variant") {
    std::string bad = good;
    bad.replace(bad.find("variant = delta"), 15, "variant = other");
    CHECK_THROWS_AS(policy_from_text(bad), ParseError);
  }
  SECTION("delta weight on a constant policy") {
    PolicyParams c;
    CHECK_THROWS_AS(policy_from_text(policy_to_text(c) + "w1 = 0\n"), ParseError);
  }
}

TEST_CASE("PolicyStrategy drives run_sls to a solution") {
  Dataset ds = build_dataset(make_spec(3, 10), {1, 0, 0}, 4747);
  const CnfFormula& f = ds.train[0];
  PolicyParams params; // all-zero scores: uniform greedy branch, p_noise 0.25
  SlsConfig cfg;
  cfg.rng_seed = 48;
  Trace trace;
  SlsOutcome out = run_sls(f, cfg, PolicyStrategy{&params}, &trace);
  REQUIRE(out.solved);
  REQUIRE(out.witness.has_value());
  CHECK(evaluate(f, *out.witness));
  REQUIRE(trace.size() == out.flips_total);
  for (const StepRecord& rec : trace) {
    const std::size_t width = f.clauses[rec.clause].size();
    REQUIRE(rec.candidates.size() == width);
    REQUIRE(rec.features.size() == width);
    REQUIRE(rec.probs.size() == width);
    CHECK(rec.p_noise > 0.0);
    CHECK(rec.p_noise < 0.5);
    double sum = 0;
    for (double pr : rec.probs) sum += pr;
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }

  Trace trace2;
  SlsOutcome out2 = run_sls(f, cfg, PolicyStrategy{&params}, &trace2);
  CHECK(out.flips_total == out2.flips_total);
  CHECK(out.witness == out2.witness);
}
