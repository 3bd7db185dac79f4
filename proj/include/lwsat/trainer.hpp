#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "lwsat/cnf.hpp"
#include "lwsat/error.hpp"
#include "lwsat/eval.hpp"
#include "lwsat/gen.hpp"
#include "lwsat/optim.hpp"
#include "lwsat/parallel.hpp"
#include "lwsat/policy.hpp"
#include "lwsat/rng.hpp"
#include "lwsat/sls.hpp"

namespace lwsat {

struct NonFiniteGradient : Error {
  using Error::Error;
};

struct TrainConfig {
  std::uint32_t epochs = 60;
  std::uint32_t warmup_epochs = 5;
  double gamma = 0.5;          // discount on early actions
  std::uint32_t batch_size = 32; // episodes per parameter update
  std::uint64_t max_flips_train = 10'000;
  double lr_max = 1e-2;        // one-cycle peak for the RL phase
  double warmup_lr = 5e-2;     // per-episode imitation updates
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  NoiseVariant noise_variant = NoiseVariant::constant;
  bool reward_baseline = false; // subtract the batch-mean reward (experimental)
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw Error("gamma must be in (0,1)");
  if (cfg.epochs < 1) throw Error("epochs must be >= 1");
  if (cfg.batch_size < 1) throw Error("batch_size must be >= 1");
  if (cfg.max_flips_train < 1) throw Error("max_flips_train must be >= 1");
}

/// Zero scoring weights; w0 = logit(2 * 0.25) = 0, so the initial walk
/// probability is 0.25, the midpoint of the reachable (0, 0.5) range.
inline PolicyParams initial_params(NoiseVariant variant) {
  PolicyParams p;
  p.noise.variant = variant;
  return p;
}

// seed-stream tags so warm-up, episodes, shuffling and validation never
// share a substream
namespace seedtag {
inline constexpr std::uint64_t warmup = 1'000'000;
inline constexpr std::uint64_t episode = 2'000'000;
inline constexpr std::uint64_t validation = 3'000'000;
inline constexpr std::uint64_t shuffle = 4'000'000;
} // namespace seedtag

struct EpisodeStep {
  ClauseDistribution dist;
  std::size_t action = 0;
};

struct EpisodeRecord {
  std::vector<EpisodeStep> steps;
  double reward = 0; // 1 iff the episode ended satisfied
};

namespace detail {

/// Samples the policy and keeps each step's cached distribution for the
/// gradient pass.
struct EpisodeCollector {
  const PolicyParams* params;
  std::vector<EpisodeStep>* sink;

  Pick operator()(const SolverState& s, std::uint32_t c, Rng& rng, StepRecord*) const {
    ActionSample a = sample_action(*params, s, c, rng);
    const Pick pick{a.var, a.greedy};
    sink->push_back(EpisodeStep{std::move(a.dist), a.index});
    return pick;
  }
};

} // namespace detail

/// One policy episode: a single try truncated at max_flips.
inline EpisodeRecord run_episode(const CnfFormula& f, const PolicyParams& params,
                                 std::uint64_t max_flips, std::uint64_t seed) {
  EpisodeRecord ep;
  SlsConfig cfg;
  cfg.max_flips = max_flips;
  cfg.max_tries = 1;
  cfg.rng_seed = seed;
  detail::EpisodeCollector collector{&params, &ep.steps};
  SlsOutcome out = run_sls(f, cfg, collector);
  ep.reward = out.solved ? 1.0 : 0.0;
  return ep;
}

/// Discounted episode gradient: sum over steps of gamma^(T-1-i) * coeff *
/// grad log pi(a_i), so the final action carries weight gamma^0 = 1.
inline PolicyGrad episode_grad(const PolicyParams& params, const EpisodeRecord& ep, double gamma,
                               double coeff) {
  PolicyGrad g;
  if (coeff == 0.0 || ep.steps.empty()) return g;
  double weight = coeff;
  for (std::size_t i = ep.steps.size(); i-- > 0;) {
    PolicyGrad step = log_prob_grad(params, ep.steps[i].dist, ep.steps[i].action);
    step *= weight;
    g += step;
    weight *= gamma;
  }
  return g;
}

/// One REINFORCE ascent step from a batch of episodes. Gradients are summed
/// over episodes in list order before the single optimizer step, so the
/// update is independent of how the episodes were produced or scheduled.
inline void reinforce_update(const std::vector<EpisodeRecord>& batch, PolicyParams& params,
                             AdamW& opt, double lr, double gamma, bool reward_baseline,
                             const std::string& diag = {}) {
  if (batch.empty()) throw Error("reinforce_update on an empty batch");
  double baseline = 0;
  if (reward_baseline) {
    for (const EpisodeRecord& ep : batch) baseline += ep.reward;
    baseline /= static_cast<double>(batch.size());
  }
  PolicyGrad g;
  for (const EpisodeRecord& ep : batch) g += episode_grad(params, ep, gamma, ep.reward - baseline);
  std::vector<double> grad = flatten_grad(g, params.noise.variant);
  for (double v : grad)
    if (!std::isfinite(v))
      throw NonFiniteGradient("non-finite policy gradient" + (diag.empty() ? "" : " at " + diag));
  std::vector<double> vec = flatten_params(params);
  for (double& v : grad) v = -v; // ascend the return
  opt.step(vec, grad, lr);
  unflatten_params(params, vec);
}

/// Supervised warm-up data: one record per greedy WalkSAT step, holding the
/// candidate features and the imitation target (uniform over the
/// minimum-break candidates).
struct WarmupStep {
  std::vector<FeatureVector> features;
  std::vector<double> target;
};

namespace detail {

struct WarmupCollector {
  std::vector<WarmupStep>* sink;
  double p = 0.5;

  Pick operator()(const SolverState& s, std::uint32_t c, Rng& rng, StepRecord*) const {
    Pick pick = walksat_pickvar(s, c, p, rng);
    if (pick.greedy) {
      const Clause& cl = s.formula->clauses[c];
      WarmupStep step;
      step.features.reserve(cl.size());
      std::vector<std::uint32_t> breaks;
      breaks.reserve(cl.size());
      for (Literal l : cl) {
        step.features.push_back(extract_features(s, l.var()));
        breaks.push_back(break_value(s, l.var()));
      }
      const std::uint32_t best = *std::min_element(breaks.begin(), breaks.end());
      std::size_t ties = 0;
      for (std::uint32_t b : breaks)
        if (b == best) ++ties;
      step.target.resize(cl.size());
      for (std::size_t i = 0; i < cl.size(); ++i)
        step.target[i] = breaks[i] == best ? 1.0 / static_cast<double>(ties) : 0.0;
      sink->push_back(std::move(step));
    }
    return pick;
  }
};

} // namespace detail

/// Greedy-step imitation data from one WalkSAT episode (single try).
inline std::vector<WarmupStep> collect_warmup_steps(const CnfFormula& f, std::uint64_t max_flips,
                                                    std::uint64_t seed, double p = 0.5) {
  std::vector<WarmupStep> steps;
  SlsConfig cfg;
  cfg.max_flips = max_flips;
  cfg.max_tries = 1;
  cfg.rng_seed = seed;
  detail::WarmupCollector collector{&steps, p};
  run_sls(f, cfg, collector);
  return steps;
}

/// One cross-entropy descent step of the scoring weights on an episode's
/// greedy steps (mean over steps). The bias column cancels in the softmax
/// gradient, so only theta1..theta5 move. Returns the mean loss before the
/// update.
inline double warmup_fit_episode(PolicyParams& params, AdamW& opt,
                                 const std::vector<WarmupStep>& steps, double lr) {
  if (steps.empty()) return 0.0;
  std::array<double, kNumFeatures> acc{};
  double loss = 0;
  for (const WarmupStep& st : steps) {
    ClauseDistribution d = distribution_from_features(params, st.features, 0.0);
    for (std::size_t y = 0; y < st.features.size(); ++y) {
      if (st.target[y] > 0) loss -= st.target[y] * std::log(d.softmax[y]);
      const double diff = d.softmax[y] - st.target[y];
      const auto fy = st.features[y].to_array();
      for (std::size_t j = 0; j < kNumFeatures; ++j) acc[j] += diff * fy[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(steps.size());
  std::vector<double> grad(6, 0.0);
  for (std::size_t j = 0; j < kNumFeatures; ++j) grad[j + 1] = acc[j] * inv;
  std::vector<double> theta{params.scoring.theta0, params.scoring.theta1, params.scoring.theta2,
                            params.scoring.theta3, params.scoring.theta4, params.scoring.theta5};
  opt.step(theta, grad, lr);
  params.scoring.theta0 = theta[0];
  params.scoring.theta1 = theta[1];
  params.scoring.theta2 = theta[2];
  params.scoring.theta3 = theta[3];
  params.scoring.theta4 = theta[4];
  params.scoring.theta5 = theta[5];
  return loss * inv;
}

struct WarmupResult {
  PolicyParams params;
  std::vector<double> loss_curve; // mean cross-entropy per warm-up epoch
};

/// Imitation warm-up: per epoch, one WalkSAT episode per training formula,
/// each followed by a stochastic cross-entropy update of the scoring
/// weights. Noise parameters stay at initialization. Zero epochs returns
/// the initialization untouched.
inline WarmupResult warmup(const std::vector<CnfFormula>& train, const TrainConfig& cfg) {
  if (train.empty()) throw Error("warmup needs a nonempty training set");
  WarmupResult res;
  res.params = initial_params(cfg.noise_variant);
  AdamW opt(6, 0.0);
  for (std::uint32_t epoch = 0; epoch < cfg.warmup_epochs; ++epoch) {
    double loss_sum = 0;
    std::size_t loss_n = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const std::uint64_t seed = derive_seed(cfg.seed, seedtag::warmup + epoch, i);
      std::vector<WarmupStep> steps = collect_warmup_steps(train[i], cfg.max_flips_train, seed);
      if (steps.empty()) continue;
      loss_sum += warmup_fit_episode(res.params, opt, steps, cfg.warmup_lr);
      ++loss_n;
    }
    res.loss_curve.push_back(loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0);
  }
  return res;
}

struct TrainReport {
  std::vector<double> val_mflips;  // [0] after warm-up, [e] after RL epoch e
  std::vector<double> best_so_far; // running minimum of val_mflips
  std::size_t selected_epoch = 0;  // index into val_mflips of the kept model
  PolicyParams params;             // parameters at the selected epoch
  std::vector<double> warmup_loss;
};

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(static_cast<std::uint32_t>(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

inline std::string train_provenance(const DistributionSpec& spec, const TrainConfig& cfg,
                                    std::size_t train_size) {
  std::ostringstream os;
  os << "trained on " << spec.label << " (" << train_size << " formulas)"
     << " epochs=" << cfg.epochs << " warmup=" << cfg.warmup_epochs << " gamma=" << cfg.gamma
     << " batch=" << cfg.batch_size << " seed=" << cfg.seed
     << " variant=" << (cfg.noise_variant == NoiseVariant::delta ? "delta" : "constant");
  return os.str();
}

} // namespace detail

/// Full pipeline: warm-up, then REINFORCE epochs over shuffled mini-batches
/// with a one-cycle learning rate, validating after warm-up and after every
/// epoch and keeping the parameters with the lowest validation m-flips.
/// Checkpoints are written per epoch when checkpoint_dir is given.
inline TrainReport train(const Dataset& ds, const TrainConfig& cfg,
                         const std::filesystem::path& checkpoint_dir = {},
                         unsigned threads = 1) {
  validate_train_config(cfg);
  if (ds.train.empty() || ds.val.empty()) throw Error("train needs nonempty train and val splits");
  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

  TrainReport report;
  PolicyParams params;
  if (cfg.warmup_epochs > 0) {
    WarmupResult w = warmup(ds.train, cfg);
    params = std::move(w.params);
    report.warmup_loss = std::move(w.loss_curve);
  } else {
    params = initial_params(cfg.noise_variant);
  }
  params.label = ds.spec.label;
  params.provenance = detail::train_provenance(ds.spec, cfg, ds.train.size());

  EvalConfig val_cfg;
  val_cfg.seed = derive_seed(cfg.seed, seedtag::validation);
  auto validate = [&](const PolicyParams& p) {
    return evaluate_solver(policy_solver(p), ds.val, val_cfg, threads).m_flips;
  };

  double best_m = validate(params);
  report.val_mflips.push_back(best_m);
  report.selected_epoch = 0;
  PolicyParams best_params = params;
  if (!checkpoint_dir.empty()) save_policy(params, checkpoint_dir / "epoch_000.policy");

  const std::size_t batches_per_epoch =
      (ds.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  OneCycleSchedule schedule;
  schedule.lr_max = cfg.lr_max;
  schedule.total_updates = static_cast<std::size_t>(cfg.epochs) * batches_per_epoch;
  AdamW opt(param_dim(cfg.noise_variant), cfg.weight_decay);

  std::size_t update_index = 0;
  std::uint64_t episode_counter = 0;
  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, seedtag::shuffle + epoch));
    std::vector<std::size_t> order = detail::shuffled_indices(ds.train.size(), shuffle_rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      // episodes run on read-only params, one result slot each; the gradient
      // is then summed in slot order, so thread count cannot change the update
      std::vector<EpisodeRecord> batch(end - b);
      const std::uint64_t counter_base = episode_counter;
      episode_counter += end - b;
      parallel_for(end - b, threads, [&](std::size_t s) {
        const std::uint64_t seed =
            derive_seed(cfg.seed, seedtag::episode + epoch, counter_base + s);
        batch[s] = run_episode(ds.train[order[b + s]], params, cfg.max_flips_train, seed);
      });
      const std::string diag =
          "epoch " + std::to_string(epoch) + " batch " + std::to_string(b / cfg.batch_size);
      reinforce_update(batch, params, opt, schedule.lr(update_index++), cfg.gamma,
                       cfg.reward_baseline, diag);
    }
    const double val_m = validate(params);
    report.val_mflips.push_back(val_m);
    if (val_m < best_m) {
      best_m = val_m;
      best_params = params;
      report.selected_epoch = epoch;
    }
    if (!checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03u.policy", epoch);
      save_policy(params, checkpoint_dir / name);
    }
  }

  report.best_so_far.reserve(report.val_mflips.size());
  double running = std::numeric_limits<double>::infinity();
  for (double v : report.val_mflips) {
    running = std::min(running, v);
    report.best_so_far.push_back(running);
  }
  report.params = std::move(best_params);
  return report;
}

inline nlohmann::json train_report_to_json(const TrainReport& rep) {
  return nlohmann::json{{"val_mflips", rep.val_mflips},
                        {"best_so_far", rep.best_so_far},
                        {"selected_epoch", rep.selected_epoch},
                        {"warmup_loss", rep.warmup_loss},
                        {"policy", policy_to_text(rep.params)}};
}

} // namespace lwsat
