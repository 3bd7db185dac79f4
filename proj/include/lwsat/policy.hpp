#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lwsat/error.hpp"
#include "lwsat/rng.hpp"
#include "lwsat/sls.hpp"

namespace lwsat {

struct VersionMismatch : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};

/// Per-candidate variable features, all in [0,1].
struct FeatureVector {
  double bk = 0;     // saturating log of the break value
  double d1 = 0;     // normalized time since last flip (any cause)
  double d2 = 0;     // normalized time since last scoring-function flip
  double last5 = 0;  // 1 iff scoring-function-flipped within the last 5 steps
  double last10 = 0; // same with 10

  std::array<double, kNumFeatures> to_array() const { return {bk, d1, d2, last5, last10}; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct ScoringParams {
  double theta0 = 0, theta1 = 0, theta2 = 0, theta3 = 0, theta4 = 0, theta5 = 0;

  friend bool operator==(const ScoringParams&, const ScoringParams&) = default;
};

enum class NoiseVariant { constant, delta };

struct NoiseParams {
  NoiseVariant variant = NoiseVariant::constant;
  double w0 = 0;
  double w1 = 0, w2 = 0; // used by the delta variant only

  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

struct PolicyParams {
  ScoringParams scoring;
  NoiseParams noise;
  std::string label;      // distribution the policy was trained for
  std::string provenance; // free-form training description

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

inline constexpr double kBreakClamp = 10.0;

/// Features of candidate x at pick time. The pick for flip number t happens
/// while state.t is still t-1, so the effective counter is s.t + 1; with
/// ages initialized to 0 this keeps d1/d2 in [0,1] from the very first pick.
inline FeatureVector extract_features(const SolverState& s, std::uint32_t x) {
  const double t = static_cast<double>(s.t + 1);
  FeatureVector fv;
  const double b = std::min<double>(break_value(s, x), kBreakClamp);
  fv.bk = std::log1p(b) / std::log1p(kBreakClamp);
  fv.d1 = 1.0 - static_cast<double>(s.age1[x]) / t;
  fv.d2 = 1.0 - static_cast<double>(s.age2[x]) / t;
  const double since2 = t - static_cast<double>(s.age2[x]);
  fv.last5 = (s.age2[x] > 0 && since2 <= 5) ? 1.0 : 0.0;
  fv.last10 = (s.age2[x] > 0 && since2 <= 10) ? 1.0 : 0.0;
  return fv;
}

inline double score(const ScoringParams& p, const FeatureVector& fv) {
  return p.theta0 + p.theta1 * fv.bk + p.theta2 * fv.d1 + p.theta3 * fv.d2 +
         p.theta4 * fv.last5 + p.theta5 * fv.last10;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline constexpr double kNoiseFloor = 1e-15;

/// Walk probability, strictly inside (0, 0.5) for all finite inputs. delta
/// is the stagnation counter over the clause count; the constant variant
/// ignores it.
inline double noise(const NoiseParams& p, double delta) {
  double z = p.w0;
  if (p.variant == NoiseVariant::delta) z += p.w1 * delta + p.w2 * delta * delta;
  const double v = 0.5 * sigmoid(z);
  return std::clamp(v, kNoiseFloor, 0.5 - kNoiseFloor);
}

/// Everything computed when scoring one unsatisfied clause: candidates in
/// literal order, their features and scores, the softmax, the walk
/// probability at the current stagnation level, and the mixture
/// distribution actually sampled from.
struct ClauseDistribution {
  std::vector<std::uint32_t> candidates;
  std::vector<FeatureVector> features;
  std::vector<double> scores;
  std::vector<double> softmax;
  std::vector<double> probs;
  double p_noise = 0;
  double delta = 0;
};

/// Builds the distribution from already-extracted features; the candidate
/// list is left empty for the caller to fill. Softmax uses max-subtraction.
inline ClauseDistribution distribution_from_features(const PolicyParams& params,
                                                     std::vector<FeatureVector> features,
                                                     double delta) {
  ClauseDistribution d;
  d.features = std::move(features);
  const std::size_t k = d.features.size();
  d.scores.reserve(k);
  for (const FeatureVector& fv : d.features) d.scores.push_back(score(params.scoring, fv));
  const double mx = *std::max_element(d.scores.begin(), d.scores.end());
  double sum = 0;
  d.softmax.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    d.softmax[i] = std::exp(d.scores[i] - mx);
    sum += d.softmax[i];
  }
  for (double& v : d.softmax) v /= sum;
  d.delta = delta;
  d.p_noise = noise(params.noise, delta);
  d.probs.resize(k);
  for (std::size_t i = 0; i < k; ++i)
    d.probs[i] = d.p_noise / static_cast<double>(k) + (1.0 - d.p_noise) * d.softmax[i];
  return d;
}

inline ClauseDistribution score_clause(const PolicyParams& params, const SolverState& s,
                                       std::uint32_t c) {
  const Clause& cl = s.formula->clauses[c];
  std::vector<FeatureVector> features;
  features.reserve(cl.size());
  for (Literal l : cl) features.push_back(extract_features(s, l.var()));
  const double delta =
      static_cast<double>(s.stagnation_counter) / static_cast<double>(s.formula->num_clauses());
  ClauseDistribution d = distribution_from_features(params, std::move(features), delta);
  d.candidates.reserve(cl.size());
  for (Literal l : cl) d.candidates.push_back(l.var());
  return d;
}

/// Mixture action distribution over the variables of clause c:
/// P(x) = p_noise/|c| + (1-p_noise) * softmax(scores)(x).
inline std::vector<double> action_distribution(const PolicyParams& params, const SolverState& s,
                                               std::uint32_t c) {
  return score_clause(params, s, c).probs;
}

/// A sampled action plus the cached quantities the gradient needs.
struct ActionSample {
  std::uint32_t var = 0;
  std::size_t index = 0;  // position of var within dist.candidates
  bool greedy = false;    // branch taken: scoring (true) or uniform noise
  double log_prob = 0;    // ln of the mixture probability of the action
  ClauseDistribution dist;
};

/// Samples the branch first (so the greedy flag is meaningful), then a
/// variable within the branch; the reported log-probability is the marginal
/// mixture probability, which is what the gradient differentiates.
inline ActionSample sample_action(const PolicyParams& params, const SolverState& s,
                                  std::uint32_t c, Rng& rng) {
  ActionSample a;
  a.dist = score_clause(params, s, c);
  const std::size_t k = a.dist.candidates.size();
  if (rng.next_double() < a.dist.p_noise) {
    a.greedy = false;
    a.index = rng.next_below(static_cast<std::uint32_t>(k));
  } else {
    a.greedy = true;
    const double u = rng.next_double();
    double acc = 0;
    a.index = k - 1; // guard against rounding leaving u above the final cdf
    for (std::size_t i = 0; i < k; ++i) {
      acc += a.dist.softmax[i];
      if (u < acc) {
        a.index = i;
        break;
      }
    }
  }
  a.var = a.dist.candidates[a.index];
  a.log_prob = std::log(a.dist.probs[a.index]);
  return a;
}

/// Gradient of a log-probability with respect to (theta0..theta5, w0..w2).
/// Inactive noise coordinates stay zero.
struct PolicyGrad {
  std::array<double, 6> theta{};
  std::array<double, 3> w{};

  PolicyGrad& operator+=(const PolicyGrad& o) {
    for (std::size_t i = 0; i < 6; ++i) theta[i] += o.theta[i];
    for (std::size_t i = 0; i < 3; ++i) w[i] += o.w[i];
    return *this;
  }
  PolicyGrad& operator*=(double f) {
    for (double& v : theta) v *= f;
    for (double& v : w) v *= f;
    return *this;
  }
};

/// Analytic gradient of ln P(action) under the mixture distribution.
/// For the scoring parameters, with phi(x) = (1, features(x)):
///   d/dtheta = (1-p) * softmax(a) * (phi(a) - E_softmax[phi]) / P(a).
/// For the noise parameters, through p = 0.5*sigmoid(z):
///   d/dw_j = (1/|c| - softmax(a)) / P(a) * p*(1-2p) * delta^j,
/// where p*(1-2p) is the sigmoid chain factor 0.5*s*(1-s) rewritten via
/// s = 2p, and only the variant's active coordinates are filled.
inline PolicyGrad log_prob_grad(const PolicyParams& params, const ClauseDistribution& d,
                                std::size_t action) {
  PolicyGrad g;
  const std::size_t k = d.features.size();
  const double pa = d.probs[action];
  const double pn = d.p_noise;

  std::array<double, kNumFeatures> mean{};
  for (std::size_t i = 0; i < k; ++i) {
    const auto fi = d.features[i].to_array();
    for (std::size_t j = 0; j < kNumFeatures; ++j) mean[j] += d.softmax[i] * fi[j];
  }
  const double coeff = (1.0 - pn) * d.softmax[action] / pa;
  const auto fa = d.features[action].to_array();
  g.theta[0] = 0; // phi's constant component cancels against E[phi]
  for (std::size_t j = 0; j < kNumFeatures; ++j) g.theta[j + 1] = coeff * (fa[j] - mean[j]);

  const double dpdz = pn * (1.0 - 2.0 * pn);
  const double base = (1.0 / static_cast<double>(k) - d.softmax[action]) / pa * dpdz;
  g.w[0] = base;
  if (params.noise.variant == NoiseVariant::delta) {
    g.w[1] = base * d.delta;
    g.w[2] = base * d.delta * d.delta;
  }
  return g;
}

inline constexpr int kPolicyFormatVersion = 1;

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

} // namespace detail

inline std::string policy_to_text(const PolicyParams& p) {
  std::ostringstream os;
  os << "version = " << kPolicyFormatVersion << "\n";
  os << "variant = " << (p.noise.variant == NoiseVariant::delta ? "delta" : "constant") << "\n";
  const double thetas[6] = {p.scoring.theta0, p.scoring.theta1, p.scoring.theta2,
                            p.scoring.theta3, p.scoring.theta4, p.scoring.theta5};
  for (int i = 0; i < 6; ++i)
    os << "theta" << i << " = " << detail::format_double(thetas[i]) << "\n";
  os << "w0 = " << detail::format_double(p.noise.w0) << "\n";
  if (p.noise.variant == NoiseVariant::delta) {
    os << "w1 = " << detail::format_double(p.noise.w1) << "\n";
    os << "w2 = " << detail::format_double(p.noise.w2) << "\n";
  }
  os << "label = " << p.label << "\n";
  os << "provenance = " << p.provenance << "\n";
  return os.str();
}

inline PolicyParams policy_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("policy file line without '=': " + line);
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("policy file line with empty key");
    if (!kv.emplace(key, val).second) throw ParseError("duplicate policy key: " + key);
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("missing policy key: " + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_double = [&](const std::string& key) {
    const std::string v = take(key);
    try {
      std::size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw ParseError("trailing junk in value of " + key);
      return d;
    } catch (const std::logic_error&) {
      throw ParseError("bad numeric value for " + key + ": " + v);
    }
  };
  const std::string version = take("version");
  if (version != std::to_string(kPolicyFormatVersion))
    throw VersionMismatch("unsupported policy version: " + version);
  PolicyParams p;
  const std::string variant = take("variant");
  if (variant == "constant")
    p.noise.variant = NoiseVariant::constant;
  else if (variant == "delta")
    p.noise.variant = NoiseVariant::delta;
  else
    throw ParseError("unknown noise variant: " + variant);
  p.scoring.theta0 = take_double("theta0");
  p.scoring.theta1 = take_double("theta1");
  p.scoring.theta2 = take_double("theta2");
  p.scoring.theta3 = take_double("theta3");
  p.scoring.theta4 = take_double("theta4");
  p.scoring.theta5 = take_double("theta5");
  p.noise.w0 = take_double("w0");
  if (p.noise.variant == NoiseVariant::delta) {
    p.noise.w1 = take_double("w1");
    p.noise.w2 = take_double("w2");
  }
  p.label = take("label");
  p.provenance = take("provenance");
  if (!kv.empty()) throw ParseError("unknown policy key: " + kv.begin()->first);
  return p;
}

inline void save_policy(const PolicyParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write policy file " + path.string());
  out << policy_to_text(p);
}

inline PolicyParams load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read policy file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return policy_from_text(ss.str());
}

/// LearnWSAT selection as a strategy for run_sls: sample from the mixture
/// distribution of the picked clause. Fills the trace record with the
/// per-candidate features and probabilities when tracing is on.
struct PolicyStrategy {
  const PolicyParams* params = nullptr;

  Pick operator()(const SolverState& s, std::uint32_t c, Rng& rng, StepRecord* rec) const {
    ActionSample a = sample_action(*params, s, c, rng);
    if (rec) {
      rec->p_noise = a.dist.p_noise;
      rec->candidates = a.dist.candidates;
      rec->features.reserve(a.dist.features.size());
      for (const FeatureVector& fv : a.dist.features) rec->features.push_back(fv.to_array());
      rec->probs = a.dist.probs;
    }
    return {a.var, a.greedy};
  }
};

} // namespace lwsat
