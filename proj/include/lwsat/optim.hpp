#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lwsat/error.hpp"
#include "lwsat/policy.hpp"

namespace lwsat {

/// Adam with decoupled weight decay, minimizing. Callers maximizing an
/// objective pass the negated gradient.
class AdamW {
public:
  AdamW(std::size_t dim, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps), m_(dim, 0.0), v_(dim, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw Error("AdamW dimension mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + wd_ * params[i]);
    }
  }

private:
  double wd_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

/// One-cycle learning rate: linear ramp from lr_max/div_start to lr_max over
/// the first pct_ramp of updates, then cosine decay to lr_max/div_final.
struct OneCycleSchedule {
  double lr_max = 1e-2;
  std::size_t total_updates = 1;
  double pct_ramp = 0.3;
  double div_start = 10.0;
  double div_final = 1000.0;

  double lr(std::size_t update_index) const {
    if (total_updates <= 1) return lr_max;
    const double x = static_cast<double>(update_index) / static_cast<double>(total_updates - 1);
    const double lr_start = lr_max / div_start;
    const double lr_final = lr_max / div_final;
    if (x <= pct_ramp) return lr_start + (lr_max - lr_start) * (x / pct_ramp);
    const double s = (x - pct_ramp) / (1.0 - pct_ramp);
    return lr_final + (lr_max - lr_final) * 0.5 * (1.0 + std::cos(s * 3.14159265358979323846));
  }
};

/// Flat parameter order: theta0..theta5, then the variant's active noise
/// coordinates (w0 or w0,w1,w2).
inline std::size_t param_dim(NoiseVariant v) { return v == NoiseVariant::delta ? 9 : 7; }

inline std::vector<double> flatten_params(const PolicyParams& p) {
  std::vector<double> out{p.scoring.theta0, p.scoring.theta1, p.scoring.theta2,
                          p.scoring.theta3, p.scoring.theta4, p.scoring.theta5,
                          p.noise.w0};
  if (p.noise.variant == NoiseVariant::delta) {
    out.push_back(p.noise.w1);
    out.push_back(p.noise.w2);
  }
  return out;
}

inline void unflatten_params(PolicyParams& p, const std::vector<double>& v) {
  if (v.size() != param_dim(p.noise.variant)) throw Error("parameter vector size mismatch");
  p.scoring.theta0 = v[0];
  p.scoring.theta1 = v[1];
  p.scoring.theta2 = v[2];
  p.scoring.theta3 = v[3];
  p.scoring.theta4 = v[4];
  p.scoring.theta5 = v[5];
  p.noise.w0 = v[6];
  if (p.noise.variant == NoiseVariant::delta) {
    p.noise.w1 = v[7];
    p.noise.w2 = v[8];
  }
}

inline std::vector<double> flatten_grad(const PolicyGrad& g, NoiseVariant variant) {
  std::vector<double> out(g.theta.begin(), g.theta.end());
  out.push_back(g.w[0]);
  if (variant == NoiseVariant::delta) {
    out.push_back(g.w[1]);
    out.push_back(g.w[2]);
  }
  return out;
}

} // namespace lwsat
