#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "objcavit/core/tape.hpp"
#include "objcavit/nn.hpp"

namespace objcavit {

struct LrMomentum {
  double lr = 0.0;
  double momentum = 0.0;
};

// Single-cycle schedule: 30% of the budget cosine-anneals the lr from
// max_lr/div_factor up to max_lr (momentum max -> base), the remainder
// anneals down to max_lr/(div_factor*final_div_factor) (momentum back up).
inline LrMomentum one_cycle_lr(std::int64_t step, std::int64_t total_steps, double max_lr,
                               double div_factor = 25.0, double final_div_factor = 100.0,
                               double base_momentum = 0.85, double max_momentum = 0.95) {
  if (total_steps < 1) throw std::invalid_argument("one_cycle_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("one_cycle_lr: step " + std::to_string(step) +
                                " outside [0," + std::to_string(total_steps) + "]");
  const double initial_lr = max_lr / div_factor;
  const double min_lr = max_lr / (div_factor * final_div_factor);
  const std::int64_t up_steps =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(0.3 * static_cast<double>(total_steps))));
  auto cosine = [](double frac) { return 0.5 * (1.0 + std::cos(M_PI * frac)); };

  LrMomentum out;
  if (step <= up_steps) {
    const double frac = static_cast<double>(step) / static_cast<double>(up_steps);
    out.lr = max_lr + (initial_lr - max_lr) * cosine(frac);
    out.momentum = base_momentum + (max_momentum - base_momentum) * cosine(frac);
  } else {
    const double frac = static_cast<double>(step - up_steps) /
                        static_cast<double>(total_steps - up_steps);
    out.lr = min_lr + (max_lr - min_lr) * cosine(frac);
    out.momentum = max_momentum + (base_momentum - max_momentum) * cosine(frac);
  }
  return out;
}

// AdamW: Adam moment update with decoupled weight decay. beta1 follows the
// momentum schedule; bias correction uses the current beta1.
template <typename T>
class AdamW {
public:
  explicit AdamW(ParamStore<T>& params, double weight_decay = 0.01, double beta2 = 0.999,
                 double eps = 1e-8)
      : params_(params), weight_decay_(weight_decay), beta2_(beta2), eps_(eps) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = Tensor<T>::zeros(params.entries()[i].value.shape);
      v_[i] = Tensor<T>::zeros(params.entries()[i].value.shape);
    }
  }

  // Applies one update from the gradients currently on the tape.
  void step(Tape<T>& tape, double lr, double beta1) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& entry = params_.entries()[i];
      const Tensor<T>& g = tape.grad(entry.var);
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (std::int64_t k = 0; k < entry.value.numel(); ++k) {
        const double gk = static_cast<double>(g[k]);
        const double mk = beta1 * static_cast<double>(m[k]) + (1.0 - beta1) * gk;
        const double vk = beta2_ * static_cast<double>(v[k]) + (1.0 - beta2_) * gk * gk;
        m[k] = static_cast<T>(mk);
        v[k] = static_cast<T>(vk);
        const double update = (mk / bc1) / (std::sqrt(vk / bc2) + eps_);
        double value = static_cast<double>(entry.value[k]);
        value -= lr * update;
        value -= lr * weight_decay_ * value;
        entry.value[k] = static_cast<T>(value);
      }
    }
  }

  std::int64_t steps_taken() const { return t_; }

private:
  ParamStore<T>& params_;
  double weight_decay_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace objcavit
