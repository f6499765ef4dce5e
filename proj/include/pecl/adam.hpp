#ifndef PECL_ADAM_HPP
#define PECL_ADAM_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "pecl/param.hpp"

namespace pecl {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction, walking parameters in registration order.
// Moment buffers exist only for trainable parameters; a frozen parameter has
// no state here at all.
template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& store, AdamConfig cfg) : cfg_(cfg) {
    for (auto& p : store.all()) {
      if (!p.trainable) continue;
      slots_.push_back(Slot{&p, std::vector<T>(p.value.size(), T(0)),
                            std::vector<T>(p.value.size(), T(0))});
    }
  }

  void step() {
    ++t_;
    const T c1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, t_));
    const T c2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, t_));
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.lr);
    const T eps = static_cast<T>(cfg_.eps);
    for (Slot& s : slots_) {
      const std::vector<T>& g = s.param->value.grad();
      if (g.empty()) continue;  // no gradient reached this parameter
      std::vector<T>& w = s.param->value.data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        s.m[i] = b1 * s.m[i] + (T(1) - b1) * g[i];
        s.v[i] = b2 * s.v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = s.m[i] / c1;
        const T vhat = s.v[i] / c2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  std::size_t state_count() const { return slots_.size(); }
  long long step_count() const { return t_; }

 private:
  struct Slot {
    Parameter<T>* param;
    std::vector<T> m, v;
  };
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  long long t_ = 0;
};

}  // namespace pecl

#endif  // PECL_ADAM_HPP
