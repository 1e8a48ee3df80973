#include "tcm/optim.hpp"

#include <cmath>
#include <string>

#include "tcm/errors.hpp"

namespace tcm {

void AdamWConfig::validate() const {
  if (!(lr >= Real(0))) throw HyperparameterError("optim.lr must be >= 0");
  if (!(beta1 >= Real(0) && beta1 < Real(1))) {
    throw HyperparameterError("optim.beta1 must be in [0, 1)");
  }
  if (!(beta2 >= Real(0) && beta2 < Real(1))) {
    throw HyperparameterError("optim.beta2 must be in [0, 1)");
  }
  if (!(eps > Real(0))) throw HyperparameterError("optim.eps must be > 0");
  if (!(weight_decay >= Real(0))) throw HyperparameterError("optim.weight_decay must be >= 0");
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config) : config_(config) {
  config_.validate();
  slots_.reserve(params.size());
  for (auto& p : params) {
    Slot s;
    s.m.assign(p.size(), Real(0));
    s.v.assign(p.size(), Real(0));
    s.param = std::move(p);
    slots_.push_back(std::move(s));
  }
}

void AdamW::step() {
  for (const Slot& s : slots_) {
    if (!s.param.requires_grad() || !s.param.has_grad()) {
      throw ContractError("adamw step: parameter without gradient buffer");
    }
  }
  ++step_count_;
  const Real t = Real(step_count_);
  const Real bc1 = Real(1) - std::pow(config_.beta1, t);
  const Real bc2 = Real(1) - std::pow(config_.beta2, t);
  for (Slot& s : slots_) {
    auto w = s.param.values();
    auto g = s.param.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      s.m[i] = config_.beta1 * s.m[i] + (Real(1) - config_.beta1) * g[i];
      s.v[i] = config_.beta2 * s.v[i] + (Real(1) - config_.beta2) * g[i] * g[i];
      const Real mhat = s.m[i] / bc1;
      const Real vhat = s.v[i] / bc2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
      w[i] -= config_.lr * config_.weight_decay * w[i];
    }
  }
}

void AdamW::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

}  // namespace tcm
