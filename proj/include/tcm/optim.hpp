#pragma once

#include <cstdint>
#include <vector>

#include "tcm/tensor.hpp"

namespace tcm {

struct AdamWConfig {
  Real lr = Real(1e-3);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);
  Real weight_decay = Real(0);

  void validate() const;
};

// Adam with bias-corrected moments and decoupled weight decay. Gradients are
// read from the parameters' .grad buffers and left untouched; call
// zero_grad() explicitly between steps.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config);

  // One update over all parameters. Every parameter must have a gradient
  // buffer (a zero gradient is fine; a missing buffer is a contract error).
  void step();

  void zero_grad();

  std::uint64_t step_count() const { return step_count_; }
  const AdamWConfig& config() const { return config_; }

 private:
  struct Slot {
    Tensor param;
    std::vector<Real> m;
    std::vector<Real> v;
  };
  std::vector<Slot> slots_;
  AdamWConfig config_;
  std::uint64_t step_count_ = 0;
};

}  // namespace tcm
