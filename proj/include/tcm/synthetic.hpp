#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcm/labels.hpp"
#include "tcm/text.hpp"

namespace tcm {

// Generator for separable desk-scale classification tasks. Each class owns a
// disjoint set of signal tokens; every example of the class contains all of
// them plus noise drawn from a common pool. Definitions enumerate the signal
// tokens, names are fresh single tokens carrying no content, and samples are
// drawn from the generated examples — one text per mapping mode.
struct SyntheticSpec {
  std::size_t classes = 8;
  std::size_t per_class = 40;       // pool examples per class
  std::size_t test_per_class = 10;  // held-out examples per class
  std::size_t vocab_size = 200;     // content token universe
  std::size_t signal_tokens_per_class = 4;
  // Signal tokens shown per example (a fresh random subset each time);
  // 0 = every example carries the class's full signal set. With small values
  // a few shots rarely cover the whole set, while definitions always do, so
  // description text carries information the shots miss.
  std::size_t signal_tokens_per_example = 0;
  // When set, pool examples draw signal only from the first half of each
  // class's tokens and test examples only from the second half. Definitions
  // still enumerate the full set, so at test time description text is the
  // only bridge to the class.
  bool disjoint_test_signal = false;
  std::size_t noise_len = 6;  // noise tokens per example; 0 = noiseless
  // Tokens present in every class's examples and definitions; makes the
  // definitions near-synonymous without breaking per-class separability.
  std::size_t shared_signal_tokens = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  std::vector<Example> pool;
  std::vector<Example> test;
  std::vector<std::string> labels;  // class order
  LabelMapping mapping;
  std::vector<std::vector<std::string>> signal_tokens;  // per class, pool-disjoint
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace tcm
