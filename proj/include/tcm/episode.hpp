#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcm/text.hpp"

namespace tcm {

// K-shot split: exactly K train and K validation examples per class, drawn
// disjointly from the pool with a seeded per-class stream.
struct Episode {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> classes;  // order of first appearance in the pool
  std::vector<Example> train;
  std::vector<Example> valid;
};

Episode sample_episode(const std::vector<Example>& pool, std::size_t k, std::uint64_t seed);

// Classes in order of first appearance.
std::vector<std::string> class_order(const std::vector<Example>& pool);

}  // namespace tcm
