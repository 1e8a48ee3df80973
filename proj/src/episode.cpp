#include "tcm/episode.hpp"

#include <unordered_map>
#include <unordered_set>

#include "tcm/errors.hpp"
#include "tcm/rng.hpp"

namespace tcm {

std::vector<std::string> class_order(const std::vector<Example>& pool) {
  std::vector<std::string> order;
  std::unordered_set<std::string> seen;
  for (const Example& ex : pool) {
    if (seen.insert(ex.label).second) order.push_back(ex.label);
  }
  return order;
}

Episode sample_episode(const std::vector<Example>& pool, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("sample_episode: K must be >= 1");
  if (pool.empty()) throw InputError("sample_episode: empty pool");

  Episode ep;
  ep.k = k;
  ep.seed = seed;
  ep.classes = class_order(pool);

  std::unordered_map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label].push_back(i);

  const Rng root(seed);
  for (const std::string& cls : ep.classes) {
    auto& indices = by_class[cls];
    if (indices.size() < 2 * k) {
      throw InputError("sample_episode: class '" + cls + "' has " +
                       std::to_string(indices.size()) + " examples, needs " +
                       std::to_string(2 * k) + " for K=" + std::to_string(k));
    }
    Rng rng = root.fork(cls);
    rng.shuffle(indices);
    for (std::size_t i = 0; i < k; ++i) ep.train.push_back(pool[indices[i]]);
    for (std::size_t i = k; i < 2 * k; ++i) ep.valid.push_back(pool[indices[i]]);
  }
  return ep;
}

}  // namespace tcm
