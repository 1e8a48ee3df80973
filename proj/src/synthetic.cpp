#include "tcm/synthetic.hpp"

#include <algorithm>

#include "tcm/errors.hpp"
#include "tcm/rng.hpp"

namespace tcm {

void SyntheticSpec::validate() const {
  if (classes < 1) throw ConfigError("synthetic.classes must be >= 1");
  if (per_class < 1) throw ConfigError("synthetic.per_class must be >= 1");
  if (test_per_class < 1) throw ConfigError("synthetic.test_per_class must be >= 1");
  if (vocab_size < 1) throw ConfigError("synthetic.vocab_size must be >= 1");
  if (signal_tokens_per_class < 1) {
    throw ConfigError("synthetic.signal_tokens_per_class must be >= 1");
  }
  if (signal_tokens_per_example > signal_tokens_per_class) {
    throw ConfigError("synthetic.signal_tokens_per_example cannot exceed signal_tokens_per_class");
  }
  if (disjoint_test_signal) {
    if (signal_tokens_per_class < 2)
      throw ConfigError("synthetic.disjoint_test_signal needs >= 2 signal tokens per class");
    const std::size_t half = signal_tokens_per_class / 2;
    if (signal_tokens_per_example > half)
      throw ConfigError("synthetic.signal_tokens_per_example cannot exceed half the signal set when disjoint_test_signal is on");
  }
  const std::size_t allotted = shared_signal_tokens + classes * signal_tokens_per_class;
  if (allotted > vocab_size) {
    throw ConfigError("synthetic.vocab_size " + std::to_string(vocab_size) +
                      " too small for " + std::to_string(allotted) +
                      " disjoint signal tokens");
  }
  if (noise_len > 0 && allotted == vocab_size) {
    throw ConfigError("synthetic.vocab_size leaves no noise tokens but noise_len > 0");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();

  std::vector<std::string> pool_tokens(spec.vocab_size);
  for (std::size_t i = 0; i < spec.vocab_size; ++i) pool_tokens[i] = "w" + std::to_string(i);

  SyntheticData data;
  std::size_t next = 0;
  std::vector<std::string> shared(pool_tokens.begin(), pool_tokens.begin() + spec.shared_signal_tokens);
  next += spec.shared_signal_tokens;
  data.signal_tokens.resize(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    data.signal_tokens[c].assign(pool_tokens.begin() + next,
                                 pool_tokens.begin() + next + spec.signal_tokens_per_class);
    next += spec.signal_tokens_per_class;
  }
  const std::vector<std::string> noise(pool_tokens.begin() + next, pool_tokens.end());

  const Rng root = Rng(spec.seed).fork("synthetic");
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const std::string label = "class" + std::to_string(c);
    data.labels.push_back(label);

    std::vector<std::string> mention = data.signal_tokens[c];
    mention.insert(mention.end(), shared.begin(), shared.end());

    Rng rng = root.fork(label);
    const std::size_t split = (data.signal_tokens[c].size() + 1) / 2;
    auto make_example = [&](bool test_side) {
      // Which signal tokens this example may draw from.
      std::vector<std::string> own = data.signal_tokens[c];
      if (spec.disjoint_test_signal) {
        if (test_side)
          own.erase(own.begin(), own.begin() + std::ptrdiff_t(split));
        else
          own.resize(split);
      }
      std::vector<std::string> tokens;
      if (spec.signal_tokens_per_example == 0) {
        tokens = std::move(own);
      } else {
        rng.shuffle(own);
        own.resize(spec.signal_tokens_per_example);
        tokens = std::move(own);
      }
      tokens.insert(tokens.end(), shared.begin(), shared.end());
      for (std::size_t i = 0; i < spec.noise_len; ++i) {
        tokens.push_back(noise[rng.below(noise.size())]);
      }
      rng.shuffle(tokens);
      std::string text;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) text += ' ';
        text += tokens[i];
      }
      return Example{std::move(text), label};
    };
    for (std::size_t i = 0; i < spec.per_class; ++i) data.pool.push_back(make_example(false));
    for (std::size_t i = 0; i < spec.test_per_class; ++i) data.test.push_back(make_example(true));

    LabelEntry entry;
    entry.name = "category" + std::to_string(c);
    entry.definition = "a text in this class usually mentions the words";
    for (const auto& tok : mention) entry.definition += " " + tok;
    const std::size_t pick = root.fork("sample_" + label).below(spec.per_class);
    entry.sample = data.pool[c * spec.per_class + pick].text;
    data.mapping.emplace(label, std::move(entry));
  }
  return data;
}

}  // namespace tcm
