#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tcm/tensor.hpp"

namespace tcm {

struct Example {
  std::string text;
  std::string label;
};

// Lowercased word tokens; any non-alphanumeric, non-underscore byte separates.
std::vector<std::string> tokenize(std::string_view text);

// Token table with fixed reserved ids. Content ids are dense above the
// reserved range, assigned by (frequency desc, token asc), so rebuilding from
// the same corpus always yields the same map.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kSep = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab() = default;
  explicit Vocab(std::vector<std::string> content_tokens);

  std::size_t size() const { return id_to_token_.size(); }
  // Id for a token, [UNK] when absent.
  std::size_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  // Content tokens in id order (excludes the reserved entries).
  std::vector<std::string> content_tokens() const;

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> token_to_id_;
};

// Counts tokens over every example text, keeps those with frequency >=
// min_freq, and truncates to max_size total entries (reserved ids included).
Vocab build_vocab(const std::vector<Example>& corpus, std::size_t min_freq,
                  std::size_t max_size);

// One text rendered as [CLS] tokens [SEP] padding, always exactly max_len
// ids; mask marks the non-padding positions.
struct Encoded {
  std::vector<std::size_t> ids;
  std::vector<Real> mask;
};

Encoded encode_text(const Vocab& vocab, std::string_view text, std::size_t max_len);

// One JSON object per line with string fields "text" and "label".
std::vector<Example> load_jsonl(const std::filesystem::path& path);
void save_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples);

}  // namespace tcm
