#include "tcm/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <json.hpp>

#include "tcm/errors.hpp"

namespace tcm {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '_') {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {
const std::vector<std::string> kReservedTokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
}

Vocab::Vocab(std::vector<std::string> content_tokens) {
  id_to_token_ = kReservedTokens;
  id_to_token_.insert(id_to_token_.end(), std::make_move_iterator(content_tokens.begin()),
                      std::make_move_iterator(content_tokens.end()));
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], i);
    if (!inserted) throw InputError("duplicate vocab token '" + id_to_token_[i] + "'");
  }
}

std::size_t Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= id_to_token_.size()) {
    throw IndexError("token id " + std::to_string(id) + " out of range [0, " +
                     std::to_string(id_to_token_.size()) + ")");
  }
  return id_to_token_[id];
}

std::vector<std::string> Vocab::content_tokens() const {
  return {id_to_token_.begin() + kReserved, id_to_token_.end()};
}

Vocab build_vocab(const std::vector<Example>& corpus, std::size_t min_freq,
                  std::size_t max_size) {
  if (corpus.empty()) throw InputError("build_vocab: empty corpus");
  if (min_freq < 1) throw ConfigError("build_vocab: min_freq must be >= 1");
  if (max_size <= Vocab::kReserved) {
    throw ConfigError("build_vocab: max_size must exceed the " +
                      std::to_string(Vocab::kReserved) + " reserved ids");
  }
  std::map<std::string, std::size_t> freq;
  for (const Example& ex : corpus) {
    for (auto& tok : tokenize(ex.text)) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  ranked.reserve(freq.size());
  for (auto& [tok, n] : freq) {
    if (n >= min_freq) ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), max_size - Vocab::kReserved);
  std::vector<std::string> content;
  content.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) content.push_back(std::move(ranked[i].first));
  return Vocab(std::move(content));
}

Encoded encode_text(const Vocab& vocab, std::string_view text, std::size_t max_len) {
  if (max_len < 2) throw ConfigError("encode_text: max_len must be >= 2");
  Encoded enc;
  enc.ids.reserve(max_len);
  enc.ids.push_back(Vocab::kCls);
  for (const auto& tok : tokenize(text)) {
    if (enc.ids.size() == max_len - 1) break;  // leave room for [SEP]
    enc.ids.push_back(vocab.id(tok));
  }
  enc.ids.push_back(Vocab::kSep);
  enc.mask.assign(max_len, Real(0));
  for (std::size_t i = 0; i < enc.ids.size(); ++i) enc.mask[i] = Real(1);
  enc.ids.resize(max_len, Vocab::kPad);
  return enc;
}

std::vector<Example> load_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<Example> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed JSON: " + e.what());
    }
    if (!row.is_object()) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": expected an object");
    }
    for (const char* field : {"text", "label"}) {
      if (!row.contains(field) || !row[field].is_string()) {
        throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                          ": missing string field \"" + field + "\"");
      }
    }
    examples.push_back({row["text"].get<std::string>(), row["label"].get<std::string>()});
  }
  return examples;
}

void save_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const Example& ex : examples) {
    os << nlohmann::json{{"label", ex.label}, {"text", ex.text}}.dump() << "\n";
  }
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace tcm
