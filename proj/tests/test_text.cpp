#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "centroid_oracle.hpp"
#include "tcm/episode.hpp"
#include "tcm/errors.hpp"
#include "tcm/labels.hpp"
#include "tcm/synthetic.hpp"
#include "tcm/text.hpp"
#include "test_util.hpp"

using namespace tcm;

TEST_CASE("tokenizer lowercases and splits on everything non-word") {
  CHECK(tokenize("Hello, World!") == std::vector<std::string>{"hello", "world"});
  CHECK(tokenize("a  b\t\nc") == std::vector<std::string>{"a", "b", "c"});
  CHECK(tokenize("it's a test-case") == std::vector<std::string>{"it", "s", "a", "test", "case"});
  CHECK(tokenize("under_score stays w7") ==
        std::vector<std::string>{"under_score", "stays", "w7"});
  CHECK(tokenize("...").empty());
  CHECK(tokenize("").empty());
}

TEST_CASE("vocab assigns reserved ids then frequency order") {
  std::vector<Example> corpus{{"a b", "x"}, {"a c", "x"}};
  Vocab v = build_vocab(corpus, 1, 100);
  CHECK(v.size() == 7);  // 4 reserved + a,b,c
  CHECK(v.id("[PAD]") == Vocab::kPad);
  CHECK(v.id("[UNK]") == Vocab::kUnk);
  CHECK(v.id("[CLS]") == Vocab::kCls);
  CHECK(v.id("[SEP]") == Vocab::kSep);
  // "a" is most frequent, so it takes the first non-reserved id; b/c tie on
  // frequency and fall back to lexicographic order.
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);
  CHECK(v.id("c") == 6);
  CHECK(v.token(v.id("b")) == "b");
  CHECK(v.id("zzz") == Vocab::kUnk);
  CHECK_FALSE(v.contains("zzz"));
  CHECK_THROWS_AS(v.token(99), IndexError);

  Vocab strict = build_vocab(corpus, 2, 100);
  CHECK(strict.size() == 5);
  CHECK(strict.contains("a"));
  CHECK_FALSE(strict.contains("b"));

  Vocab capped = build_vocab(corpus, 1, 6);
  CHECK(capped.size() == 6);
  CHECK(capped.contains("a"));
  CHECK(capped.contains("b"));
  CHECK_FALSE(capped.contains("c"));

  // Rebuilding yields the identical map.
  Vocab again = build_vocab(corpus, 1, 100);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(again.token(i) == v.token(i));

  CHECK_THROWS_AS(build_vocab({}, 1, 100), InputError);
  CHECK_THROWS_AS(build_vocab(corpus, 0, 100), ConfigError);
  CHECK_THROWS_AS(build_vocab(corpus, 1, 4), ConfigError);
}

TEST_CASE("encode_text frames, pads, truncates, and masks") {
  Vocab v = build_vocab({{"aa bb cc dd", "x"}}, 1, 100);

  Encoded empty = encode_text(v, "", 4);
  CHECK(empty.ids == std::vector<std::size_t>{Vocab::kCls, Vocab::kSep, Vocab::kPad, Vocab::kPad});
  CHECK(empty.mask == std::vector<Real>{1, 1, 0, 0});

  Encoded oov = encode_text(v, "aa zzz", 6);
  CHECK(oov.ids[1] == v.id("aa"));
  CHECK(oov.ids[2] == Vocab::kUnk);
  CHECK(oov.ids[3] == Vocab::kSep);

  // Four content tokens but room for two: the tail is dropped before [SEP].
  Encoded trunc = encode_text(v, "aa bb cc dd", 4);
  CHECK(trunc.ids == std::vector<std::size_t>{Vocab::kCls, v.id("aa"), v.id("bb"), Vocab::kSep});
  CHECK(trunc.mask == std::vector<Real>{1, 1, 1, 1});

  CHECK_THROWS_AS(encode_text(v, "aa", 1), ConfigError);

  // Output length is always max_len and the mask counts min(tokens+2, max_len).
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n_tokens = rng.below(8);
    std::string text;
    for (std::size_t i = 0; i < n_tokens; ++i) text += "aa ";
    const std::size_t max_len = 2 + rng.below(8);
    Encoded e = encode_text(v, text, max_len);
    CHECK(e.ids.size() == max_len);
    CHECK(e.mask.size() == max_len);
    Real mask_sum = 0;
    for (Real m : e.mask) mask_sum += m;
    CHECK(mask_sum == Real(std::min(n_tokens + 2, max_len)));
  }
}

TEST_CASE("episodes are exact K-shot disjoint splits") {
  std::vector<Example> pool;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 10; ++i) {
      pool.push_back({"class " + std::to_string(c) + " ex " + std::to_string(i),
                      "c" + std::to_string(c)});
    }
  }
  Episode ep = sample_episode(pool, 5, 7);
  CHECK(ep.train.size() == 10);
  CHECK(ep.valid.size() == 10);
  CHECK(ep.classes == std::vector<std::string>{"c0", "c1"});
  auto texts = [](const std::vector<Example>& v) {
    std::set<std::string> s;
    for (auto& e : v) s.insert(e.text);
    return s;
  };
  auto train_set = texts(ep.train);
  auto valid_set = texts(ep.valid);
  for (const auto& t : valid_set) CHECK(train_set.count(t) == 0);
  for (const auto& cls : ep.classes) {
    auto count = [&](const std::vector<Example>& v) {
      return std::count_if(v.begin(), v.end(), [&](const Example& e) { return e.label == cls; });
    };
    CHECK(count(ep.train) == 5);
    CHECK(count(ep.valid) == 5);
  }

  Episode again = sample_episode(pool, 5, 7);
  CHECK(again.train.size() == ep.train.size());
  for (std::size_t i = 0; i < ep.train.size(); ++i) {
    CHECK(again.train[i].text == ep.train[i].text);
  }

  CHECK_THROWS_AS(sample_episode(pool, 6, 7), InputError);
  CHECK_THROWS_AS(sample_episode(pool, 0, 7), ConfigError);
  CHECK_THROWS_AS(sample_episode({}, 1, 7), InputError);
  try {
    sample_episode(pool, 6, 7);
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("c0") != std::string::npos);
  }
}

TEST_CASE("different seeds give different episode membership") {
  SyntheticSpec spec;
  spec.classes = 40;
  spec.per_class = 12;
  spec.test_per_class = 1;
  spec.vocab_size = 300;
  spec.signal_tokens_per_class = 3;
  spec.noise_len = 3;
  SyntheticData data = generate_synthetic(spec);

  auto membership = [&](std::uint64_t seed) {
    Episode ep = sample_episode(data.pool, 5, seed);
    std::multiset<std::string> s;
    for (auto& e : ep.train) s.insert(e.text);
    return s;
  };
  int differing = 0;
  auto prev = membership(0);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto cur = membership(seed);
    if (cur != prev) ++differing;
    prev = std::move(cur);
  }
  CHECK(differing >= 99);
}

TEST_CASE("episode disjointness holds across random pool shapes") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    SyntheticSpec spec;
    spec.classes = 2 + rng.below(6);
    spec.per_class = 6 + rng.below(10);
    spec.test_per_class = 1;
    spec.vocab_size = 120;
    spec.signal_tokens_per_class = 2;
    spec.noise_len = 4;
    spec.seed = rng.next_u64();
    SyntheticData data = generate_synthetic(spec);
    const std::size_t k = 1 + rng.below(spec.per_class / 2);
    Episode ep = sample_episode(data.pool, k, rng.next_u64());
    std::multiset<std::string> train, valid;
    for (auto& e : ep.train) train.insert(e.text + "|" + e.label);
    for (auto& e : ep.valid) valid.insert(e.text + "|" + e.label);
    for (const auto& t : valid) CHECK(train.count(t) == 0);
    CHECK(ep.train.size() == k * spec.classes);
    CHECK(ep.valid.size() == k * spec.classes);
  }
}

TEST_CASE("jsonl round-trips and reports malformed lines") {
  auto dir = testutil::scratch_dir("jsonl");
  const auto path = dir / "data.jsonl";

  {
    std::ofstream os(path);
    os << R"({"text":"hi","label":"joy"})" << "\n";
    os << R"({"label":"anger","text":"go away"})" << "\n";
  }
  auto examples = load_jsonl(path);
  REQUIRE(examples.size() == 2);
  CHECK(examples[0].text == "hi");
  CHECK(examples[0].label == "joy");
  CHECK(examples[1].label == "anger");

  std::vector<Example> out{{"hello \"quoted\"", "a"}, {"unicode ß", "b"}};
  save_jsonl(dir / "out.jsonl", out);
  auto back = load_jsonl(dir / "out.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].text == out[0].text);
  CHECK(back[1].text == out[1].text);

  { std::ofstream os(dir / "empty.jsonl"); }
  CHECK(load_jsonl(dir / "empty.jsonl").empty());

  {
    std::ofstream os(dir / "missing.jsonl");
    os << R"({"text":"hi"})" << "\n";
  }
  CHECK_THROWS_AS(load_jsonl(dir / "missing.jsonl"), SchemaError);
  try {
    load_jsonl(dir / "missing.jsonl");
  } catch (const SchemaError& e) {
    std::string msg = e.what();
    CHECK(msg.find(":1:") != std::string::npos);
    CHECK(msg.find("label") != std::string::npos);
  }

  {
    std::ofstream os(dir / "broken.jsonl");
    os << R"({"text":"ok","label":"a"})" << "\n";
    os << "{not json" << "\n";
  }
  try {
    load_jsonl(dir / "broken.jsonl");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  CHECK_THROWS_AS(load_jsonl(dir / "absent.jsonl"), IoError);
}

TEST_CASE("label mapping file parsing and validation") {
  auto dir = testutil::scratch_dir("mapping");
  const auto path = dir / "mapping.json";
  {
    std::ofstream os(path);
    os << R"({
      "joy": {"name": "joy", "definition": "a feeling of happiness", "sample": "what a day!"},
      "anger": {"name": "anger", "definition": "a strong feeling of displeasure"}
    })";
  }
  LabelMapping m = load_label_mapping(path);
  REQUIRE(m.size() == 2);
  CHECK(m.at("joy").sample.has_value());
  CHECK_FALSE(m.at("anger").sample.has_value());
  CHECK(m.at("anger").definition == "a strong feeling of displeasure");

  save_label_mapping(dir / "copy.json", m);
  LabelMapping copy = load_label_mapping(dir / "copy.json");
  CHECK(copy.at("joy").name == m.at("joy").name);
  CHECK(copy.at("joy").sample == m.at("joy").sample);

  {
    std::ofstream os(dir / "bad_key.json");
    os << R"({"joy": {"name": "joy", "color": "red"}})";
  }
  CHECK_THROWS_AS(load_label_mapping(dir / "bad_key.json"), SchemaError);
  {
    std::ofstream os(dir / "no_name.json");
    os << R"({"joy": {"definition": "d"}})";
  }
  CHECK_THROWS_AS(load_label_mapping(dir / "no_name.json"), SchemaError);
  CHECK_THROWS_AS(load_label_mapping(dir / "absent.json"), IoError);
}

TEST_CASE("label sets resolve texts per mode with fixed ordering") {
  LabelMapping m;
  m["a"] = {"alpha", "the first letter", std::nullopt};
  m["b"] = {"beta", "the second letter", std::string("a b sample")};
  std::vector<std::string> labels{"b", "a"};  // order given, not alphabetical
  std::vector<Example> train{{"a train one", "a"}, {"a train two", "a"}, {"b train", "b"}};

  LabelSet names = build_label_set(labels, m, MappingMode::kName, train, 0);
  CHECK(names.labels() == labels);
  CHECK(names.texts() == std::vector<std::string>{"beta", "alpha"});
  CHECK(names.index_of("a") == 1);
  CHECK_THROWS_AS(names.index_of("zzz"), IndexError);

  LabelSet defs = build_label_set(labels, m, MappingMode::kDefinition, train, 0);
  CHECK(defs.texts()[0] == "the second letter");

  // Sample mode: file-provided sample wins; otherwise drawn from train.
  LabelSet samples = build_label_set(labels, m, MappingMode::kSample, train, 3);
  CHECK(samples.texts()[0] == "a b sample");
  CHECK((samples.texts()[1] == "a train one" || samples.texts()[1] == "a train two"));
  LabelSet samples2 = build_label_set(labels, m, MappingMode::kSample, train, 3);
  CHECK(samples2.texts() == samples.texts());

  // Fingerprint tracks mode, order, and content.
  CHECK(names.fingerprint() != defs.fingerprint());
  LabelSet reordered = build_label_set({"a", "b"}, m, MappingMode::kName, train, 0);
  CHECK(reordered.fingerprint() != names.fingerprint());

  LabelMapping incomplete;
  incomplete["a"] = {"alpha", "", std::nullopt};
  CHECK_THROWS_AS(build_label_set({"a", "b"}, incomplete, MappingMode::kName, train, 0),
                  SchemaError);
  CHECK_THROWS_AS(build_label_set({"a"}, incomplete, MappingMode::kDefinition, train, 0),
                  SchemaError);
  CHECK_THROWS_AS(build_label_set({"a"}, incomplete, MappingMode::kSample, {}, 0), SchemaError);

  CHECK(parse_mapping_mode("definition") == MappingMode::kDefinition);
  CHECK(mapping_mode_name(MappingMode::kSample) == "sample");
  CHECK_THROWS_AS(parse_mapping_mode("bogus"), ConfigError);
}

TEST_CASE("synthetic generator builds separable labeled corpora") {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.per_class = 4;
  spec.test_per_class = 2;
  spec.vocab_size = 40;
  spec.signal_tokens_per_class = 3;
  spec.noise_len = 5;
  spec.seed = 11;
  SyntheticData data = generate_synthetic(spec);

  CHECK(data.pool.size() == 8);
  CHECK(data.test.size() == 4);
  CHECK(data.labels == std::vector<std::string>{"class0", "class1"});
  CHECK(data.mapping.size() == 2);

  // Signal sets are pairwise disjoint and every example contains all of its
  // class's signal tokens.
  std::set<std::string> s0(data.signal_tokens[0].begin(), data.signal_tokens[0].end());
  for (const auto& tok : data.signal_tokens[1]) CHECK(s0.count(tok) == 0);
  for (const Example& ex : data.pool) {
    const std::size_t c = ex.label == "class0" ? 0 : 1;
    auto toks = tokenize(ex.text);
    std::set<std::string> present(toks.begin(), toks.end());
    for (const auto& sig : data.signal_tokens[c]) CHECK(present.count(sig) == 1);
  }

  // Definitions enumerate the signal tokens; names are fresh tokens absent
  // from every example.
  for (std::size_t c = 0; c < 2; ++c) {
    const LabelEntry& entry = data.mapping.at(data.labels[c]);
    auto def_toks = tokenize(entry.definition);
    std::set<std::string> def_set(def_toks.begin(), def_toks.end());
    for (const auto& sig : data.signal_tokens[c]) CHECK(def_set.count(sig) == 1);
    for (const Example& ex : data.pool) {
      for (const auto& tok : tokenize(ex.text)) CHECK(tok != entry.name);
    }
    REQUIRE(entry.sample.has_value());
    bool found = false;
    for (const Example& ex : data.pool) found = found || (ex.text == *entry.sample && ex.label == data.labels[c]);
    CHECK(found);
  }

  SyntheticData again = generate_synthetic(spec);
  REQUIRE(again.pool.size() == data.pool.size());
  for (std::size_t i = 0; i < data.pool.size(); ++i) {
    CHECK(again.pool[i].text == data.pool[i].text);
    CHECK(again.pool[i].label == data.pool[i].label);
  }

  SyntheticSpec cramped = spec;
  cramped.vocab_size = 6;  // 2*3 signals leave no noise pool
  CHECK_THROWS_AS(generate_synthetic(cramped), ConfigError);
  cramped.vocab_size = 5;
  CHECK_THROWS_AS(generate_synthetic(cramped), ConfigError);
}

TEST_CASE("shared signal tokens appear everywhere without breaking separability") {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.per_class = 5;
  spec.test_per_class = 2;
  spec.vocab_size = 60;
  spec.signal_tokens_per_class = 2;
  spec.shared_signal_tokens = 2;
  spec.noise_len = 2;
  spec.seed = 5;
  SyntheticData data = generate_synthetic(spec);

  for (const Example& ex : data.pool) {
    auto toks = tokenize(ex.text);
    std::set<std::string> present(toks.begin(), toks.end());
    CHECK(present.count("w0") == 1);
    CHECK(present.count("w1") == 1);
  }
  for (const auto& label : data.labels) {
    auto def_toks = tokenize(data.mapping.at(label).definition);
    std::set<std::string> def_set(def_toks.begin(), def_toks.end());
    CHECK(def_set.count("w0") == 1);
    CHECK(def_set.count("w1") == 1);
  }
}

TEST_CASE("centroid oracle is perfect on noiseless synthetic data") {
  SyntheticSpec spec;
  spec.classes = 6;
  spec.per_class = 8;
  spec.test_per_class = 6;
  spec.vocab_size = 60;
  spec.signal_tokens_per_class = 3;
  spec.noise_len = 0;
  spec.seed = 2;
  SyntheticData data = generate_synthetic(spec);

  testutil::CentroidOracle oracle(data.pool, data.labels);
  for (const Example& ex : data.test) CHECK(oracle.predict(ex.text) == ex.label);
}
