#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "tcm/baselines.hpp"
#include "tcm/errors.hpp"
#include "tcm/objective.hpp"
#include "tcm/ops.hpp"
#include "tcm/optim.hpp"
#include "tcm/synthetic.hpp"
#include "test_util.hpp"

using namespace tcm;
using testutil::scratch_dir;

namespace {

struct Task {
  SyntheticData data;
  Episode episode;
  LabelSet ls;
  Vocab vocab;
  EncoderConfig ecfg;
};

Task make_task(const SyntheticSpec& spec, std::size_t k, MappingMode mode, std::uint64_t seed) {
  Task t;
  t.data = generate_synthetic(spec);
  t.episode = sample_episode(t.data.pool, k, seed);
  t.ls = build_label_set(t.episode.classes, t.data.mapping, mode, t.episode.train, seed);
  std::vector<Example> corpus = t.episode.train;
  for (const auto& s : t.ls.texts()) corpus.push_back({s, ""});
  t.vocab = build_vocab(corpus, 1, 4096);
  t.ecfg.vocab_size = t.vocab.size();
  t.ecfg.max_len = 16;
  t.ecfg.embed_dim = 16;
  t.ecfg.num_layers = 1;
  t.ecfg.num_heads = 2;
  t.ecfg.ffn_dim = 32;
  t.ecfg.repr_dim = 16;
  t.ecfg.seed = mix64(seed, fnv1a64("enc"));
  return t;
}

TrainOptions fast_opt(std::size_t epochs, Real lr, std::uint64_t seed = 5) {
  TrainOptions o;
  o.optim.lr = lr;
  o.batch_size = 8;
  o.epochs = epochs;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("task head starts at exactly the uniform loss") {
  SyntheticSpec spec;
  spec.classes = 6;
  spec.per_class = 5;
  spec.test_per_class = 1;
  spec.vocab_size = 80;
  spec.noise_len = 2;
  spec.seed = 83;
  Task t = make_task(spec, 2, MappingMode::kName, 83);

  TrainedModel m =
      train_task_head(t.ecfg, t.vocab, t.ls, t.episode, TcmHyper{}, fast_opt(1, Real(0)));
  // The head is zero-initialized, so every logit is zero whatever the
  // encoder produces and the first epoch's loss is log(6) exactly.
  CHECK(double(m.history[0].train_loss) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  REQUIRE(m.head_w.has_value());
  REQUIRE(m.head_b.has_value());
  CHECK(m.head_w->shape() == Shape{t.ecfg.embed_dim, t.ls.size()});
  CHECK(m.head_b->shape() == Shape{t.ls.size()});
}

TEST_CASE("two encoders double the parameters and differ at init") {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.per_class = 5;
  spec.test_per_class = 1;
  spec.vocab_size = 60;
  spec.noise_len = 2;
  spec.seed = 89;
  Task t = make_task(spec, 2, MappingMode::kDefinition, 89);

  TrainedModel m =
      train_two_encoder(t.ecfg, t.vocab, t.ls, t.episode, TcmHyper{}, fast_opt(1, Real(0)));
  CHECK(m.param_count() == 2 * t.ecfg.param_count());
  REQUIRE(m.label_encoder.has_value());

  auto a = m.encoder.named_parameters();
  auto b = m.label_encoder->named_parameters();
  REQUIRE(a.size() == b.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size() && !any_diff; ++i) {
    CHECK(a[i].name == b[i].name);
    auto av = a[i].tensor.values();
    auto bv = b[i].tensor.values();
    for (std::size_t j = 0; j < av.size() && !any_diff; ++j) any_diff = av[j] != bv[j];
  }
  CHECK(any_diff);
}

TEST_CASE("untied towers with mirrored gradients track the shared encoder exactly") {
  // If both towers start from the shared encoder's initialization and each
  // step applies the summed input+label gradient to both, the untied model
  // must retrace the Siamese trajectory. This pins down that the only real
  // difference between the two methods is the weight sharing itself.
  SyntheticSpec spec;
  spec.classes = 3;
  spec.per_class = 4;
  spec.test_per_class = 1;
  spec.vocab_size = 40;
  spec.noise_len = 2;
  spec.seed = 97;
  Task t = make_task(spec, 2, MappingMode::kDefinition, 97);

  const Real tau = Real(0.5);
  const Real alpha = Real(1);
  std::vector<std::string> texts;
  std::vector<int> targets;
  for (const Example& ex : t.episode.train) {
    texts.push_back(ex.text);
    targets.push_back(int(t.ls.index_of(ex.label)));
  }
  Batch in = make_batch(t.vocab, texts, t.ecfg.max_len);
  Batch lb = make_batch(t.vocab, t.ls.texts(), t.ecfg.max_len);

  AdamWConfig oc;
  oc.lr = Real(0.01);

  // Shared-weight reference run.
  Encoder shared(t.ecfg);
  std::vector<Real> shared_losses;
  {
    auto params = shared.parameters();
    AdamW opt(params, oc);
    for (int step = 0; step < 4; ++step) {
      Tape tape;
      Tensor x = shared.encode(&tape, in);
      Tensor l = shared.encode(&tape, lb);
      Tensor loss = total_loss(&tape, matching_loss(&tape, x, l, targets, tau),
                               regularization_loss(&tape, l, Real(0)), alpha);
      shared_losses.push_back(loss.item());
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
    }
  }

  // Untied run with identical init and mirrored gradients.
  Encoder input_tower(t.ecfg);
  Encoder label_tower(t.ecfg);
  {
    auto pa = input_tower.parameters();
    auto pb = label_tower.parameters();
    std::vector<Tensor> all = pa;
    all.insert(all.end(), pb.begin(), pb.end());
    AdamW opt(all, oc);
    for (int step = 0; step < 4; ++step) {
      Tape tape;
      Tensor x = input_tower.encode(&tape, in);
      Tensor l = label_tower.encode(&tape, lb);
      Tensor loss = total_loss(&tape, matching_loss(&tape, x, l, targets, tau),
                               regularization_loss(&tape, l, Real(0)), alpha);
      CHECK(std::abs(double(loss.item()) - double(shared_losses[std::size_t(step)])) < 1e-9);
      tape.backward(loss);
      for (std::size_t i = 0; i < pa.size(); ++i) {
        auto ga = pa[i].grad();
        auto gb = pb[i].grad();
        for (std::size_t j = 0; j < ga.size(); ++j) gb[j] = ga[j] = ga[j] + gb[j];
      }
      opt.step();
      opt.zero_grad();
    }

    auto ps = shared.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto sv = ps[i].values();
      auto av = pa[i].values();
      auto bv = pb[i].values();
      for (std::size_t j = 0; j < sv.size(); ++j) {
        CHECK(std::abs(double(av[j]) - double(sv[j])) < 1e-11);
        CHECK(std::abs(double(bv[j]) - double(sv[j])) < 1e-11);
      }
    }
  }
}

TEST_CASE("task head learns a separable task") {
  SyntheticSpec spec;
  spec.classes = 8;
  spec.per_class = 45;
  spec.test_per_class = 5;
  spec.vocab_size = 120;
  spec.noise_len = 0;
  spec.seed = 101;
  Task t = make_task(spec, 20, MappingMode::kName, 101);

  TrainedModel m =
      train_task_head(t.ecfg, t.vocab, t.ls, t.episode, TcmHyper{}, fast_opt(30, Real(0.01)));
  double best = 0;
  for (const EpochStat& s : m.history) best = std::max(best, s.valid_macro_f1);
  CHECK(best == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(macro_f1(evaluate(m, t.data.test)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("disabling the regularizer equals running with alpha zero") {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.per_class = 6;
  spec.test_per_class = 2;
  spec.vocab_size = 60;
  spec.noise_len = 2;
  spec.seed = 103;
  Task t = make_task(spec, 2, MappingMode::kDefinition, 103);

  TcmHyper zeroed;
  zeroed.alpha = Real(0);
  TrainedModel a =
      train_model(Method::kTcm, t.ecfg, t.vocab, t.ls, t.episode, zeroed, fast_opt(3, Real(0.01)));
  TrainedModel b = train_model(Method::kTcmNoReg, t.ecfg, t.vocab, t.ls, t.episode, TcmHyper{},
                               fast_opt(3, Real(0.01)));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].valid_macro_f1 == b.history[i].valid_macro_f1);
  }
  for (const Example& ex : t.data.test) {
    auto sa = a.score({ex.text})[0];
    auto sb = b.score({ex.text})[0];
    for (std::size_t j = 0; j < sa.size(); ++j) CHECK(sa[j] == sb[j]);
  }
}

TEST_CASE("baseline models round-trip through checkpoints") {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.per_class = 6;
  spec.test_per_class = 2;
  spec.vocab_size = 60;
  spec.noise_len = 2;
  spec.seed = 107;
  Task t = make_task(spec, 2, MappingMode::kDefinition, 107);
  auto dir = scratch_dir("baseline_roundtrip");

  std::vector<std::string> queries;
  for (const Example& ex : t.data.test) queries.push_back(ex.text);

  for (Method method : {Method::kTaskHead, Method::kTwoEncoder}) {
    TrainedModel m = train_model(method, t.ecfg, t.vocab, t.ls, t.episode, TcmHyper{},
                                 fast_opt(2, Real(0.01)));
    const auto path = dir / (method_name(method) + ".tcm");
    save_model(path, m);
    TrainedModel loaded = load_model(path);
    CHECK(loaded.method == method);
    CHECK(loaded.param_count() == m.param_count());
    auto before = m.score(queries);
    auto after = loaded.score(queries);
    for (std::size_t i = 0; i < before.size(); ++i)
      for (std::size_t j = 0; j < before[i].size(); ++j) CHECK(before[i][j] == after[i][j]);
  }
}
