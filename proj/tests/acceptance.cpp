// Acceptance gate: every release claim gets one [PASS]/[FAIL] line with the
// measured numbers, and the binary exits nonzero if anything fails. The
// experiment checks retrain from scratch on the bundled synthetic tasks, so
// a full run takes on the order of ten minutes single-threaded.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tcm/config.hpp"
#include "tcm/experiments.hpp"
#include "tcm/metrics.hpp"
#include "tcm/objective.hpp"
#include "tcm/ops.hpp"
#include "tcm/synthetic.hpp"
#include "test_util.hpp"

namespace {

using namespace tcm;
using testutil::max_grad_rel_err;
using testutil::random_tensor;

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %-24s %s\n", ok ? "[PASS]" : "[FAIL]", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

Dataset to_dataset(const SyntheticSpec& spec) {
  SyntheticData d = generate_synthetic(spec);
  return Dataset{std::move(d.pool), {}, std::move(d.test), std::move(d.mapping)};
}

// The bundled 40-way task: plenty of classes, modest shots, light noise.
SyntheticSpec forty_class_spec() {
  SyntheticSpec s;
  s.classes = 40;
  s.per_class = 45;
  s.test_per_class = 5;
  s.vocab_size = 600;
  s.signal_tokens_per_class = 4;
  s.noise_len = 8;
  s.seed = 11;
  return s;
}

ProtocolConfig protocol(Method method, std::size_t k, std::size_t epochs, Real tau, Real lr,
                        Real alpha) {
  ProtocolConfig p;
  p.method = method;
  p.mode = MappingMode::kDefinition;
  p.k = k;
  p.seeds = {1, 2, 3, 4, 5};
  p.encoder.max_len = 16;
  p.encoder.embed_dim = 32;
  p.encoder.num_layers = 1;
  p.encoder.num_heads = 2;
  p.encoder.ffn_dim = 64;
  p.encoder.repr_dim = 32;
  p.hyper.tau = tau;
  p.hyper.alpha = alpha;
  p.options.optim.lr = lr;
  p.options.batch_size = 8;
  p.options.epochs = epochs;
  return p;
}

// ---------------------------------------------------------------------------
// 1. Finite differences across every op and both losses, then end to end.

void check_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_op = 0;
  auto chk = [&](double e) { worst_op = std::max(worst_op, e); };

  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    chk(max_grad_rel_err({a, b}, [&](Tape* t) { return sum(t, matmul(t, a, b)); }));
  }
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      Tensor a = random_tensor(ta ? Shape{2, 4, 3} : Shape{2, 3, 4}, rng);
      Tensor b = random_tensor(tb ? Shape{2, 2, 4} : Shape{2, 4, 2}, rng);
      chk(max_grad_rel_err({a, b}, [&](Tape* t) { return sum(t, bmm(t, a, b, ta, tb)); }));
    }
  {
    Tensor a = random_tensor({3, 4}, rng);
    for (const Shape& s : {Shape{3, 4}, Shape{4}, Shape{1}}) {
      Tensor b = random_tensor(s, rng);
      chk(max_grad_rel_err({a, b}, [&](Tape* t) { return sum(t, add(t, a, b)); }));
      chk(max_grad_rel_err({a, b}, [&](Tape* t) { return sum(t, mul(t, a, b)); }));
    }
    chk(max_grad_rel_err({a}, [&](Tape* t) { return sum(t, scale(t, a, Real(1.7))); }));
    chk(max_grad_rel_err({a}, [&](Tape* t) { return sum(t, gelu(t, a)); }));
    chk(max_grad_rel_err({a}, [&](Tape* t) { return sum(t, tanh_op(t, a)); }));
    chk(max_grad_rel_err({a}, [&](Tape* t) { return sum(t, a); }));
    chk(max_grad_rel_err({a}, [&](Tape* t) { return mean(t, a); }));
    Tensor b = random_tensor({3, 4}, rng);
    chk(max_grad_rel_err({a, b}, [&](Tape* t) { return dot(t, a, b); }));
    chk(max_grad_rel_err({a, b}, [&](Tape* t) { return sum(t, maximum(t, a, b)); }));
    chk(max_grad_rel_err({a}, [&](Tape* t) { return sum(t, clamp_min(t, a, Real(-0.3))); }));
    Tensor w = random_tensor({4, 3}, rng);
    chk(max_grad_rel_err({a}, [&](Tape* t) { return dot(t, transpose(t, a), w); }));
    Tensor wr = random_tensor({4}, rng);
    chk(max_grad_rel_err({a}, [&](Tape* t) { return dot(t, row_max(t, a), Tensor::full({3}, 1)); }));
    (void)wr;
  }
  {
    Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
    chk(max_grad_rel_err({a, b}, [&](Tape* t) { return sum(t, concat(t, {a, b}, 0)); }));
    Tensor w = random_tensor({2, 6}, rng);
    chk(max_grad_rel_err({a, b}, [&](Tape* t) { return dot(t, concat(t, {a, b}, 1), w); }));
  }
  {
    Tensor table = random_tensor({5, 4}, rng);
    std::vector<std::size_t> rows{0, 2, 2, 4};  // repeats exercise scatter-add
    Tensor w = random_tensor({4, 4}, rng);
    chk(max_grad_rel_err({table}, [&](Tape* t) { return dot(t, gather_rows(t, table, rows), w); }));
  }
  {
    Tensor x = random_tensor({3, 6}, rng);
    Tensor gain = random_tensor({6}, rng, Real(0.5), Real(1.5));
    Tensor bias = random_tensor({6}, rng);
    Tensor w = random_tensor({3, 6}, rng);
    chk(max_grad_rel_err({x, gain, bias},
                         [&](Tape* t) { return dot(t, layer_norm(t, x, gain, bias), w); }));
  }
  {
    Tensor logits = random_tensor({4, 5}, rng, Real(-2), Real(2));
    std::vector<int> targets{0, 3, 2, 1};
    chk(max_grad_rel_err({logits},
                         [&](Tape* t) { return softmax_cross_entropy(t, logits, targets); }));
  }
  {
    const std::size_t heads = 2, s = 4;
    Tensor scores = random_tensor({2 * heads, s, s}, rng);
    Tensor mask = Tensor::from_values({2, s}, {1, 1, 1, 0, 1, 1, 0, 0});
    Tensor w = random_tensor({2 * heads, s, s}, rng);
    chk(max_grad_rel_err(
        {scores}, [&](Tape* t) { return dot(t, attention_softmax(t, scores, mask, heads), w); }));
  }
  {
    const std::size_t batch = 2, seq = 3, heads = 2;
    Tensor x = random_tensor({batch * seq, 4}, rng);
    Tensor w = random_tensor({batch * heads, seq, 2}, rng);
    chk(max_grad_rel_err(
        {x}, [&](Tape* t) { return dot(t, split_heads(t, x, batch, seq, heads), w); }));
    Tensor y = random_tensor({batch * heads, seq, 2}, rng);
    Tensor w2 = random_tensor({batch * seq, 4}, rng);
    chk(max_grad_rel_err(
        {y}, [&](Tape* t) { return dot(t, merge_heads(t, y, batch, seq, heads), w2); }));
  }
  {
    Tensor x = random_tensor({4, 6}, rng);
    // A fresh generator per call keeps the mask fixed across FD evaluations.
    chk(max_grad_rel_err({x}, [&](Tape* t) {
      Rng mask_rng(7);
      return sum(t, dropout(t, x, Real(0.4), mask_rng));
    }));
  }
  {
    Tensor inputs = random_tensor({5, 6}, rng);
    Tensor labels = random_tensor({4, 6}, rng);
    std::vector<int> targets{0, 3, 1, 2, 3};
    chk(max_grad_rel_err({inputs, labels}, [&](Tape* t) {
      return matching_loss(t, inputs, labels, targets, Real(0.3));
    }));
    chk(max_grad_rel_err(
        {labels}, [&](Tape* t) { return regularization_loss(t, labels, Real(0.1)); }));
    chk(max_grad_rel_err({inputs, labels}, [&](Tape* t) {
      Tensor m = matching_loss(t, inputs, labels, targets, Real(0.3));
      Tensor r = regularization_loss(t, labels, Real(0.1));
      return total_loss(t, m, r, Real(0.7));
    }));
  }

  // End to end: the combined objective through a tiny encoder, against FD on
  // every encoder parameter.
  double worst_e2e = 0;
  {
    std::vector<Example> train{{"red crimson apple fruit", "a"},
                               {"blue navy sky color", "b"},
                               {"green leaf forest moss", "a"}};
    LabelSet ls({"a", "b"}, {"warm red tones fruit", "cool blue tones sky"},
                MappingMode::kDefinition);
    Vocab vocab = build_run_vocab(train, ls);
    EncoderConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.max_len = 8;
    cfg.embed_dim = 8;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.ffn_dim = 16;
    cfg.repr_dim = 6;
    cfg.seed = 3;
    Encoder enc(cfg);
    std::vector<std::string> texts;
    std::vector<int> targets;
    for (const Example& e : train) {
      texts.push_back(e.text);
      targets.push_back(e.label == "a" ? 0 : 1);
    }
    Batch bin = make_batch(vocab, texts, cfg.max_len);
    Batch blab = make_batch(vocab, ls.texts(), cfg.max_len);
    worst_e2e = max_grad_rel_err(enc.parameters(), [&](Tape* t) {
      Tensor ein = enc.encode(t, bin);
      Tensor elab = enc.encode(t, blab);
      Tensor m = matching_loss(t, ein, elab, targets, Real(0.5));
      Tensor r = regularization_loss(t, elab, Real(0.05));
      return total_loss(t, m, r, Real(0.7));
    });
  }

  double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "max op err %.2e (<1e-4), end-to-end %.2e (<1e-3), %.1fs (<30s)",
                worst_op, worst_e2e, secs);
  report("gradients", worst_op < 1e-4 && worst_e2e < 1e-3 && secs < 30, buf);
}

// ---------------------------------------------------------------------------
// 2. Closed forms: uniform similarities give ln Y; a fully separated label
//    matrix pins the regularizer at the threshold.

void check_closed_forms() {
  Rng rng(7);
  double worst_match = 0;
  for (std::size_t y : {std::size_t{2}, std::size_t{28}, std::size_t{80}}) {
    Tensor inputs = Tensor::zeros({3, 16});  // zero rows: every similarity is 0
    Tensor labels = random_tensor({y, 16}, rng);
    std::vector<int> targets{0, int(y) - 1, int(y / 2)};
    for (Real tau : {Real(0.07), Real(0.3), Real(1)}) {
      Real got = matching_loss(nullptr, inputs, labels, targets, tau).item();
      worst_match = std::max(worst_match, std::abs(double(got) - std::log(double(y))));
    }
  }

  // Orthogonal label rows: every off-diagonal similarity is 0 < delta, so
  // each row clamps to delta exactly.
  const Real delta = Real(0.25);
  Tensor labels = Tensor::zeros({6, 8});
  for (std::size_t i = 0; i < 6; ++i) labels.values()[i * 8 + i] = Real(0.3);
  double reg_err = std::abs(double(regularization_loss(nullptr, labels, delta).item() - delta));

  char buf[160];
  std::snprintf(buf, sizeof buf, "|loss-lnY| %.2e (<1e-9), |reg-delta| %.2e (<1e-12)", worst_match,
                reg_err);
  report("closed-forms", worst_match < 1e-9 && reg_err < 1e-12, buf);
}

// ---------------------------------------------------------------------------
// 3. The label-embedding cache must be invisible: cached and fresh inference
//    agree bitwise on predictions and score vectors.

void check_cache_equivalence() {
  SyntheticSpec s;
  s.classes = 8;
  s.per_class = 10;
  s.test_per_class = 2;
  s.vocab_size = 120;
  s.signal_tokens_per_class = 3;
  s.noise_len = 4;
  s.seed = 21;
  SyntheticData data = generate_synthetic(s);

  LabelSet ls = build_label_set(data.labels, data.mapping, MappingMode::kDefinition, data.pool, 0);
  Vocab vocab = build_run_vocab(data.pool, ls);
  EncoderConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.max_len = 16;
  cfg.embed_dim = 16;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.ffn_dim = 32;
  cfg.repr_dim = 16;
  cfg.seed = 9;
  Encoder enc(cfg);
  LabelEmbeddingCache cache = build_label_cache(enc, vocab, ls);

  std::vector<std::string> words;
  for (const Example& e : data.pool)
    for (const std::string& w : tokenize(e.text)) words.push_back(w);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());

  Rng rng(33);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string text;
    const std::size_t len = 3 + rng.below(12);
    for (std::size_t w = 0; w < len; ++w) {
      if (!text.empty()) text += ' ';
      // A sprinkle of out-of-vocabulary tokens keeps <unk> on the path.
      text += (rng.below(10) == 0) ? "zzxq" : words[rng.below(words.size())];
    }
    Prediction cached = predict(enc, vocab, ls, cache, text);
    Prediction fresh = predict_fresh(enc, vocab, ls, text);
    bool same = cached.index == fresh.index && cached.label == fresh.label &&
                cached.scores.size() == fresh.scores.size();
    if (same)
      for (std::size_t j = 0; j < cached.scores.size(); ++j)
        same = same && cached.scores[j] == fresh.scores[j];
    if (!same) ++mismatches;
  }

  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu/1000 inputs mismatched (need 0)", mismatches);
  report("cache-equivalence", mismatches == 0, buf);
}

// ---------------------------------------------------------------------------
// 4. Two identically configured runs must leave byte-identical result and
//    history files behind.

void check_determinism() {
  SyntheticSpec s;
  s.classes = 4;
  s.per_class = 6;
  s.test_per_class = 2;
  s.vocab_size = 72;
  s.signal_tokens_per_class = 3;
  s.noise_len = 2;
  s.seed = 5;

  ProtocolConfig cfg = protocol(Method::kTcm, 2, 3, Real(0.3), Real(0.01), Real(0.2));
  cfg.seeds = {1, 2};
  cfg.encoder.embed_dim = 16;
  cfg.encoder.ffn_dim = 32;
  cfg.encoder.repr_dim = 16;

  auto dir = testutil::scratch_dir("acceptance_determinism");
  auto run_once = [&](const char* tag) {
    Dataset data = to_dataset(s);  // regenerate from scratch each time
    RunResult rr = run_protocol("determinism", data, cfg);
    TrainedModel model(Method::kTcm, Encoder(EncoderConfig{.vocab_size = 8}), Vocab{}, LabelSet{},
                       TcmHyper{});
    (void)run_seed(data, cfg, 1, &model);
    nlohmann::json hist = nlohmann::json::array();
    for (const EpochStat& e : model.history)
      hist.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"valid_macro_f1", e.valid_macro_f1}});
    write_file(dir / (std::string("result_") + tag + ".json"), rr.to_json().dump(2) + "\n");
    write_file(dir / (std::string("history_") + tag + ".json"), hist.dump(2) + "\n");
  };
  run_once("a");
  run_once("b");

  bool results_equal = read_file(dir / "result_a.json") == read_file(dir / "result_b.json");
  bool history_equal = read_file(dir / "history_a.json") == read_file(dir / "history_b.json");
  bool nonempty = !read_file(dir / "result_a.json").empty() &&
                  !read_file(dir / "history_a.json").empty();

  char buf[160];
  std::snprintf(buf, sizeof buf, "result files %s, history files %s",
                results_equal ? "identical" : "DIFFER", history_equal ? "identical" : "DIFFER");
  report("determinism", results_equal && history_equal && nonempty, buf);
}

// ---------------------------------------------------------------------------
// 5. Matching beats the task head by >= 5 macro-F1 points on the 40-way
//    task at K=5, five seeds, inside a ten-minute budget.

void check_forty_class_margin(const Dataset& d40) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult tcm =
      run_protocol("tcm", d40, protocol(Method::kTcm, 5, 60, Real(0.3), Real(0.01), Real(0.2)));
  RunResult head = run_protocol(
      "task_head", d40, protocol(Method::kTaskHead, 5, 60, Real(0.3), Real(0.01), Real(0.2)));
  double secs = seconds_since(t0);
  double margin = tcm.mean_macro_f1 - head.mean_macro_f1;

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "matching %.3f vs head %.3f, margin %.3f (>=0.05), %.0fs (<600s)",
                tcm.mean_macro_f1, head.mean_macro_f1, margin, secs);
  report("forty-class-margin", margin >= 0.05 && secs < 600, buf);
}

// ---------------------------------------------------------------------------
// 6. The separation regularizer earns its keep on a task with near-duplicate
//    definitions: better mean F1 and strictly smaller max off-diagonal label
//    similarity on every seed.

void check_regularizer() {
  SyntheticSpec s;
  s.classes = 8;
  s.per_class = 30;
  s.test_per_class = 10;
  s.vocab_size = 200;
  s.signal_tokens_per_class = 4;
  s.noise_len = 6;
  s.shared_signal_tokens = 4;
  s.seed = 13;
  Dataset data = to_dataset(s);

  RunResult with_reg =
      run_protocol("alpha1", data, protocol(Method::kTcm, 5, 40, Real(0.3), Real(0.01), Real(1)));
  RunResult without = run_protocol(
      "alpha0", data, protocol(Method::kTcmNoReg, 5, 40, Real(0.3), Real(0.01), Real(0)));

  bool separation_tighter = true;
  for (std::size_t i = 0; i < with_reg.seeds.size(); ++i) {
    const auto& a = with_reg.seeds[i].max_off_diag_label_sim;
    const auto& b = without.seeds[i].max_off_diag_label_sim;
    if (!a || !b || !(*a < *b)) separation_tighter = false;
  }
  bool f1_better = with_reg.mean_macro_f1 > without.mean_macro_f1;

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "alpha=1 F1 %.3f vs alpha=0 %.3f; off-diag smaller on all seeds: %s",
                with_reg.mean_macro_f1, without.mean_macro_f1,
                separation_tighter ? "yes" : "NO");
  report("regularizer", f1_better && separation_tighter, buf);
}

// ---------------------------------------------------------------------------
// 7. One shared encoder matches or beats two towers at K in {5, 20} while
//    the two-tower variant pays exactly double the parameters.

void check_shared_encoder(const Dataset& d40) {
  bool ok = true;
  std::ostringstream detail;
  const struct {
    std::size_t k, epochs;
  } rounds[] = {{5, 30}, {20, 10}};
  for (const auto& r : rounds) {
    RunResult shared = run_protocol(
        "shared", d40, protocol(Method::kTcm, r.k, r.epochs, Real(0.3), Real(0.01), Real(0.2)));
    RunResult two = run_protocol(
        "two", d40, protocol(Method::kTwoEncoder, r.k, r.epochs, Real(0.3), Real(0.01), Real(0.2)));
    bool doubled = true;
    for (std::size_t i = 0; i < shared.seeds.size(); ++i)
      doubled = doubled && two.seeds[i].param_count == 2 * shared.seeds[i].param_count;
    ok = ok && shared.mean_macro_f1 >= two.mean_macro_f1 && doubled;
    detail << "K=" << r.k << ": " << shared.mean_macro_f1 << " vs " << two.mean_macro_f1
           << (doubled ? " (2x params)" : " (PARAMS OFF)") << "  ";
  }
  report("shared-encoder", ok, detail.str());
}

// ---------------------------------------------------------------------------
// 8. The margin over the task head grows with the label space: gap at 40
//    classes >= gap at 5, K=20.

void check_class_scaling(const Dataset& d40) {
  ProtocolConfig base = protocol(Method::kTcm, 20, 30, Real(0.3), Real(0.01), Real(0.2));
  auto points = class_number_sweep(d40, base, {5, 40}, 7);
  double gap5 = points[0].matching.mean_macro_f1 - points[0].task_head.mean_macro_f1;
  double gap40 = points[1].matching.mean_macro_f1 - points[1].task_head.mean_macro_f1;

  char buf[160];
  std::snprintf(buf, sizeof buf, "gap at 40 classes %.3f >= gap at 5 classes %.3f", gap40, gap5);
  report("class-scaling", gap40 >= gap5, buf);
}

// ---------------------------------------------------------------------------
// 9. Description text is load-bearing: full matching >= description-seeded
//    free labels >= randomly seeded free labels on a task whose test-time
//    signal tokens never appear in pool examples.

void check_description_signal() {
  SyntheticSpec s;
  s.classes = 8;
  s.per_class = 45;
  s.test_per_class = 10;
  s.vocab_size = 200;
  s.signal_tokens_per_class = 4;
  s.disjoint_test_signal = true;
  s.noise_len = 2;
  s.seed = 17;
  Dataset data = to_dataset(s);

  auto cfg = [&](Method m) { return protocol(m, 5, 60, Real(0.3), Real(0.0005), Real(0.2)); };
  RunResult tcm = run_protocol("tcm", data, cfg(Method::kTcm));
  RunResult init = run_protocol("init", data, cfg(Method::kTcmInit));
  RunResult rand = run_protocol("rand", data, cfg(Method::kTcmRandInit));

  bool ok = tcm.mean_macro_f1 >= init.mean_macro_f1 && init.mean_macro_f1 >= rand.mean_macro_f1;
  char buf[160];
  std::snprintf(buf, sizeof buf, "matching %.3f >= desc-init %.3f >= rand-init %.3f",
                tcm.mean_macro_f1, init.mean_macro_f1, rand.mean_macro_f1);
  report("description-signal", ok, buf);
}

// ---------------------------------------------------------------------------
// 10. Metrics agree with a from-scratch recount on random confusion matrices.

void check_metrics() {
  Rng rng(55);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    Confusion c(n, std::vector<std::size_t>(n, 0));
    std::size_t total = 0;
    for (auto& row : c)
      for (auto& cell : row) {
        cell = rng.below(21);
        total += cell;
      }
    if (total == 0) c[0][0] = 1;

    // Independent recount straight from the definitions.
    double trace = 0, grand = 0, f1_sum = 0, tp_all = 0, fp_all = 0, fn_all = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double tp = double(c[i][i]), fp = 0, fn = 0;
      for (std::size_t j = 0; j < n; ++j) {
        grand += double(c[i][j]);
        if (j != i) {
          fn += double(c[i][j]);
          fp += double(c[j][i]);
        }
      }
      trace += tp;
      tp_all += tp;
      fp_all += fp;
      fn_all += fn;
      const double denom = 2 * tp + fp + fn;
      f1_sum += denom > 0 ? 2 * tp / denom : 0.0;
    }
    const double macro = f1_sum / double(n);
    const double micro_denom = 2 * tp_all + fp_all + fn_all;
    const double micro = micro_denom > 0 ? 2 * tp_all / micro_denom : 0.0;
    const double acc = trace / grand;

    worst = std::max(worst, std::abs(macro_f1(c) - macro));
    worst = std::max(worst, std::abs(micro_f1(c) - micro));
    worst = std::max(worst, std::abs(accuracy(c) - acc));
  }

  char buf[120];
  std::snprintf(buf, sizeof buf, "max deviation %.2e over 100 matrices (<=1e-12)", worst);
  report("metrics", worst <= 1e-12, buf);
}

}  // namespace

int main() {
  std::printf("acceptance gate (expect ~10 minutes)\n");
  auto t0 = std::chrono::steady_clock::now();

  check_gradients();
  check_closed_forms();
  check_cache_equivalence();
  check_determinism();
  check_metrics();

  Dataset d40 = to_dataset(forty_class_spec());
  check_forty_class_margin(d40);
  check_regularizer();
  check_shared_encoder(d40);
  check_class_scaling(d40);
  check_description_signal();

  std::printf("%d/10 criteria passed in %.0fs\n", 10 - failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
