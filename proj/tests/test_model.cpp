#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "sentigraph/metrics.hpp"
#include "sentigraph/model.hpp"

using namespace sentigraph;
namespace st = sentigraph::testing;
namespace fs = std::filesystem;

namespace {

Hyperparams tiny_hp(std::uint64_t seed) {
  Hyperparams hp;
  hp.word_dim = 4;
  hp.pos_dim = 3;
  hp.lemma_dim = 3;
  hp.char_dim = 3;
  hp.char_hidden = 3;
  hp.char_out = 4;
  hp.lstm_hidden = 5;
  hp.lstm_layers = 2;
  hp.mlp_dim = 4;
  hp.seed = seed;
  return hp;
}

Hyperparams small_train_hp(std::uint64_t seed) {
  Hyperparams hp;
  hp.word_dim = 24;
  hp.pos_dim = 8;
  hp.lemma_dim = 8;
  hp.char_dim = 8;
  hp.char_hidden = 12;
  hp.char_out = 12;
  hp.lstm_hidden = 32;
  hp.lstm_layers = 1;
  hp.mlp_dim = 32;
  hp.batch_size = 5;
  hp.learning_rate = 5e-3;
  hp.dropout_embedding = 0.0;
  hp.dropout_edge = 0.0;
  hp.dropout_label = 0.0;
  hp.dropout_recurrent = 0.0;
  hp.dropout_char_recurrent = 0.0;
  hp.dropout_main_ff = 0.0;
  hp.dropout_char_ff = 0.0;
  hp.dropout_char_linear = 0.0;
  hp.seed = seed;
  return hp;
}

Corpus tiny_corpus(int sentences, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Corpus corpus;
  for (int s = 0; s < sentences; ++s)
    corpus.push_back(st::random_lossless_sentence("t" + std::to_string(s), 7, 2, rng));
  return corpus;
}

double eval_loss(const Model& model, const Sentence& sentence, const ParseGraph& gold,
                 const Eigen::MatrixXd* ctx) {
  const ScoreTensor scores = model.forward_scores(sentence, ctx, false);
  return softmax_loss(scores, gold, model.vocab(), model.hyper().none_weight).first;
}

// Central finite differences over every trainable parameter entry.
struct GradCheckResult {
  double worst_rel = 0.0;
  long entries = 0;
};

GradCheckResult gradient_check(Model& model, const Sentence& sentence, const ParseGraph& gold,
                               const Eigen::MatrixXd* ctx, double step) {
  model.params().zero_grads();
  Model::Trace trace;
  const ScoreTensor scores = model.forward_scores(sentence, ctx, false, nullptr, &trace);
  auto [loss, d_scores] =
      softmax_loss(scores, gold, model.vocab(), model.hyper().none_weight);
  (void)loss;
  model.backward(trace, d_scores);

  GradCheckResult result;
  for (nn::Tensor& t : model.params().tensors()) {
    if (!t.trainable) continue;
    for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
      for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
        const double saved = t.value(r, c);
        t.value(r, c) = saved + step;
        const double up = eval_loss(model, sentence, gold, ctx);
        t.value(r, c) = saved - step;
        const double down = eval_loss(model, sentence, gold, ctx);
        t.value(r, c) = saved;
        const double fd = (up - down) / (2.0 * step);
        const double an = t.grad(r, c);
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
        result.worst_rel = std::max(result.worst_rel, rel);
        ++result.entries;
      }
    }
  }
  return result;
}

}  // namespace

TEST_CASE("build_vocab produces the fixed label inventory") {
  const Corpus fig = {st::fig2_annotated()};

  SUBCASE("plain scheme") {
    const Vocabulary v = build_vocab(fig, EncodingScheme::make(HeadRule::HeadFirst));
    CHECK(v.labels == std::vector<std::string>{"exp:positive", "exp:neutral", "exp:negative",
                                               "target", "holder", "NONE"});
    CHECK(v.none_id() == 5);
    CHECK(v.word_id("UMUC") >= 2);
    CHECK(v.word_id("never-seen") == Vocabulary::kUnk);
    // Unseen capitalizations fall back to the known lowercase form.
    CHECK(v.word_id("STARS") == v.word_id("stars"));
    CHECK(v.word_id("stars") != Vocabulary::kUnk);
  }
  SUBCASE("in-label scheme extends the inventory") {
    const Vocabulary v = build_vocab(fig, EncodingScheme::make(HeadRule::HeadFirst, true));
    CHECK(v.num_labels() == 11);
    CHECK(v.labels.back() == "NONE");
    CHECK(v.label_id("IN:holder") == 9);
  }
  SUBCASE("labels emitted by encoding are all in the inventory") {
    for (bool inlabel : {false, true}) {
      const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFirst, inlabel);
      const Vocabulary v = build_vocab(fig, scheme);
      auto [graph, loss] = encode_sentence(fig[0], scheme);
      for (const Arc& arc : graph.arcs()) CHECK_NOTHROW((void)v.label_id(arc.label.str()));
    }
  }
  SUBCASE("empty corpus is an error") {
    CHECK_THROWS_AS(build_vocab({}, EncodingScheme::make(HeadRule::HeadFirst)), EmptyCorpusError);
  }
  SUBCASE("pretrained words enter the vocabulary") {
    EmbeddingTable table;
    table.dim = 4;
    table.words = {"zz_pretrained"};
    table.vectors["zz_pretrained"] = {1, 2, 3, 4};
    const Vocabulary v = build_vocab(fig, EncodingScheme::make(HeadRule::HeadFirst), &table);
    CHECK(v.word_id("zz_pretrained") >= 2);
  }
}

TEST_CASE("forward_scores has the contracted shape and masking") {
  const Corpus fig = {st::fig2_annotated()};
  const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFirst);
  const Vocabulary v = build_vocab(fig, scheme);
  Model model(v, tiny_hp(1), nullptr, scheme);

  const ScoreTensor scores = model.score(fig[0].sentence);
  CHECK(scores.n == 12);
  CHECK(scores.num_labels == 6);
  CHECK(scores.data.size() == 13u * 12u * 6u);

  // Self cells force NONE.
  for (int d = 1; d <= 12; ++d) {
    for (int l = 0; l < 6; ++l) {
      if (l == v.none_id()) CHECK(scores.at(d, d, l) == 0.0);
      else CHECK(scores.at(d, d, l) < -1e29);
    }
  }
}

TEST_CASE("all-zero parameters score every label equally") {
  const Corpus fig = {st::fig2_annotated()};
  const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFirst);
  Model model(build_vocab(fig, scheme), tiny_hp(2), nullptr, scheme);
  for (nn::Tensor& t : model.params().tensors()) t.value.setZero();

  const ScoreTensor scores = model.score(fig[0].sentence);
  for (int h = 0; h <= scores.n; ++h)
    for (int d = 1; d <= scores.n; ++d) {
      if (h == d) continue;
      for (int l = 1; l < scores.num_labels; ++l)
        CHECK(scores.at(h, d, l) == doctest::Approx(scores.at(h, d, 0)));
    }
}

TEST_CASE("biaffine cell matches an independent dense recomputation") {
  const Corpus corpus = tiny_corpus(1, 77);
  const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFirst);
  Model model(build_vocab(corpus, scheme), tiny_hp(3), nullptr, scheme);

  Model::Trace trace;
  const ScoreTensor scores =
      model.forward_scores(corpus[0].sentence, nullptr, false, nullptr, &trace);

  const nn::Matrix& U = model.params().at(model.params().find("scorer.U")).value;
  const int m = model.hyper().mlp_dim;
  std::mt19937_64 rng(4);
  for (int probe = 0; probe < 20; ++probe) {
    const int h = static_cast<int>(rng() % static_cast<std::uint64_t>(scores.n + 1));
    const int d = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(scores.n));
    if (h == d) continue;
    const int l = static_cast<int>(rng() % static_cast<std::uint64_t>(scores.num_labels));
    double manual = 0.0;
    for (int a = 0; a <= m; ++a)
      for (int b = 0; b <= m; ++b)
        manual += trace.head_aug(a, h) * U(a, l * (m + 1) + b) * trace.dep_aug(b, d - 1);
    CHECK(scores.at(h, d, l) == doctest::Approx(manual).epsilon(1e-10));
  }
}

TEST_CASE("softmax loss on canonical score patterns") {
  // Four labels plus NONE, uniform scores: per-cell loss is ln 5.
  Vocabulary v;
  v.labels = {"exp:positive", "exp:negative", "target", "holder", "NONE"};
  const int n = 3;
  ScoreTensor uniform(n, 5);
  const auto [loss_u, grad_u] = softmax_loss(uniform, ParseGraph(n), v, 1.0);
  CHECK(loss_u == doctest::Approx(std::log(5.0)).epsilon(1e-9));

  // Perfectly one-hot-correct scores drive the loss toward zero as the
  // logits scale up.
  ParseGraph gold(n);
  gold.add({0, 2, ArcLabel::expression(Polarity::Positive)});
  double prev = std::numeric_limits<double>::max();
  for (double scale : {1.0, 4.0, 16.0, 64.0}) {
    ScoreTensor forced(n, 5);
    for (int h = 0; h <= n; ++h)
      for (int d = 1; d <= n; ++d) {
        if (h == d) continue;
        const int hot = (h == 0 && d == 2) ? 0 : 4;
        for (int l = 0; l < 5; ++l)
          forced.at(h, d, l) = l == hot ? scale : 0.0;
      }
    const double loss = softmax_loss(forced, gold, v, 1.0).first;
    CHECK(loss < prev);
    prev = loss;
  }
  CHECK(prev < 1e-10);

  SUBCASE("none_weight rescales only NONE-gold cells") {
    const auto [loss_half, grad_half] = softmax_loss(uniform, ParseGraph(n), v, 0.5);
    CHECK(loss_half == doctest::Approx(0.5 * std::log(5.0)).epsilon(1e-9));
  }
  SUBCASE("gradients sum to zero per cell") {
    std::mt19937_64 rng(6);
    ScoreTensor random(n, 5);
    for (double& x : random.data) x = std::normal_distribution<double>()(rng);
    const auto [loss, grad] = softmax_loss(random, gold, v, 1.0);
    for (int h = 0; h <= n; ++h)
      for (int d = 1; d <= n; ++d) {
        if (h == d) continue;
        double sum = 0.0;
        for (int l = 0; l < 5; ++l) sum += grad.at(h, d, l);
        CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
      }
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 seeds(20260810);
  for (int config = 0; config < 3; ++config) {
    const Corpus corpus = tiny_corpus(1, seeds());
    const EncodingScheme scheme =
        EncodingScheme::make(config % 2 == 0 ? HeadRule::HeadFirst : HeadRule::HeadFinal,
                             config == 2);
    auto [gold, loss] = encode_sentence(corpus[0], scheme);
    Model model(build_vocab(corpus, scheme), tiny_hp(seeds()), nullptr, scheme);
    const GradCheckResult r = gradient_check(model, corpus[0].sentence, gold, nullptr, 1e-5);
    CHECK(r.entries > 500);
    CHECK(r.worst_rel < 1e-4);
  }
}

TEST_CASE("gradients flow through contextual vectors and frozen tables") {
  std::mt19937_64 rng(9);
  const Corpus corpus = tiny_corpus(1, 55);
  const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFirst);
  auto [gold, lossrep] = encode_sentence(corpus[0], scheme);

  EmbeddingTable pretrained;
  pretrained.dim = 4;
  for (const Token& t : corpus[0].sentence.tokens) {
    if (pretrained.vectors.count(t.form)) continue;
    pretrained.words.push_back(t.form);
    pretrained.vectors[t.form] = {0.1, -0.2, 0.3, -0.4};
  }

  Hyperparams hp = tiny_hp(10);
  hp.ctx_dim = 3;
  Model model(build_vocab(corpus, scheme, &pretrained), hp, &pretrained, scheme);
  CHECK(model.word_frozen());

  Eigen::MatrixXd ctx(corpus[0].sentence.size(), 3);
  for (Eigen::Index r = 0; r < ctx.rows(); ++r)
    for (Eigen::Index c = 0; c < ctx.cols(); ++c)
      ctx(r, c) = std::normal_distribution<double>()(rng);

  const GradCheckResult r = gradient_check(model, corpus[0].sentence, gold, &ctx, 1e-5);
  CHECK(r.worst_rel < 1e-4);

  SUBCASE("wrong ctx shape raises DimensionMismatch") {
    Eigen::MatrixXd bad(corpus[0].sentence.size() + 1, 3);
    bad.setZero();
    CHECK_THROWS_AS(model.score(corpus[0].sentence, &bad), DimensionMismatchError);
    CHECK_THROWS_AS(model.score(corpus[0].sentence, nullptr), DimensionMismatchError);
  }
}

TEST_CASE("prediction is the per-cell argmax filter") {
  const Corpus fig = {st::fig2_annotated()};
  const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFirst);
  const Vocabulary v = build_vocab(fig, scheme);
  const int n = 12;

  SUBCASE("all-NONE scores give the empty graph") {
    ScoreTensor scores(n, v.num_labels());
    for (int h = 0; h <= n; ++h)
      for (int d = 1; d <= n; ++d)
        scores.at(h, d, v.none_id()) = 5.0;
    CHECK(graph_from_scores(scores, v).arcs().empty());
  }
  SUBCASE("scores forced to the figure gold reproduce its arc set") {
    auto [gold, loss] = encode_sentence(fig[0], scheme);
    ScoreTensor scores(n, v.num_labels());
    for (int h = 0; h <= n; ++h)
      for (int d = 1; d <= n; ++d) {
        if (h == d) continue;
        int hot = v.none_id();
        if (const ArcLabel* lbl = gold.label_at(h, d)) hot = v.label_id(lbl->str());
        for (int l = 0; l < v.num_labels(); ++l)
          scores.at(h, d, l) = l == hot ? 5.0 : -5.0;
      }
    CHECK(st::arc_set(graph_from_scores(scores, v)) == st::fig2a_arcs());
  }
  SUBCASE("random scores agree with a brute-force argmax oracle") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
      ScoreTensor scores(5, v.num_labels());
      for (double& x : scores.data) x = std::normal_distribution<double>()(rng);
      const ParseGraph graph = graph_from_scores(scores, v);

      std::set<st::ArcTriple> expected;
      for (int h = 0; h <= 5; ++h)
        for (int d = 1; d <= 5; ++d) {
          if (h == d) continue;
          int best = -1;
          for (int l = 0; l < v.num_labels(); ++l) {
            if (h == 0 && !(v.labels[static_cast<std::size_t>(l)].rfind("exp:", 0) == 0 ||
                            l == v.none_id()))
              continue;
            if (best < 0 || scores.at(h, d, l) > scores.at(h, d, best)) best = l;
          }
          if (best != v.none_id())
            expected.insert({h, d, v.labels[static_cast<std::size_t>(best)]});
        }
      CHECK(st::arc_set(graph) == expected);
    }
  }
  SUBCASE("adding unreachable label columns never changes the graph") {
    const Vocabulary v_in = build_vocab(fig, EncodingScheme::make(HeadRule::HeadFirst, true));
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 30; ++trial) {
      ScoreTensor base(6, v.num_labels());
      for (double& x : base.data) x = std::normal_distribution<double>()(rng);
      ScoreTensor extended(6, v_in.num_labels());
      for (int h = 0; h <= 6; ++h)
        for (int d = 1; d <= 6; ++d) {
          for (int l = 0; l < v_in.num_labels(); ++l) extended.at(h, d, l) = -1e30;
          for (int l = 0; l < 5; ++l) extended.at(h, d, l) = base.at(h, d, l);
          extended.at(h, d, v_in.none_id()) = base.at(h, d, v.none_id());
        }
      CHECK(st::arc_set(graph_from_scores(base, v)) ==
            st::arc_set(graph_from_scores(extended, v_in)));
    }
  }
}

TEST_CASE("training memorizes a tiny corpus") {
  const Corpus corpus = tiny_corpus(10, 2024);
  const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFirst);
  Hyperparams hp = small_train_hp(7);
  hp.epochs = 60;

  const TrainResult result = train(corpus, corpus, scheme, hp);
  REQUIRE(result.history.size() == 60);

  double best_lf1 = 0.0;
  for (const EpochStats& e : result.history) best_lf1 = std::max(best_lf1, e.dev_lf1);
  CHECK(best_lf1 >= 0.95);

  // Loss over any 10-epoch window does not increase (start vs end).
  for (std::size_t k = 0; k + 9 < result.history.size(); ++k)
    CHECK(result.history[k + 9].loss <= result.history[k].loss + 1e-3);

  // The returned checkpoint is the best dev epoch.
  CHECK(result.best_epoch >= 1);
  CHECK(result.history[static_cast<std::size_t>(result.best_epoch - 1)].dev_lf1 ==
        doctest::Approx(best_lf1));
}

TEST_CASE("training contracts") {
  const Corpus corpus = tiny_corpus(4, 11);
  const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFirst);

  SUBCASE("epochs=0 returns the initialization with empty history") {
    Hyperparams hp = small_train_hp(3);
    hp.epochs = 0;
    const TrainResult result = train(corpus, corpus, scheme, hp);
    CHECK(result.history.empty());
    CHECK(result.best_epoch == 0);
    const Model fresh(build_vocab(corpus, scheme), hp, nullptr, scheme);
    for (std::size_t i = 0; i < fresh.params().size(); ++i)
      CHECK(fresh.params().at(static_cast<int>(i)).value ==
            result.model.params().at(static_cast<int>(i)).value);
  }
  SUBCASE("empty corpora are rejected") {
    Hyperparams hp = small_train_hp(3);
    CHECK_THROWS_AS(train({}, corpus, scheme, hp), EmptyCorpusError);
    CHECK_THROWS_AS(train(corpus, {}, scheme, hp), EmptyCorpusError);
  }
  SUBCASE("identical seeds give identical checkpoints") {
    Hyperparams hp = small_train_hp(21);
    hp.epochs = 3;
    const TrainResult a = train(corpus, corpus, scheme, hp);
    const TrainResult b = train(corpus, corpus, scheme, hp);
    REQUIRE(a.model.params().size() == b.model.params().size());
    for (std::size_t i = 0; i < a.model.params().size(); ++i)
      CHECK(a.model.params().at(static_cast<int>(i)).value ==
            b.model.params().at(static_cast<int>(i)).value);
    for (const AnnotatedSentence& ann : corpus)
      CHECK(predict(a.model, ann.sentence) == predict(b.model, ann.sentence));
  }
  SUBCASE("frozen pretrained vectors are bit-identical after training") {
    Hyperparams hp = small_train_hp(5);
    hp.epochs = 3;
    EmbeddingTable pretrained;
    pretrained.dim = hp.word_dim;
    std::mt19937_64 rng(66);
    for (const AnnotatedSentence& ann : corpus)
      for (const Token& t : ann.sentence.tokens) {
        if (pretrained.vectors.count(t.form)) continue;
        std::vector<double> vec;
        for (int d = 0; d < hp.word_dim; ++d)
          vec.push_back(std::normal_distribution<double>()(rng));
        pretrained.words.push_back(t.form);
        pretrained.vectors[t.form] = vec;
      }
    const Model before(build_vocab(corpus, scheme, &pretrained), hp, &pretrained, scheme);
    const TrainResult result = train(corpus, corpus, scheme, hp, &pretrained);
    CHECK(result.model.word_frozen());
    const int idx = before.params().find("emb.word");
    CHECK(before.params().at(idx).value == result.model.params().at(idx).value);
  }
  SUBCASE("missing contextual vectors fail featurization") {
    Hyperparams hp = small_train_hp(5);
    hp.epochs = 1;
    ContextualStore store;
    store.put(corpus[0].sentence.sent_id,
              Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(corpus[0].sentence.size()), 2));
    CHECK_THROWS_AS(train(corpus, corpus, scheme, hp, nullptr, &store), MissingContextError);
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const fs::path dir = fs::temp_directory_path() / "sentigraph-ckpt-test";
  fs::create_directories(dir);
  const Corpus corpus = tiny_corpus(4, 31);
  const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFinal, true);
  Hyperparams hp = small_train_hp(17);
  hp.epochs = 2;
  const TrainResult result = train(corpus, corpus, scheme, hp);

  const std::string p1 = (dir / "model.ckpt").string();
  const std::string p2 = (dir / "model2.ckpt").string();
  save_checkpoint(result.model, p1);
  const Model loaded = load_checkpoint(p1);
  save_checkpoint(loaded, p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK_FALSE(b1.empty());

  CHECK(loaded.scheme().head_rule == HeadRule::HeadFinal);
  CHECK(loaded.scheme().inlabel);
  CHECK(loaded.vocab().labels == result.model.vocab().labels);
  for (const AnnotatedSentence& ann : corpus)
    CHECK(predict(loaded, ann.sentence) == predict(result.model, ann.sentence));
  fs::remove_all(dir);
}
