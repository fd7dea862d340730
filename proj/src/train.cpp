#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "sentigraph/metrics.hpp"
#include "sentigraph/model.hpp"

namespace sentigraph {

namespace {

const SynTree* tree_for(const std::map<std::string, SynTree>* syntax,
                        const std::string& sent_id) {
  if (!syntax) return nullptr;
  auto it = syntax->find(sent_id);
  return it == syntax->end() ? nullptr : &it->second;
}

std::vector<ParseGraph> encode_corpus(const Corpus& corpus, const EncodingScheme& scheme,
                                      const std::map<std::string, SynTree>* syntax,
                                      const char* name, std::ostream* log) {
  std::vector<ParseGraph> graphs;
  graphs.reserve(corpus.size());
  std::size_t collisions = 0;
  for (const AnnotatedSentence& ann : corpus) {
    auto [graph, loss] = encode_sentence(ann, scheme, tree_for(syntax, ann.sentence.sent_id));
    collisions += loss.count();
    graphs.push_back(std::move(graph));
  }
  if (collisions > 0 && log)
    *log << "[train] " << name << ": " << collisions << " lossy arc collision(s) dropped\n";
  return graphs;
}

const Eigen::MatrixXd* ctx_for(const ContextualStore* ctx, const std::string& sent_id) {
  if (!ctx) return nullptr;
  return &ctx->get(sent_id);  // throws MissingContextError when absent
}

}  // namespace

TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus,
                  const EncodingScheme& scheme, const Hyperparams& hp,
                  const EmbeddingTable* pretrained, const ContextualStore* ctx,
                  const std::map<std::string, SynTree>* syntax, std::ostream* log) {
  if (train_corpus.empty()) throw EmptyCorpusError("training corpus is empty");
  if (dev_corpus.empty()) throw EmptyCorpusError("dev corpus is empty");
  hp.validate();

  Hyperparams effective = hp;
  if (ctx && effective.ctx_dim == 0) effective.ctx_dim = ctx->dim();

  const Vocabulary vocab = build_vocab(train_corpus, scheme, pretrained);
  const std::vector<ParseGraph> train_gold =
      encode_corpus(train_corpus, scheme, syntax, "train", log);
  const std::vector<ParseGraph> dev_gold = encode_corpus(dev_corpus, scheme, syntax, "dev", log);

  Model model(vocab, effective, pretrained, scheme);
  TrainResult result{model, {}, 0};
  if (effective.epochs == 0) return result;

  nn::Adam adam(effective.learning_rate, effective.beta1, effective.beta2, effective.l2);
  std::mt19937_64 shuffle_rng(effective.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 dropout_rng(effective.seed ^ 0xc2b2ae3d27d4eb4fULL);

  std::vector<std::size_t> order(train_corpus.size());
  std::iota(order.begin(), order.end(), 0);

  double best_lf1 = -1.0;
  Model::Trace trace;

  for (int epoch = 1; epoch <= effective.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(effective.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(effective.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      model.params().zero_grads();

      for (std::size_t pos = start; pos < stop; ++pos) {
        const AnnotatedSentence& ann = train_corpus[order[pos]];
        const ScoreTensor scores = model.forward_scores(
            ann.sentence, ctx_for(ctx, ann.sentence.sent_id), true, &dropout_rng, &trace);
        auto [loss, d_scores] =
            softmax_loss(scores, train_gold[order[pos]], model.vocab(), effective.none_weight);
        if (!std::isfinite(loss))
          throw NonFiniteLossError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", sentence '" + ann.sentence.sent_id + "'");
        epoch_loss += loss;
        for (double& g : d_scores.data) g *= inv_batch;
        model.backward(trace, d_scores);
      }
      adam.step(model.params());
    }
    epoch_loss /= static_cast<double>(train_corpus.size());

    std::vector<ParseGraph> dev_pred;
    dev_pred.reserve(dev_corpus.size());
    for (const AnnotatedSentence& ann : dev_corpus)
      dev_pred.push_back(predict(model, ann.sentence, ctx_for(ctx, ann.sentence.sent_id)));
    const double uf1 = arc_f1(dev_gold, dev_pred, false).f1();
    const double lf1 = arc_f1(dev_gold, dev_pred, true).f1();
    result.history.push_back({epoch_loss, uf1, lf1});
    if (log)
      *log << "[train] epoch " << epoch << " loss " << epoch_loss << " dev UF1 " << uf1
           << " dev LF1 " << lf1 << "\n";

    if (lf1 > best_lf1) {
      best_lf1 = lf1;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace sentigraph
