// Command-line front end: encode, decode, train, predict, eval, stats and
// significance subcommands over the sentigraph library.

#include <CLI11.hpp>

#include <atomic>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sentigraph/codec.hpp"
#include "sentigraph/io.hpp"
#include "sentigraph/metrics.hpp"
#include "sentigraph/model.hpp"

namespace sg = sentigraph;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct SchemeFlags {
  std::string scheme = "head-first";
  bool inlabel = false;
  std::string banned;  // comma-separated override for dep-labels

  sg::EncodingScheme build() const {
    sg::EncodingScheme s = sg::EncodingScheme::make(sg::parse_head_rule(scheme), inlabel);
    if (!banned.empty()) {
      s.banned_relations.clear();
      std::stringstream ss(banned);
      std::string rel;
      while (std::getline(ss, rel, ','))
        if (!rel.empty()) s.banned_relations.insert(rel);
    }
    return s;
  }
};

void add_scheme_flags(CLI::App* cmd, SchemeFlags& flags) {
  cmd->add_option("--scheme", flags.scheme,
                  "Graph encoding: head-first|head-final|dep-edges|dep-labels")
      ->default_val("head-first");
  cmd->add_flag("--inlabel", flags.inlabel, "Use IN:-prefixed labels on span-internal arcs");
  cmd->add_option("--banned-relations", flags.banned,
                  "Comma-separated relations dep-labels may not pick as heads");
}

std::map<std::string, sg::SynTree> load_syntax_if(const std::string& path) {
  if (path.empty()) return {};
  return sg::load_conllu_syntax(path);
}

// Index-sliced parallel map; each index writes its own slot, so results are
// identical at any thread count.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<sg::ParseGraph> encode_corpus(const sg::Corpus& corpus,
                                          const sg::EncodingScheme& scheme,
                                          const std::map<std::string, sg::SynTree>& syntax,
                                          sg::LossReport* total_loss, int threads) {
  std::vector<std::optional<sg::ParseGraph>> slots(corpus.size());
  std::vector<sg::LossReport> reports(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const sg::SynTree* syn = nullptr;
    auto it = syntax.find(corpus[i].sentence.sent_id);
    if (it != syntax.end()) syn = &it->second;
    auto [graph, loss] = sg::encode_sentence(corpus[i], scheme, syn);
    slots[i] = std::move(graph);
    reports[i] = std::move(loss);
  });
  std::vector<sg::ParseGraph> graphs;
  graphs.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    graphs.push_back(std::move(*slots[i]));
    if (total_loss) total_loss->merge(reports[i]);
  }
  return graphs;
}

sg::Corpus subset_by_ids(const sg::Corpus& corpus, const std::set<std::string>& keep) {
  sg::Corpus out;
  for (const sg::AnnotatedSentence& s : corpus)
    if (keep.count(s.sentence.sent_id)) out.push_back(s);
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sg::ParseError("cannot open for writing: " + path);
  out << content;
}

double metric_by_name(const std::string& name, const sg::Corpus& gold, const sg::Corpus& pred,
                      const sg::EncodingScheme& scheme,
                      const std::map<std::string, sg::SynTree>& syntax) {
  if (name == "holder") return sg::token_span_f1(gold, pred, sg::Element::Holder).f1();
  if (name == "target") return sg::token_span_f1(gold, pred, sg::Element::Target).f1();
  if (name == "expression") return sg::token_span_f1(gold, pred, sg::Element::Expression).f1();
  if (name == "targeted") return sg::targeted_f1(gold, pred).f1();
  if (name == "nsf1") return sg::sentiment_graph_f1(gold, pred, false).f1();
  if (name == "sf1") return sg::sentiment_graph_f1(gold, pred, true).f1();
  if (name == "polarity") return sg::polarity_overlap_f1(gold, pred).f1();
  if (name == "uf1" || name == "lf1") {
    auto gg = encode_corpus(gold, scheme, syntax, nullptr, 1);
    auto pg = encode_corpus(pred, scheme, syntax, nullptr, 1);
    return sg::arc_f1(gg, pg, name == "lf1").f1();
  }
  throw sg::Error("unknown metric '" + name + "'");
}

std::string stats_text(const sg::StatsReport& r) {
  std::ostringstream os;
  os << r.sentences << " sentences (mean length " << r.mean_sentence_length << ")\n";
  auto element = [&os](const char* name, const sg::ElementStats& e) {
    os << e.count << " " << name << " (mean " << e.mean_len << ", max " << e.max_len << ")\n";
  };
  element("holders", r.holders);
  element("targets", r.targets);
  element("expressions", r.expressions);
  os << "polarity " << r.positive << " positive / " << r.neutral << " neutral / " << r.negative
     << " negative\n";
  return os.str();
}

std::string stats_json(const sg::StatsReport& r) {
  std::ostringstream os;
  os << "{\n"
     << "  \"sentences\": " << r.sentences << ",\n"
     << "  \"mean_sentence_length\": " << r.mean_sentence_length << ",\n";
  auto element = [&os](const char* name, const sg::ElementStats& e) {
    os << "  \"" << name << "\": {\"count\": " << e.count << ", \"mean_len\": " << e.mean_len
       << ", \"max_len\": " << e.max_len << "},\n";
  };
  element("holders", r.holders);
  element("targets", r.targets);
  element("expressions", r.expressions);
  os << "  \"polarity\": {\"positive\": " << r.positive << ", \"neutral\": " << r.neutral
     << ", \"negative\": " << r.negative << "}\n}\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sentigraph: structured sentiment analysis as dependency graph parsing"};
  app.require_subcommand(1);
  app.set_config("--config")->envname("SENTIGRAPH_CONFIG");

  // ---- encode ----
  auto* encode_cmd = app.add_subcommand("encode", "Corpus + scheme -> graph file + loss report");
  SchemeFlags encode_scheme;
  std::string encode_input, encode_output, encode_syntax, encode_loss_out;
  int encode_threads = 1;
  add_scheme_flags(encode_cmd, encode_scheme);
  encode_cmd->add_option("corpus", encode_input, "Opinion corpus JSON")->required();
  encode_cmd->add_option("--output,-o", encode_output, "Graph file to write")->required();
  encode_cmd->add_option("--syntax", encode_syntax, "CoNLL-U trees (dep-edges/dep-labels)");
  encode_cmd->add_option("--loss-output", encode_loss_out, "Write collision report here");
  encode_cmd->add_option("--threads", encode_threads, "Worker threads")->default_val(1);

  // ---- decode ----
  auto* decode_cmd = app.add_subcommand("decode", "Graph file -> opinion corpus JSON");
  SchemeFlags decode_scheme;
  std::string decode_input, decode_output, decode_corpus;
  add_scheme_flags(decode_cmd, decode_scheme);
  decode_cmd->add_option("graphs", decode_input, "Graph file")->required();
  decode_cmd->add_option("--output,-o", decode_output, "Corpus JSON to write")->required();
  decode_cmd->add_option("--corpus", decode_corpus,
                         "Original corpus JSON supplying text and offsets");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Train a parser checkpoint");
  SchemeFlags train_scheme;
  std::string train_path, dev_path, train_syntax, train_embeddings, train_ctx, train_out,
      history_out;
  sg::Hyperparams hp;
  add_scheme_flags(train_cmd, train_scheme);
  train_cmd->add_option("--train", train_path, "Training corpus JSON")->required();
  train_cmd->add_option("--dev", dev_path, "Development corpus JSON")->required();
  train_cmd->add_option("--output,-o", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--syntax", train_syntax, "CoNLL-U trees");
  train_cmd->add_option("--embeddings", train_embeddings, "Pretrained word embeddings (frozen)");
  train_cmd->add_option("--contextual", train_ctx, "Contextual vector store");
  train_cmd->add_option("--history", history_out, "Per-epoch CSV (loss, dev UF1, dev LF1)");
  train_cmd->add_option("--seed", hp.seed, "Random seed")->default_val(hp.seed);
  train_cmd->add_option("--epochs", hp.epochs)->default_val(hp.epochs);
  train_cmd->add_option("--batch-size", hp.batch_size)->default_val(hp.batch_size);
  train_cmd->add_option("--learning-rate", hp.learning_rate)->default_val(hp.learning_rate);
  train_cmd->add_option("--none-weight", hp.none_weight)->default_val(hp.none_weight);
  train_cmd->add_option("--lstm-hidden", hp.lstm_hidden)->default_val(hp.lstm_hidden);
  train_cmd->add_option("--lstm-layers", hp.lstm_layers)->default_val(hp.lstm_layers);
  train_cmd->add_option("--mlp-dim", hp.mlp_dim)->default_val(hp.mlp_dim);
  train_cmd->add_option("--word-dim", hp.word_dim)->default_val(hp.word_dim);
  train_cmd->add_option("--pos-dim", hp.pos_dim)->default_val(hp.pos_dim);
  train_cmd->add_option("--lemma-dim", hp.lemma_dim)->default_val(hp.lemma_dim);
  train_cmd->add_option("--char-dim", hp.char_dim)->default_val(hp.char_dim);
  train_cmd->add_option("--char-hidden", hp.char_hidden)->default_val(hp.char_hidden);
  train_cmd->add_option("--char-out", hp.char_out)->default_val(hp.char_out);
  train_cmd->add_option("--model-interpolation", hp.model_interpolation)
      ->default_val(hp.model_interpolation);
  train_cmd->add_option("--loss-interpolation", hp.loss_interpolation)
      ->default_val(hp.loss_interpolation);

  // ---- predict ----
  auto* predict_cmd = app.add_subcommand("predict", "Checkpoint + corpus -> graphs / opinions");
  std::string predict_model, predict_input, predict_ctx, predict_syntax, predict_graphs,
      predict_decoded;
  int predict_threads = 1;
  predict_cmd->add_option("corpus", predict_input, "Corpus JSON to parse")->required();
  predict_cmd->add_option("--model,-m", predict_model, "Checkpoint path")->required();
  predict_cmd->add_option("--contextual", predict_ctx, "Contextual vector store");
  predict_cmd->add_option("--syntax", predict_syntax, "CoNLL-U trees (lemma/POS features)");
  predict_cmd->add_option("--graphs", predict_graphs, "Write predicted graph file here");
  predict_cmd->add_option("--decoded", predict_decoded, "Write decoded opinion JSON here");
  predict_cmd->add_option("--threads", predict_threads, "Worker threads")->default_val(1);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "Gold + predicted corpora -> metric report");
  SchemeFlags eval_scheme;
  std::string eval_gold, eval_pred, eval_syntax, eval_json, eval_subset;
  bool eval_polarity_only = false;
  int eval_threads = 1;
  add_scheme_flags(eval_cmd, eval_scheme);
  eval_cmd->add_option("gold", eval_gold, "Gold corpus JSON")->required();
  eval_cmd->add_option("pred", eval_pred, "Predicted corpus JSON")->required();
  eval_cmd->add_option("--syntax", eval_syntax, "CoNLL-U trees");
  eval_cmd->add_option("--json", eval_json, "Write the report as JSON here");
  eval_cmd->add_option("--subset", eval_subset, "Restrict to a subset: multi-target");
  eval_cmd->add_flag("--polarity-only", eval_polarity_only,
                     "Report the expression polarity-overlap F1 only");
  eval_cmd->add_option("--threads", eval_threads, "Worker threads")->default_val(1);

  // ---- stats ----
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_input, stats_json_out;
  stats_cmd->add_option("corpus", stats_input, "Corpus JSON")->required();
  stats_cmd->add_option("--json", stats_json_out, "Write statistics as JSON here");

  // ---- significance ----
  auto* sig_cmd =
      app.add_subcommand("significance", "Bootstrap test: is system A better than system B?");
  SchemeFlags sig_scheme;
  std::string sig_gold, sig_a, sig_b, sig_metric = "sf1", sig_syntax;
  std::uint64_t sig_iterations = 10000, sig_seed = 1;
  add_scheme_flags(sig_cmd, sig_scheme);
  sig_cmd->add_option("gold", sig_gold, "Gold corpus JSON")->required();
  sig_cmd->add_option("predA", sig_a, "System A predictions JSON")->required();
  sig_cmd->add_option("predB", sig_b, "System B predictions JSON")->required();
  sig_cmd
      ->add_option("--metric", sig_metric,
                   "holder|target|expression|targeted|uf1|lf1|nsf1|sf1|polarity")
      ->default_val("sf1");
  sig_cmd->add_option("--iterations", sig_iterations)->default_val(10000);
  sig_cmd->add_option("--seed", sig_seed)->default_val(1);
  sig_cmd->add_option("--syntax", sig_syntax, "CoNLL-U trees (for uf1/lf1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    // Every run logs its fully resolved configuration.
    for (const CLI::App* sub : app.get_subcommands())
      std::cerr << "# resolved configuration (" << sub->get_name() << ")\n"
                << sub->config_to_str(true, false);

    if (*encode_cmd) {
      const sg::EncodingScheme scheme = encode_scheme.build();
      sg::Corpus corpus = sg::load_opinion_json(encode_input);
      auto syntax = load_syntax_if(encode_syntax);
      if (!syntax.empty()) sg::attach_morphology(corpus, syntax);
      sg::LossReport loss;
      auto graphs = encode_corpus(corpus, scheme, syntax, &loss, encode_threads);
      sg::write_graph_file(sg::make_graph_corpus(corpus, std::move(graphs)), encode_output);
      std::cerr << "[encode] " << corpus.size() << " sentences, " << loss.count()
                << " lossy collision(s)\n";
      if (!encode_loss_out.empty()) {
        std::ostringstream os;
        for (const sg::LossCollision& c : loss.collisions)
          os << c.sent_id << "\t" << c.head << "\t" << c.dep << "\t" << c.kept.str() << "\t"
             << c.dropped.str() << "\n";
        write_text_file(encode_loss_out, os.str());
      }
      return kExitOk;
    }

    if (*decode_cmd) {
      const sg::EncodingScheme scheme = decode_scheme.build();
      const sg::GraphCorpus graphs = sg::read_graph_file(decode_input);
      std::map<std::string, const sg::AnnotatedSentence*> originals;
      sg::Corpus source;
      if (!decode_corpus.empty()) {
        source = sg::load_opinion_json(decode_corpus);
        for (const auto& s : source) originals[s.sentence.sent_id] = &s;
      }
      sg::Corpus out;
      int undecodable = 0;
      for (std::size_t i = 0; i < graphs.size(); ++i) {
        sg::AnnotatedSentence ann;
        auto it = originals.find(graphs.sent_ids[i]);
        if (it != originals.end()) {
          ann.sentence = it->second->sentence;
        } else {
          // No source corpus: rebuild text from the stored forms.
          sg::Sentence s;
          s.sent_id = graphs.sent_ids[i];
          for (const std::string& form : graphs.forms[i]) {
            sg::Token t;
            t.form = form;
            t.begin = s.text.size();
            t.end = s.text.size() + form.size();
            s.text += form + " ";
            s.tokens.push_back(t);
          }
          if (!s.text.empty()) s.text.pop_back();
          ann.sentence = std::move(s);
        }
        const sg::DecodeResult decoded = sg::decode_graph(graphs.graphs[i], scheme);
        undecodable += decoded.undecodable_arcs;
        ann.opinions = decoded.opinions;
        out.push_back(std::move(ann));
      }
      sg::write_opinion_json(out, decode_output);
      std::cerr << "[decode] " << out.size() << " sentences, " << undecodable
                << " undecodable arc(s)\n";
      return kExitOk;
    }

    if (*train_cmd) {
      const sg::EncodingScheme scheme = train_scheme.build();
      sg::Corpus train_corpus = sg::load_opinion_json(train_path);
      sg::Corpus dev_corpus = sg::load_opinion_json(dev_path);
      auto syntax = load_syntax_if(train_syntax);
      if (!syntax.empty()) {
        sg::attach_morphology(train_corpus, syntax);
        sg::attach_morphology(dev_corpus, syntax);
      }
      std::optional<sg::EmbeddingTable> embeddings;
      if (!train_embeddings.empty()) {
        embeddings = sg::load_embeddings(train_embeddings);
        hp.word_dim = embeddings->dim;
      }
      std::optional<sg::ContextualStore> ctx;
      if (!train_ctx.empty()) ctx = sg::load_contextual_store(train_ctx);
      if (hp.model_interpolation != 0.5 || hp.loss_interpolation != 0.025)
        std::cerr << "[train] interpolation constants accepted but unused by the joint "
                     "softmax scorer\n";

      const sg::TrainResult result =
          sg::train(train_corpus, dev_corpus, scheme, hp, embeddings ? &*embeddings : nullptr,
                    ctx ? &*ctx : nullptr, syntax.empty() ? nullptr : &syntax, &std::cerr);
      sg::save_checkpoint(result.model, train_out);
      std::cerr << "[train] best epoch " << result.best_epoch << ", checkpoint written to "
                << train_out << "\n";
      if (!history_out.empty()) {
        std::ostringstream os;
        os << "epoch,loss,dev_uf1,dev_lf1\n";
        for (std::size_t e = 0; e < result.history.size(); ++e)
          os << (e + 1) << "," << result.history[e].loss << "," << result.history[e].dev_uf1
             << "," << result.history[e].dev_lf1 << "\n";
        write_text_file(history_out, os.str());
      }
      return kExitOk;
    }

    if (*predict_cmd) {
      if (predict_graphs.empty() && predict_decoded.empty())
        throw sg::Error("predict needs --graphs and/or --decoded");
      const sg::Model model = sg::load_checkpoint(predict_model);
      sg::Corpus corpus = sg::load_opinion_json(predict_input);
      auto syntax = load_syntax_if(predict_syntax);
      if (!syntax.empty()) sg::attach_morphology(corpus, syntax);
      std::optional<sg::ContextualStore> ctx;
      if (!predict_ctx.empty()) ctx = sg::load_contextual_store(predict_ctx);

      std::vector<std::optional<sg::ParseGraph>> slots(corpus.size());
      parallel_for(corpus.size(), predict_threads, [&](std::size_t i) {
        const Eigen::MatrixXd* c = ctx ? &ctx->get(corpus[i].sentence.sent_id) : nullptr;
        slots[i] = sg::predict(model, corpus[i].sentence, c);
      });

      std::vector<sg::ParseGraph> predicted;
      predicted.reserve(slots.size());
      for (auto& slot : slots) predicted.push_back(std::move(*slot));
      if (!predict_graphs.empty())
        sg::write_graph_file(sg::make_graph_corpus(corpus, predicted), predict_graphs);
      if (!predict_decoded.empty()) {
        sg::Corpus decoded_corpus;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
          sg::AnnotatedSentence ann;
          ann.sentence = corpus[i].sentence;
          ann.opinions = sg::decode_graph(predicted[i], model.scheme()).opinions;
          decoded_corpus.push_back(std::move(ann));
        }
        sg::write_opinion_json(decoded_corpus, predict_decoded);
      }
      std::cerr << "[predict] " << corpus.size() << " sentences parsed\n";
      return kExitOk;
    }

    if (*eval_cmd) {
      const sg::EncodingScheme scheme = eval_scheme.build();
      sg::Corpus gold = sg::load_opinion_json(eval_gold);
      sg::Corpus pred = sg::load_opinion_json(eval_pred);
      auto syntax = load_syntax_if(eval_syntax);

      if (!eval_subset.empty()) {
        if (eval_subset != "multi-target")
          throw sg::Error("unsupported --subset '" + eval_subset + "' (try multi-target)");
        std::set<std::string> keep;
        for (const auto& s : sg::filter_multi_target(gold)) keep.insert(s.sentence.sent_id);
        gold = subset_by_ids(gold, keep);
        pred = subset_by_ids(pred, keep);
        std::cout << "subset.sentences = " << gold.size() << "\n";
        const sg::MacroPRF macro = sg::token_span_f1_macro(gold, pred, sg::Element::Target);
        std::cout << "subset.macro_target_f1 = " << macro.f1 << "\n";
      }
      if (eval_polarity_only) {
        const sg::PRF prf = sg::polarity_overlap_f1(gold, pred);
        std::cout << "polarity_overlap.precision = " << prf.precision() << "\n"
                  << "polarity_overlap.recall = " << prf.recall() << "\n"
                  << "polarity_overlap.f1 = " << prf.f1() << "\n";
        return kExitOk;
      }
      auto gg = encode_corpus(gold, scheme, syntax, nullptr, eval_threads);
      auto pg = encode_corpus(pred, scheme, syntax, nullptr, eval_threads);
      sg::MetricReport report;
      report.holder_f1 = sg::token_span_f1(gold, pred, sg::Element::Holder);
      report.target_f1 = sg::token_span_f1(gold, pred, sg::Element::Target);
      report.exp_f1 = sg::token_span_f1(gold, pred, sg::Element::Expression);
      report.targeted_f1 = sg::targeted_f1(gold, pred);
      report.uf1 = sg::arc_f1(gg, pg, false);
      report.lf1 = sg::arc_f1(gg, pg, true);
      report.nsf1 = sg::sentiment_graph_f1(gold, pred, false);
      report.sf1 = sg::sentiment_graph_f1(gold, pred, true);
      std::cout << sg::report_to_text(report);
      if (!eval_json.empty()) write_text_file(eval_json, sg::report_to_json(report));
      return kExitOk;
    }

    if (*stats_cmd) {
      const sg::Corpus corpus = sg::load_opinion_json(stats_input);
      const sg::StatsReport report = sg::dataset_stats(corpus);
      std::cout << stats_text(report);
      if (!stats_json_out.empty()) write_text_file(stats_json_out, stats_json(report));
      return kExitOk;
    }

    if (*sig_cmd) {
      const sg::EncodingScheme scheme = sig_scheme.build();
      const sg::Corpus gold = sg::load_opinion_json(sig_gold);
      const sg::Corpus pred_a = sg::load_opinion_json(sig_a);
      const sg::Corpus pred_b = sg::load_opinion_json(sig_b);
      auto syntax = load_syntax_if(sig_syntax);
      const std::string metric_name = sig_metric;
      const auto metric = [&](const sg::Corpus& g, const sg::Corpus& p) {
        return metric_by_name(metric_name, g, p, scheme, syntax);
      };
      const double observed_a = metric(gold, pred_a);
      const double observed_b = metric(gold, pred_b);
      const double p =
          sg::bootstrap_significance(metric, gold, pred_a, pred_b, sig_iterations, sig_seed);
      std::cout << "metric = " << metric_name << "\n"
                << "systemA = " << observed_a << "\n"
                << "systemB = " << observed_b << "\n"
                << "p_value = " << p << "\n";
      return kExitOk;
    }
  } catch (const sg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
