#ifndef SENTIGRAPH_MODEL_HPP
#define SENTIGRAPH_MODEL_HPP

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sentigraph/codec.hpp"
#include "sentigraph/io.hpp"
#include "sentigraph/nn.hpp"
#include "sentigraph/types.hpp"

namespace sentigraph {

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> words, lemmas, pos_tags, chars;
  std::unordered_map<std::string, int> word_ids, lemma_ids, pos_ids, char_ids;
  std::vector<std::string> labels;  // closed inventory; NONE always last

  int word_id(const std::string& form) const;
  int lemma_id(const std::optional<std::string>& lemma) const;
  int pos_id(const std::optional<std::string>& pos) const;
  int char_id(char c) const;
  int label_id(const std::string& label) const;

  int none_id() const { return static_cast<int>(labels.size()) - 1; }
  int num_labels() const { return static_cast<int>(labels.size()); }
  bool root_eligible(int label) const;  // plain exp:* or NONE
};

/// Word ids cover the pretrained table plus the training corpus; unseen
/// forms fall back to UNK at run time. The label inventory comes from the
/// scheme alone so checkpoints share one layout across datasets.
Vocabulary build_vocab(const Corpus& corpus, const EncodingScheme& scheme,
                       const EmbeddingTable* pretrained = nullptr);

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

struct Hyperparams {
  int epochs = 100;
  int batch_size = 50;
  double learning_rate = 2e-3;
  double beta1 = 0.0;
  double beta2 = 0.95;
  double l2 = 3e-9;
  int lstm_hidden = 200;
  int lstm_layers = 3;
  int mlp_dim = 200;
  int word_dim = 100;
  int pos_dim = 25;
  int lemma_dim = 25;
  int char_dim = 80;
  int char_hidden = 100;
  int char_out = 100;
  int ctx_dim = 0;  // 0 = no contextual vectors
  double dropout_embedding = 0.2;
  double dropout_edge = 0.2;
  double dropout_label = 0.3;
  double dropout_recurrent = 0.2;
  double dropout_char_recurrent = 0.3;
  double dropout_main_ff = 0.4;
  double dropout_char_ff = 0.3;
  double dropout_char_linear = 0.3;
  double none_weight = 1.0;
  // Accepted for config compatibility with the ancestor parser's dual-head
  // loss; the joint softmax head here does not consume them.
  double model_interpolation = 0.5;
  double loss_interpolation = 0.025;
  std::uint64_t seed = 12345;

  void validate() const;
  int input_dim() const { return word_dim + pos_dim + lemma_dim + char_out + ctx_dim; }
};

// ---------------------------------------------------------------------------
// Score tensor
// ---------------------------------------------------------------------------

/// Raw scores over (heads incl. ROOT) × dependents × labels. Heads run
/// 0..n with 0 = ROOT; dependents are 1-based tokens. Self cells (head ==
/// dep in token space) are masked so NONE always wins there.
struct ScoreTensor {
  int n = 0;
  int num_labels = 0;
  std::vector<double> data;

  ScoreTensor() = default;
  ScoreTensor(int n_, int labels_)
      : n(n_), num_labels(labels_),
        data(static_cast<std::size_t>(n_ + 1) * static_cast<std::size_t>(n_) *
                 static_cast<std::size_t>(labels_),
             0.0) {}

  double& at(int head, int dep, int label) {
    return data[index(head, dep, label)];
  }
  double at(int head, int dep, int label) const {
    return data[index(head, dep, label)];
  }
  bool self_cell(int head, int dep) const { return head == dep; }

 private:
  std::size_t index(int head, int dep, int label) const {
    return (static_cast<std::size_t>(head) * static_cast<std::size_t>(n) +
            static_cast<std::size_t>(dep - 1)) *
               static_cast<std::size_t>(num_labels) +
           static_cast<std::size_t>(label);
  }
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// BiLSTM encoder with head/dependent feed-forward specialization and a
/// joint biaffine arc-label scorer; all gradients are hand-derived.
class Model {
 public:
  struct Trace;

  Model(Vocabulary vocab, Hyperparams hp, const EmbeddingTable* pretrained,
        EncodingScheme scheme);

  const Vocabulary& vocab() const { return vocab_; }
  const Hyperparams& hyper() const { return hp_; }
  const EncodingScheme& scheme() const { return scheme_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  bool word_frozen() const { return word_frozen_; }
  void set_word_frozen(bool frozen);

  /// Scores every head/dependent/label combination. In train mode dropout
  /// is applied from `rng` (required) and `trace`, when given, collects the
  /// activations needed by backward().
  ScoreTensor forward_scores(const Sentence& sentence, const Eigen::MatrixXd* ctx,
                             bool train_mode, std::mt19937_64* rng = nullptr,
                             Trace* trace = nullptr) const;

  /// Inference-mode convenience.
  ScoreTensor score(const Sentence& sentence, const Eigen::MatrixXd* ctx = nullptr) const {
    return forward_scores(sentence, ctx, /*train_mode=*/false);
  }

  /// Accumulates parameter gradients for d(loss)/d(scores).
  void backward(const Trace& trace, const ScoreTensor& d_scores);

  ~Model();
  Model(const Model&);
  Model& operator=(const Model&);
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

 private:
  struct Modules;

  Vocabulary vocab_;
  Hyperparams hp_;
  EncodingScheme scheme_;
  bool word_frozen_ = false;
  nn::ParamStore params_;
  std::unique_ptr<Modules> modules_;

  friend Model restore_model(Vocabulary, Hyperparams, EncodingScheme, bool,
                             nn::ParamStore);
};

/// Rebuilds a model around previously trained tensors (checkpoint loading).
Model restore_model(Vocabulary vocab, Hyperparams hp, EncodingScheme scheme,
                    bool word_frozen, nn::ParamStore params);

/// Everything backward() needs to replay the forward pass: token ids, layer
/// traces and the dropout masks that were drawn.
struct Model::Trace {
  int n = 0;
  std::vector<int> word_ids, pos_ids, lemma_ids;
  std::vector<std::vector<int>> char_ids;

  struct CharTrace {
    Eigen::MatrixXd emb;
    nn::LstmTrace fwd, bwd;  // bwd ran over the reversed character sequence
    nn::DropoutTrace rec_drop;
    nn::LinearTrace ff;
    Eigen::MatrixXd ff_act;
    nn::DropoutTrace ff_drop;
    nn::LinearTrace lin;
    nn::DropoutTrace lin_drop;
  };
  std::vector<CharTrace> char_traces;

  nn::DropoutTrace emb_drop;
  std::vector<nn::LstmTrace> layer_fwd, layer_bwd;
  std::vector<nn::DropoutTrace> layer_drop;  // between stacked layers
  Eigen::MatrixXd encoder_out;               // 2·hidden × (n+1)

  nn::LinearTrace head_lin, dep_lin;
  Eigen::MatrixXd head_act, dep_act;
  nn::DropoutTrace head_ff_drop, dep_ff_drop, edge_drop, label_drop;
  Eigen::MatrixXd head_aug, dep_aug;  // constant-1 coordinate appended
};

// ---------------------------------------------------------------------------
// Loss and prediction
// ---------------------------------------------------------------------------

/// Per-cell softmax over labels ∪ NONE with cross-entropy against the gold
/// arc labels; NONE-gold cells are reweighted by none_weight and the loss is
/// the mean over all non-self cells. Returns the loss and d(loss)/d(scores).
std::pair<double, ScoreTensor> softmax_loss(const ScoreTensor& scores, const ParseGraph& gold,
                                            const Vocabulary& vocab, double none_weight);

/// Per-cell argmax filter: an arc is emitted wherever the best label is not
/// NONE. The ROOT head row only considers plain exp:* labels, keeping the
/// output a valid ParseGraph by construction.
ParseGraph graph_from_scores(const ScoreTensor& scores, const Vocabulary& vocab);

ParseGraph predict(const Model& model, const Sentence& sentence,
                   const Eigen::MatrixXd* ctx = nullptr);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochStats {
  double loss = 0.0;
  double dev_uf1 = 0.0;
  double dev_lf1 = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
  int best_epoch = 0;  // 1-based; 0 when no epochs ran
};

/// Adam over shuffled mini-batches; after every epoch dev LF1 is computed
/// and the best-scoring checkpoint (earliest on ties) is returned.
/// Single-threaded and bit-reproducible for a fixed seed.
TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus,
                  const EncodingScheme& scheme, const Hyperparams& hp,
                  const EmbeddingTable* pretrained = nullptr,
                  const ContextualStore* ctx = nullptr,
                  const std::map<std::string, SynTree>* syntax = nullptr,
                  std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace sentigraph

#endif  // SENTIGRAPH_MODEL_HPP
