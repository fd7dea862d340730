#include "sentigraph/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace sentigraph {

using nn::Matrix;
using nn::Vector;

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

namespace {

std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

int lookup_or_unk(const std::unordered_map<std::string, int>& ids, const std::string& key) {
  auto it = ids.find(key);
  return it == ids.end() ? Vocabulary::kUnk : it->second;
}

void add_symbol(std::vector<std::string>& list, std::unordered_map<std::string, int>& ids,
                const std::string& symbol) {
  if (ids.emplace(symbol, static_cast<int>(list.size())).second) list.push_back(symbol);
}

}  // namespace

int Vocabulary::word_id(const std::string& form) const {
  auto it = word_ids.find(form);
  if (it != word_ids.end()) return it->second;
  it = word_ids.find(to_lower(form));
  return it == word_ids.end() ? kUnk : it->second;
}

int Vocabulary::lemma_id(const std::optional<std::string>& lemma) const {
  return lemma ? lookup_or_unk(lemma_ids, *lemma) : kUnk;
}

int Vocabulary::pos_id(const std::optional<std::string>& pos) const {
  return pos ? lookup_or_unk(pos_ids, *pos) : kUnk;
}

int Vocabulary::char_id(char c) const {
  return lookup_or_unk(char_ids, std::string(1, c));
}

int Vocabulary::label_id(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  throw Error("label '" + label + "' is not in the model inventory");
}

bool Vocabulary::root_eligible(int label) const {
  if (label == none_id()) return true;
  const std::string& name = labels[static_cast<std::size_t>(label)];
  return name.rfind("exp:", 0) == 0;
}

Vocabulary build_vocab(const Corpus& corpus, const EncodingScheme& scheme,
                       const EmbeddingTable* pretrained) {
  if (corpus.empty()) throw EmptyCorpusError("cannot build a vocabulary from an empty corpus");
  Vocabulary v;
  for (const char* reserved : {"<pad>", "<unk>"}) {
    add_symbol(v.words, v.word_ids, reserved);
    add_symbol(v.lemmas, v.lemma_ids, reserved);
    add_symbol(v.pos_tags, v.pos_ids, reserved);
    add_symbol(v.chars, v.char_ids, reserved);
  }
  if (pretrained) {
    for (const std::string& word : pretrained->words) add_symbol(v.words, v.word_ids, word);
  }
  for (const AnnotatedSentence& ann : corpus) {
    for (const Token& tok : ann.sentence.tokens) {
      add_symbol(v.words, v.word_ids, tok.form);
      if (tok.lemma) add_symbol(v.lemmas, v.lemma_ids, *tok.lemma);
      if (tok.pos) add_symbol(v.pos_tags, v.pos_ids, *tok.pos);
      for (char c : tok.form) add_symbol(v.chars, v.char_ids, std::string(1, c));
    }
  }
  v.labels = ArcLabel::inventory(scheme.inlabel);
  v.labels.push_back("NONE");
  return v;
}

// ---------------------------------------------------------------------------
// Hyperparams
// ---------------------------------------------------------------------------

void Hyperparams::validate() const {
  auto check_rate = [](double rate, const char* name) {
    if (rate < 0.0 || rate >= 1.0)
      throw Error(std::string("dropout rate ") + name + " must lie in [0, 1)");
  };
  check_rate(dropout_embedding, "embedding");
  check_rate(dropout_edge, "edge");
  check_rate(dropout_label, "label");
  check_rate(dropout_recurrent, "recurrent");
  check_rate(dropout_char_recurrent, "char recurrent");
  check_rate(dropout_main_ff, "main ff");
  check_rate(dropout_char_ff, "char ff");
  check_rate(dropout_char_linear, "char linear");
  for (int dim : {lstm_hidden, lstm_layers, mlp_dim, word_dim, pos_dim, lemma_dim, char_dim,
                  char_hidden, char_out})
    if (dim <= 0) throw Error("model dimensions must be positive");
  if (ctx_dim < 0) throw Error("ctx_dim must be non-negative");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (batch_size < 1) throw Error("batch size must be at least 1");
  if (learning_rate <= 0.0) throw Error("learning rate must be positive");
  if (none_weight < 0.0) throw Error("none_weight must be non-negative");
}

// ---------------------------------------------------------------------------
// Model modules
// ---------------------------------------------------------------------------

struct Model::Modules {
  int emb_word = -1, emb_pos = -1, emb_lemma = -1, emb_char = -1;
  nn::Lstm char_fwd, char_bwd;
  nn::Linear char_ff, char_lin;
  int root_input = -1;
  std::vector<nn::Lstm> fwd, bwd;
  nn::Linear fnn_head, fnn_dep;
  int scorer = -1;  // (mlp+1) × L·(mlp+1)
};

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

Model::Model(const Model& other)
    : vocab_(other.vocab_),
      hp_(other.hp_),
      scheme_(other.scheme_),
      word_frozen_(other.word_frozen_),
      params_(other.params_),
      modules_(std::make_unique<Modules>(*other.modules_)) {}

Model& Model::operator=(const Model& other) {
  if (this == &other) return *this;
  vocab_ = other.vocab_;
  hp_ = other.hp_;
  scheme_ = other.scheme_;
  word_frozen_ = other.word_frozen_;
  params_ = other.params_;
  modules_ = std::make_unique<Modules>(*other.modules_);
  return *this;
}

namespace {

void uniform_init(Matrix& m, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

Matrix reverse_cols(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c) = m.col(m.cols() - 1 - c);
  return out;
}

}  // namespace

Model::Model(Vocabulary vocab, Hyperparams hp, const EmbeddingTable* pretrained,
             EncodingScheme scheme)
    : vocab_(std::move(vocab)),
      hp_(hp),
      scheme_(std::move(scheme)),
      modules_(std::make_unique<Modules>()) {
  hp_.validate();
  scheme_.validate();
  if (pretrained && pretrained->dim != hp_.word_dim)
    throw DimensionMismatchError("pretrained embeddings have dim " +
                                 std::to_string(pretrained->dim) + ", expected " +
                                 std::to_string(hp_.word_dim));

  Modules& m = *modules_;
  m.emb_word = params_.add("emb.word", static_cast<Eigen::Index>(vocab_.words.size()),
                           hp_.word_dim);
  m.emb_pos = params_.add("emb.pos", static_cast<Eigen::Index>(vocab_.pos_tags.size()),
                          hp_.pos_dim);
  m.emb_lemma = params_.add("emb.lemma", static_cast<Eigen::Index>(vocab_.lemmas.size()),
                            hp_.lemma_dim);
  m.emb_char = params_.add("emb.char", static_cast<Eigen::Index>(vocab_.chars.size()),
                           hp_.char_dim);
  m.char_fwd = nn::Lstm(params_, "char.fwd", hp_.char_dim, hp_.char_hidden);
  m.char_bwd = nn::Lstm(params_, "char.bwd", hp_.char_dim, hp_.char_hidden);
  m.char_ff = nn::Linear(params_, "char.ff", 2 * hp_.char_hidden, hp_.char_out);
  m.char_lin = nn::Linear(params_, "char.lin", hp_.char_out, hp_.char_out);
  m.root_input = params_.add("root", hp_.input_dim(), 1);
  for (int layer = 0; layer < hp_.lstm_layers; ++layer) {
    const int in = layer == 0 ? hp_.input_dim() : 2 * hp_.lstm_hidden;
    const std::string prefix = "lstm." + std::to_string(layer);
    m.fwd.emplace_back(params_, prefix + ".fwd", in, hp_.lstm_hidden);
    m.bwd.emplace_back(params_, prefix + ".bwd", in, hp_.lstm_hidden);
  }
  m.fnn_head = nn::Linear(params_, "fnn.head", 2 * hp_.lstm_hidden, hp_.mlp_dim);
  m.fnn_dep = nn::Linear(params_, "fnn.dep", 2 * hp_.lstm_hidden, hp_.mlp_dim);
  m.scorer = params_.add(
      "scorer.U", hp_.mlp_dim + 1,
      static_cast<Eigen::Index>(vocab_.num_labels()) * (hp_.mlp_dim + 1));

  // Deterministic initialization in creation order.
  std::mt19937_64 rng(hp_.seed);
  for (nn::Tensor& t : params_.tensors()) {
    if (t.name.size() > 2 && t.name.substr(t.name.size() - 2) == ".b") continue;  // biases zero
    if (t.name.rfind("emb.", 0) == 0) {
      uniform_init(t.value, std::sqrt(3.0 / static_cast<double>(t.value.cols())), rng);
      t.value.row(Vocabulary::kPad).setZero();
    } else {
      nn::xavier_init(t.value, rng);
    }
  }

  if (pretrained) {
    nn::Tensor& words = params_.at(m.emb_word);
    words.value.setZero();  // forms outside the table stay at zero, frozen
    for (std::size_t i = 0; i < vocab_.words.size(); ++i) {
      const std::vector<double>* vec = pretrained->lookup(vocab_.words[i]);
      if (!vec) continue;
      for (int d = 0; d < hp_.word_dim; ++d)
        words.value(static_cast<Eigen::Index>(i), d) = (*vec)[static_cast<std::size_t>(d)];
    }
    words.trainable = false;
    word_frozen_ = true;
  }
}

void Model::set_word_frozen(bool frozen) {
  word_frozen_ = frozen;
  params_.at(modules_->emb_word).trainable = !frozen;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

ScoreTensor Model::forward_scores(const Sentence& sentence, const Eigen::MatrixXd* ctx,
                                  bool train_mode, std::mt19937_64* rng,
                                  Trace* trace) const {
  const int n = static_cast<int>(sentence.size());
  if (hp_.ctx_dim > 0) {
    if (ctx == nullptr)
      throw DimensionMismatchError("model expects contextual vectors for sentence '" +
                                   sentence.sent_id + "'");
    if (ctx->rows() != n || ctx->cols() != hp_.ctx_dim)
      throw DimensionMismatchError(
          "contextual matrix for '" + sentence.sent_id + "' is " + std::to_string(ctx->rows()) +
          "x" + std::to_string(ctx->cols()) + ", expected " + std::to_string(n) + "x" +
          std::to_string(hp_.ctx_dim));
  } else if (ctx != nullptr) {
    throw DimensionMismatchError("model was trained without contextual vectors");
  }
  if (train_mode && rng == nullptr) throw Error("train mode needs a dropout RNG");
  std::mt19937_64 unused_rng;
  std::mt19937_64& R = rng ? *rng : unused_rng;

  Trace local;
  Trace& tr = trace ? *trace : local;
  tr = Trace{};
  tr.n = n;
  tr.char_traces.resize(static_cast<std::size_t>(n));

  const Modules& m = *modules_;
  const Matrix& word_table = params_.at(m.emb_word).value;
  const Matrix& pos_table = params_.at(m.emb_pos).value;
  const Matrix& lemma_table = params_.at(m.emb_lemma).value;
  const Matrix& char_table = params_.at(m.emb_char).value;

  Matrix X(hp_.input_dim(), n + 1);
  X.col(0) = params_.at(m.root_input).value.col(0);

  for (int i = 0; i < n; ++i) {
    const Token& tok = sentence.tokens[static_cast<std::size_t>(i)];
    tr.word_ids.push_back(vocab_.word_id(tok.form));
    tr.pos_ids.push_back(vocab_.pos_id(tok.pos));
    tr.lemma_ids.push_back(vocab_.lemma_id(tok.lemma));

    // Character BiLSTM over the surface form (bytes as units).
    std::vector<int> cids;
    for (char c : tok.form) cids.push_back(vocab_.char_id(c));
    if (cids.empty()) cids.push_back(Vocabulary::kUnk);
    tr.char_ids.push_back(cids);

    Trace::CharTrace& ct = tr.char_traces[static_cast<std::size_t>(i)];
    const Eigen::Index T = static_cast<Eigen::Index>(cids.size());
    ct.emb.resize(hp_.char_dim, T);
    for (Eigen::Index t = 0; t < T; ++t)
      ct.emb.col(t) = char_table.row(cids[static_cast<std::size_t>(t)]).transpose();

    const Matrix hf = m.char_fwd.forward(params_, ct.emb, ct.fwd);
    const Matrix hb = m.char_bwd.forward(params_, reverse_cols(ct.emb), ct.bwd);
    Matrix u(2 * hp_.char_hidden, 1);
    u.topRows(hp_.char_hidden) = hf.col(T - 1);
    u.bottomRows(hp_.char_hidden) = hb.col(T - 1);
    const Matrix u_drop =
        nn::dropout_forward(u, hp_.dropout_char_recurrent, train_mode, R, ct.rec_drop);
    ct.ff_act = m.char_ff.forward(params_, u_drop, ct.ff).array().tanh();
    const Matrix a_drop =
        nn::dropout_forward(ct.ff_act, hp_.dropout_char_ff, train_mode, R, ct.ff_drop);
    const Matrix v = m.char_lin.forward(params_, a_drop, ct.lin);
    const Matrix v_drop =
        nn::dropout_forward(v, hp_.dropout_char_linear, train_mode, R, ct.lin_drop);

    Eigen::Index row = 0;
    X.col(i + 1).segment(row, hp_.word_dim) =
        word_table.row(tr.word_ids.back()).transpose();
    row += hp_.word_dim;
    X.col(i + 1).segment(row, hp_.pos_dim) = pos_table.row(tr.pos_ids.back()).transpose();
    row += hp_.pos_dim;
    X.col(i + 1).segment(row, hp_.lemma_dim) =
        lemma_table.row(tr.lemma_ids.back()).transpose();
    row += hp_.lemma_dim;
    X.col(i + 1).segment(row, hp_.char_out) = v_drop.col(0);
    row += hp_.char_out;
    if (hp_.ctx_dim > 0) X.col(i + 1).segment(row, hp_.ctx_dim) = ctx->row(i).transpose();
  }

  Matrix cur = nn::dropout_forward(X, hp_.dropout_embedding, train_mode, R, tr.emb_drop);

  tr.layer_fwd.resize(static_cast<std::size_t>(hp_.lstm_layers));
  tr.layer_bwd.resize(static_cast<std::size_t>(hp_.lstm_layers));
  tr.layer_drop.resize(static_cast<std::size_t>(hp_.lstm_layers));
  for (int layer = 0; layer < hp_.lstm_layers; ++layer) {
    const Matrix hf = m.fwd[static_cast<std::size_t>(layer)].forward(
        params_, cur, tr.layer_fwd[static_cast<std::size_t>(layer)]);
    const Matrix hb = m.bwd[static_cast<std::size_t>(layer)].forward(
        params_, reverse_cols(cur), tr.layer_bwd[static_cast<std::size_t>(layer)]);
    Matrix out(2 * hp_.lstm_hidden, n + 1);
    out.topRows(hp_.lstm_hidden) = hf;
    out.bottomRows(hp_.lstm_hidden) = reverse_cols(hb);
    if (layer + 1 < hp_.lstm_layers)
      out = nn::dropout_forward(out, hp_.dropout_recurrent, train_mode, R,
                                tr.layer_drop[static_cast<std::size_t>(layer)]);
    cur = std::move(out);
  }
  tr.encoder_out = cur;

  tr.head_act = m.fnn_head.forward(params_, cur, tr.head_lin).array().tanh();
  Matrix head = nn::dropout_forward(tr.head_act, hp_.dropout_main_ff, train_mode, R,
                                    tr.head_ff_drop);
  head = nn::dropout_forward(head, hp_.dropout_edge, train_mode, R, tr.edge_drop);

  const Matrix dep_in = cur.rightCols(n);
  tr.dep_act = m.fnn_dep.forward(params_, dep_in, tr.dep_lin).array().tanh();
  Matrix dep = nn::dropout_forward(tr.dep_act, hp_.dropout_main_ff, train_mode, R,
                                   tr.dep_ff_drop);
  dep = nn::dropout_forward(dep, hp_.dropout_label, train_mode, R, tr.label_drop);

  tr.head_aug.resize(hp_.mlp_dim + 1, n + 1);
  tr.head_aug.topRows(hp_.mlp_dim) = head;
  tr.head_aug.row(hp_.mlp_dim).setOnes();
  tr.dep_aug.resize(hp_.mlp_dim + 1, n);
  tr.dep_aug.topRows(hp_.mlp_dim) = dep;
  tr.dep_aug.row(hp_.mlp_dim).setOnes();

  const int L = vocab_.num_labels();
  ScoreTensor scores(n, L);
  const Matrix& U = params_.at(m.scorer).value;
  const Eigen::Index slice = hp_.mlp_dim + 1;
  for (int l = 0; l < L; ++l) {
    const Matrix S =
        tr.head_aug.transpose() * U.block(0, l * slice, slice, slice) * tr.dep_aug;
    for (int h = 0; h <= n; ++h)
      for (int d = 1; d <= n; ++d) scores.at(h, d, l) = S(h, d - 1);
  }
  // Self arcs are never scored: force NONE.
  for (int d = 1; d <= n; ++d)
    for (int l = 0; l < L; ++l) scores.at(d, d, l) = l == vocab_.none_id() ? 0.0 : -1e30;
  return scores;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void Model::backward(const Trace& tr, const ScoreTensor& d_scores) {
  const int n = tr.n;
  const int L = vocab_.num_labels();
  const Eigen::Index slice = hp_.mlp_dim + 1;
  Modules& m = *modules_;

  Matrix d_head_aug = Matrix::Zero(slice, n + 1);
  Matrix d_dep_aug = Matrix::Zero(slice, n);
  const Matrix& U = params_.at(m.scorer).value;
  Matrix& gU = params_.at(m.scorer).grad;

  Matrix dS(n + 1, n);
  for (int l = 0; l < L; ++l) {
    for (int h = 0; h <= n; ++h)
      for (int d = 1; d <= n; ++d) dS(h, d - 1) = h == d ? 0.0 : d_scores.at(h, d, l);
    const auto Ul = U.block(0, l * slice, slice, slice);
    gU.block(0, l * slice, slice, slice) += tr.head_aug * dS * tr.dep_aug.transpose();
    d_head_aug += Ul * tr.dep_aug * dS.transpose();
    d_dep_aug += Ul.transpose() * tr.head_aug * dS;
  }

  Matrix d_head = nn::dropout_backward(tr.edge_drop, d_head_aug.topRows(hp_.mlp_dim));
  d_head = nn::dropout_backward(tr.head_ff_drop, d_head);
  d_head = d_head.cwiseProduct((1.0 - tr.head_act.array().square()).matrix());
  Matrix dC = m.fnn_head.backward(params_, tr.head_lin, d_head);

  Matrix d_dep = nn::dropout_backward(tr.label_drop, d_dep_aug.topRows(hp_.mlp_dim));
  d_dep = nn::dropout_backward(tr.dep_ff_drop, d_dep);
  d_dep = d_dep.cwiseProduct((1.0 - tr.dep_act.array().square()).matrix());
  dC.rightCols(n) += m.fnn_dep.backward(params_, tr.dep_lin, d_dep);

  // Encoder stack, top layer first.
  Matrix d_cur = dC;
  for (int layer = hp_.lstm_layers - 1; layer >= 0; --layer) {
    const Matrix d_hf = d_cur.topRows(hp_.lstm_hidden);
    const Matrix d_hb = reverse_cols(d_cur.bottomRows(hp_.lstm_hidden));
    Matrix d_in = m.fwd[static_cast<std::size_t>(layer)].backward(
        params_, tr.layer_fwd[static_cast<std::size_t>(layer)], d_hf);
    d_in += reverse_cols(m.bwd[static_cast<std::size_t>(layer)].backward(
        params_, tr.layer_bwd[static_cast<std::size_t>(layer)], d_hb));
    if (layer > 0)
      d_cur = nn::dropout_backward(tr.layer_drop[static_cast<std::size_t>(layer - 1)], d_in);
    else
      d_cur = std::move(d_in);
  }
  const Matrix dX = nn::dropout_backward(tr.emb_drop, d_cur);

  params_.at(m.root_input).grad.col(0) += dX.col(0);

  nn::Tensor& word_emb = params_.at(m.emb_word);
  nn::Tensor& pos_emb = params_.at(m.emb_pos);
  nn::Tensor& lemma_emb = params_.at(m.emb_lemma);
  nn::Tensor& char_emb = params_.at(m.emb_char);

  for (int i = 0; i < n; ++i) {
    const auto col = dX.col(i + 1);
    Eigen::Index row = 0;
    if (word_emb.trainable)
      word_emb.grad.row(tr.word_ids[static_cast<std::size_t>(i)]) +=
          col.segment(row, hp_.word_dim).transpose();
    row += hp_.word_dim;
    pos_emb.grad.row(tr.pos_ids[static_cast<std::size_t>(i)]) +=
        col.segment(row, hp_.pos_dim).transpose();
    row += hp_.pos_dim;
    lemma_emb.grad.row(tr.lemma_ids[static_cast<std::size_t>(i)]) +=
        col.segment(row, hp_.lemma_dim).transpose();
    row += hp_.lemma_dim;

    const Trace::CharTrace& ct = tr.char_traces[static_cast<std::size_t>(i)];
    Matrix dv_drop = col.segment(row, hp_.char_out);
    const Matrix dv = nn::dropout_backward(ct.lin_drop, dv_drop);
    Matrix da = nn::dropout_backward(ct.ff_drop, m.char_lin.backward(params_, ct.lin, dv));
    da = da.cwiseProduct((1.0 - ct.ff_act.array().square()).matrix());
    const Matrix du_drop = m.char_ff.backward(params_, ct.ff, da);
    const Matrix du = nn::dropout_backward(ct.rec_drop, du_drop);

    const Eigen::Index T = ct.emb.cols();
    Matrix d_hf = Matrix::Zero(hp_.char_hidden, T);
    Matrix d_hb = Matrix::Zero(hp_.char_hidden, T);
    d_hf.col(T - 1) = du.col(0).topRows(hp_.char_hidden);
    d_hb.col(T - 1) = du.col(0).bottomRows(hp_.char_hidden);
    Matrix d_emb = m.char_fwd.backward(params_, ct.fwd, d_hf);
    d_emb += reverse_cols(m.char_bwd.backward(params_, ct.bwd, d_hb));
    const auto& cids = tr.char_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index t = 0; t < T; ++t)
      char_emb.grad.row(cids[static_cast<std::size_t>(t)]) += d_emb.col(t).transpose();
  }
}

// ---------------------------------------------------------------------------
// Loss and prediction
// ---------------------------------------------------------------------------

std::pair<double, ScoreTensor> softmax_loss(const ScoreTensor& scores, const ParseGraph& gold,
                                            const Vocabulary& vocab, double none_weight) {
  if (gold.n() != scores.n)
    throw LengthMismatchError("gold graph has " + std::to_string(gold.n()) +
                              " tokens, scores have " + std::to_string(scores.n));
  const int n = scores.n;
  const int L = scores.num_labels;
  const int none = vocab.none_id();

  std::map<std::pair<int, int>, int> gold_cells;
  for (const Arc& arc : gold.arcs())
    gold_cells[{arc.head, arc.dep}] = vocab.label_id(arc.label.str());

  ScoreTensor grad(n, L);
  double loss = 0.0;
  long cells = 0;
  std::vector<double> probs(static_cast<std::size_t>(L));

  for (int h = 0; h <= n; ++h) {
    for (int d = 1; d <= n; ++d) {
      if (h == d) continue;  // masked self cell
      ++cells;
      auto it = gold_cells.find({h, d});
      const int gold_label = it == gold_cells.end() ? none : it->second;
      const double w = gold_label == none ? none_weight : 1.0;

      double mx = scores.at(h, d, 0);
      for (int l = 1; l < L; ++l) mx = std::max(mx, scores.at(h, d, l));
      double sum = 0.0;
      for (int l = 0; l < L; ++l) {
        probs[static_cast<std::size_t>(l)] = std::exp(scores.at(h, d, l) - mx);
        sum += probs[static_cast<std::size_t>(l)];
      }
      loss += w * (std::log(sum) - (scores.at(h, d, gold_label) - mx));
      for (int l = 0; l < L; ++l) {
        const double p = probs[static_cast<std::size_t>(l)] / sum;
        grad.at(h, d, l) = w * (p - (l == gold_label ? 1.0 : 0.0));
      }
    }
  }
  if (cells == 0) return {0.0, grad};
  loss /= static_cast<double>(cells);
  for (double& g : grad.data) g /= static_cast<double>(cells);
  return {loss, grad};
}

ParseGraph graph_from_scores(const ScoreTensor& scores, const Vocabulary& vocab) {
  ParseGraph graph(scores.n);
  const int none = vocab.none_id();
  for (int h = 0; h <= scores.n; ++h) {
    for (int d = 1; d <= scores.n; ++d) {
      if (h == d) continue;
      int best = -1;
      double best_score = 0.0;
      for (int l = 0; l < scores.num_labels; ++l) {
        if (h == kRootIndex && !vocab.root_eligible(l)) continue;
        const double s = scores.at(h, d, l);
        if (best < 0 || s > best_score) {
          best = l;
          best_score = s;
        }
      }
      if (best >= 0 && best != none)
        graph.add({h, d, ArcLabel::parse(vocab.labels[static_cast<std::size_t>(best)])});
    }
  }
  return graph;
}

ParseGraph predict(const Model& model, const Sentence& sentence, const Eigen::MatrixXd* ctx) {
  return graph_from_scores(model.score(sentence, ctx), model.vocab());
}

// ---------------------------------------------------------------------------
// Restore
// ---------------------------------------------------------------------------

Model restore_model(Vocabulary vocab, Hyperparams hp, EncodingScheme scheme,
                    bool word_frozen, nn::ParamStore params) {
  Model model(std::move(vocab), hp, nullptr, std::move(scheme));
  for (const nn::Tensor& stored : params.tensors()) {
    const int idx = model.params().find(stored.name);
    if (idx < 0) throw ParseError("checkpoint tensor '" + stored.name + "' has no slot");
    nn::Tensor& live = model.params().at(idx);
    if (live.value.rows() != stored.value.rows() || live.value.cols() != stored.value.cols())
      throw ParseError("checkpoint tensor '" + stored.name + "' has unexpected shape");
    live.value = stored.value;
  }
  model.set_word_frozen(word_frozen);
  return model;
}

}  // namespace sentigraph
