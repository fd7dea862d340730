#include <cstdint>
#include <fstream>

#include "sentigraph/model.hpp"

namespace sentigraph {

namespace {

constexpr char kMagic[] = "SGCKPT\t1\n";

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_str_list(std::ostream& out, const std::vector<std::string>& list) {
  write_u64(out, list.size());
  for (const std::string& s : list) write_str(out, s);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw ParseError("truncated checkpoint");
  return v;
}

std::int64_t read_i64(std::istream& in) {
  std::int64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw ParseError("truncated checkpoint");
  return v;
}

double read_f64(std::istream& in) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw ParseError("truncated checkpoint");
  return v;
}

std::string read_str(std::istream& in) {
  const std::uint64_t len = read_u64(in);
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), static_cast<std::streamsize>(len)))
    throw ParseError("truncated checkpoint string");
  return s;
}

std::vector<std::string> read_str_list(std::istream& in) {
  const std::uint64_t count = read_u64(in);
  std::vector<std::string> list;
  list.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) list.push_back(read_str(in));
  return list;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic) - 1);

  const Vocabulary& v = model.vocab();
  write_str_list(out, v.words);
  write_str_list(out, v.lemmas);
  write_str_list(out, v.pos_tags);
  write_str_list(out, v.chars);
  write_str_list(out, v.labels);

  const Hyperparams& hp = model.hyper();
  write_i64(out, hp.epochs);
  write_i64(out, hp.batch_size);
  write_f64(out, hp.learning_rate);
  write_f64(out, hp.beta1);
  write_f64(out, hp.beta2);
  write_f64(out, hp.l2);
  write_i64(out, hp.lstm_hidden);
  write_i64(out, hp.lstm_layers);
  write_i64(out, hp.mlp_dim);
  write_i64(out, hp.word_dim);
  write_i64(out, hp.pos_dim);
  write_i64(out, hp.lemma_dim);
  write_i64(out, hp.char_dim);
  write_i64(out, hp.char_hidden);
  write_i64(out, hp.char_out);
  write_i64(out, hp.ctx_dim);
  write_f64(out, hp.dropout_embedding);
  write_f64(out, hp.dropout_edge);
  write_f64(out, hp.dropout_label);
  write_f64(out, hp.dropout_recurrent);
  write_f64(out, hp.dropout_char_recurrent);
  write_f64(out, hp.dropout_main_ff);
  write_f64(out, hp.dropout_char_ff);
  write_f64(out, hp.dropout_char_linear);
  write_f64(out, hp.none_weight);
  write_f64(out, hp.model_interpolation);
  write_f64(out, hp.loss_interpolation);
  write_u64(out, hp.seed);

  const EncodingScheme& scheme = model.scheme();
  write_i64(out, static_cast<std::int64_t>(scheme.head_rule));
  write_u64(out, scheme.inlabel ? 1 : 0);
  write_str_list(out, {scheme.banned_relations.begin(), scheme.banned_relations.end()});
  write_u64(out, model.word_frozen() ? 1 : 0);

  write_u64(out, model.params().size());
  for (const nn::Tensor& t : model.params().tensors()) {
    write_str(out, t.name);
    write_i64(out, t.value.rows());
    write_i64(out, t.value.cols());
    write_u64(out, t.trainable ? 1 : 0);
    for (Eigen::Index c = 0; c < t.value.cols(); ++c)
      for (Eigen::Index r = 0; r < t.value.rows(); ++r) write_f64(out, t.value(r, c));
  }
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  std::string magic(sizeof(kMagic) - 1, '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kMagic)
    throw ParseError(path + ": not a sentigraph checkpoint");

  Vocabulary v;
  v.words = read_str_list(in);
  v.lemmas = read_str_list(in);
  v.pos_tags = read_str_list(in);
  v.chars = read_str_list(in);
  v.labels = read_str_list(in);
  auto rebuild = [](const std::vector<std::string>& list,
                    std::unordered_map<std::string, int>& ids) {
    for (std::size_t i = 0; i < list.size(); ++i) ids[list[i]] = static_cast<int>(i);
  };
  rebuild(v.words, v.word_ids);
  rebuild(v.lemmas, v.lemma_ids);
  rebuild(v.pos_tags, v.pos_ids);
  rebuild(v.chars, v.char_ids);

  Hyperparams hp;
  hp.epochs = static_cast<int>(read_i64(in));
  hp.batch_size = static_cast<int>(read_i64(in));
  hp.learning_rate = read_f64(in);
  hp.beta1 = read_f64(in);
  hp.beta2 = read_f64(in);
  hp.l2 = read_f64(in);
  hp.lstm_hidden = static_cast<int>(read_i64(in));
  hp.lstm_layers = static_cast<int>(read_i64(in));
  hp.mlp_dim = static_cast<int>(read_i64(in));
  hp.word_dim = static_cast<int>(read_i64(in));
  hp.pos_dim = static_cast<int>(read_i64(in));
  hp.lemma_dim = static_cast<int>(read_i64(in));
  hp.char_dim = static_cast<int>(read_i64(in));
  hp.char_hidden = static_cast<int>(read_i64(in));
  hp.char_out = static_cast<int>(read_i64(in));
  hp.ctx_dim = static_cast<int>(read_i64(in));
  hp.dropout_embedding = read_f64(in);
  hp.dropout_edge = read_f64(in);
  hp.dropout_label = read_f64(in);
  hp.dropout_recurrent = read_f64(in);
  hp.dropout_char_recurrent = read_f64(in);
  hp.dropout_main_ff = read_f64(in);
  hp.dropout_char_ff = read_f64(in);
  hp.dropout_char_linear = read_f64(in);
  hp.none_weight = read_f64(in);
  hp.model_interpolation = read_f64(in);
  hp.loss_interpolation = read_f64(in);
  hp.seed = read_u64(in);

  EncodingScheme scheme;
  scheme.head_rule = static_cast<HeadRule>(read_i64(in));
  scheme.inlabel = read_u64(in) != 0;
  for (const std::string& rel : read_str_list(in)) scheme.banned_relations.insert(rel);
  const bool word_frozen = read_u64(in) != 0;

  nn::ParamStore params;
  const std::uint64_t count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_str(in);
    const Eigen::Index rows = read_i64(in);
    const Eigen::Index cols = read_i64(in);
    const bool trainable = read_u64(in) != 0;
    const int idx = params.add(name, rows, cols, trainable);
    nn::Tensor& t = params.at(idx);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) t.value(r, c) = read_f64(in);
  }
  return restore_model(std::move(v), hp, std::move(scheme), word_frozen, std::move(params));
}

}  // namespace sentigraph
