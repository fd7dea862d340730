#include "sentigraph/io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sentigraph {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Opinion corpora
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

std::pair<std::size_t, std::size_t> parse_offset(const std::string& text,
                                                 const std::string& context) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ParseError("offset '" + text + "' is not begin:end in " + context);
  try {
    const std::size_t begin = std::stoull(text.substr(0, colon));
    const std::size_t end = std::stoull(text.substr(colon + 1));
    if (end < begin) throw ParseError("offset end before begin in " + context);
    return {begin, end};
  } catch (const std::invalid_argument&) {
    throw ParseError("non-numeric offset '" + text + "' in " + context);
  } catch (const std::out_of_range&) {
    throw ParseError("offset out of range '" + text + "' in " + context);
  }
}

// Dataset elements are [ [fragment strings...], ["begin:end"...] ]. Missing
// keys, nulls and empty offset lists all mean "absent".
std::optional<Span> parse_element(const json& opinion, const std::string& key,
                                  const Sentence& sentence, CorpusLoadStats* stats,
                                  const std::string& context) {
  if (!opinion.contains(key) || opinion[key].is_null()) return std::nullopt;
  const json& element = opinion[key];
  if (!element.is_array() || element.size() != 2)
    throw ParseError("element '" + key + "' must be [texts, offsets] in " + context);
  const json& texts = element[0];
  const json& offsets = element[1];
  if (offsets.empty()) return std::nullopt;

  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const auto [begin, end] = parse_offset(offsets[i].get<std::string>(), context);
    ranges.push_back({begin, end});
    if (stats && texts.is_array() && i < texts.size() && texts[i].is_string()) {
      const std::string fragment = texts[i].get<std::string>();
      if (begin <= sentence.text.size() && end <= sentence.text.size() &&
          sentence.text.substr(begin, end - begin) != fragment)
        ++stats->fragment_mismatches;
    }
  }
  return align_offsets(sentence, ranges);
}

}  // namespace

Corpus load_opinion_json(const std::string& path, CorpusLoadStats* stats) {
  std::ifstream in = open_input(path);
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
  if (!root.is_array()) throw ParseError("expected a JSON array in " + path);

  Corpus corpus;
  CorpusLoadStats local;
  std::set<std::string> seen_ids;
  for (const json& item : root) {
    AnnotatedSentence ann;
    try {
      ann.sentence.sent_id = item.at("sent_id").is_string()
                                 ? item.at("sent_id").get<std::string>()
                                 : item.at("sent_id").dump();
      ann.sentence.text = item.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError("bad sentence entry in " + path + ": " + e.what());
    }
    if (!seen_ids.insert(ann.sentence.sent_id).second)
      throw ParseError("duplicate sent_id '" + ann.sentence.sent_id + "' in " + path);
    const std::string context = "sentence '" + ann.sentence.sent_id + "'";

    if (!item.contains("tokens") || !item["tokens"].is_array())
      throw ParseError("missing token ranges in " + context);
    for (const json& tok : item["tokens"]) {
      if (!tok.is_array() || tok.size() != 2)
        throw ParseError("token range must be [begin, end] in " + context);
      Token t;
      t.begin = tok[0].get<std::size_t>();
      t.end = tok[1].get<std::size_t>();
      if (t.begin >= t.end || t.end > ann.sentence.text.size())
        throw ParseError("token range out of bounds in " + context);
      t.form = ann.sentence.text.substr(t.begin, t.end - t.begin);
      if (!ann.sentence.tokens.empty() && t.begin < ann.sentence.tokens.back().end)
        throw ParseError("overlapping or unordered tokens in " + context);
      ann.sentence.tokens.push_back(std::move(t));
    }

    for (const json& op_json : item.value("opinions", json::array())) {
      try {
        auto expression = parse_element(op_json, "Polar_expression", ann.sentence, &local, context);
        if (!expression) throw AlignmentError("opinion without expression in " + context);
        auto holder = parse_element(op_json, "Source", ann.sentence, &local, context);
        auto target = parse_element(op_json, "Target", ann.sentence, &local, context);
        const Polarity polarity = normalize_polarity(op_json.at("Polarity").get<std::string>());
        // Intensity is parsed for validity but deliberately dropped.
        if (op_json.contains("Intensity") && !op_json["Intensity"].is_null())
          (void)op_json["Intensity"].get<std::string>();
        Opinion op{std::move(holder), std::move(target), std::move(*expression), polarity};

        if (std::find(ann.opinions.begin(), ann.opinions.end(), op) != ann.opinions.end()) {
          ++local.duplicates_removed;
        } else {
          ann.opinions.push_back(std::move(op));
          ++local.opinions;
        }
      } catch (const AlignmentError&) {
        ++local.opinions_skipped;
      } catch (const UnknownPolarityError&) {
        ++local.opinions_skipped;
      } catch (const json::exception& e) {
        throw ParseError("bad opinion in " + context + ": " + e.what());
      }
    }
    corpus.push_back(std::move(ann));
  }
  local.sentences = corpus.size();
  if (local.duplicates_removed > 0)
    std::cerr << "[sentigraph] " << path << ": removed " << local.duplicates_removed
              << " duplicate opinion(s)\n";
  if (local.opinions_skipped > 0)
    std::cerr << "[sentigraph] " << path << ": skipped " << local.opinions_skipped
              << " unalignable opinion(s)\n";
  if (stats) *stats = local;
  return corpus;
}

namespace {

std::string capitalize_polarity(Polarity p) {
  switch (p) {
    case Polarity::Positive: return "Positive";
    case Polarity::Neutral: return "Neutral";
    default: return "Negative";
  }
}

// A Span back to [[fragment strings], ["begin:end" offsets]] over contiguous
// token runs.
json span_to_json(const std::optional<Span>& span, const Sentence& sentence) {
  json texts = json::array();
  json offsets = json::array();
  if (span) {
    const auto& idx = span->indices();
    std::size_t run_start = 0;
    for (std::size_t i = 1; i <= idx.size(); ++i) {
      if (i < idx.size() && idx[i] == idx[i - 1] + 1) continue;
      const Token& first = sentence.tokens[static_cast<std::size_t>(idx[run_start])];
      const Token& last = sentence.tokens[static_cast<std::size_t>(idx[i - 1])];
      texts.push_back(sentence.text.substr(first.begin, last.end - first.begin));
      offsets.push_back(std::to_string(first.begin) + ":" + std::to_string(last.end));
      run_start = i;
    }
  }
  return json::array({texts, offsets});
}

}  // namespace

void write_opinion_json(const Corpus& corpus, const std::string& path) {
  nlohmann::ordered_json root = nlohmann::ordered_json::array();
  for (const AnnotatedSentence& ann : corpus) {
    nlohmann::ordered_json item;
    item["sent_id"] = ann.sentence.sent_id;
    item["text"] = ann.sentence.text;
    nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
    for (const Token& t : ann.sentence.tokens) tokens.push_back({t.begin, t.end});
    item["tokens"] = std::move(tokens);
    nlohmann::ordered_json opinions = nlohmann::ordered_json::array();
    for (const Opinion& op : ann.opinions) {
      nlohmann::ordered_json o;
      o["Source"] = span_to_json(op.holder, ann.sentence);
      o["Target"] = span_to_json(op.target, ann.sentence);
      o["Polar_expression"] = span_to_json(op.expression, ann.sentence);
      o["Polarity"] = capitalize_polarity(op.polarity);
      opinions.push_back(std::move(o));
    }
    item["opinions"] = std::move(opinions);
    root.push_back(std::move(item));
  }
  std::ofstream out = open_output(path);
  out << root.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// CoNLL-U
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

bool is_plain_token_id(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) { return std::isdigit(c) != 0; });
}

}  // namespace

std::map<std::string, SynTree> load_conllu_syntax(const std::string& path) {
  std::ifstream in = open_input(path);
  std::map<std::string, SynTree> trees;

  std::string line;
  std::string sent_id;
  SynTree tree;
  std::size_t line_no = 0;

  auto flush = [&]() {
    if (tree.size() == 0) return;
    if (sent_id.empty())
      throw MissingSentIdError(path + ": sentence block without a # sent_id comment before line " +
                               std::to_string(line_no));
    trees[sent_id] = std::move(tree);
    tree = SynTree{};
    sent_id.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
        if (key == "sent_id") {
          std::string value = line.substr(eq + 1);
          const auto first = value.find_first_not_of(' ');
          sent_id = first == std::string::npos ? "" : value.substr(first);
        }
      }
      continue;
    }
    const std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 10)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 10 columns, got " +
                       std::to_string(cols.size()));
    if (!is_plain_token_id(cols[0])) continue;  // multiword ranges, empty nodes
    const std::size_t expected = tree.size() + 1;
    if (std::stoull(cols[0]) != expected)
      throw ParseError(path + ":" + std::to_string(line_no) + ": token id out of sequence");
    if (cols[6] == "_" || cols[6].empty() || !is_plain_token_id(cols[6]))
      throw ParseError(path + ":" + std::to_string(line_no) + ": missing HEAD column");
    if (cols[7].empty() || cols[7] == "_")
      throw ParseError(path + ":" + std::to_string(line_no) + ": missing DEPREL column");
    tree.heads.push_back(std::stoi(cols[6]));
    tree.deprels.push_back(cols[7]);
    tree.lemmas.push_back(cols[2] == "_" ? "" : cols[2]);
    tree.upos.push_back(cols[3] == "_" ? "" : cols[3]);
    tree.xpos.push_back(cols[4] == "_" ? "" : cols[4]);
  }
  flush();
  return trees;
}

std::size_t attach_morphology(Corpus& corpus, const std::map<std::string, SynTree>& syntax) {
  std::size_t mismatches = 0;
  for (AnnotatedSentence& ann : corpus) {
    auto it = syntax.find(ann.sentence.sent_id);
    if (it == syntax.end()) continue;
    const SynTree& tree = it->second;
    if (tree.size() != ann.sentence.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t i = 0; i < tree.size(); ++i) {
      Token& tok = ann.sentence.tokens[i];
      if (!tree.lemmas[i].empty()) tok.lemma = tree.lemmas[i];
      if (!tree.xpos[i].empty()) tok.pos = tree.xpos[i];
      else if (!tree.upos[i].empty()) tok.pos = tree.upos[i];
    }
  }
  if (mismatches > 0)
    std::cerr << "[sentigraph] " << mismatches
              << " sentence(s) had mismatched CoNLL-U token counts; left unenriched\n";
  return mismatches;
}

// ---------------------------------------------------------------------------
// Graph files
// ---------------------------------------------------------------------------

void write_graph_file(const GraphCorpus& graphs, const std::string& path) {
  if (graphs.sent_ids.size() != graphs.graphs.size() ||
      graphs.forms.size() != graphs.graphs.size())
    throw LengthMismatchError("graph corpus components differ in length");
  std::ofstream out = open_output(path);
  for (std::size_t s = 0; s < graphs.size(); ++s) {
    const ParseGraph& graph = graphs.graphs[s];
    const auto& forms = graphs.forms[s];
    if (static_cast<int>(forms.size()) != graph.n())
      throw LengthMismatchError("forms do not match graph length for '" + graphs.sent_ids[s] + "'");
    out << "# sent_id = " << graphs.sent_ids[s] << "\n";
    // Incoming arcs per dependent, ordered by head for stable output.
    std::vector<std::vector<const Arc*>> incoming(static_cast<std::size_t>(graph.n()) + 1);
    for (const Arc& a : graph.arcs()) incoming[static_cast<std::size_t>(a.dep)].push_back(&a);
    for (auto& arcs : incoming)
      std::sort(arcs.begin(), arcs.end(),
                [](const Arc* a, const Arc* b) { return a->head < b->head; });
    for (int tok = 1; tok <= graph.n(); ++tok) {
      out << tok << "\t" << forms[static_cast<std::size_t>(tok - 1)] << "\t";
      const auto& arcs = incoming[static_cast<std::size_t>(tok)];
      if (arcs.empty()) {
        out << "_";
      } else {
        for (std::size_t i = 0; i < arcs.size(); ++i) {
          if (i > 0) out << "|";
          out << arcs[i]->head << ":" << arcs[i]->label.str();
        }
      }
      out << "\n";
    }
    out << "\n";
  }
}

GraphCorpus read_graph_file(const std::string& path) {
  std::ifstream in = open_input(path);
  GraphCorpus out;

  std::string line;
  std::size_t line_no = 0;
  std::string sent_id;
  bool block_active = false;
  std::vector<std::string> forms;
  std::vector<std::vector<std::pair<int, std::string>>> deps;  // per token

  auto flush = [&]() {
    if (!block_active && forms.empty()) return;
    block_active = false;
    ParseGraph graph(static_cast<int>(forms.size()));
    try {
      for (std::size_t tok = 0; tok < deps.size(); ++tok)
        for (const auto& [head, label] : deps[tok])
          graph.add({head, static_cast<int>(tok) + 1, ArcLabel::parse(label)});
    } catch (const Error& e) {
      throw ParseError(path + ": in sentence '" + sent_id + "': " + e.what());
    }
    out.sent_ids.push_back(sent_id);
    out.forms.push_back(std::move(forms));
    out.graphs.push_back(std::move(graph));
    sent_id.clear();
    forms.clear();
    deps.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      const std::string prefix = "# sent_id = ";
      if (line.rfind(prefix, 0) == 0) {
        sent_id = line.substr(prefix.size());
        block_active = true;
      }
      continue;
    }
    const std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 3)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 3 columns");
    if (!is_plain_token_id(cols[0]) ||
        std::stoull(cols[0]) != forms.size() + 1)
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad token id '" + cols[0] + "'");
    forms.push_back(cols[1]);
    deps.emplace_back();
    if (cols[2] != "_") {
      for (const std::string& part : split(cols[2], '|')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos || colon == 0)
          throw ParseError(path + ":" + std::to_string(line_no) + ": bad DEPS entry '" + part + "'");
        try {
          deps.back().push_back({std::stoi(part.substr(0, colon)), part.substr(colon + 1)});
        } catch (const std::exception&) {
          throw ParseError(path + ":" + std::to_string(line_no) + ": bad head in '" + part + "'");
        }
      }
    }
  }
  flush();
  return out;
}

GraphCorpus make_graph_corpus(const Corpus& corpus, std::vector<ParseGraph> graphs) {
  if (corpus.size() != graphs.size())
    throw LengthMismatchError("corpus and graph list differ in length");
  GraphCorpus out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.sent_ids.push_back(corpus[i].sentence.sent_id);
    std::vector<std::string> forms;
    for (const Token& t : corpus[i].sentence.tokens) forms.push_back(t.form);
    out.forms.push_back(std::move(forms));
  }
  out.graphs = std::move(graphs);
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in = open_input(path);
  EmbeddingTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    if (first) {
      first = false;
      // Optional "count dim" header: exactly two integer fields.
      std::istringstream probe(line);
      long long count = 0, dim = 0;
      std::string extra;
      if (probe >> count >> dim && !(probe >> extra) && count > 0 && dim > 0) {
        table.dim = static_cast<int>(dim);
        continue;
      }
    }
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> values;
    double v = 0.0;
    while (ss >> v) values.push_back(v);
    if (values.empty()) {
      ++table.skipped_lines;
      continue;
    }
    if (table.dim == 0) table.dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != table.dim) {
      ++table.skipped_lines;
      continue;
    }
    bool finite = std::all_of(values.begin(), values.end(),
                              [](double x) { return std::isfinite(x); });
    if (!finite) {
      ++table.skipped_lines;
      continue;
    }
    if (table.vectors.emplace(word, std::move(values)).second) table.words.push_back(word);
  }
  if (table.words.empty()) throw EmptyTableError("no embeddings loaded from " + path);
  return table;
}

// ---------------------------------------------------------------------------
// Contextual store
// ---------------------------------------------------------------------------

const Eigen::MatrixXd& ContextualStore::get(const std::string& sent_id) const {
  auto it = rows_.find(sent_id);
  if (it == rows_.end())
    throw MissingContextError("no contextual vectors for sentence '" + sent_id + "'");
  return it->second;
}

void ContextualStore::put(const std::string& sent_id, Eigen::MatrixXd rows) {
  if (rows.size() == 0) throw InconsistentDimError("empty contextual matrix for '" + sent_id + "'");
  if (dim_ == 0) dim_ = static_cast<int>(rows.cols());
  if (static_cast<int>(rows.cols()) != dim_)
    throw InconsistentDimError("contextual dim mismatch for '" + sent_id + "': expected " +
                               std::to_string(dim_) + ", got " + std::to_string(rows.cols()));
  if (rows_.emplace(sent_id, std::move(rows)).second) order_.push_back(sent_id);
}

namespace {
constexpr char kCtxMagic[] = "SGCTX\t1";
}

void write_contextual_store(const ContextualStore& store, const std::string& path) {
  std::ofstream out = open_output(path);
  out << kCtxMagic << "\n" << store.ids().size() << "\n";
  for (const std::string& id : store.ids()) {
    const Eigen::MatrixXd& m = store.get(id);
    out << id << "\t" << m.rows() << "\t" << m.cols() << "\n";
  }
  for (const std::string& id : store.ids()) {
    const Eigen::MatrixXd& m = store.get(id);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
    }
  }
}

ContextualStore load_contextual_store(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || line != kCtxMagic)
    throw ParseError(path + ": not a contextual vector store");
  if (!std::getline(in, line)) throw ParseError(path + ": truncated store header");
  std::size_t entries = 0;
  try {
    entries = std::stoull(line);
  } catch (const std::exception&) {
    throw ParseError(path + ": bad entry count '" + line + "'");
  }
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> index;
  for (std::size_t i = 0; i < entries; ++i) {
    if (!std::getline(in, line)) throw ParseError(path + ": truncated index");
    const std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 3) throw ParseError(path + ": bad index line '" + line + "'");
    index.emplace_back(cols[0], std::stoll(cols[1]), std::stoll(cols[2]));
  }
  ContextualStore store;
  for (const auto& [id, rows, cols] : index) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v = 0.0;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(double)))
          throw ParseError(path + ": truncated payload for '" + id + "'");
        m(r, c) = v;
      }
    }
    store.put(id, std::move(m));
  }
  return store;
}

}  // namespace sentigraph
