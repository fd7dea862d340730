#ifndef SENTIGRAPH_IO_HPP
#define SENTIGRAPH_IO_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "sentigraph/types.hpp"

namespace sentigraph {

// ---------------------------------------------------------------------------
// Opinion corpora (canonical JSON format)
// ---------------------------------------------------------------------------

struct CorpusLoadStats {
  std::size_t sentences = 0;
  std::size_t opinions = 0;
  std::size_t duplicates_removed = 0;
  std::size_t opinions_skipped = 0;     // alignment / polarity failures
  std::size_t fragment_mismatches = 0;  // fragment text != offsets, warned only
};

/// Loads a UTF-8 JSON array of sentences with character-offset annotations.
/// Offsets are the source of truth; fragment strings only warn on mismatch.
/// Duplicate opinions are removed, unalignable opinions skipped and counted.
Corpus load_opinion_json(const std::string& path, CorpusLoadStats* stats = nullptr);

void write_opinion_json(const Corpus& corpus, const std::string& path);

// ---------------------------------------------------------------------------
// CoNLL-U syntax
// ---------------------------------------------------------------------------

/// Reads 10-column CoNLL-U keyed by the `# sent_id = ...` comment. Multiword
/// token and empty-node lines are skipped.
std::map<std::string, SynTree> load_conllu_syntax(const std::string& path);

/// Copies lemma and POS (xpos preferred, upos otherwise) from CoNLL-U rows
/// onto corpus tokens. Sentences without a matching tree, or whose token
/// counts differ, are left untouched (a warning is counted in the return).
std::size_t attach_morphology(Corpus& corpus, const std::map<std::string, SynTree>& syntax);

// ---------------------------------------------------------------------------
// Graph files
// ---------------------------------------------------------------------------

struct GraphCorpus {
  std::vector<std::string> sent_ids;
  std::vector<std::vector<std::string>> forms;
  std::vector<ParseGraph> graphs;

  std::size_t size() const { return graphs.size(); }
};

/// Tab-separated, one token per line: ID, FORM, DEPS with DEPS a pipe-joined
/// list of "head:label" or "_". Sentences are separated by a blank line and
/// preceded by their `# sent_id = ...` comment. write ∘ read is the identity.
void write_graph_file(const GraphCorpus& graphs, const std::string& path);
GraphCorpus read_graph_file(const std::string& path);

GraphCorpus make_graph_corpus(const Corpus& corpus, std::vector<ParseGraph> graphs);

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

struct EmbeddingTable {
  int dim = 0;
  std::vector<std::string> words;  // insertion order, for reproducible vocabularies
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::size_t skipped_lines = 0;

  const std::vector<double>* lookup(const std::string& word) const {
    auto it = vectors.find(word);
    return it == vectors.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return words.size(); }
};

/// Plain-text embeddings: optional "count dim" header, then one word and
/// `dim` floats per line. Malformed lines are skipped and counted.
EmbeddingTable load_embeddings(const std::string& path);

// ---------------------------------------------------------------------------
// Contextual vector store
// ---------------------------------------------------------------------------

/// Per-sentence matrices of precomputed contextual token vectors, keyed by
/// sent_id. Stored as a text index followed by a float64 payload.
class ContextualStore {
 public:
  int dim() const { return dim_; }
  bool empty() const { return rows_.empty(); }
  bool has(const std::string& sent_id) const { return rows_.count(sent_id) > 0; }

  /// Throws MissingContextError when the id is unknown.
  const Eigen::MatrixXd& get(const std::string& sent_id) const;

  /// Throws InconsistentDimError when the column count deviates from earlier
  /// entries.
  void put(const std::string& sent_id, Eigen::MatrixXd rows);

  const std::vector<std::string>& ids() const { return order_; }

 private:
  int dim_ = 0;
  std::vector<std::string> order_;
  std::map<std::string, Eigen::MatrixXd> rows_;
};

ContextualStore load_contextual_store(const std::string& path);
void write_contextual_store(const ContextualStore& store, const std::string& path);

}  // namespace sentigraph

#endif  // SENTIGRAPH_IO_HPP
