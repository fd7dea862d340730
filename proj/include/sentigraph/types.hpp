#ifndef SENTIGRAPH_TYPES_HPP
#define SENTIGRAPH_TYPES_HPP

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sentigraph {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AlignmentError : Error { using Error::Error; };
struct UnknownPolarityError : Error { using Error::Error; };
struct InvalidSpanError : Error { using Error::Error; };
struct InvalidArcError : Error { using Error::Error; };
struct DuplicateArcError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct MissingSentIdError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };
struct InconsistentDimError : Error { using Error::Error; };
struct EmptyTableError : Error { using Error::Error; };
struct MissingContextError : Error { using Error::Error; };
struct MisalignedCorporaError : Error { using Error::Error; };
struct LengthMismatchError : Error { using Error::Error; };
struct EmptyCorpusError : Error { using Error::Error; };
struct NonFiniteLossError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Polarity
// ---------------------------------------------------------------------------

enum class Polarity { Positive, Neutral, Negative };

const std::string& to_string(Polarity p);

/// Maps a raw polarity annotation to the closed {positive, neutral, negative}
/// set. Strong variants collapse onto their base polarity; matching is
/// case-insensitive and ignores '-'/'_' separators.
/// Throws UnknownPolarityError for anything else.
Polarity normalize_polarity(const std::string& raw);

// ---------------------------------------------------------------------------
// Sentences and spans
// ---------------------------------------------------------------------------

struct Token {
  std::string form;
  std::optional<std::string> lemma;
  std::optional<std::string> pos;
  std::size_t begin = 0;  // half-open character offsets into Sentence::text
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::string sent_id;
  std::string text;
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
};

/// A set of 0-based token indices, strictly increasing and never empty.
/// Discontinuous annotations are one Span; absence is an empty optional,
/// never an empty Span.
class Span {
 public:
  explicit Span(std::vector<int> indices);
  static Span contiguous(int first, int last);

  const std::vector<int>& indices() const { return indices_; }
  int first() const { return indices_.front(); }
  int last() const { return indices_.back(); }
  std::size_t size() const { return indices_.size(); }
  bool contains(int idx) const;

  bool operator==(const Span& other) const { return indices_ == other.indices_; }
  bool operator<(const Span& other) const { return indices_ < other.indices_; }

 private:
  std::vector<int> indices_;
};

/// |a ∩ b| in tokens. Symmetric.
int span_overlap(const Span& a, const Span& b);
int span_overlap(const std::optional<Span>& a, const std::optional<Span>& b);

/// Token indices of every token whose character range overlaps any of the
/// given half-open ranges. Throws AlignmentError when a range touches no
/// token at all.
Span align_offsets(const Sentence& sentence,
                   const std::vector<std::pair<std::size_t, std::size_t>>& char_ranges);

// ---------------------------------------------------------------------------
// Opinions
// ---------------------------------------------------------------------------

struct Opinion {
  std::optional<Span> holder;
  std::optional<Span> target;
  Span expression;
  Polarity polarity = Polarity::Positive;

  bool operator==(const Opinion& other) const;
  bool operator<(const Opinion& other) const;
};

struct AnnotatedSentence {
  Sentence sentence;
  std::vector<Opinion> opinions;
};

using Corpus = std::vector<AnnotatedSentence>;

// ---------------------------------------------------------------------------
// Arcs and parse graphs
// ---------------------------------------------------------------------------

/// Arc space is 1-based over tokens with the virtual root at index 0.
inline constexpr int kRootIndex = 0;

/// Label from the closed inventory {exp:positive, exp:neutral, exp:negative,
/// target, holder} plus the IN:-prefixed span-internal variants.
class ArcLabel {
 public:
  ArcLabel() = default;
  static ArcLabel expression(Polarity p, bool in_label = false);
  static ArcLabel target(bool in_label = false);
  static ArcLabel holder(bool in_label = false);
  static ArcLabel parse(const std::string& text);

  const std::string& str() const { return value_; }
  bool is_in() const;
  ArcLabel strip_in() const;
  bool is_expression() const;  // true also for IN:exp:*
  bool is_target() const;
  bool is_holder() const;
  std::optional<Polarity> polarity() const;

  bool operator==(const ArcLabel& other) const { return value_ == other.value_; }
  bool operator<(const ArcLabel& other) const { return value_ < other.value_; }

  /// Canonical inventory order; NONE is not an ArcLabel, it lives in the
  /// scorer's label space only.
  static const std::vector<std::string>& inventory(bool with_in_labels);

 private:
  explicit ArcLabel(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

struct Arc {
  int head = 0;  // token index or kRootIndex
  int dep = 0;   // token index >= 1
  ArcLabel label;

  bool operator==(const Arc& other) const {
    return head == other.head && dep == other.dep && label == other.label;
  }
};

/// Labeled directed arcs over one sentence plus the virtual root. At most
/// one arc per (head, dep) pair; tokens may have any number of incoming
/// arcs, including none.
class ParseGraph {
 public:
  explicit ParseGraph(int n);

  int n() const { return n_; }
  const std::vector<Arc>& arcs() const { return arcs_; }

  /// Adds the arc, throwing InvalidArcError on malformed arcs and
  /// DuplicateArcError when the (head, dep) slot is already taken.
  void add(const Arc& arc);

  /// Like add() but reports an occupied (head, dep) slot by returning the
  /// label already stored there instead of throwing. Identical re-adds
  /// (same label) succeed as no-ops.
  std::optional<ArcLabel> try_add(const Arc& arc);

  bool has(int head, int dep) const;
  const ArcLabel* label_at(int head, int dep) const;

  bool operator==(const ParseGraph& other) const;

 private:
  void validate(const Arc& arc) const;

  int n_ = 0;
  std::vector<Arc> arcs_;  // insertion order, for reproducible output
  std::set<std::pair<int, int>> occupied_;
};

// ---------------------------------------------------------------------------
// Syntactic trees (read from CoNLL-U)
// ---------------------------------------------------------------------------

struct SynTree {
  std::vector<int> heads;            // per token, 1-based; 0 = syntactic root
  std::vector<std::string> deprels;  // per token, nonempty
  // Optional morphology carried along from CoNLL-U, used to enrich tokens.
  std::vector<std::string> lemmas;
  std::vector<std::string> upos;
  std::vector<std::string> xpos;

  std::size_t size() const { return heads.size(); }
};

}  // namespace sentigraph

#endif  // SENTIGRAPH_TYPES_HPP
