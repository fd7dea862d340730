#include "sentigraph/types.hpp"

#include <algorithm>
#include <cctype>

namespace sentigraph {

const std::string& to_string(Polarity p) {
  static const std::string kPositive = "positive";
  static const std::string kNeutral = "neutral";
  static const std::string kNegative = "negative";
  switch (p) {
    case Polarity::Positive: return kPositive;
    case Polarity::Neutral: return kNeutral;
    default: return kNegative;
  }
}

Polarity normalize_polarity(const std::string& raw) {
  if (raw.empty()) throw UnknownPolarityError("empty polarity value");
  std::string key;
  key.reserve(raw.size());
  for (char c : raw) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "positive" || key == "strongpositive") return Polarity::Positive;
  if (key == "negative" || key == "strongnegative") return Polarity::Negative;
  if (key == "neutral") return Polarity::Neutral;
  throw UnknownPolarityError("unknown polarity value: '" + raw + "'");
}

// ---------------------------------------------------------------------------
// Span
// ---------------------------------------------------------------------------

Span::Span(std::vector<int> indices) : indices_(std::move(indices)) {
  if (indices_.empty()) throw InvalidSpanError("a Span may not be empty");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 0) throw InvalidSpanError("negative token index in Span");
    if (i > 0 && indices_[i] <= indices_[i - 1])
      throw InvalidSpanError("Span indices must be strictly increasing");
  }
}

Span Span::contiguous(int first, int last) {
  std::vector<int> idx;
  for (int i = first; i <= last; ++i) idx.push_back(i);
  return Span(std::move(idx));
}

bool Span::contains(int idx) const {
  return std::binary_search(indices_.begin(), indices_.end(), idx);
}

int span_overlap(const Span& a, const Span& b) {
  int count = 0;
  auto ai = a.indices().begin();
  auto bi = b.indices().begin();
  while (ai != a.indices().end() && bi != b.indices().end()) {
    if (*ai < *bi) ++ai;
    else if (*bi < *ai) ++bi;
    else { ++count; ++ai; ++bi; }
  }
  return count;
}

int span_overlap(const std::optional<Span>& a, const std::optional<Span>& b) {
  if (!a || !b) return 0;
  return span_overlap(*a, *b);
}

Span align_offsets(const Sentence& sentence,
                   const std::vector<std::pair<std::size_t, std::size_t>>& char_ranges) {
  if (char_ranges.empty()) throw AlignmentError("no character ranges given");
  std::set<int> hit;
  for (const auto& [begin, end] : char_ranges) {
    bool any = false;
    for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
      const Token& tok = sentence.tokens[t];
      if (tok.begin < end && begin < tok.end) {
        hit.insert(static_cast<int>(t));
        any = true;
      }
    }
    if (!any) {
      throw AlignmentError("range " + std::to_string(begin) + ":" + std::to_string(end) +
                           " overlaps no token in sentence '" + sentence.sent_id + "'");
    }
  }
  return Span(std::vector<int>(hit.begin(), hit.end()));
}

// ---------------------------------------------------------------------------
// Opinion
// ---------------------------------------------------------------------------

bool Opinion::operator==(const Opinion& other) const {
  return holder == other.holder && target == other.target &&
         expression == other.expression && polarity == other.polarity;
}

bool Opinion::operator<(const Opinion& other) const {
  auto key = [](const Opinion& o) {
    return std::tie(o.expression, o.polarity, o.holder, o.target);
  };
  return key(*this) < key(other);
}

// ---------------------------------------------------------------------------
// ArcLabel
// ---------------------------------------------------------------------------

namespace {
const std::string kInPrefix = "IN:";
const std::string kExpPrefix = "exp:";
}  // namespace

ArcLabel ArcLabel::expression(Polarity p, bool in_label) {
  std::string v = kExpPrefix + to_string(p);
  return ArcLabel(in_label ? kInPrefix + v : v);
}

ArcLabel ArcLabel::target(bool in_label) {
  return ArcLabel(in_label ? kInPrefix + "target" : std::string("target"));
}

ArcLabel ArcLabel::holder(bool in_label) {
  return ArcLabel(in_label ? kInPrefix + "holder" : std::string("holder"));
}

ArcLabel ArcLabel::parse(const std::string& text) {
  for (bool with_in : {false, true}) {
    for (const std::string& v : inventory(with_in)) {
      if (v == text) return ArcLabel(text);
    }
  }
  throw InvalidArcError("not an arc label: '" + text + "'");
}

bool ArcLabel::is_in() const {
  return value_.rfind(kInPrefix, 0) == 0;
}

ArcLabel ArcLabel::strip_in() const {
  if (!is_in()) return *this;
  return ArcLabel(value_.substr(kInPrefix.size()));
}

bool ArcLabel::is_expression() const {
  return strip_in().value_.rfind(kExpPrefix, 0) == 0;
}

bool ArcLabel::is_target() const { return strip_in().value_ == "target"; }

bool ArcLabel::is_holder() const { return strip_in().value_ == "holder"; }

std::optional<Polarity> ArcLabel::polarity() const {
  const std::string base = strip_in().value_;
  if (base.rfind(kExpPrefix, 0) != 0) return std::nullopt;
  return normalize_polarity(base.substr(kExpPrefix.size()));
}

const std::vector<std::string>& ArcLabel::inventory(bool with_in_labels) {
  static const std::vector<std::string> kPlain = {
      "exp:positive", "exp:neutral", "exp:negative", "target", "holder"};
  static const std::vector<std::string> kWithIn = [] {
    std::vector<std::string> all = kPlain;
    for (const std::string& v : kPlain) all.push_back(kInPrefix + v);
    return all;
  }();
  return with_in_labels ? kWithIn : kPlain;
}

// ---------------------------------------------------------------------------
// ParseGraph
// ---------------------------------------------------------------------------

ParseGraph::ParseGraph(int n) : n_(n) {
  if (n < 0) throw InvalidArcError("negative sentence length");
}

void ParseGraph::validate(const Arc& arc) const {
  if (arc.dep < 1 || arc.dep > n_)
    throw InvalidArcError("arc dependent out of range: " + std::to_string(arc.dep));
  if (arc.head < 0 || arc.head > n_)
    throw InvalidArcError("arc head out of range: " + std::to_string(arc.head));
  if (arc.head == arc.dep)
    throw InvalidArcError("self arc at token " + std::to_string(arc.dep));
  if (arc.head == kRootIndex && !(arc.label.is_expression() && !arc.label.is_in()))
    throw InvalidArcError("root arc must carry an exp:* label, got '" + arc.label.str() + "'");
}

void ParseGraph::add(const Arc& arc) {
  validate(arc);
  if (occupied_.count({arc.head, arc.dep}))
    throw DuplicateArcError("duplicate arc slot (" + std::to_string(arc.head) + ", " +
                            std::to_string(arc.dep) + ")");
  occupied_.insert({arc.head, arc.dep});
  arcs_.push_back(arc);
}

std::optional<ArcLabel> ParseGraph::try_add(const Arc& arc) {
  validate(arc);
  if (const ArcLabel* existing = label_at(arc.head, arc.dep)) {
    if (*existing == arc.label) return std::nullopt;  // already present
    return *existing;
  }
  occupied_.insert({arc.head, arc.dep});
  arcs_.push_back(arc);
  return std::nullopt;
}

bool ParseGraph::has(int head, int dep) const {
  return occupied_.count({head, dep}) > 0;
}

const ArcLabel* ParseGraph::label_at(int head, int dep) const {
  if (!has(head, dep)) return nullptr;
  for (const Arc& a : arcs_) {
    if (a.head == head && a.dep == dep) return &a.label;
  }
  return nullptr;
}

bool ParseGraph::operator==(const ParseGraph& other) const {
  if (n_ != other.n_ || arcs_.size() != other.arcs_.size()) return false;
  auto key = [](const Arc& a) { return std::make_tuple(a.head, a.dep, a.label.str()); };
  std::vector<std::tuple<int, int, std::string>> lhs, rhs;
  for (const Arc& a : arcs_) lhs.push_back(key(a));
  for (const Arc& a : other.arcs_) rhs.push_back(key(a));
  std::sort(lhs.begin(), lhs.end());
  std::sort(rhs.begin(), rhs.end());
  return lhs == rhs;
}

}  // namespace sentigraph
