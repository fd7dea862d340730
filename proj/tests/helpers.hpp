#ifndef SENTIGRAPH_TEST_HELPERS_HPP
#define SENTIGRAPH_TEST_HELPERS_HPP

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sentigraph/codec.hpp"
#include "sentigraph/types.hpp"

namespace sentigraph::testing {

// ---------------------------------------------------------------------------
// Figure-2 fixture: "Some others give the new UMUC 5 stars - don't believe
// them." with two opinions.
// ---------------------------------------------------------------------------

inline Sentence fig2_sentence() {
  Sentence s;
  s.sent_id = "fig2";
  s.text = "Some others give the new UMUC 5 stars - don't believe them.";
  const std::vector<std::string> forms = {"Some", "others",  "give", "the",  "new",  "UMUC",
                                          "5",    "stars",   "-",    "don't", "believe",
                                          "them."};
  std::size_t pos = 0;
  for (const std::string& form : forms) {
    const std::size_t begin = s.text.find(form, pos);
    Token t;
    t.form = form;
    t.begin = begin;
    t.end = begin + form.size();
    s.tokens.push_back(t);
    pos = t.end;
  }
  return s;
}

inline AnnotatedSentence fig2_annotated() {
  AnnotatedSentence ann;
  ann.sentence = fig2_sentence();
  ann.opinions.push_back(Opinion{Span({0, 1}), Span({3, 4, 5}), Span({6, 7}),
                                 Polarity::Positive});
  ann.opinions.push_back(Opinion{std::nullopt, Span({11}), Span({9, 10}),
                                 Polarity::Negative});
  return ann;
}

struct ArcTriple {
  int head, dep;
  std::string label;
  bool operator<(const ArcTriple& o) const {
    return std::tie(head, dep, label) < std::tie(o.head, o.dep, o.label);
  }
  bool operator==(const ArcTriple& o) const {
    return head == o.head && dep == o.dep && label == o.label;
  }
};

inline std::set<ArcTriple> arc_set(const ParseGraph& graph) {
  std::set<ArcTriple> out;
  for (const Arc& a : graph.arcs()) out.insert({a.head, a.dep, a.label.str()});
  return out;
}

inline std::set<ArcTriple> fig2a_arcs() {
  return {{0, 7, "exp:positive"}, {0, 10, "exp:negative"}, {7, 8, "exp:positive"},
          {7, 4, "target"},       {4, 5, "target"},        {4, 6, "target"},
          {7, 1, "holder"},       {1, 2, "holder"},        {10, 11, "exp:negative"},
          {10, 12, "target"}};
}

inline std::set<ArcTriple> fig2b_arcs() {
  return {{0, 8, "exp:positive"}, {0, 11, "exp:negative"}, {8, 7, "exp:positive"},
          {8, 6, "target"},       {6, 4, "target"},        {6, 5, "target"},
          {8, 2, "holder"},       {2, 1, "holder"},        {11, 10, "exp:negative"},
          {11, 12, "target"}};
}

// ---------------------------------------------------------------------------
// Random corpora
// ---------------------------------------------------------------------------

inline Sentence sentence_from_forms(const std::string& sent_id,
                                    const std::vector<std::string>& forms) {
  Sentence s;
  s.sent_id = sent_id;
  std::string text;
  for (std::size_t i = 0; i < forms.size(); ++i) {
    Token t;
    t.form = forms[i];
    t.begin = text.size();
    t.end = text.size() + forms[i].size();
    text += forms[i];
    if (i + 1 < forms.size()) text += " ";
    s.tokens.push_back(t);
  }
  s.text = text;
  return s;
}

inline Sentence synthetic_sentence(const std::string& sent_id, int n) {
  std::vector<std::string> forms;
  for (int i = 0; i < n; ++i) forms.push_back("tok" + std::to_string(i));
  return sentence_from_forms(sent_id, forms);
}

/// Sentence with randomly drawn surface forms, so distinct sentences stay
/// distinguishable to a model.
inline Sentence random_sentence(const std::string& sent_id, int n, std::mt19937_64& rng) {
  std::vector<std::string> forms;
  for (int i = 0; i < n; ++i) {
    const std::size_t len = 2 + rng() % 5;
    std::string form;
    for (std::size_t k = 0; k < len; ++k)
      form.push_back(static_cast<char>('a' + rng() % 26));
    forms.push_back(form);
  }
  return sentence_from_forms(sent_id, forms);
}

inline Polarity random_polarity(std::mt19937_64& rng) {
  switch (rng() % 3) {
    case 0: return Polarity::Positive;
    case 1: return Polarity::Neutral;
    default: return Polarity::Negative;
  }
}

/// Random span drawn from the given pool of still-free token indices; the
/// chosen tokens are removed from the pool, which keeps the spans of one
/// sentence pairwise disjoint.
inline std::optional<Span> take_span(std::vector<int>& pool, std::size_t max_len,
                                     std::mt19937_64& rng) {
  if (pool.empty()) return std::nullopt;
  const std::size_t len = 1 + rng() % std::min(max_len, pool.size());
  std::vector<int> chosen;
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t at = rng() % pool.size();
    chosen.push_back(pool[at]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(at));
  }
  std::sort(chosen.begin(), chosen.end());
  return Span(chosen);
}

/// Sentence whose opinions have pairwise disjoint spans: lossless under
/// every head rule by construction.
inline AnnotatedSentence random_lossless_sentence(const std::string& sent_id, int max_tokens,
                                                  int max_opinions, std::mt19937_64& rng) {
  const int n = 3 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_tokens - 2));
  AnnotatedSentence ann;
  ann.sentence = random_sentence(sent_id, n, rng);
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;

  const int opinions = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_opinions));
  for (int o = 0; o < opinions && !pool.empty(); ++o) {
    auto expression = take_span(pool, 3, rng);
    if (!expression) break;
    std::optional<Span> holder, target;
    if (rng() % 2 == 0) holder = take_span(pool, 2, rng);
    if (rng() % 2 == 0) target = take_span(pool, 3, rng);
    ann.opinions.push_back(Opinion{holder, target, *expression, random_polarity(rng)});
  }
  return ann;
}

/// Random opinions with freely overlapping spans; often lossy.
inline AnnotatedSentence random_messy_sentence(const std::string& sent_id, int max_tokens,
                                               int max_opinions, std::mt19937_64& rng) {
  const int n = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_tokens - 1));
  AnnotatedSentence ann;
  ann.sentence = random_sentence(sent_id, n, rng);
  auto random_span = [&]() {
    const int len = 1 + static_cast<int>(rng() % 3);
    std::set<int> chosen;
    for (int k = 0; k < len; ++k) chosen.insert(static_cast<int>(rng() % static_cast<std::uint64_t>(n)));
    return Span(std::vector<int>(chosen.begin(), chosen.end()));
  };
  const int opinions = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_opinions));
  for (int o = 0; o < opinions; ++o) {
    std::optional<Span> holder, target;
    if (rng() % 2 == 0) holder = random_span();
    if (rng() % 2 == 0) target = random_span();
    Opinion op{holder, target, random_span(), random_polarity(rng)};
    if (std::find(ann.opinions.begin(), ann.opinions.end(), op) == ann.opinions.end())
      ann.opinions.push_back(op);
  }
  return ann;
}

/// The decoder emits one tuple per holder × target combination of a root;
/// gold must be folded the same way before comparing round-trips. Opinions
/// sharing (expression, polarity) pool their holders and targets.
inline std::vector<Opinion> apply_product_convention(const std::vector<Opinion>& opinions) {
  std::map<std::pair<Span, Polarity>, std::pair<std::set<Span>, std::set<Span>>> groups;
  std::vector<std::pair<Span, Polarity>> order;
  for (const Opinion& op : opinions) {
    const auto key = std::make_pair(op.expression, op.polarity);
    if (!groups.count(key)) order.push_back(key);
    auto& [holders, targets] = groups[key];
    if (op.holder) holders.insert(*op.holder);
    if (op.target) targets.insert(*op.target);
  }
  std::vector<Opinion> out;
  for (const auto& key : order) {
    const auto& [holders, targets] = groups.at(key);
    std::vector<std::optional<Span>> hs, ts;
    if (holders.empty()) hs.push_back(std::nullopt);
    for (const Span& h : holders) hs.emplace_back(h);
    if (targets.empty()) ts.push_back(std::nullopt);
    for (const Span& t : targets) ts.emplace_back(t);
    for (const auto& h : hs)
      for (const auto& t : ts) out.push_back(Opinion{h, t, key.first, key.second});
  }
  return out;
}

inline std::vector<Opinion> sorted_opinions(std::vector<Opinion> ops) {
  std::sort(ops.begin(), ops.end());
  return ops;
}

}  // namespace sentigraph::testing

#endif  // SENTIGRAPH_TEST_HELPERS_HPP
