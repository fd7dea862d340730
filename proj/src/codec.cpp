#include "sentigraph/codec.hpp"

#include <algorithm>
#include <map>

namespace sentigraph {

const std::string& to_string(HeadRule rule) {
  static const std::string kNames[] = {"head-first", "head-final", "dep-edges", "dep-labels"};
  return kNames[static_cast<int>(rule)];
}

HeadRule parse_head_rule(const std::string& name) {
  if (name == "head-first") return HeadRule::HeadFirst;
  if (name == "head-final") return HeadRule::HeadFinal;
  if (name == "dep-edges") return HeadRule::DepEdges;
  if (name == "dep-labels") return HeadRule::DepLabels;
  throw Error("unknown head rule: '" + name +
              "' (expected head-first|head-final|dep-edges|dep-labels)");
}

const std::set<std::string>& EncodingScheme::default_banned_relations() {
  static const std::set<std::string> kDefault = {"punct", "obl", "det", "case", "mark", "cc"};
  return kDefault;
}

EncodingScheme EncodingScheme::make(HeadRule rule, bool inlabel) {
  EncodingScheme scheme;
  scheme.head_rule = rule;
  scheme.inlabel = inlabel;
  if (rule == HeadRule::DepLabels) scheme.banned_relations = default_banned_relations();
  return scheme;
}

void EncodingScheme::validate() const {
  if (head_rule != HeadRule::DepLabels && !banned_relations.empty())
    throw Error("banned_relations only apply to the dep-labels head rule");
}

// ---------------------------------------------------------------------------
// Head selection
// ---------------------------------------------------------------------------

namespace {

bool head_outside_span(const Span& span, const SynTree& syn, int tok) {
  int head = syn.heads.at(static_cast<std::size_t>(tok));  // 1-based, 0 = root
  if (head == 0) return true;
  return !span.contains(head - 1);
}

}  // namespace

int select_head(const Span& span, const EncodingScheme& scheme, const SynTree* syn) {
  scheme.validate();
  switch (scheme.head_rule) {
    case HeadRule::HeadFirst:
      return span.first();
    case HeadRule::HeadFinal:
      return span.last();
    case HeadRule::DepEdges:
    case HeadRule::DepLabels:
      break;
  }
  if (syn == nullptr)
    throw Error("the " + to_string(scheme.head_rule) + " head rule requires a syntactic tree");
  if (span.last() >= static_cast<int>(syn->size()))
    throw LengthMismatchError("span exceeds syntactic tree length");

  int dep_edges_choice = -1;
  for (int tok : span.indices()) {
    if (!head_outside_span(span, *syn, tok)) continue;
    if (dep_edges_choice < 0) dep_edges_choice = tok;
    if (scheme.head_rule == HeadRule::DepEdges) return tok;
    if (!scheme.banned_relations.count(syn->deprels.at(static_cast<std::size_t>(tok))))
      return tok;
  }
  if (dep_edges_choice >= 0) return dep_edges_choice;  // dep-labels fallback
  return span.first();
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

namespace {

void add_or_report(ParseGraph& graph, const Arc& arc, const std::string& sent_id,
                   LossReport& report) {
  if (arc.head == arc.dep) {
    // Element heads can coincide when spans overlap; the would-be self arc
    // has no slot at all. Reported with kept == dropped.
    report.collisions.push_back({sent_id, arc.head, arc.dep, arc.label, arc.label});
    return;
  }
  if (auto kept = graph.try_add(arc)) {
    report.collisions.push_back({sent_id, arc.head, arc.dep, *kept, arc.label});
  }
}

// Distinct spans of the same element type that share a head token fuse
// during decoding (their membership arcs become indistinguishable). Tracked
// per (internal label, head) so the fusion is reported as loss.
struct SpanMergeTracker {
  std::map<std::pair<std::string, int>, Span> seen;

  void check(const Span& span, int head_tok, const ArcLabel& internal,
             const std::string& sent_id, LossReport& report) {
    const auto key = std::make_pair(internal.str(), head_tok);
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, span);
    } else if (!(it->second == span)) {
      report.collisions.push_back(
          {sent_id, head_tok + 1, head_tok + 1, internal, internal});
    }
  }
};

// Span head gets the relation arc from `from`; the remaining span tokens
// attach flat to the span head.
void encode_element(ParseGraph& graph, const Span& span, int head_tok, int from,
                    const ArcLabel& relation, const ArcLabel& internal,
                    const std::string& sent_id, LossReport& report,
                    SpanMergeTracker& merges) {
  merges.check(span, head_tok, internal, sent_id, report);
  add_or_report(graph, {from, head_tok + 1, relation}, sent_id, report);
  for (int tok : span.indices()) {
    if (tok == head_tok) continue;
    add_or_report(graph, {head_tok + 1, tok + 1, internal}, sent_id, report);
  }
}

}  // namespace

std::pair<ParseGraph, LossReport> encode_sentence(const AnnotatedSentence& ann,
                                                  const EncodingScheme& scheme,
                                                  const SynTree* syn) {
  scheme.validate();
  const int n = static_cast<int>(ann.sentence.size());
  ParseGraph graph(n);
  LossReport report;
  SpanMergeTracker merges;
  const std::string& sid = ann.sentence.sent_id;

  for (const Opinion& op : ann.opinions) {
    if (op.expression.last() >= n)
      throw InvalidSpanError("opinion span exceeds sentence length in '" + sid + "'");

    const int exp_head = select_head(op.expression, scheme, syn);
    const ArcLabel exp_rel = ArcLabel::expression(op.polarity, false);
    const ArcLabel exp_in = ArcLabel::expression(op.polarity, scheme.inlabel);
    encode_element(graph, op.expression, exp_head, kRootIndex, exp_rel, exp_in, sid, report,
                   merges);

    if (op.target) {
      const int head = select_head(*op.target, scheme, syn);
      encode_element(graph, *op.target, head, exp_head + 1, ArcLabel::target(false),
                     ArcLabel::target(scheme.inlabel), sid, report, merges);
    }
    if (op.holder) {
      const int head = select_head(*op.holder, scheme, syn);
      encode_element(graph, *op.holder, head, exp_head + 1, ArcLabel::holder(false),
                     ArcLabel::holder(scheme.inlabel), sid, report, merges);
    }
  }
  return {std::move(graph), std::move(report)};
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

namespace {

// Tokens reachable from `start` (1-based arc space) following arcs with the
// given label; marks traversed arcs as used. Chains are followed even though
// the encoder only emits flat attachments.
std::vector<int> closure(const std::vector<Arc>& arcs, std::vector<bool>& used,
                         int start, const ArcLabel& label) {
  std::set<int> members = {start};
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t i = 0; i < arcs.size(); ++i) {
      const Arc& a = arcs[i];
      if (a.head == kRootIndex || !(a.label == label)) continue;
      if (!members.count(a.head) || members.count(a.dep)) continue;
      members.insert(a.dep);
      used[i] = true;
      grew = true;
    }
  }
  // Arcs internal to the closure that close cycles back onto collected
  // members still count as consumed.
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const Arc& a = arcs[i];
    if (a.head != kRootIndex && a.label == label && members.count(a.head) &&
        members.count(a.dep))
      used[i] = true;
  }
  return {members.begin(), members.end()};
}

Span to_span(const std::vector<int>& arc_space_tokens) {
  std::vector<int> zero_based;
  zero_based.reserve(arc_space_tokens.size());
  for (int t : arc_space_tokens) zero_based.push_back(t - 1);
  return Span(std::move(zero_based));
}

}  // namespace

DecodeResult decode_graph(const ParseGraph& graph, const EncodingScheme& scheme) {
  const std::vector<Arc>& arcs = graph.arcs();
  std::vector<bool> used(arcs.size(), false);
  DecodeResult result;

  // Roots in token order; root arcs carry exp:* labels by construction.
  std::vector<std::size_t> root_arcs;
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    if (arcs[i].head == kRootIndex && arcs[i].label.is_expression()) root_arcs.push_back(i);
  }
  std::sort(root_arcs.begin(), root_arcs.end(),
            [&](std::size_t a, std::size_t b) { return arcs[a].dep < arcs[b].dep; });

  for (std::size_t root_idx : root_arcs) {
    used[root_idx] = true;
    const int root = arcs[root_idx].dep;
    const Polarity pol = *arcs[root_idx].label.polarity();

    const ArcLabel exp_internal = ArcLabel::expression(pol, scheme.inlabel);
    Span expression = to_span(closure(arcs, used, root, exp_internal));

    auto collect = [&](const ArcLabel& relation, const ArcLabel& internal) {
      std::vector<int> heads;
      for (std::size_t i = 0; i < arcs.size(); ++i) {
        if (arcs[i].head == root && arcs[i].label == relation) {
          heads.push_back(arcs[i].dep);
          used[i] = true;
        }
      }
      std::sort(heads.begin(), heads.end());
      std::vector<Span> spans;
      for (int h : heads) spans.push_back(to_span(closure(arcs, used, h, internal)));
      return spans;
    };

    std::vector<Span> holders = collect(ArcLabel::holder(false), ArcLabel::holder(scheme.inlabel));
    std::vector<Span> targets = collect(ArcLabel::target(false), ArcLabel::target(scheme.inlabel));

    std::vector<std::optional<Span>> holder_slots, target_slots;
    if (holders.empty()) holder_slots.push_back(std::nullopt);
    else for (Span& s : holders) holder_slots.emplace_back(std::move(s));
    if (targets.empty()) target_slots.push_back(std::nullopt);
    else for (Span& s : targets) target_slots.emplace_back(std::move(s));

    for (const auto& h : holder_slots) {
      for (const auto& t : target_slots) {
        result.opinions.push_back(Opinion{h, t, expression, pol});
      }
    }
  }

  result.undecodable_arcs = static_cast<int>(std::count(used.begin(), used.end(), false));
  return result;
}

}  // namespace sentigraph
