#ifndef SENTIGRAPH_CODEC_HPP
#define SENTIGRAPH_CODEC_HPP

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentigraph/types.hpp"

namespace sentigraph {

enum class HeadRule { HeadFirst, HeadFinal, DepEdges, DepLabels };

const std::string& to_string(HeadRule rule);
HeadRule parse_head_rule(const std::string& name);

/// How opinions map onto parse graphs: which span token becomes the head,
/// whether span-internal arcs carry IN:-prefixed labels, and (for DepLabels
/// only) which incoming syntactic relations disqualify a head candidate.
struct EncodingScheme {
  HeadRule head_rule = HeadRule::HeadFirst;
  bool inlabel = false;
  std::set<std::string> banned_relations;

  static const std::set<std::string>& default_banned_relations();
  static EncodingScheme make(HeadRule rule, bool inlabel = false);

  bool needs_syntax() const {
    return head_rule == HeadRule::DepEdges || head_rule == HeadRule::DepLabels;
  }
  void validate() const;
};

struct LossCollision {
  std::string sent_id;
  int head = 0;
  int dep = 0;
  ArcLabel kept;
  ArcLabel dropped;
};

/// Arcs that could not be represented because their (head, dep) slot was
/// already taken by an earlier opinion.
struct LossReport {
  std::vector<LossCollision> collisions;

  std::size_t count() const { return collisions.size(); }
  bool empty() const { return collisions.empty(); }
  void merge(const LossReport& other) {
    collisions.insert(collisions.end(), other.collisions.begin(), other.collisions.end());
  }
};

/// Picks the head token (0-based) of a span under the scheme's head rule.
/// Total: syntactic rules fall back to the first token when no span token
/// qualifies. `syn` is required for DepEdges/DepLabels.
int select_head(const Span& span, const EncodingScheme& scheme,
                const SynTree* syn = nullptr);

/// Encodes all opinions of a sentence as one parse graph. Collisions keep
/// the arc from the earliest opinion and are reported, never silently lost.
std::pair<ParseGraph, LossReport> encode_sentence(const AnnotatedSentence& ann,
                                                  const EncodingScheme& scheme,
                                                  const SynTree* syn = nullptr);

struct DecodeResult {
  std::vector<Opinion> opinions;
  int undecodable_arcs = 0;
};

/// Reads opinion tuples back out of a parse graph. Defensive: arcs that fit
/// no decoding rule are ignored and counted. Multiple holders/targets on one
/// expression yield the Cartesian product of tuples.
DecodeResult decode_graph(const ParseGraph& graph, const EncodingScheme& scheme);

}  // namespace sentigraph

#endif  // SENTIGRAPH_CODEC_HPP
