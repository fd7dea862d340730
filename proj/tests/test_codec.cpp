#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "sentigraph/codec.hpp"

using namespace sentigraph;
namespace st = sentigraph::testing;

namespace {

SynTree make_syn(const std::vector<int>& heads, const std::vector<std::string>& rels) {
  SynTree t;
  t.heads = heads;
  t.deprels = rels;
  return t;
}

}  // namespace

TEST_CASE("select_head under the four rules") {
  const Span span({3, 4, 5});

  CHECK(select_head(span, EncodingScheme::make(HeadRule::HeadFirst)) == 3);
  CHECK(select_head(span, EncodingScheme::make(HeadRule::HeadFinal)) == 5);

  SUBCASE("dep-edges picks the span token with an external head") {
    // Tokens 3 and 4 point inside the span; token 5 points outside.
    const SynTree syn = make_syn({5, 5, 1, 5, 4, 2}, {"a", "b", "c", "d", "e", "f"});
    CHECK(select_head(span, EncodingScheme::make(HeadRule::DepEdges), &syn) == 5);
    // Oracle: enumerate span tokens and test the external-head predicate.
    int expected = -1;
    for (int tok : span.indices()) {
      const int head = syn.heads[static_cast<std::size_t>(tok)];
      if (head == 0 || !span.contains(head - 1)) {
        expected = tok;
        break;
      }
    }
    CHECK(expected == 5);
  }
  SUBCASE("dep-edges defaults to the first of several external heads") {
    const SynTree syn = make_syn({0, 0, 0, 1, 1, 1}, {"r", "r", "r", "x", "y", "z"});
    CHECK(select_head(span, EncodingScheme::make(HeadRule::DepEdges), &syn) == 3);
  }
  SUBCASE("dep-edges falls back to the first token when no head leaves the span") {
    const SynTree syn = make_syn({1, 1, 1, 5, 6, 4}, {"a", "b", "c", "d", "e", "f"});
    CHECK(select_head(span, EncodingScheme::make(HeadRule::DepEdges), &syn) == 3);
  }
  SUBCASE("dep-labels skips banned incoming relations") {
    // Both 3 and 5 have external heads, but 3 comes in via punct.
    const SynTree syn = make_syn({0, 0, 0, 1, 4, 1}, {"r", "r", "r", "punct", "x", "nsubj"});
    CHECK(select_head(span, EncodingScheme::make(HeadRule::DepLabels), &syn) == 5);
    // Same tree under dep-edges keeps 3.
    CHECK(select_head(span, EncodingScheme::make(HeadRule::DepEdges), &syn) == 3);
  }
  SUBCASE("dep-labels falls back to the dep-edges choice when all are banned") {
    const SynTree syn = make_syn({0, 0, 0, 1, 1, 1}, {"r", "r", "r", "punct", "obl", "det"});
    CHECK(select_head(span, EncodingScheme::make(HeadRule::DepLabels), &syn) == 3);
  }
  SUBCASE("syntactic rules require a tree") {
    CHECK_THROWS_AS(select_head(span, EncodingScheme::make(HeadRule::DepEdges), nullptr), Error);
  }
}

TEST_CASE("head-first head never exceeds head-final head") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<int> idx;
    const int len = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < len; ++k) idx.insert(static_cast<int>(rng() % 12));
    const Span span(std::vector<int>(idx.begin(), idx.end()));
    CHECK(select_head(span, EncodingScheme::make(HeadRule::HeadFirst)) <=
          select_head(span, EncodingScheme::make(HeadRule::HeadFinal)));
  }
}

TEST_CASE("figure sentence encodes to the published arc sets") {
  const AnnotatedSentence ann = st::fig2_annotated();

  SUBCASE("head-first") {
    auto [graph, loss] = encode_sentence(ann, EncodingScheme::make(HeadRule::HeadFirst));
    CHECK(loss.empty());
    CHECK(st::arc_set(graph) == st::fig2a_arcs());
  }
  SUBCASE("head-final") {
    auto [graph, loss] = encode_sentence(ann, EncodingScheme::make(HeadRule::HeadFinal));
    CHECK(loss.empty());
    CHECK(st::arc_set(graph) == st::fig2b_arcs());
  }
  SUBCASE("no opinions, no arcs") {
    AnnotatedSentence empty;
    empty.sentence = ann.sentence;
    auto [graph, loss] = encode_sentence(empty, EncodingScheme::make(HeadRule::HeadFirst));
    CHECK(graph.arcs().empty());
    CHECK(loss.empty());
  }
}

TEST_CASE("in-label variant prefixes span-internal arcs only") {
  const AnnotatedSentence ann = st::fig2_annotated();
  auto [graph, loss] = encode_sentence(ann, EncodingScheme::make(HeadRule::HeadFirst, true));
  CHECK(loss.empty());
  const std::set<st::ArcTriple> expected = {
      {0, 7, "exp:positive"}, {0, 10, "exp:negative"}, {7, 8, "IN:exp:positive"},
      {7, 4, "target"},       {4, 5, "IN:target"},     {4, 6, "IN:target"},
      {7, 1, "holder"},       {1, 2, "IN:holder"},     {10, 11, "IN:exp:negative"},
      {10, 12, "target"}};
  CHECK(st::arc_set(graph) == expected);
}

TEST_CASE("decoding the figure graph recovers both opinions") {
  const AnnotatedSentence ann = st::fig2_annotated();
  auto [graph, loss] = encode_sentence(ann, EncodingScheme::make(HeadRule::HeadFirst));
  REQUIRE(loss.empty());

  const DecodeResult decoded = decode_graph(graph, EncodingScheme::make(HeadRule::HeadFirst));
  CHECK(decoded.undecodable_arcs == 0);
  REQUIRE(decoded.opinions.size() == 2);
  CHECK(decoded.opinions[0] ==
        Opinion{Span({0, 1}), Span({3, 4, 5}), Span({6, 7}), Polarity::Positive});
  CHECK(decoded.opinions[1] ==
        Opinion{std::nullopt, Span({11}), Span({9, 10}), Polarity::Negative});
}

TEST_CASE("decode edge cases") {
  SUBCASE("empty graph decodes to nothing") {
    const DecodeResult decoded =
        decode_graph(ParseGraph(4), EncodingScheme::make(HeadRule::HeadFirst));
    CHECK(decoded.opinions.empty());
    CHECK(decoded.undecodable_arcs == 0);
  }
  SUBCASE("single root arc yields a bare expression") {
    ParseGraph g(5);
    g.add({0, 3, ArcLabel::expression(Polarity::Negative)});
    const DecodeResult decoded = decode_graph(g, EncodingScheme::make(HeadRule::HeadFirst));
    REQUIRE(decoded.opinions.size() == 1);
    CHECK(decoded.opinions[0] ==
          Opinion{std::nullopt, std::nullopt, Span({2}), Polarity::Negative});
  }
  SUBCASE("arcs fitting no rule are counted, not decoded") {
    ParseGraph g(6);
    g.add({0, 2, ArcLabel::expression(Polarity::Positive)});
    g.add({5, 6, ArcLabel::target()});  // head is no root and no span head
    const DecodeResult decoded = decode_graph(g, EncodingScheme::make(HeadRule::HeadFirst));
    CHECK(decoded.opinions.size() == 1);
    CHECK(decoded.undecodable_arcs == 1);
  }
  SUBCASE("multiple holders and targets decode to the Cartesian product") {
    ParseGraph g(8);
    g.add({0, 1, ArcLabel::expression(Polarity::Positive)});
    g.add({1, 2, ArcLabel::holder()});
    g.add({1, 3, ArcLabel::holder()});
    g.add({1, 5, ArcLabel::target()});
    g.add({1, 6, ArcLabel::target()});
    const DecodeResult decoded = decode_graph(g, EncodingScheme::make(HeadRule::HeadFirst));
    CHECK(decoded.opinions.size() == 4);
  }
}

TEST_CASE("lossy collisions are reported and keep the earliest opinion") {
  AnnotatedSentence ann;
  ann.sentence = st::synthetic_sentence("lossy", 6);
  // Same expression span, conflicting polarities: the ROOT slot collides.
  ann.opinions.push_back(Opinion{std::nullopt, std::nullopt, Span({1, 2}), Polarity::Positive});
  ann.opinions.push_back(Opinion{std::nullopt, std::nullopt, Span({1, 2}), Polarity::Negative});

  auto [graph, loss] = encode_sentence(ann, EncodingScheme::make(HeadRule::HeadFirst));
  REQUIRE(loss.count() == 2);  // ROOT arc and the internal arc both collide
  CHECK(loss.collisions[0].kept.str() == "exp:positive");
  CHECK(loss.collisions[0].dropped.str() == "exp:negative");
  CHECK(st::arc_set(graph) ==
        std::set<st::ArcTriple>{{0, 2, "exp:positive"}, {2, 3, "exp:positive"}});
}

TEST_CASE("round-trip holds on lossless corpora for all schemes") {
  std::mt19937_64 rng(20260810);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const AnnotatedSentence ann = st::random_lossless_sentence(
        "rt" + std::to_string(trial), 12, 3, rng);
    SynTree syn;  // random but valid tree for the syntactic rules
    for (std::size_t i = 0; i < ann.sentence.size(); ++i) {
      syn.heads.push_back(static_cast<int>(rng() % (ann.sentence.size() + 1)));
      syn.deprels.push_back(rng() % 4 == 0 ? "punct" : "dep");
    }
    for (HeadRule rule : {HeadRule::HeadFirst, HeadRule::HeadFinal, HeadRule::DepEdges,
                          HeadRule::DepLabels}) {
      for (bool inlabel : {false, true}) {
        const EncodingScheme scheme = EncodingScheme::make(rule, inlabel);
        auto [graph, loss] = encode_sentence(ann, scheme, &syn);
        REQUIRE(loss.empty());  // disjoint spans cannot collide
        const DecodeResult decoded = decode_graph(graph, scheme);
        CHECK(decoded.undecodable_arcs == 0);
        CHECK(st::sorted_opinions(decoded.opinions) ==
              st::sorted_opinions(st::apply_product_convention(ann.opinions)));
        ++checked;
      }
    }
  }
  CHECK(checked >= 1000);
}

TEST_CASE("shared elements merge and decode through the product convention") {
  AnnotatedSentence ann;
  ann.sentence = st::synthetic_sentence("shared", 9);
  // One expression, two targets (two gold tuples), plus a shared holder.
  ann.opinions.push_back(Opinion{Span({0}), Span({4, 5}), Span({2, 3}), Polarity::Positive});
  ann.opinions.push_back(Opinion{Span({0}), Span({7}), Span({2, 3}), Polarity::Positive});

  for (bool inlabel : {false, true}) {
    const EncodingScheme scheme = EncodingScheme::make(HeadRule::HeadFinal, inlabel);
    auto [graph, loss] = encode_sentence(ann, scheme);
    CHECK(loss.empty());
    const DecodeResult decoded = decode_graph(graph, scheme);
    CHECK(st::sorted_opinions(decoded.opinions) ==
          st::sorted_opinions(st::apply_product_convention(ann.opinions)));
    CHECK(decoded.opinions.size() == 2);
  }
}

TEST_CASE("in-label scheme disambiguates nested same-label configurations") {
  // Opinion 1's holder head doubles as opinion 2's expression head; under
  // plain labels the holder-span closure of opinion 1 swallows opinion 2's
  // holder relation arc.
  AnnotatedSentence ann;
  ann.sentence = st::synthetic_sentence("nested", 7);
  ann.opinions.push_back(Opinion{Span({1}), std::nullopt, Span({5}), Polarity::Positive});
  ann.opinions.push_back(Opinion{Span({2}), std::nullopt, Span({1}), Polarity::Negative});

  const auto expected = st::sorted_opinions(st::apply_product_convention(ann.opinions));

  const EncodingScheme plain = EncodingScheme::make(HeadRule::HeadFirst, false);
  auto [graph_plain, loss_plain] = encode_sentence(ann, plain);
  REQUIRE(loss_plain.empty());
  CHECK(st::sorted_opinions(decode_graph(graph_plain, plain).opinions) != expected);

  const EncodingScheme in = EncodingScheme::make(HeadRule::HeadFirst, true);
  auto [graph_in, loss_in] = encode_sentence(ann, in);
  REQUIRE(loss_in.empty());
  CHECK(st::sorted_opinions(decode_graph(graph_in, in).opinions) == expected);
}

TEST_CASE("encoded graphs always satisfy parse graph invariants") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const AnnotatedSentence ann =
        st::random_messy_sentence("messy" + std::to_string(trial), 8, 3, rng);
    for (HeadRule rule : {HeadRule::HeadFirst, HeadRule::HeadFinal}) {
      auto [graph, loss] = encode_sentence(ann, EncodingScheme::make(rule));
      // Construction would have thrown otherwise; double-check slot unicity.
      std::set<std::pair<int, int>> slots;
      for (const Arc& a : graph.arcs()) {
        CHECK(a.head != a.dep);
        CHECK(slots.insert({a.head, a.dep}).second);
      }
    }
  }
}
