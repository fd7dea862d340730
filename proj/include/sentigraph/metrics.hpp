#ifndef SENTIGRAPH_METRICS_HPP
#define SENTIGRAPH_METRICS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sentigraph/codec.hpp"
#include "sentigraph/types.hpp"

namespace sentigraph {

/// Micro-aggregated precision/recall/F1. For the overlap-weighted sentiment
/// graph metrics the true-positive mass differs between the precision and
/// recall sides, so both numerators are kept; they coincide for every other
/// metric.
struct PRF {
  double tp_pred = 0.0;     // numerator of precision
  double tp_gold = 0.0;     // numerator of recall
  double pred_total = 0.0;
  double gold_total = 0.0;

  double precision() const { return pred_total > 0 ? tp_pred / pred_total : 0.0; }
  double recall() const { return gold_total > 0 ? tp_gold / gold_total : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }

  void add_tp(double w) { tp_pred += w; tp_gold += w; }
};

enum class Element { Holder, Target, Expression };
const std::string& to_string(Element e);

struct MetricReport {
  PRF holder_f1, target_f1, exp_f1, targeted_f1, uf1, lf1, nsf1, sf1;
};

/// Token-level partial-overlap F1 over one element type: per sentence the
/// token unions of gold and predicted elements are intersected.
PRF token_span_f1(const Corpus& gold, const Corpus& pred, Element element);

/// Macro (per-sentence averaged) token-level F1 for one element type, used
/// by the multi-target subset analysis. Sentences where both sides are
/// empty count as perfect.
struct MacroPRF {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};
MacroPRF token_span_f1_macro(const Corpus& gold, const Corpus& pred, Element element);

/// Exact target span + correct polarity, over deduplicated (target,
/// polarity) pairs per sentence. Opinions without a target do not count.
PRF targeted_f1(const Corpus& gold, const Corpus& pred);

/// Micro F1 over (head, dep) arcs, or (head, dep, label) when labeled.
PRF arc_f1(const std::vector<ParseGraph>& gold, const std::vector<ParseGraph>& pred,
           bool labeled);

/// Sentiment graph F1 (NSF1 when polar=false, SF1 when polar=true): tuples
/// match when every element pair overlaps or is absent on both sides, with
/// token-overlap-weighted true positives averaged across the three spans.
/// Matching is greedy by descending mean overlap with deterministic ties.
PRF sentiment_graph_f1(const Corpus& gold, const Corpus& pred, bool polar);

/// Expression-level F1 where a true positive is any predicted expression
/// overlapping a gold expression of equal polarity; each gold expression is
/// consumed at most once, in order.
PRF polarity_overlap_f1(const Corpus& gold, const Corpus& pred);

/// Sentences whose gold opinions have at least two distinct target spans.
Corpus filter_multi_target(const Corpus& corpus);

struct ElementStats {
  std::size_t count = 0;
  double mean_len = 0.0;
  int max_len = 0;
};

struct StatsReport {
  std::size_t sentences = 0;
  double mean_sentence_length = 0.0;
  ElementStats holders, targets, expressions;
  std::size_t positive = 0, neutral = 0, negative = 0;
};

StatsReport dataset_stats(const Corpus& corpus);

/// Full eight-metric report; parsing-graph metrics come from encoding both
/// corpora under the given scheme.
MetricReport evaluate(const Corpus& gold, const Corpus& pred, const EncodingScheme& scheme,
                      const std::map<std::string, SynTree>* syntax = nullptr);

using MetricFn = std::function<double(const Corpus& gold, const Corpus& pred)>;

/// One-sided bootstrap test for "A better than B": the corpus is resampled
/// at the sentence level and the p-value is the fraction of resamples whose
/// A-over-B gain is at least twice the observed gain. When the corpus is so
/// small that all n^n resamples fit within `iterations`, they are enumerated
/// exhaustively instead of sampled.
double bootstrap_significance(const MetricFn& metric, const Corpus& gold,
                              const Corpus& pred_a, const Corpus& pred_b,
                              std::uint64_t iterations, std::uint64_t seed);

std::string report_to_text(const MetricReport& report);
std::string report_to_json(const MetricReport& report);

}  // namespace sentigraph

#endif  // SENTIGRAPH_METRICS_HPP
