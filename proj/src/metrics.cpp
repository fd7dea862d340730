#include "sentigraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sentigraph {

const std::string& to_string(Element e) {
  static const std::string kNames[] = {"holder", "target", "expression"};
  return kNames[static_cast<int>(e)];
}

namespace {

void check_aligned(const Corpus& gold, const Corpus& pred) {
  if (gold.size() != pred.size())
    throw MisalignedCorporaError("corpora differ in sentence count: " +
                                 std::to_string(gold.size()) + " vs " +
                                 std::to_string(pred.size()));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].sentence.sent_id != pred[i].sentence.sent_id)
      throw MisalignedCorporaError("sent_id mismatch at position " + std::to_string(i) +
                                   ": '" + gold[i].sentence.sent_id + "' vs '" +
                                   pred[i].sentence.sent_id + "'");
  }
}

std::optional<Span> element_of(const Opinion& op, Element e) {
  switch (e) {
    case Element::Holder: return op.holder;
    case Element::Target: return op.target;
    case Element::Expression: break;
  }
  return op.expression;
}

std::set<int> token_union(const AnnotatedSentence& sent, Element e) {
  std::set<int> tokens;
  for (const Opinion& op : sent.opinions) {
    const auto span = element_of(op, e);
    if (!span) continue;
    tokens.insert(span->indices().begin(), span->indices().end());
  }
  return tokens;
}

int intersection_size(const std::set<int>& a, const std::set<int>& b) {
  int count = 0;
  for (int x : a)
    if (b.count(x)) ++count;
  return count;
}

}  // namespace

PRF token_span_f1(const Corpus& gold, const Corpus& pred, Element element) {
  check_aligned(gold, pred);
  PRF out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<int> g = token_union(gold[i], element);
    const std::set<int> p = token_union(pred[i], element);
    out.add_tp(intersection_size(g, p));
    out.pred_total += static_cast<double>(p.size());
    out.gold_total += static_cast<double>(g.size());
  }
  return out;
}

MacroPRF token_span_f1_macro(const Corpus& gold, const Corpus& pred, Element element) {
  check_aligned(gold, pred);
  MacroPRF out;
  if (gold.empty()) return out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<int> g = token_union(gold[i], element);
    const std::set<int> p = token_union(pred[i], element);
    PRF s;
    s.add_tp(intersection_size(g, p));
    s.pred_total = static_cast<double>(p.size());
    s.gold_total = static_cast<double>(g.size());
    if (g.empty() && p.empty()) {
      out.precision += 1.0;
      out.recall += 1.0;
      out.f1 += 1.0;
    } else {
      out.precision += s.precision();
      out.recall += s.recall();
      out.f1 += s.f1();
    }
  }
  const double n = static_cast<double>(gold.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

PRF targeted_f1(const Corpus& gold, const Corpus& pred) {
  check_aligned(gold, pred);
  PRF out;
  auto units = [](const AnnotatedSentence& sent) {
    std::set<std::pair<Span, Polarity>> pairs;
    for (const Opinion& op : sent.opinions)
      if (op.target) pairs.insert({*op.target, op.polarity});
    return pairs;
  };
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = units(gold[i]);
    const auto p = units(pred[i]);
    for (const auto& unit : p)
      if (g.count(unit)) out.add_tp(1.0);
    out.pred_total += static_cast<double>(p.size());
    out.gold_total += static_cast<double>(g.size());
  }
  return out;
}

PRF arc_f1(const std::vector<ParseGraph>& gold, const std::vector<ParseGraph>& pred,
           bool labeled) {
  if (gold.size() != pred.size())
    throw MisalignedCorporaError("graph corpora differ in sentence count");
  PRF out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].n() != pred[i].n())
      throw LengthMismatchError("sentence length mismatch at position " + std::to_string(i));
    auto units = [labeled](const ParseGraph& graph) {
      std::set<std::tuple<int, int, std::string>> arcs;
      for (const Arc& a : graph.arcs())
        arcs.insert({a.head, a.dep, labeled ? a.label.str() : std::string()});
      return arcs;
    };
    const auto g = units(gold[i]);
    const auto p = units(pred[i]);
    for (const auto& arc : p)
      if (g.count(arc)) out.add_tp(1.0);
    out.pred_total += static_cast<double>(p.size());
    out.gold_total += static_cast<double>(g.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sentiment graph F1
// ---------------------------------------------------------------------------

namespace {

struct TupleWeights {
  double precision = 0.0;  // mean over elements of |p∩g| / |p|
  double recall = 0.0;     // mean over elements of |p∩g| / |g|
  bool eligible = false;
};

// A pair is eligible when every element either overlaps or is absent on both
// sides; absent–absent contributes full weight, mixed absence disqualifies.
TupleWeights tuple_weights(const Opinion& p, const Opinion& g, bool polar) {
  TupleWeights w;
  if (polar && p.polarity != g.polarity) return w;

  double pw = 0.0, rw = 0.0;
  auto accumulate = [&](const std::optional<Span>& ps, const std::optional<Span>& gs) {
    if (!ps && !gs) {
      pw += 1.0;
      rw += 1.0;
      return true;
    }
    if (!ps || !gs) return false;
    const int ov = span_overlap(*ps, *gs);
    if (ov == 0) return false;
    pw += static_cast<double>(ov) / static_cast<double>(ps->size());
    rw += static_cast<double>(ov) / static_cast<double>(gs->size());
    return true;
  };
  if (!accumulate(p.holder, g.holder)) return w;
  if (!accumulate(p.target, g.target)) return w;
  if (!accumulate(std::optional<Span>(p.expression), std::optional<Span>(g.expression)))
    return w;

  w.precision = pw / 3.0;
  w.recall = rw / 3.0;
  w.eligible = true;
  return w;
}

}  // namespace

PRF sentiment_graph_f1(const Corpus& gold, const Corpus& pred, bool polar) {
  check_aligned(gold, pred);
  PRF out;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& g_ops = gold[s].opinions;
    const auto& p_ops = pred[s].opinions;
    out.pred_total += static_cast<double>(p_ops.size());
    out.gold_total += static_cast<double>(g_ops.size());

    struct Candidate {
      double mean;
      std::size_t pi, gi;
      TupleWeights w;
    };
    std::vector<Candidate> candidates;
    for (std::size_t pi = 0; pi < p_ops.size(); ++pi) {
      for (std::size_t gi = 0; gi < g_ops.size(); ++gi) {
        TupleWeights w = tuple_weights(p_ops[pi], g_ops[gi], polar);
        if (w.eligible) candidates.push_back({(w.precision + w.recall) / 2.0, pi, gi, w});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.mean != b.mean) return a.mean > b.mean;
      if (a.pi != b.pi) return a.pi < b.pi;
      return a.gi < b.gi;
    });

    std::vector<bool> p_used(p_ops.size(), false), g_used(g_ops.size(), false);
    for (const Candidate& c : candidates) {
      if (p_used[c.pi] || g_used[c.gi]) continue;
      p_used[c.pi] = true;
      g_used[c.gi] = true;
      out.tp_pred += c.w.precision;
      out.tp_gold += c.w.recall;
    }
  }
  return out;
}

PRF polarity_overlap_f1(const Corpus& gold, const Corpus& pred) {
  check_aligned(gold, pred);
  PRF out;
  auto expressions = [](const AnnotatedSentence& sent) {
    std::vector<std::pair<Span, Polarity>> exps;
    for (const Opinion& op : sent.opinions) {
      std::pair<Span, Polarity> unit{op.expression, op.polarity};
      if (std::find(exps.begin(), exps.end(), unit) == exps.end()) exps.push_back(unit);
    }
    return exps;
  };
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto g = expressions(gold[s]);
    const auto p = expressions(pred[s]);
    std::vector<bool> consumed(g.size(), false);
    for (const auto& [p_span, p_pol] : p) {
      for (std::size_t gi = 0; gi < g.size(); ++gi) {
        if (consumed[gi] || g[gi].second != p_pol) continue;
        if (span_overlap(p_span, g[gi].first) == 0) continue;
        consumed[gi] = true;
        out.add_tp(1.0);
        break;
      }
    }
    out.pred_total += static_cast<double>(p.size());
    out.gold_total += static_cast<double>(g.size());
  }
  return out;
}

Corpus filter_multi_target(const Corpus& corpus) {
  Corpus out;
  for (const AnnotatedSentence& sent : corpus) {
    std::set<Span> targets;
    for (const Opinion& op : sent.opinions)
      if (op.target) targets.insert(*op.target);
    if (targets.size() >= 2) out.push_back(sent);
  }
  return out;
}

StatsReport dataset_stats(const Corpus& corpus) {
  StatsReport report;
  report.sentences = corpus.size();
  std::size_t token_total = 0;
  std::size_t holder_tokens = 0, target_tokens = 0, exp_tokens = 0;
  for (const AnnotatedSentence& sent : corpus) {
    token_total += sent.sentence.size();
    for (const Opinion& op : sent.opinions) {
      if (op.holder) {
        ++report.holders.count;
        holder_tokens += op.holder->size();
        report.holders.max_len = std::max(report.holders.max_len,
                                          static_cast<int>(op.holder->size()));
      }
      if (op.target) {
        ++report.targets.count;
        target_tokens += op.target->size();
        report.targets.max_len = std::max(report.targets.max_len,
                                          static_cast<int>(op.target->size()));
      }
      ++report.expressions.count;
      exp_tokens += op.expression.size();
      report.expressions.max_len = std::max(report.expressions.max_len,
                                            static_cast<int>(op.expression.size()));
      switch (op.polarity) {
        case Polarity::Positive: ++report.positive; break;
        case Polarity::Neutral: ++report.neutral; break;
        case Polarity::Negative: ++report.negative; break;
      }
    }
  }
  if (report.sentences > 0)
    report.mean_sentence_length = static_cast<double>(token_total) / report.sentences;
  if (report.holders.count > 0)
    report.holders.mean_len = static_cast<double>(holder_tokens) / report.holders.count;
  if (report.targets.count > 0)
    report.targets.mean_len = static_cast<double>(target_tokens) / report.targets.count;
  if (report.expressions.count > 0)
    report.expressions.mean_len = static_cast<double>(exp_tokens) / report.expressions.count;
  return report;
}

MetricReport evaluate(const Corpus& gold, const Corpus& pred, const EncodingScheme& scheme,
                      const std::map<std::string, SynTree>* syntax) {
  check_aligned(gold, pred);
  MetricReport report;
  report.holder_f1 = token_span_f1(gold, pred, Element::Holder);
  report.target_f1 = token_span_f1(gold, pred, Element::Target);
  report.exp_f1 = token_span_f1(gold, pred, Element::Expression);
  report.targeted_f1 = targeted_f1(gold, pred);

  auto encode_all = [&](const Corpus& corpus) {
    std::vector<ParseGraph> graphs;
    graphs.reserve(corpus.size());
    for (const AnnotatedSentence& sent : corpus) {
      const SynTree* syn = nullptr;
      if (syntax) {
        auto it = syntax->find(sent.sentence.sent_id);
        if (it != syntax->end()) syn = &it->second;
      }
      graphs.push_back(encode_sentence(sent, scheme, syn).first);
    }
    return graphs;
  };
  const std::vector<ParseGraph> gold_graphs = encode_all(gold);
  const std::vector<ParseGraph> pred_graphs = encode_all(pred);
  report.uf1 = arc_f1(gold_graphs, pred_graphs, false);
  report.lf1 = arc_f1(gold_graphs, pred_graphs, true);
  report.nsf1 = sentiment_graph_f1(gold, pred, false);
  report.sf1 = sentiment_graph_f1(gold, pred, true);
  return report;
}

// ---------------------------------------------------------------------------
// Bootstrap significance
// ---------------------------------------------------------------------------

namespace {

Corpus resample(const Corpus& corpus, const std::vector<std::size_t>& idx) {
  Corpus out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(corpus[i]);
  return out;
}

}  // namespace

double bootstrap_significance(const MetricFn& metric, const Corpus& gold,
                              const Corpus& pred_a, const Corpus& pred_b,
                              std::uint64_t iterations, std::uint64_t seed) {
  check_aligned(gold, pred_a);
  check_aligned(gold, pred_b);
  if (iterations == 0) throw Error("bootstrap requires at least one iteration");
  if (gold.empty()) throw EmptyCorpusError("cannot bootstrap an empty corpus");

  const std::size_t n = gold.size();
  const double observed = metric(gold, pred_a) - metric(gold, pred_b);

  auto gain = [&](const std::vector<std::size_t>& idx) {
    const Corpus g = resample(gold, idx);
    return metric(g, resample(pred_a, idx)) - metric(g, resample(pred_b, idx));
  };

  // All n^n resamples, when that is no more work than the requested sampling,
  // give an exact and seed-independent answer.
  const double log_total = static_cast<double>(n) * std::log(static_cast<double>(n));
  if (log_total <= std::log(static_cast<double>(iterations)) + 1e-12) {
    std::vector<std::size_t> idx(n, 0);
    std::uint64_t hits = 0, total = 0;
    while (true) {
      ++total;
      if (gain(idx) >= 2.0 * observed) ++hits;
      std::size_t pos = 0;
      while (pos < n && ++idx[pos] == n) idx[pos++] = 0;
      if (pos == n) break;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
  }

  std::mt19937_64 rng(seed);
  std::uint64_t hits = 0;
  std::vector<std::size_t> idx(n);
  for (std::uint64_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::size_t>(rng() % n);
    if (gain(idx) >= 2.0 * observed) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(iterations);
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::pair<std::string, PRF MetricReport::*>>& metric_fields() {
  static const std::vector<std::pair<std::string, PRF MetricReport::*>> kFields = {
      {"holder_f1", &MetricReport::holder_f1}, {"target_f1", &MetricReport::target_f1},
      {"exp_f1", &MetricReport::exp_f1},       {"targeted_f1", &MetricReport::targeted_f1},
      {"uf1", &MetricReport::uf1},             {"lf1", &MetricReport::lf1},
      {"nsf1", &MetricReport::nsf1},           {"sf1", &MetricReport::sf1}};
  return kFields;
}

}  // namespace

std::string report_to_text(const MetricReport& report) {
  std::ostringstream os;
  for (const auto& [name, member] : metric_fields()) {
    const PRF& prf = report.*member;
    os << name << ".precision = " << prf.precision() << "\n";
    os << name << ".recall = " << prf.recall() << "\n";
    os << name << ".f1 = " << prf.f1() << "\n";
  }
  return os.str();
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::ordered_json root;
  for (const auto& [name, member] : metric_fields()) {
    const PRF& prf = report.*member;
    root[name] = {{"precision", prf.precision()},
                  {"recall", prf.recall()},
                  {"f1", prf.f1()}};
  }
  return root.dump(2);
}

}  // namespace sentigraph
