#include "perin/eval.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "perin/error.hpp"

namespace perin {

namespace {

using TupleCounts = std::map<std::string, long>;

std::set<int> anchored_chars(const Node& node) {
  std::set<int> chars;
  for (const auto& a : node.anchors) {
    for (int c = a.from; c < a.to; ++c) chars.insert(c);
  }
  return chars;
}

std::string key(std::initializer_list<Json> parts) { return Json(parts).dump(); }

// Tuples of `graph` with node identities given by `identity` (per node index).
std::array<TupleCounts, 6> collect(const Graph& graph, const std::vector<long>& identity) {
  std::array<TupleCounts, 6> out;
  auto add = [&](Metric m, std::string k) { ++out[static_cast<int>(m)][std::move(k)]; };
  std::map<int, long> id_of;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const Node& n = graph.nodes[i];
    const long who = identity[i];
    id_of[n.id] = who;
    if (n.is_top) add(Metric::kTops, key({who}));
    if (n.label) add(Metric::kLabels, key({who, *n.label}));
    for (const auto& p : n.properties) add(Metric::kProperties, key({who, p.name, p.value}));
    if (!n.anchors.empty()) {
      auto chars = anchored_chars(n);
      add(Metric::kAnchors, key({who, Json(std::vector<int>(chars.begin(), chars.end()))}));
    }
  }
  for (const auto& e : graph.edges) {
    const long s = id_of.count(e.source) ? id_of[e.source] : -1000000 - e.source;
    const long t = id_of.count(e.target) ? id_of[e.target] : -1000000 - e.target;
    add(Metric::kEdges, key({s, t, e.label}));
    for (const auto& a : e.attributes) {
      add(Metric::kAttributes, key({s, t, e.label, a.name, a.value}));
    }
  }
  return out;
}

long total(const TupleCounts& counts) {
  long n = 0;
  for (const auto& [k, c] : counts) n += c;
  return n;
}

long intersection(const TupleCounts& a, const TupleCounts& b) {
  long n = 0;
  for (const auto& [k, c] : a) {
    if (auto it = b.find(k); it != b.end()) n += std::min(c, it->second);
  }
  return n;
}

}  // namespace

double MetricCounts::precision() const {
  return predicted == 0 ? 0.0 : static_cast<double>(matched) / predicted;
}

double MetricCounts::recall() const {
  return gold == 0 ? 0.0 : static_cast<double>(matched) / gold;
}

double MetricCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

MetricCounts& MetricCounts::operator+=(const MetricCounts& other) {
  gold += other.gold;
  predicted += other.predicted;
  matched += other.matched;
  return *this;
}

std::string_view to_string(Metric metric) {
  static constexpr std::string_view kNames[] = {"tops",    "labels", "properties",
                                                "anchors", "edges",  "attributes"};
  return kNames[static_cast<int>(metric)];
}

double ScoreReport::macro_f1() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : counts) {
    if (c.gold + c.predicted == 0) continue;
    sum += c.f1();
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

Json ScoreReport::to_json() const {
  Json out = Json::object();
  for (Metric m : kAllMetrics) {
    const auto& c = (*this)[m];
    out[std::string(to_string(m))] = {{"gold", c.gold},
                                      {"predicted", c.predicted},
                                      {"matched", c.matched},
                                      {"precision", c.precision()},
                                      {"recall", c.recall()},
                                      {"f1", c.f1()}};
  }
  out["macro_f1"] = macro_f1();
  return out;
}

std::vector<int> align_nodes(const Graph& gold, const Graph& predicted) {
  struct Candidate {
    int overlap;
    bool same_label;
    int low_id;
    int high_id;
    int gold_index;
    int pred_index;
  };
  std::vector<std::set<int>> gold_chars, pred_chars;
  for (const auto& n : gold.nodes) gold_chars.push_back(anchored_chars(n));
  for (const auto& n : predicted.nodes) pred_chars.push_back(anchored_chars(n));

  std::vector<Candidate> candidates;
  for (std::size_t g = 0; g < gold.nodes.size(); ++g) {
    for (std::size_t p = 0; p < predicted.nodes.size(); ++p) {
      int overlap = 0;
      for (int c : pred_chars[p]) overlap += gold_chars[g].count(c);
      // two missing labels agree, but only unanchored pairs may rely on that
      const bool same = gold.nodes[g].label == predicted.nodes[p].label;
      const bool unanchored = gold_chars[g].empty() && pred_chars[p].empty();
      if (overlap == 0 && !(same && (gold.nodes[g].label || unanchored))) continue;
      const int a = gold.nodes[g].id;
      const int b = predicted.nodes[p].id;
      candidates.push_back({overlap, same, std::min(a, b), std::max(a, b),
                            static_cast<int>(g), static_cast<int>(p)});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(y.overlap, y.same_label, x.low_id, x.high_id, x.gold_index, x.pred_index) <
           std::tie(x.overlap, x.same_label, y.low_id, y.high_id, y.gold_index, y.pred_index);
  });

  std::vector<int> pred_to_gold(predicted.nodes.size(), -1);
  std::vector<char> gold_used(gold.nodes.size(), 0);
  for (const auto& c : candidates) {
    if (gold_used[c.gold_index] || pred_to_gold[c.pred_index] >= 0) continue;
    gold_used[c.gold_index] = 1;
    pred_to_gold[c.pred_index] = c.gold_index;
  }
  return pred_to_gold;
}

ScoreReport score_pair(const Graph& gold, const Graph& predicted) {
  if (gold.input != predicted.input) {
    throw DataError("score_pair: graphs '" + gold.id + "' and '" + predicted.id +
                    "' are for different inputs");
  }
  const auto pred_to_gold = align_nodes(gold, predicted);
  std::vector<long> gold_identity(gold.nodes.size());
  for (std::size_t g = 0; g < gold.nodes.size(); ++g) gold_identity[g] = static_cast<long>(g);
  std::vector<long> pred_identity(predicted.nodes.size());
  for (std::size_t p = 0; p < predicted.nodes.size(); ++p) {
    pred_identity[p] = pred_to_gold[p] >= 0 ? pred_to_gold[p] : -1 - static_cast<long>(p);
  }
  const auto gold_tuples = collect(gold, gold_identity);
  const auto pred_tuples = collect(predicted, pred_identity);

  ScoreReport report;
  for (int m = 0; m < 6; ++m) {
    report.counts[m].gold = total(gold_tuples[m]);
    report.counts[m].predicted = total(pred_tuples[m]);
    report.counts[m].matched = intersection(gold_tuples[m], pred_tuples[m]);
  }
  return report;
}

ScoreReport aggregate(std::span<const ScoreReport> reports) {
  ScoreReport out;
  for (const auto& r : reports) {
    for (int m = 0; m < 6; ++m) out.counts[m] += r.counts[m];
  }
  return out;
}

}  // namespace perin
