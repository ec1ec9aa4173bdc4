#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "perin/graph.hpp"

namespace perin {

struct MetricCounts {
  long gold = 0;
  long predicted = 0;
  long matched = 0;

  // 0/0 is 0.
  double precision() const;
  double recall() const;
  double f1() const;

  MetricCounts& operator+=(const MetricCounts& other);
  bool operator==(const MetricCounts&) const = default;
};

enum class Metric { kTops, kLabels, kProperties, kAnchors, kEdges, kAttributes };
inline constexpr std::array<Metric, 6> kAllMetrics = {
    Metric::kTops,    Metric::kLabels, Metric::kProperties,
    Metric::kAnchors, Metric::kEdges,  Metric::kAttributes};

std::string_view to_string(Metric metric);

struct ScoreReport {
  std::array<MetricCounts, 6> counts{};

  MetricCounts& operator[](Metric m) { return counts[static_cast<int>(m)]; }
  const MetricCounts& operator[](Metric m) const { return counts[static_cast<int>(m)]; }

  // Mean F1 over metrics with at least one gold or predicted tuple.
  double macro_f1() const;
  Json to_json() const;
};

// Greedy node alignment: pairs ordered by shared anchored characters, then
// label equality, then lower ids. Pairs with no shared character are only
// aligned when their labels agree; two unlabeled nodes agree only when both
// are unanchored. Returns, per predicted node index, the
// aligned gold node index or -1.
std::vector<int> align_nodes(const Graph& gold, const Graph& predicted);

// Tuple counts per metric under the alignment above. Attributes are counted
// per (edge, attribute, value) triple. Throws DataError when the two graphs
// are for different inputs.
ScoreReport score_pair(const Graph& gold, const Graph& predicted);

// Micro-average: sums the counts.
ScoreReport aggregate(std::span<const ScoreReport> reports);

}  // namespace perin
