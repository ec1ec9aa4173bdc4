#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "perin/config.hpp"
#include "perin/graph.hpp"

namespace perin {

// Edge-inversion conventions (AMR).
struct InversionConfig {
  std::string suffix = "-of";
  // Labels that are inversions in disguise, e.g. "mod" is "domain-of".
  std::map<std::string, std::string> aliases = {{"mod", "domain-of"}};
  // When set, only labels whose stripped form is in this set are
  // de-inverted; the rest are left untouched and flagged.
  std::optional<std::set<std::string>> known_labels;
};

struct FrameworkConfig {
  InversionConfig inversion;
  std::set<std::string> drg_relations;

  // Keys: `inversion.suffix`, `inversion.alias.<label> = <inverted label>`
  // (any `inversion.alias.*` entry replaces the default table),
  // `inversion.known_labels` (comma list), `drg.relations` (comma list).
  static FrameworkConfig from(const KeyValueConfig& config);
};

struct NodeifiedProperty {
  int parent = 0;
  std::string attribute;
  int node = 0;  // id of the node created for the value

  bool operator==(const NodeifiedProperty&) const = default;
};

struct DeinvertedEdge {
  int edge = 0;  // index into the transformed graph's edges
  std::string original_label;

  bool operator==(const DeinvertedEdge&) const = default;
};

// Bookkeeping that makes the pre-processing reversible.
struct TransformTrace {
  std::vector<NodeifiedProperty> nodeified;
  std::vector<DeinvertedEdge> deinverted;
  std::vector<int> flagged;  // edges ending in the suffix but left alone

  bool empty() const {
    return nodeified.empty() && deinverted.empty() && flagged.empty();
  }
  bool operator==(const TransformTrace&) const = default;
};

Json trace_to_json(const TransformTrace& trace);
TransformTrace trace_from_json(const Json& object);

// Replaces every property of every node by a child node labeled with the
// value, anchored like its parent and attached by an edge labeled with the
// attribute. New ids continue from max(id) + 1, parents visited in id order.
std::pair<Graph, TransformTrace> nodeify_properties(const Graph& graph);

// Folds the traced nodes back into properties of their parents. Throws
// DataError when the trace does not match the graph.
Graph denodeify_properties(const Graph& graph, const TransformTrace& trace);

// Reverses every edge whose label carries the inversion suffix (or is an
// alias of such a label) and strips the suffix: a -ARG0-of-> b becomes
// b -ARG0-> a.
std::pair<Graph, TransformTrace> normalize_inverted_edges(
    const Graph& graph, const InversionConfig& config = {});

// Re-inverts normalized edges where that is needed for every node to be
// reachable from a top node; other edges keep the normalized direction.
Graph restore_inverted_edges(const Graph& graph,
                             const InversionConfig& config = {});

// Labels sinks "leaf" and the other nodes "inner"; inner nodes are anchored
// to the union of their descendants' anchors. Throws DataError on cycles.
Graph ucca_augment(const Graph& graph);

// Inverse of ucca_augment: drops the leaf/inner labels and inner anchors.
Graph ucca_strip(const Graph& graph);

// Replaces each relation node x -> R -> y by a single edge x -R-> y.
// Throws DataError when a relation node does not have exactly one incoming
// and one outgoing edge.
Graph drg_reduce_binary_relations(const Graph& graph,
                                  const std::set<std::string>& relation_labels);

// Replaces each node's anchors by their hull [min from, max to).
Graph eds_merge_anchors(const Graph& graph);

// Framework-specific canonicalization used for training.
std::pair<Graph, TransformTrace> preprocess(Framework framework,
                                            const Graph& graph,
                                            const FrameworkConfig& config = {});

// Restores the output form of a predicted or pre-processed graph.
Graph postprocess(Framework framework, const Graph& graph,
                  const TransformTrace& trace,
                  const FrameworkConfig& config = {});

}  // namespace perin
