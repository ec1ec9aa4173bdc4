#include "perin/transform.hpp"

#include <algorithm>
#include <numeric>
#include <functional>
#include <queue>
#include <unordered_map>

#include "perin/error.hpp"

namespace perin {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() > suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Graph without_nodes(const Graph& graph, const std::set<int>& removed_ids,
                    const std::set<std::size_t>& removed_edges) {
  Graph out = graph;
  out.nodes.clear();
  out.edges.clear();
  for (const auto& n : graph.nodes) {
    if (!removed_ids.count(n.id)) out.nodes.push_back(n);
  }
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    if (!removed_edges.count(i)) out.edges.push_back(graph.edges[i]);
  }
  return out;
}

}  // namespace

FrameworkConfig FrameworkConfig::from(const KeyValueConfig& config) {
  FrameworkConfig out;
  out.inversion.suffix = config.get_string("inversion.suffix", "-of");
  if (out.inversion.suffix.empty()) {
    throw ConfigError("inversion.suffix must be nonempty");
  }
  auto aliases = config.with_prefix("inversion.alias.");
  if (!aliases.empty()) out.inversion.aliases = aliases;
  if (config.has("inversion.known_labels")) {
    auto labels = config.get_list("inversion.known_labels");
    out.inversion.known_labels = std::set<std::string>(labels.begin(), labels.end());
  }
  for (auto& label : config.get_list("drg.relations")) {
    out.drg_relations.insert(label);
  }
  return out;
}

Json trace_to_json(const TransformTrace& trace) {
  Json nodeified = Json::array();
  for (const auto& p : trace.nodeified) {
    nodeified.push_back({{"parent", p.parent}, {"attribute", p.attribute}, {"node", p.node}});
  }
  Json deinverted = Json::array();
  for (const auto& d : trace.deinverted) {
    deinverted.push_back({{"edge", d.edge}, {"label", d.original_label}});
  }
  return {{"nodeified", nodeified},
          {"deinverted", deinverted},
          {"flagged", trace.flagged}};
}

TransformTrace trace_from_json(const Json& object) {
  TransformTrace trace;
  try {
    for (const auto& p : object.at("nodeified")) {
      trace.nodeified.push_back({p.at("parent").get<int>(),
                                 p.at("attribute").get<std::string>(),
                                 p.at("node").get<int>()});
    }
    for (const auto& d : object.at("deinverted")) {
      trace.deinverted.push_back({d.at("edge").get<int>(), d.at("label").get<std::string>()});
    }
    trace.flagged = object.at("flagged").get<std::vector<int>>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed trace: ") + e.what());
  }
  return trace;
}

std::pair<Graph, TransformTrace> nodeify_properties(const Graph& graph) {
  Graph out = graph;
  TransformTrace trace;
  int next_id = graph.next_node_id();
  // parents in id order so the new ids do not depend on node storage order
  std::vector<std::size_t> order(out.nodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return out.nodes[a].id < out.nodes[b].id; });
  for (std::size_t i : order) {
    std::vector<Attribute> properties = std::move(out.nodes[i].properties);
    out.nodes[i].properties.clear();
    for (auto& p : properties) {
      Node child;
      child.id = next_id++;
      child.label = p.value;
      child.anchors = out.nodes[i].anchors;
      Edge edge;
      edge.source = out.nodes[i].id;
      edge.target = child.id;
      edge.label = p.name;
      trace.nodeified.push_back({out.nodes[i].id, p.name, child.id});
      out.nodes.push_back(std::move(child));
      out.edges.push_back(std::move(edge));
    }
  }
  return {std::move(out), std::move(trace)};
}

Graph denodeify_properties(const Graph& graph, const TransformTrace& trace) {
  Graph current = graph;
  for (const auto& p : trace.nodeified) {
    const int child_index = current.node_index(p.node);
    if (child_index < 0) {
      throw DataError("inconsistent trace: property node " +
                      std::to_string(p.node) + " is missing");
    }
    if (current.node_index(p.parent) < 0) {
      throw DataError("inconsistent trace: parent node " +
                      std::to_string(p.parent) + " is missing");
    }
    std::size_t edge_index = current.edges.size();
    for (std::size_t e = 0; e < current.edges.size(); ++e) {
      const auto& edge = current.edges[e];
      if (edge.source == p.parent && edge.target == p.node &&
          edge.label == p.attribute) {
        edge_index = e;
        break;
      }
    }
    if (edge_index == current.edges.size()) {
      throw DataError("inconsistent trace: no edge " + std::to_string(p.parent) +
                      " -" + p.attribute + "-> " + std::to_string(p.node));
    }
    const std::string value = current.nodes[child_index].label.value_or("");
    current = without_nodes(current, {p.node}, {edge_index});
    current.find_node(p.parent)->properties.push_back({p.attribute, value});
  }
  return current;
}

std::pair<Graph, TransformTrace> normalize_inverted_edges(
    const Graph& graph, const InversionConfig& config) {
  if (config.suffix.empty()) throw ConfigError("inversion suffix must be nonempty");
  Graph out = graph;
  TransformTrace trace;
  for (std::size_t i = 0; i < out.edges.size(); ++i) {
    Edge& edge = out.edges[i];
    std::string label = edge.label;
    if (auto alias = config.aliases.find(label); alias != config.aliases.end()) {
      label = alias->second;
    }
    int inversions = 0;
    while (ends_with(label, config.suffix)) {
      label.resize(label.size() - config.suffix.size());
      ++inversions;
    }
    if (inversions == 0) continue;
    if (config.known_labels && !config.known_labels->count(label)) {
      trace.flagged.push_back(static_cast<int>(i));
      continue;
    }
    trace.deinverted.push_back({static_cast<int>(i), edge.label});
    if (inversions % 2 == 1) std::swap(edge.source, edge.target);
    edge.label = label;
  }
  return {std::move(out), std::move(trace)};
}

Graph restore_inverted_edges(const Graph& graph, const InversionConfig& config) {
  Graph out = graph;
  std::set<int> reached;
  std::queue<int> frontier;
  for (const auto& n : out.nodes) {
    if (n.is_top) {
      reached.insert(n.id);
      frontier.push(n.id);
    }
  }
  if (reached.empty()) return out;

  std::map<std::string, std::string> unalias;
  for (const auto& [alias, inverted] : config.aliases) unalias[inverted] = alias;

  std::vector<bool> flipped(out.edges.size(), false);
  bool changed = true;
  while (changed) {
    changed = false;
    while (!frontier.empty()) {
      const int id = frontier.front();
      frontier.pop();
      for (const auto& e : out.edges) {
        if (e.source == id && reached.insert(e.target).second) {
          frontier.push(e.target);
        }
      }
    }
    for (std::size_t i = 0; i < out.edges.size(); ++i) {
      Edge& e = out.edges[i];
      if (flipped[i] || !reached.count(e.target) || reached.count(e.source)) {
        continue;
      }
      std::swap(e.source, e.target);
      std::string inverted = e.label + config.suffix;
      if (auto it = unalias.find(inverted); it != unalias.end()) {
        inverted = it->second;
      }
      e.label = inverted;
      flipped[i] = true;
      reached.insert(e.target);
      frontier.push(e.target);
      changed = true;
      break;
    }
  }
  return out;
}

Graph ucca_augment(const Graph& graph) {
  Graph out = graph;
  std::unordered_map<int, std::vector<int>> children;
  for (const auto& e : out.edges) children[e.source].push_back(e.target);

  // 0 = unvisited, 1 = on stack, 2 = done
  std::unordered_map<int, int> state;
  std::unordered_map<int, std::vector<Anchor>> anchors;
  std::function<const std::vector<Anchor>&(int)> visit =
      [&](int id) -> const std::vector<Anchor>& {
    int& s = state[id];
    if (s == 1) throw DataError("cycle through node " + std::to_string(id));
    if (s == 2) return anchors[id];
    s = 1;
    const Node* node = out.find_node(id);
    std::set<Anchor> merged;
    if (node != nullptr) merged.insert(node->anchors.begin(), node->anchors.end());
    for (int child : children[id]) {
      const auto& sub = visit(child);
      merged.insert(sub.begin(), sub.end());
    }
    state[id] = 2;
    return anchors[id] = std::vector<Anchor>(merged.begin(), merged.end());
  };

  for (const auto& n : out.nodes) visit(n.id);
  for (auto& n : out.nodes) {
    const bool leaf = children[n.id].empty();
    n.label = leaf ? "leaf" : "inner";
    if (!leaf) n.anchors = anchors[n.id];
  }
  return out;
}

Graph ucca_strip(const Graph& graph) {
  Graph out = graph;
  for (auto& n : out.nodes) {
    if (n.label == "inner") n.anchors.clear();
    if (n.label == "leaf" || n.label == "inner") n.label.reset();
  }
  return out;
}

Graph drg_reduce_binary_relations(const Graph& graph,
                                  const std::set<std::string>& relation_labels) {
  Graph current = graph;
  std::vector<int> relation_ids;
  for (const auto& n : graph.nodes) {
    if (n.label && relation_labels.count(*n.label)) relation_ids.push_back(n.id);
  }
  for (int id : relation_ids) {
    std::vector<std::size_t> incoming;
    std::vector<std::size_t> outgoing;
    for (std::size_t e = 0; e < current.edges.size(); ++e) {
      if (current.edges[e].target == id) incoming.push_back(e);
      if (current.edges[e].source == id) outgoing.push_back(e);
    }
    if (incoming.size() != 1 || outgoing.size() != 1) {
      throw DataError("relation node " + std::to_string(id) + " has " +
                      std::to_string(incoming.size()) + " incoming and " +
                      std::to_string(outgoing.size()) +
                      " outgoing edges; expected one of each");
    }
    Edge reduced;
    reduced.source = current.edges[incoming[0]].source;
    reduced.target = current.edges[outgoing[0]].target;
    reduced.label = *current.find_node(id)->label;
    current = without_nodes(current, {id}, {incoming[0], outgoing[0]});
    current.edges.push_back(std::move(reduced));
  }
  return current;
}

Graph eds_merge_anchors(const Graph& graph) {
  Graph out = graph;
  for (auto& n : out.nodes) {
    if (n.anchors.size() < 2) continue;
    Anchor hull = n.anchors.front();
    for (const auto& a : n.anchors) {
      hull.from = std::min(hull.from, a.from);
      hull.to = std::max(hull.to, a.to);
    }
    n.anchors = {hull};
  }
  return out;
}

std::pair<Graph, TransformTrace> preprocess(Framework framework,
                                            const Graph& graph,
                                            const FrameworkConfig& config) {
  switch (framework) {
    case Framework::kAmr: {
      auto [nodeified, trace] = nodeify_properties(graph);
      auto [normalized, inversions] =
          normalize_inverted_edges(nodeified, config.inversion);
      trace.deinverted = std::move(inversions.deinverted);
      trace.flagged = std::move(inversions.flagged);
      return {std::move(normalized), std::move(trace)};
    }
    case Framework::kDrg: {
      auto [nodeified, trace] = nodeify_properties(graph);
      return {drg_reduce_binary_relations(nodeified, config.drg_relations),
              std::move(trace)};
    }
    case Framework::kEds: {
      auto [nodeified, trace] = nodeify_properties(graph);
      return {eds_merge_anchors(nodeified), std::move(trace)};
    }
    case Framework::kPtg:
      return {graph, TransformTrace{}};
    case Framework::kUcca:
      return {ucca_augment(graph), TransformTrace{}};
  }
  return {graph, TransformTrace{}};
}

Graph postprocess(Framework framework, const Graph& graph,
                  const TransformTrace& trace, const FrameworkConfig& config) {
  switch (framework) {
    case Framework::kAmr: {
      Graph restored = graph;
      if (!trace.deinverted.empty()) {
        for (const auto& d : trace.deinverted) {
          if (d.edge < 0 || d.edge >= static_cast<int>(restored.edges.size())) {
            throw DataError("inconsistent trace: edge " + std::to_string(d.edge));
          }
          Edge& e = restored.edges[d.edge];
          std::string label = d.original_label;
          if (auto a = config.inversion.aliases.find(label);
              a != config.inversion.aliases.end()) {
            label = a->second;
          }
          int inversions = 0;
          while (ends_with(label, config.inversion.suffix)) {
            label.resize(label.size() - config.inversion.suffix.size());
            ++inversions;
          }
          if (inversions % 2 == 1) std::swap(e.source, e.target);
          e.label = d.original_label;
        }
      } else {
        restored = restore_inverted_edges(restored, config.inversion);
      }
      return denodeify_properties(restored, trace);
    }
    case Framework::kDrg:
      return denodeify_properties(graph, trace);
    case Framework::kEds:
      return denodeify_properties(eds_merge_anchors(graph), trace);
    case Framework::kPtg:
      return graph;
    case Framework::kUcca:
      return ucca_strip(graph);
  }
  return graph;
}

}  // namespace perin
