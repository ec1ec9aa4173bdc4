#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace perin {

using Json = nlohmann::ordered_json;

enum class Framework { kAmr, kDrg, kEds, kPtg, kUcca };

std::string_view to_string(Framework framework);
// Throws ConfigError for names outside {amr, drg, eds, ptg, ucca}.
Framework framework_from_string(std::string_view name);

// Character span [from, to) counted in Unicode scalar values.
struct Anchor {
  int from = 0;
  int to = 0;

  auto operator<=>(const Anchor&) const = default;
};

// An attribute-value pair; node properties and edge attributes.
struct Attribute {
  std::string name;
  std::string value;

  bool operator==(const Attribute&) const = default;
};

struct Node {
  int id = 0;
  std::optional<std::string> label;
  std::vector<Attribute> properties;
  std::vector<Anchor> anchors;
  bool is_top = false;
  Json extra = Json::object();  // unknown fields, kept for round-trip

  bool operator==(const Node&) const = default;
};

struct Edge {
  int source = 0;
  int target = 0;
  std::string label;
  std::vector<Attribute> attributes;
  Json extra = Json::object();

  bool operator==(const Edge&) const = default;
};

struct Token {
  Anchor span;
  std::string form;
  std::string lemma;

  bool operator==(const Token&) const = default;
};

struct Graph {
  std::string id;
  Framework framework = Framework::kEds;
  int flavor = 1;
  std::string input;
  std::vector<Token> tokens;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  Json extra = Json::object();

  bool operator==(const Graph&) const = default;

  // Index into `nodes` of the node with this id, or -1.
  int node_index(int id) const;
  const Node* find_node(int id) const;
  Node* find_node(int id);
  // max(id) + 1 over all nodes; 0 for an empty graph.
  int next_node_id() const;
};

// Parses one line of MRP 2020 JSON Lines. Throws ParseError on malformed
// JSON and SchemaError on missing or mistyped fields and dangling edges.
Graph parse_graph(std::string_view line);

// Single-line JSON; anchors sorted by `from`, unknown fields re-emitted.
std::string serialize_graph(const Graph& graph);
Json graph_to_json(const Graph& graph);
Graph graph_from_json(const Json& object);

struct Violation {
  std::string rule;     // e.g. "anchor range", "duplicate node id"
  std::string subject;  // e.g. "node 3", "edge 0"
  std::string message;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate(const Graph& graph);

// Splits `text` on whitespace and separates ASCII punctuation into its own
// tokens. Lemmas default to the lowercased form.
std::vector<Token> tokenize(std::string_view text);

// Fills `graph.tokens` with tokenize(graph.input) when it is empty.
void ensure_tokens(Graph& graph);

// Indices of tokens whose span intersects any of the anchors.
std::vector<int> anchored_tokens(const std::vector<Token>& tokens,
                                 const std::vector<Anchor>& anchors);

}  // namespace perin
