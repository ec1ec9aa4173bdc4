#include "perin/graph.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "perin/error.hpp"
#include "perin/utf8.hpp"

namespace perin {

namespace {

constexpr std::string_view kFrameworkNames[] = {"amr", "drg", "eds", "ptg",
                                                "ucca"};

const Json& require(const Json& object, const char* key,
                    const std::string& path) {
  auto it = object.find(key);
  if (it == object.end()) throw SchemaError(path + key, "missing");
  return *it;
}

int require_int(const Json& value, const std::string& field) {
  if (!value.is_number_integer()) throw SchemaError(field, "expected integer");
  return value.get<int>();
}

std::string require_string(const Json& value, const std::string& field) {
  if (!value.is_string()) throw SchemaError(field, "expected string");
  return value.get<std::string>();
}

// Reads the parallel `names`/`values` arrays used for both node properties
// and edge attributes.
std::vector<Attribute> read_pairs(const Json& object, const char* names_key,
                                  const std::string& path) {
  std::vector<Attribute> out;
  auto names = object.find(names_key);
  auto values = object.find("values");
  if (names == object.end() && values == object.end()) return out;
  if (names == object.end() || values == object.end()) {
    throw SchemaError(path + names_key,
                      std::string(names_key) + " and values must co-occur");
  }
  if (!names->is_array() || !values->is_array()) {
    throw SchemaError(path + names_key, "expected arrays");
  }
  if (names->size() != values->size()) {
    throw SchemaError(path + names_key,
                      std::string(names_key) + "/values length mismatch");
  }
  for (std::size_t i = 0; i < names->size(); ++i) {
    const std::string field = path + names_key + "[" + std::to_string(i) + "]";
    Attribute attribute;
    attribute.name = require_string((*names)[i], field);
    const Json& value = (*values)[i];
    // Values are occasionally numeric or boolean in the wild; keep their
    // textual form.
    attribute.value = value.is_string() ? value.get<std::string>() : value.dump();
    out.push_back(std::move(attribute));
  }
  return out;
}

std::vector<Anchor> read_anchors(const Json& array, const std::string& path) {
  if (!array.is_array()) throw SchemaError(path, "expected array");
  std::vector<Anchor> out;
  for (std::size_t i = 0; i < array.size(); ++i) {
    const std::string field = path + "[" + std::to_string(i) + "]";
    const Json& a = array[i];
    if (!a.is_object()) throw SchemaError(field, "expected object");
    Anchor anchor;
    anchor.from = require_int(require(a, "from", field + "."), field + ".from");
    anchor.to = require_int(require(a, "to", field + "."), field + ".to");
    out.push_back(anchor);
  }
  std::stable_sort(out.begin(), out.end());
  return out;
}

Json extra_fields(const Json& object,
                  std::initializer_list<std::string_view> known) {
  Json extra = Json::object();
  for (auto it = object.begin(); it != object.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      extra[it.key()] = it.value();
    }
  }
  return extra;
}

void write_pairs(Json& object, const char* names_key,
                 const std::vector<Attribute>& pairs) {
  if (pairs.empty()) return;
  Json names = Json::array();
  Json values = Json::array();
  for (const auto& p : pairs) {
    names.push_back(p.name);
    values.push_back(p.value);
  }
  object[names_key] = std::move(names);
  object["values"] = std::move(values);
}

bool is_punct(char32_t c) {
  return c < 0x80 && std::ispunct(static_cast<int>(c));
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == 0xA0;
}

}  // namespace

std::string_view to_string(Framework framework) {
  return kFrameworkNames[static_cast<int>(framework)];
}

Framework framework_from_string(std::string_view name) {
  for (int i = 0; i < 5; ++i) {
    if (kFrameworkNames[i] == name) return static_cast<Framework>(i);
  }
  throw ConfigError("unknown framework '" + std::string(name) + "'");
}

int Graph::node_index(int id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

const Node* Graph::find_node(int id) const {
  const int i = node_index(id);
  return i < 0 ? nullptr : &nodes[i];
}

Node* Graph::find_node(int id) {
  const int i = node_index(id);
  return i < 0 ? nullptr : &nodes[i];
}

int Graph::next_node_id() const {
  int next = 0;
  for (const auto& n : nodes) next = std::max(next, n.id + 1);
  return next;
}

Graph graph_from_json(const Json& object) {
  if (!object.is_object()) throw SchemaError("<root>", "expected object");
  Graph g;
  g.id = require_string(require(object, "id", ""), "id");
  g.flavor = require_int(require(object, "flavor", ""), "flavor");
  const std::string framework =
      require_string(require(object, "framework", ""), "framework");
  try {
    g.framework = framework_from_string(framework);
  } catch (const ConfigError& e) {
    throw SchemaError("framework", e.what());
  }
  g.input = require_string(require(object, "input", ""), "input");

  if (auto it = object.find("nodes"); it != object.end()) {
    if (!it->is_array()) throw SchemaError("nodes", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& n = (*it)[i];
      const std::string path = "nodes[" + std::to_string(i) + "].";
      if (!n.is_object()) throw SchemaError(path, "expected object");
      Node node;
      node.id = require_int(require(n, "id", path), path + "id");
      if (auto label = n.find("label"); label != n.end()) {
        node.label = require_string(*label, path + "label");
      }
      node.properties = read_pairs(n, "properties", path);
      if (auto anchors = n.find("anchors"); anchors != n.end()) {
        node.anchors = read_anchors(*anchors, path + "anchors");
      }
      node.extra = extra_fields(n, {"id", "label", "properties", "values",
                                    "anchors"});
      g.nodes.push_back(std::move(node));
    }
  }

  std::unordered_set<int> ids;
  for (const auto& n : g.nodes) ids.insert(n.id);

  if (auto it = object.find("tops"); it != object.end()) {
    if (!it->is_array()) throw SchemaError("tops", "expected array");
    for (const Json& t : *it) {
      const int id = require_int(t, "tops");
      Node* node = g.find_node(id);
      if (node == nullptr) {
        throw SchemaError("tops", "top node " + std::to_string(id) +
                                      " does not exist");
      }
      node->is_top = true;
    }
  }

  if (auto it = object.find("edges"); it != object.end()) {
    if (!it->is_array()) throw SchemaError("edges", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& e = (*it)[i];
      const std::string path = "edges[" + std::to_string(i) + "].";
      if (!e.is_object()) throw SchemaError(path, "expected object");
      Edge edge;
      edge.source = require_int(require(e, "source", path), path + "source");
      edge.target = require_int(require(e, "target", path), path + "target");
      for (int end : {edge.source, edge.target}) {
        if (!ids.count(end)) {
          throw SchemaError(path + (end == edge.source ? "source" : "target"),
                            "node " + std::to_string(end) + " does not exist");
        }
      }
      edge.label = require_string(require(e, "label", path), path + "label");
      edge.attributes = read_pairs(e, "attributes", path);
      edge.extra =
          extra_fields(e, {"source", "target", "label", "attributes", "values"});
      g.edges.push_back(std::move(edge));
    }
  }

  if (auto it = object.find("tokens"); it != object.end()) {
    if (!it->is_array()) throw SchemaError("tokens", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& t = (*it)[i];
      const std::string path = "tokens[" + std::to_string(i) + "].";
      if (!t.is_object()) throw SchemaError(path, "expected object");
      Token token;
      token.span.from = require_int(require(t, "from", path), path + "from");
      token.span.to = require_int(require(t, "to", path), path + "to");
      token.form = require_string(require(t, "form", path), path + "form");
      if (auto lemma = t.find("lemma"); lemma != t.end()) {
        token.lemma = require_string(*lemma, path + "lemma");
      } else {
        token.lemma = utf8::to_lower(token.form);
      }
      g.tokens.push_back(std::move(token));
    }
  }

  g.extra = extra_fields(object, {"id", "flavor", "framework", "input", "tops",
                                  "nodes", "edges", "tokens"});
  return g;
}

Graph parse_graph(std::string_view line) {
  Json object;
  try {
    object = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ParseError("malformed JSON", e.byte);
  }
  return graph_from_json(object);
}

Json graph_to_json(const Graph& g) {
  Json out = Json::object();
  out["id"] = g.id;
  out["flavor"] = g.flavor;
  out["framework"] = std::string(to_string(g.framework));
  out["input"] = g.input;
  Json tops = Json::array();
  for (const auto& n : g.nodes) {
    if (n.is_top) tops.push_back(n.id);
  }
  out["tops"] = std::move(tops);

  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    Json node = Json::object();
    node["id"] = n.id;
    if (n.label) node["label"] = *n.label;
    write_pairs(node, "properties", n.properties);
    if (!n.anchors.empty()) {
      std::vector<Anchor> sorted = n.anchors;
      std::stable_sort(sorted.begin(), sorted.end());
      Json anchors = Json::array();
      for (const auto& a : sorted) anchors.push_back({{"from", a.from}, {"to", a.to}});
      node["anchors"] = std::move(anchors);
    }
    for (auto it = n.extra.begin(); it != n.extra.end(); ++it) {
      node[it.key()] = it.value();
    }
    nodes.push_back(std::move(node));
  }
  out["nodes"] = std::move(nodes);

  Json edges = Json::array();
  for (const auto& e : g.edges) {
    Json edge = Json::object();
    edge["source"] = e.source;
    edge["target"] = e.target;
    edge["label"] = e.label;
    write_pairs(edge, "attributes", e.attributes);
    for (auto it = e.extra.begin(); it != e.extra.end(); ++it) {
      edge[it.key()] = it.value();
    }
    edges.push_back(std::move(edge));
  }
  out["edges"] = std::move(edges);

  if (!g.tokens.empty()) {
    Json tokens = Json::array();
    for (const auto& t : g.tokens) {
      tokens.push_back({{"from", t.span.from},
                        {"to", t.span.to},
                        {"form", t.form},
                        {"lemma", t.lemma}});
    }
    out["tokens"] = std::move(tokens);
  }
  for (auto it = g.extra.begin(); it != g.extra.end(); ++it) {
    out[it.key()] = it.value();
  }
  return out;
}

std::string serialize_graph(const Graph& graph) {
  return graph_to_json(graph).dump();
}

std::vector<Violation> validate(const Graph& g) {
  std::vector<Violation> out;
  const int length = static_cast<int>(utf8::length(g.input));

  if (g.flavor != 1 && g.flavor != 2) {
    out.push_back({"flavor", "graph " + g.id,
                   "flavor " + std::to_string(g.flavor) + " not in {1, 2}"});
  }

  std::set<int> seen;
  std::set<int> ids;
  for (const auto& n : g.nodes) {
    const std::string subject = "node " + std::to_string(n.id);
    if (!seen.insert(n.id).second) {
      out.push_back({"duplicate node id", subject,
                     "node id " + std::to_string(n.id) + " is not unique"});
    }
    ids.insert(n.id);
    for (const auto& a : n.anchors) {
      if (a.from < 0 || a.from >= a.to || a.to > length) {
        out.push_back({"anchor range", subject,
                       "anchor [" + std::to_string(a.from) + ", " +
                           std::to_string(a.to) + ") outside [0, " +
                           std::to_string(length) + ")"});
      }
    }
    std::set<std::string> attributes;
    for (const auto& p : n.properties) {
      if (!attributes.insert(p.name).second) {
        out.push_back({"duplicate property", subject,
                       "property '" + p.name + "' repeated"});
      }
    }
  }

  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const std::string subject = "edge " + std::to_string(i);
    if (!ids.count(e.source)) {
      out.push_back({"edge endpoint", subject,
                     "source " + std::to_string(e.source) + " does not exist"});
    }
    if (!ids.count(e.target)) {
      out.push_back({"edge endpoint", subject,
                     "target " + std::to_string(e.target) + " does not exist"});
    }
  }

  for (std::size_t i = 0; i < g.tokens.size(); ++i) {
    const auto& s = g.tokens[i].span;
    if (s.from < 0 || s.from >= s.to || s.to > length) {
      out.push_back({"token range", "token " + std::to_string(i),
                     "token span outside the input"});
    }
  }
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  const std::u32string chars = utf8::decode(text);
  std::vector<Token> tokens;
  auto emit = [&](std::size_t from, std::size_t to) {
    if (from >= to) return;
    Token t;
    t.span = {static_cast<int>(from), static_cast<int>(to)};
    t.form = utf8::encode(std::u32string_view(chars).substr(from, to - from));
    t.lemma = utf8::to_lower(t.form);
    tokens.push_back(std::move(t));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i <= chars.size(); ++i) {
    if (i == chars.size() || is_space(chars[i])) {
      emit(start, i);
      start = i + 1;
    } else if (is_punct(chars[i]) && chars[i] != U'-' && chars[i] != U'\'') {
      emit(start, i);
      emit(i, i + 1);
      start = i + 1;
    }
  }
  return tokens;
}

void ensure_tokens(Graph& graph) {
  if (graph.tokens.empty()) graph.tokens = tokenize(graph.input);
}

std::vector<int> anchored_tokens(const std::vector<Token>& tokens,
                                 const std::vector<Anchor>& anchors) {
  std::vector<int> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Anchor& span = tokens[i].span;
    for (const auto& a : anchors) {
      if (a.from < span.to && span.from < a.to) {
        out.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return out;
}

}  // namespace perin
