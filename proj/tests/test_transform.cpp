#include <doctest.h>

#include <algorithm>

#include "perin/config.hpp"
#include "perin/error.hpp"
#include "perin/transform.hpp"
#include "support.hpp"

using namespace perin;
using perin::testing::fixture;
using perin::testing::fixture_names;
using perin::testing::load_fixture;

namespace {

bool has_edge(const Graph& g, int s, int t, const std::string& label) {
  return std::any_of(g.edges.begin(), g.edges.end(), [&](const Edge& e) {
    return e.source == s && e.target == t && e.label == label;
  });
}

std::size_t property_count(const Graph& g) {
  std::size_t n = 0;
  for (const auto& node : g.nodes) n += node.properties.size();
  return n;
}

}  // namespace

TEST_CASE("nodeify: quant:2 becomes a node") {
  const Graph g = fixture("amr.jsonl");
  const auto [out, trace] = nodeify_properties(g);
  CHECK(out.nodes.size() == g.nodes.size() + 1);
  CHECK(out.edges.size() == g.edges.size() + 1);
  const Node* value = out.find_node(5);
  REQUIRE(value != nullptr);
  CHECK(value->label == "2");
  CHECK(has_edge(out, 1, 5, "quant"));
  CHECK(out.find_node(1)->properties.empty());
  REQUIRE(trace.nodeified.size() == 1);
  CHECK(trace.nodeified[0] == NodeifiedProperty{1, "quant", 5});
}

TEST_CASE("nodeify: value nodes copy the parent's anchors") {
  const Graph g = fixture("eds.jsonl");
  const auto [out, trace] = nodeify_properties(g);
  REQUIRE(trace.nodeified.size() == 1);
  const Node* value = out.find_node(trace.nodeified[0].node);
  CHECK(value->label == "Kim");
  CHECK(value->anchors == g.find_node(1)->anchors);
}

TEST_CASE("nodeify: no properties is identity") {
  Graph g = fixture("ucca.jsonl");
  const auto [out, trace] = nodeify_properties(g);
  CHECK(out == g);
  CHECK(trace.empty());
}

TEST_CASE("nodeify: counts match an independent walk") {
  Graph g = fixture("eds.jsonl");
  g.nodes[2].properties = {{"tense", "past"}, {"mood", "indicative"}, {"perf", "-"}};
  const auto expected = property_count(g);
  CHECK(expected == 4);
  const auto [out, trace] = nodeify_properties(g);
  CHECK(out.nodes.size() == g.nodes.size() + expected);
  CHECK(out.edges.size() == g.edges.size() + expected);
  CHECK(property_count(out) == 0);
  // new ids continue from max + 1 in creation order
  for (std::size_t i = 0; i < trace.nodeified.size(); ++i) {
    CHECK(trace.nodeified[i].node == 4 + static_cast<int>(i));
  }
}

TEST_CASE("denodeify inverts nodeify on every fixture") {
  for (const auto& name : fixture_names()) {
    CAPTURE(name);
    const Graph g = fixture(name);
    const auto [out, trace] = nodeify_properties(g);
    CHECK(denodeify_properties(out, trace) == g);
    CHECK(denodeify_properties(g, {}) == g);
  }
}

TEST_CASE("denodeify rejects a trace naming a deleted node") {
  const Graph g = fixture("amr.jsonl");
  auto [out, trace] = nodeify_properties(g);
  out.nodes.pop_back();
  out.edges.pop_back();
  CHECK_THROWS_AS(denodeify_properties(out, trace), DataError);
}

TEST_CASE("de-inversion: ARG0-of") {
  Graph g;
  g.framework = Framework::kAmr;
  g.input = "x";
  g.nodes = {Node{.id = 0, .label = "a"}, Node{.id = 1, .label = "b"}};
  g.edges = {Edge{0, 1, "ARG0-of"}};
  const auto [out, trace] = normalize_inverted_edges(g);
  REQUIRE(out.edges.size() == 1);
  CHECK(out.edges[0].source == 1);
  CHECK(out.edges[0].target == 0);
  CHECK(out.edges[0].label == "ARG0");
  REQUIRE(trace.deinverted.size() == 1);
  CHECK(trace.deinverted[0].edge == 0);
}

TEST_CASE("de-inversion: mod is domain-of") {
  const Graph g = fixture("amr.jsonl");
  const auto [out, trace] = normalize_inverted_edges(g);
  CHECK(out.edges.size() == g.edges.size());
  CHECK(out.nodes.size() == g.nodes.size());
  CHECK(has_edge(out, 2, 1, "domain"));
  CHECK(has_edge(out, 3, 0, "domain"));
  CHECK(has_edge(out, 4, 0, "ARG1"));
  CHECK(has_edge(out, 0, 1, "domain"));  // untouched
  CHECK(trace.deinverted.size() == 3);
}

TEST_CASE("de-inversion: alias table comes from configuration") {
  const auto config = FrameworkConfig::from(KeyValueConfig::parse("inversion.alias.owner = poss-of\n"));
  Graph g;
  g.input = "x";
  g.nodes = {Node{.id = 0}, Node{.id = 1}};
  g.edges = {Edge{0, 1, "mod"}, Edge{0, 1, "owner"}};
  const auto [out, trace] = normalize_inverted_edges(g, config.inversion);
  // a configured table replaces the default one
  CHECK(out.edges[0].label == "mod");
  CHECK(out.edges[1].label == "poss");
  CHECK(out.edges[1].source == 1);
}

TEST_CASE("de-inversion: nothing to do is identity") {
  const Graph g = fixture("eds.jsonl");
  const auto [out, trace] = normalize_inverted_edges(g);
  CHECK(out == g);
  CHECK(trace.empty());
}

TEST_CASE("de-inversion is idempotent on every fixture") {
  for (const auto& name : fixture_names()) {
    CAPTURE(name);
    const Graph once = normalize_inverted_edges(fixture(name)).first;
    const auto [twice, trace] = normalize_inverted_edges(once);
    CHECK(twice == once);
    CHECK(trace.deinverted.empty());
  }
}

TEST_CASE("de-inversion: unknown -of labels are flagged, not reversed") {
  InversionConfig config;
  config.known_labels = std::set<std::string>{"ARG0"};
  Graph g;
  g.input = "x";
  g.nodes = {Node{.id = 0}, Node{.id = 1}};
  g.edges = {Edge{0, 1, "ARG0-of"}, Edge{0, 1, "consist-of"}};
  const auto [out, trace] = normalize_inverted_edges(g, config);
  CHECK(out.edges[0].label == "ARG0");
  CHECK(out.edges[1].label == "consist-of");
  CHECK(out.edges[1].source == 0);
  CHECK(trace.flagged == std::vector<int>{1});
}

TEST_CASE("restoring inversions keeps every node reachable from the top") {
  const Graph g = fixture("amr.jsonl");
  const Graph normalized = normalize_inverted_edges(g).first;
  const Graph restored = restore_inverted_edges(normalized);
  // that/comedy/crazy-03 point into the tree after normalization; restoring
  // makes them children again
  CHECK(has_edge(restored, 1, 2, "mod"));
  CHECK(has_edge(restored, 0, 3, "mod"));
  CHECK(has_edge(restored, 0, 4, "ARG1-of"));
  CHECK(has_edge(restored, 0, 1, "domain"));
}

TEST_CASE("AMR preprocess and postprocess") {
  const Graph g = fixture("amr.jsonl");
  const auto [out, trace] = preprocess(Framework::kAmr, g);
  CHECK(out.nodes.size() == 6);
  CHECK(has_edge(out, 1, 5, "quant"));
  CHECK(has_edge(out, 2, 1, "domain"));
  CHECK(trace.deinverted.size() == 3);
  CHECK(postprocess(Framework::kAmr, out, trace) == g);
}

TEST_CASE("PTG properties stay native") {
  const Graph g = fixture("ptg.jsonl");
  const auto [out, trace] = preprocess(Framework::kPtg, g);
  CHECK(out == g);
  CHECK(trace.empty());
}

TEST_CASE("UCCA augmentation") {
  SUBCASE("single node") {
    Graph g;
    g.input = "a";
    g.nodes = {Node{.id = 0, .anchors = {{0, 1}}}};
    CHECK(ucca_augment(g).nodes[0].label == "leaf");
  }
  SUBCASE("parent over two leaves") {
    Graph g;
    g.input = "abc defgh";
    g.nodes = {Node{.id = 0}, Node{.id = 1, .anchors = {{0, 3}}}, Node{.id = 2, .anchors = {{4, 8}}}};
    g.edges = {Edge{0, 1, "A"}, Edge{0, 2, "B"}};
    const Graph out = ucca_augment(g);
    CHECK(out.nodes[0].label == "inner");
    CHECK(out.nodes[0].anchors == std::vector<Anchor>{{0, 3}, {4, 8}});
  }
  SUBCASE("chain") {
    Graph g;
    g.input = "ab";
    g.nodes = {Node{.id = 0}, Node{.id = 1}, Node{.id = 2, .anchors = {{0, 2}}}};
    g.edges = {Edge{0, 1, "A"}, Edge{1, 2, "B"}};
    const Graph out = ucca_augment(g);
    CHECK(out.nodes[0].label == "inner");
    CHECK(out.nodes[1].label == "inner");
    CHECK(out.nodes[2].label == "leaf");
  }
  SUBCASE("cycle") {
    Graph g;
    g.input = "ab";
    g.nodes = {Node{.id = 0}, Node{.id = 1}};
    g.edges = {Edge{0, 1, "A"}, Edge{1, 0, "B"}};
    CHECK_THROWS_AS(ucca_augment(g), DataError);
  }
  SUBCASE("fixture: inner anchors cover every child") {
    const Graph out = preprocess(Framework::kUcca, fixture("ucca.jsonl")).first;
    for (const auto& e : out.edges) {
      const auto& parent = out.find_node(e.source)->anchors;
      for (const auto& a : out.find_node(e.target)->anchors) {
        CHECK(std::find(parent.begin(), parent.end(), a) != parent.end());
      }
    }
    CHECK(postprocess(Framework::kUcca, out, {}) == fixture("ucca.jsonl"));
  }
}

TEST_CASE("DRG relation reduction") {
  SUBCASE("path x -> R -> y") {
    Graph g;
    g.input = "x";
    g.nodes = {Node{.id = 0, .label = "x"}, Node{.id = 1, .label = "R"}, Node{.id = 2, .label = "y"}};
    g.edges = {Edge{0, 1, "arg1"}, Edge{1, 2, "arg2"}};
    const Graph out = drg_reduce_binary_relations(g, {"R"});
    CHECK(out.nodes.size() == 2);
    REQUIRE(out.edges.size() == 1);
    CHECK(out.edges[0] == Edge{0, 2, "R"});
  }
  SUBCASE("no relation nodes") {
    const Graph g = fixture("drg.jsonl");
    CHECK(drg_reduce_binary_relations(g, {"Theme"}) == g);
  }
  SUBCASE("two outgoing edges") {
    Graph g;
    g.input = "x";
    g.nodes = {Node{.id = 0, .label = "R"}, Node{.id = 1}, Node{.id = 2}};
    g.edges = {Edge{0, 1, ""}, Edge{0, 2, ""}};
    CHECK_THROWS_AS(drg_reduce_binary_relations(g, {"R"}), DataError);
  }
  SUBCASE("fixture: one node and one edge fewer per relation") {
    const Graph g = fixture("drg.jsonl");
    const Graph out = drg_reduce_binary_relations(g, {"Agent", "Name"});
    CHECK(out.nodes.size() == g.nodes.size() - 2);
    CHECK(out.edges.size() == g.edges.size() - 2);
    CHECK(has_edge(out, 2, 1, "Agent"));
    CHECK(has_edge(out, 1, 5, "Name"));
  }
}

TEST_CASE("EDS anchor hull") {
  Graph g;
  g.input = "abcdefghij";
  g.nodes = {Node{.id = 0, .anchors = {{0, 2}, {5, 9}}}, Node{.id = 1, .anchors = {{3, 4}}}, Node{.id = 2}};
  const Graph out = eds_merge_anchors(g);
  CHECK(out.nodes[0].anchors == std::vector<Anchor>{{0, 9}});
  CHECK(out.nodes[1].anchors == g.nodes[1].anchors);
  CHECK(out.nodes[2].anchors.empty());

  const auto [pre, trace] = preprocess(Framework::kEds, fixture("eds.jsonl"));
  for (const auto& n : pre.nodes) CHECK(n.anchors.size() <= 1);
  CHECK(pre.find_node(3)->anchors == std::vector<Anchor>{{11, 18}});
}

TEST_CASE("trace serialization") {
  const auto [out, trace] = preprocess(Framework::kAmr, fixture("amr.jsonl"));
  CHECK(trace_from_json(trace_to_json(trace)) == trace);
  CHECK_THROWS_AS(trace_from_json(Json::parse(R"({"nodeified":[{"parent":"x"}]})")), DataError);
}
