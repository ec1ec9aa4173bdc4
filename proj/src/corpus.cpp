#include "perin/corpus.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <string_view>

#include "perin/nn.hpp"
#include "perin/numerals.hpp"

namespace perin {

namespace {

constexpr std::array<std::string_view, 30> kNouns = {
    "boy",   "girl",  "dog",    "cat",   "apple", "book",   "ball",  "bird",
    "car",   "cake",  "song",   "letter", "picture", "tree", "flower", "horse",
    "friend", "window", "door", "table", "chair", "cup",    "river", "hill",
    "shoe",  "hat",   "kite",   "robot", "duck",  "rabbit"};

constexpr std::array<std::string_view, 8> kPlaces = {
    "park", "garden", "kitchen", "school", "house", "forest", "city", "beach"};

constexpr std::array<std::string_view, 12> kAdjectives = {
    "big", "small", "red", "old", "young", "happy",
    "tall", "green", "quiet", "strong", "bright", "little"};

// Stems whose progressive form is stem + "ing".
constexpr std::array<std::string_view, 28> kVerbs = {
    "sing",  "walk",  "read",  "jump",   "eat",   "play",  "paint",
    "call",  "watch", "help",  "cook",   "clean", "follow", "visit",
    "push",  "pull",  "kick",  "build",  "climb", "draw",  "carry",
    "throw", "catch", "hold",  "find",   "open",  "wash",  "teach"};

// Stems ending in "e" that drop it: "dive" -> "diving".
constexpr std::array<std::string_view, 8> kVerbsE = {
    "dive", "dance", "bake", "ride", "write", "chase", "like", "move"};

// Agent nouns: stem + "er".
constexpr std::array<std::string_view, 10> kAgents = {
    "teach", "sing", "play", "read", "paint", "walk", "build", "climb", "help", "clean"};

constexpr std::array<std::string_view, 3> kSmallCounts = {"two", "three", "four"};

template <std::size_t N>
std::string pick(Rng& rng, const std::array<std::string_view, N>& items) {
  return std::string(items[rng.below(static_cast<int>(N))]);
}

class Builder {
 public:
  explicit Builder(Graph& g) : g_(g) {}

  // Appends a token and returns its index.
  int word(const std::string& form) {
    if (!g_.input.empty() && form != ".") g_.input += ' ';
    const int from = static_cast<int>(g_.input.size());  // ASCII only
    g_.input += form;
    spans_.push_back({from, static_cast<int>(g_.input.size())});
    return static_cast<int>(spans_.size()) - 1;
  }

  int node(const std::string& label, const std::vector<int>& tokens) {
    Node n;
    n.id = static_cast<int>(g_.nodes.size());
    n.label = label;
    for (int t : tokens) n.anchors.push_back(spans_[t]);
    g_.nodes.push_back(std::move(n));
    return g_.nodes.back().id;
  }

  void edge(int source, int target, const std::string& label) {
    Edge e;
    e.source = source;
    e.target = target;
    e.label = label;
    g_.edges.push_back(std::move(e));
  }

  void property(int node, const std::string& name, const std::string& value) {
    g_.nodes[node].properties.push_back({name, value});
  }

 private:
  Graph& g_;
  std::vector<Anchor> spans_;
};

struct Verb {
  std::string progressive;
  std::string frame;
};

Verb pick_verb(Rng& rng) {
  const int total = static_cast<int>(kVerbs.size() + kVerbsE.size());
  const int i = rng.below(total);
  if (i < static_cast<int>(kVerbs.size())) {
    const std::string stem(kVerbs[i]);
    return {stem + "ing", stem + "-01"};
  }
  const std::string stem(kVerbsE[i - kVerbs.size()]);
  return {stem.substr(0, stem.size() - 1) + "ing", stem + "-01"};
}

// "the [adj] noun"; returns the noun node.
int noun_phrase(Rng& rng, Builder& b, bool allow_adjective) {
  b.word("the");
  int adjective_token = -1;
  std::string adjective;
  if (allow_adjective && rng.bernoulli(0.35)) {
    adjective = pick(rng, kAdjectives);
    adjective_token = b.word(adjective);
  }
  const std::string noun = pick(rng, kNouns);
  const int noun_node = b.node(noun, {b.word(noun)});
  if (adjective_token >= 0) {
    const int adjective_node = b.node(adjective, {adjective_token});
    b.edge(noun_node, adjective_node, "mod");
  }
  return noun_node;
}

Graph sentence(Rng& rng, int index, std::uint64_t seed) {
  Graph g;
  g.id = "toy-" + std::to_string(seed) + "-" + std::to_string(index);
  g.framework = Framework::kAmr;
  g.flavor = 1;
  Builder b(g);

  // Subject first in the sentence, attached to the main verb afterwards.
  int subject = -1;
  const double s = rng.uniform();
  if (s < 0.1) {
    subject = b.node("person", {b.word("someone")});
  } else if (s < 0.55) {
    subject = noun_phrase(rng, b, true);
  } else if (s < 0.75) {
    subject = noun_phrase(rng, b, true);
    b.word("who");
    b.word("is");
    const Verb v = pick_verb(rng);
    const int verb = b.node(v.frame, {b.word(v.progressive)});
    b.edge(subject, verb, "ARG0-of");
    if (rng.bernoulli(0.3)) b.edge(verb, noun_phrase(rng, b, false), "ARG1");
  } else {
    b.word("the");
    const std::string stem = pick(rng, kAgents);
    const int token = b.word(stem + "er");
    subject = b.node("person", {token});
    const int verb = b.node(stem + "-01", {token});
    b.edge(subject, verb, "ARG0-of");
  }

  b.word("is");
  const bool negated = rng.bernoulli(0.2);
  if (negated) b.word("not");
  const Verb v = pick_verb(rng);
  const int main = b.node(v.frame, {b.word(v.progressive)});
  g.nodes[main].is_top = true;
  if (negated) b.property(main, "polarity", "-");
  b.edge(main, subject, "ARG0");

  if (rng.bernoulli(0.85)) {
    const double o = rng.uniform();
    int object = -1;
    if (o < 0.45) {
      object = noun_phrase(rng, b, true);
    } else if (o < 0.65) {
      const int count = rng.below(static_cast<int>(kSmallCounts.size()));
      b.word(std::string(kSmallCounts[count]));
      const std::string noun = pick(rng, kNouns);
      object = b.node(noun, {b.word(noun + "s")});
      b.property(object, "quant", std::to_string(count + 2));
    } else if (o < 0.85) {
      const int value = 20 + rng.below(980);
      std::vector<int> tokens;
      const std::string words = spell_number(value);
      std::size_t start = 0;
      while (start <= words.size()) {
        const std::size_t end = std::min(words.find(' ', start), words.size());
        tokens.push_back(b.word(words.substr(start, end - start)));
        start = end + 1;
      }
      const std::string noun = pick(rng, kNouns);
      object = b.node(noun, {b.word(noun + "s")});
      b.edge(object, b.node(std::to_string(value), tokens), "quant");
    } else {
      object = b.node("thing", {b.word("something")});
    }
    b.edge(main, object, "ARG1");
  }

  if (rng.bernoulli(0.3)) {
    b.word("in");
    b.word("the");
    const std::string place = pick(rng, kPlaces);
    b.edge(main, b.node(place, {b.word(place)}), "location");
  }
  b.word(".");
  return g;
}

}  // namespace

std::vector<Graph> synth_corpus(std::uint64_t seed, int size) {
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  std::vector<Graph> out;
  out.reserve(size);
  for (int i = 0; i < size; ++i) out.push_back(sentence(rng, i, seed));
  return out;
}

}  // namespace perin
