#pragma once

#include <cstdint>
#include <vector>

#include "perin/graph.hpp"

namespace perin {

// Deterministic toy AMR-style corpus (anchored, flavor 1). Each graph
// carries its sentence in `input`. The grammar covers:
//   - progressive verbs ("eating" -> eat-01, "diving" -> dive-01)
//   - plural nouns, small counts as quant properties ("two apples")
//   - larger word numerals as number nodes ("forty two" -> 42)
//   - "someone" / "something" -> person / thing
//   - negation as a polarity property
//   - adjectives through "mod", relative clauses and agent nouns
//     ("teacher" -> person :ARG0-of teach-01) through inverted edges
//   - prepositional locations
std::vector<Graph> synth_corpus(std::uint64_t seed, int size);

}  // namespace perin
