#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "perin/corpus.hpp"
#include "perin/trainer.hpp"

namespace perin::testing {

inline TrainConfig small_config() {
  TrainConfig c;
  c.dim = 16;
  c.ffn_hidden = 24;
  c.biaffine_hidden = 8;
  c.corpus_size = 120;
  c.heldout = 20;
  c.epochs = 0;
  return c;
}

// An initialized, untrained model with the rules compiled from the corpus.
inline TrainResult untrained(const TrainConfig& config) { return train(config); }

inline Graph shuffle_nodes(Graph g, Rng& rng) {
  rng.shuffle(g.nodes);
  return g;
}

struct InvarianceResult {
  int batches = 0;
  double worst_loss_diff = 0.0;
  bool same_pairs = true;
};

// Per batch, total loss and the (query, node id) pairing before and after
// shuffling the gold node order of every sentence.
inline InvarianceResult permutation_invariance(ToyModel& model, const std::vector<Graph>& graphs,
                                               int batches, int batch_size, std::uint64_t seed) {
  Rng rng(seed);
  InvarianceResult r;
  const TaskValues weights = {1, 1, 1, 1, 1, 1, 1};
  for (int b = 0; b < batches; ++b) {
    double before = 0, after = 0;
    for (int k = 0; k < batch_size; ++k) {
      const Graph& g = graphs[rng.below(static_cast<int>(graphs.size()))];
      const auto original = sentence_loss(model, prepare_example(g, model));
      const auto shuffled = sentence_loss(model, prepare_example(shuffle_nodes(g, rng), model));
      before += original.total(weights);
      after += shuffled.total(weights);
      const std::set<std::pair<int, int>> a(original.pairs.begin(), original.pairs.end());
      const std::set<std::pair<int, int>> s(shuffled.pairs.begin(), shuffled.pairs.end());
      if (a != s) r.same_pairs = false;
    }
    r.worst_loss_diff = std::max(r.worst_loss_diff, std::abs(before - after));
    ++r.batches;
  }
  return r;
}

}  // namespace perin::testing
