#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "perin/eval.hpp"
#include "perin/hitting_set.hpp"
#include "perin/matcher.hpp"
#include "perin/model.hpp"
#include "perin/transform.hpp"

namespace perin {

// The label space compiled from a training corpus.
struct CompiledRules {
  RuleTable table;
  RuleSetProblem problem;
  std::vector<int> solution;
  std::size_t distinct_labels = 0;
  std::size_t nodes = 0;
};

// Pre-processes every graph, enumerates the applicable rules of every node
// and keeps a minimal set. Graphs without a token layer are tokenized.
CompiledRules compile_rules(const std::vector<Graph>& graphs, Framework framework,
                            const RuleSpaceBounds& bounds = {},
                            const std::string& cache_dir = "",
                            const FrameworkConfig& framework_config = {});

// A gold graph turned into matcher targets and head targets.
struct TrainingExample {
  Graph gold;
  Graph processed;
  TransformTrace trace;
  std::vector<std::string> forms;
  std::vector<std::string> lemmas;
  std::vector<TargetNode> targets;  // one per processed node
  std::vector<int> node_ids;
  std::vector<char> is_property;
  std::vector<char> is_top;
  // (source index, target index, label class or -1)
  std::vector<std::array<int, 3>> edges;
};

// Throws InfeasibleError when a node has no rule in the model's table.
TrainingExample prepare_example(const Graph& gold, const ToyModel& model,
                                const FrameworkConfig& framework_config = {});

using TaskValues = std::array<double, kNumTasks>;

struct StepOptions {
  bool backward = false;
  TaskValues weights = {1, 1, 1, 1, 1, 1, 1};
  double scale = 1.0;       // multiplies every gradient (1 / batch size)
  Rng* dropout = nullptr;   // layer dropout when set
  // Per task, gradient of weight * loss over the shared parameters
  // (last decoder feed-forward projection, bias as the last row).
  std::array<Matrix, kNumTasks>* shared_grads = nullptr;
  // Per task, gradient over the decoder output states (queries x dim).
  std::array<Matrix, kNumTasks>* state_grads = nullptr;
};

struct SentenceLoss {
  TaskValues losses{};  // -1 for tasks without targets in this sentence
  std::vector<std::pair<int, int>> pairs;  // (query, node id) for real nodes
  std::vector<std::string> warnings;

  double total(const TaskValues& weights) const;
};

// Forward pass, matching and all task losses for one sentence; with
// `backward`, accumulates weighted gradients into the model. Queries matched
// to null nodes only receive the label loss.
SentenceLoss sentence_loss(ToyModel& model, const TrainingExample& example,
                           const StepOptions& options = {});

struct EpochMetrics {
  int epoch = 0;
  long steps = 0;
  TaskValues losses{};
  TaskValues weights{};
  ScoreReport heldout;

  Json to_json() const;
};

struct TrainResult {
  ToyModel model;
  std::vector<EpochMetrics> epochs;
  CompiledRules rules;
  std::vector<Graph> heldout;
};

// Generates the synthetic corpus, compiles the rules, trains and reports
// held-out scores after every epoch through `on_epoch`. Throws DataError
// when a loss becomes non-finite.
TrainResult train(const TrainConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {},
                  const std::string& cache_dir = "");

// Parses one sentence: denies queries whose most probable class is null,
// decodes labels through the rule table, thresholds anchors and edges at
// 0.5, folds property nodes into their parents and post-processes.
Graph predict(const ToyModel& model, const std::string& sentence, const std::string& id = "");

ScoreReport evaluate_model(const ToyModel& model, const std::vector<Graph>& gold);

}  // namespace perin
