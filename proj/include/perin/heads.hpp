#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "perin/nn.hpp"

namespace perin {

enum class Task { kLabel, kAnchor, kEdgePresence, kEdgeLabel, kEdgeAttribute, kProperty, kTop };
inline constexpr int kNumTasks = 7;
std::string_view to_string(Task task);

struct LossGrad {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits
};

// Mean binary cross-entropy over all entries, from logits.
LossGrad bce_with_logits(const Matrix& logits, const Matrix& targets);
// Mean over rows of the cross-entropy between target rows and softmax(logits).
LossGrad softmax_cross_entropy(const Matrix& logits, const Matrix& targets);

// Focal-modulated cross-entropy of one predicted distribution against a
// (smoothed) target: (1 - p_t)^gamma * H(target, pred) with
// p_t = sum_r target_r pred_r. Writes d loss / d pred to `grad` when given.
// Throws std::invalid_argument when either input is not a distribution.
double label_loss(std::span<const double> pred, std::span<const double> target,
                  double gamma, std::span<double> grad = {});
// Mean of label_loss over rows; the gradient is with respect to the probs.
LossGrad label_loss_rows(const Matrix& probs, const Matrix& targets, double gamma);

// Mixture of softmaxes: x_k = tanh(W_k h + b_k), gates sigmoid-normalized,
// P = sum_k pi_k softmax(x_k w_r + b_r).
class MixtureOfSoftmaxes {
 public:
  struct Cache {
    Matrix h;
    std::vector<Matrix> x;       // per component, rows x dim
    std::vector<Matrix> probs;   // per component, rows x classes
    Matrix gate_sigmoid;         // rows x K
    Matrix gates;                // rows x K, normalized
  };

  MixtureOfSoftmaxes() = default;
  MixtureOfSoftmaxes(int dim, int classes, int components);

  // Throws std::domain_error when all gate sigmoids of a row underflow.
  Matrix forward(const Matrix& h, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& grad_probs);
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);
  int components() const { return static_cast<int>(proj.size()); }

  std::vector<Linear> proj;
  Linear gate;    // dim -> K
  Linear output;  // dim -> classes
};

// Deep biaffine attention: both sides pass through their own GELU MLP, get
// a constant 1 appended, and each class c scores pairs by [x,1] U_c [y,1]^T.
class DeepBiaffine {
 public:
  struct Cache {
    Matrix x, y;
    Matrix x_pre, y_pre;
    Matrix x_aug, y_aug;
  };

  DeepBiaffine() = default;
  DeepBiaffine(int dim, int hidden, int classes);

  std::vector<Matrix> forward(const Matrix& x, const Matrix& y, Cache& cache) const;
  // Returns (dL/dx, dL/dy).
  std::pair<Matrix, Matrix> backward(const Cache& cache, const std::vector<Matrix>& grad_scores);
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);
  int classes() const { return static_cast<int>(bilinear.size()); }

  Linear left, right;
  std::vector<Param> bilinear;  // (hidden+1) x (hidden+1) per class
};

// Query x token anchor logits; probabilities are their sigmoids.
class AnchorHead {
 public:
  AnchorHead() = default;
  AnchorHead(int dim, int hidden) : biaffine(dim, hidden, 1) {}

  Matrix forward(const Matrix& queries, const Matrix& tokens, DeepBiaffine::Cache& cache) const;
  std::pair<Matrix, Matrix> backward(const DeepBiaffine::Cache& cache, const Matrix& grad_logits);
  void init(Rng& rng) { biaffine.init(rng); }
  void collect(const std::string& prefix, ParamList& out) { biaffine.collect(prefix, out); }

  DeepBiaffine biaffine;
};

struct EdgeTargets {
  Matrix presence;  // n x n, 1 where an edge i -> j exists
  // Gold label classes and attribute class per connected ordered pair.
  std::map<std::pair<int, int>, std::vector<int>> labels;
  std::map<std::pair<int, int>, int> attributes;
};

struct EdgeLogits {
  Matrix presence;                 // n x n
  std::vector<Matrix> labels;      // per label class, n x n
  std::vector<Matrix> attributes;  // per attribute class, n x n; empty when off
};

struct EdgeLosses {
  double presence = 0.0;
  double label = 0.0;
  double attribute = 0.0;
  EdgeLogits grad;
};

// Presence, label and attribute biaffine heads over matched node states.
// Labels are either one softmax per pair or independent sigmoids per label.
class EdgeHeads {
 public:
  struct Cache {
    DeepBiaffine::Cache presence, label, attribute;
  };

  EdgeHeads() = default;
  EdgeHeads(int dim, int hidden, int label_classes, int attribute_classes, bool multi_label);

  EdgeLogits forward(const Matrix& nodes, Cache& cache) const;
  EdgeLosses losses(const EdgeLogits& logits, const EdgeTargets& targets) const;
  // Gradients for the three heads; returns dL/dnodes. `weights` scales the
  // three gradient parts.
  Matrix backward(const Cache& cache, const EdgeLogits& grad, double w_presence,
                  double w_label, double w_attribute);
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);
  bool has_attributes() const { return attribute.classes() > 0; }

  DeepBiaffine presence, label, attribute;
  bool multi_label = false;
};

// Binary "this node is a property" head, or in the PTG variant one softmax
// family per attribute type.
class PropertyHead {
 public:
  PropertyHead() = default;
  explicit PropertyHead(int dim) : binary(dim, 1) {}
  PropertyHead(int dim, const std::vector<int>& values_per_attribute);

  bool per_attribute() const { return !families.empty(); }
  // Binary variant: n x 1 logits. PTG variant: one n x V_a matrix per type.
  std::vector<Matrix> forward(const Matrix& nodes) const;
  Matrix backward(const Matrix& nodes, const std::vector<Matrix>& grad_logits);
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);

  Linear binary;
  std::vector<Linear> families;
};

// One logit per node, normalized across the sentence's nodes.
class TopHead {
 public:
  TopHead() = default;
  explicit TopHead(int dim) : score(dim, 1) {}

  Matrix forward(const Matrix& nodes) const;  // n x 1
  Matrix backward(const Matrix& nodes, const Matrix& grad_logits);
  // Softmax across nodes.
  static Eigen::VectorXd distribution(const Matrix& logits);
  // Cross-entropy against a distribution over nodes.
  static LossGrad loss(const Matrix& logits, const Eigen::VectorXd& target);
  void init(Rng& rng) { score.init(rng); }
  void collect(const std::string& prefix, ParamList& out) { score.collect(prefix, out); }

  Linear score;
};

double total_loss(std::span<const double> losses, std::span<const double> weights);

// One GradNorm step. `grad_norms` are the norms of the gradients of
// w_t * l_t over the shared parameters. Tasks with zero initial loss (or
// inactive ones, marked by a negative loss) keep their weight and are left
// out; the rest are renormalized to sum to their count. Returns the new
// weights and appends a line per excluded task to `warnings` when given.
std::vector<double> update_loss_weights(std::span<const double> grad_norms,
                                        std::span<const double> losses,
                                        std::span<const double> initial_losses,
                                        std::span<const double> weights, double alpha,
                                        double lr, std::vector<std::string>* warnings = nullptr);

class LossBalancer {
 public:
  LossBalancer(int tasks, double alpha = 1.5, double lr = 0.025);

  // Each task's first non-negative loss is recorded as its initial loss.
  void update(std::span<const double> grad_norms, std::span<const double> losses);
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& initial_losses() const { return initial_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void set_state(std::vector<double> weights, std::vector<double> initial);

 private:
  double alpha_;
  double lr_;
  std::vector<double> weights_;
  std::vector<double> initial_;
  std::vector<std::string> warnings_;
};

}  // namespace perin
