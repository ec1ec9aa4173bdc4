#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "perin/config.hpp"
#include "perin/graph.hpp"
#include "perin/heads.hpp"
#include "perin/nn.hpp"
#include "perin/rules.hpp"

namespace perin {

struct TrainConfig {
  // Sizes.
  int dim = 64;
  int queries_per_token = 2;
  int layers = 2;
  int ffn_hidden = 128;
  int biaffine_hidden = 32;
  int mos_components = 2;
  int max_positions = 64;

  // Data.
  std::uint64_t seed = 1;
  int corpus_size = 500;
  int heldout = 50;
  Framework framework = Framework::kAmr;

  // Optimization. Full-scale values were warmup 6000, freeze 2000 and peak
  // rates 6e-5 / 6e-4; these are toy-scale.
  int epochs = 30;
  int batch_size = 8;
  double lr_encoder = 1e-3;
  double lr_rest = 3e-3;
  int warmup = 200;
  int freeze = 50;
  double weight_decay_encoder = 1e-6;
  double weight_decay = 1e-6;
  double layer_dropout = 0.1;
  double grad_clip = 1.0;  // global gradient norm; 0 disables

  // Losses and matching.
  double focal_gamma = 2.0;
  double label_smoothing = 0.1;
  double mask_epsilon = 1e-8;
  bool anchor_mask = true;
  bool multi_label_edges = false;
  bool edge_attributes = false;
  bool predict_top = true;
  bool balance_losses = true;
  double balance_alpha = 1.5;
  double balance_lr = 0.025;

  // Wall-clock budget in seconds for train(); 0 disables it.
  double time_limit = 0.0;

  // Keys are the field names above (e.g. `dim`, `lr_rest`, `framework`).
  // Throws ConfigError on unknown keys or invalid values.
  static TrainConfig from(const KeyValueConfig& config);
  Json to_json() const;
  static TrainConfig from_json(const Json& object);
};

// (encoder rate, rest rate). The encoder is frozen for `freeze` steps, both
// groups warm up linearly over `warmup` steps and then decay with the
// inverse square root.
std::pair<double, double> lr_schedule(long step, const TrainConfig& config);

class Vocabulary {
 public:
  static constexpr int kUnknown = 0;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& words);

  int id(const std::string& word) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

struct EncodeCache {
  std::vector<int> ids;
  std::vector<int> positions;
  std::vector<EncoderLayer::Cache> layers;
  std::vector<Matrix> outputs;  // per layer
  std::vector<char> dropped;
  RowVector mixing;             // softmax over surviving layers
  Matrix mixed;
  LayerNorm::Cache norm;
};

struct QueryCache {
  Matrix tokens;
  std::vector<Matrix> activations;  // per slot, tanh outputs
};

struct ForwardCache {
  EncodeCache encode;
  QueryCache queries;
  DecoderBlock::Cache decoder;
  MixtureOfSoftmaxes::Cache label;
  DeepBiaffine::Cache anchor;
  Matrix tokens;  // e
  Matrix states;  // h
};

// Embedding table + positions, L pre-norm self-attention layers mixed by
// softmax weights and layer-normalized, Q query projections per token, one
// decoder block and the heads.
class ToyModel {
 public:
  ToyModel(const TrainConfig& config, Vocabulary vocabulary, RuleTable rules,
           std::vector<std::string> edge_labels);

  const TrainConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  const RuleTable& rules() const { return rules_; }
  const std::vector<std::string>& edge_labels() const { return edge_labels_; }

  void init(Rng& rng);

  // e = LayerNorm(sum_l softmax(w)_l e_l). With `dropout_rng`, each layer's
  // logit is replaced by -inf with the configured rate (never all of them).
  Matrix encode(const std::vector<std::string>& tokens, EncodeCache& cache,
                Rng* dropout_rng = nullptr) const;
  void encode_backward(const EncodeCache& cache, const Matrix& grad);

  // Row i * Q + t is tanh(W_t e_i + b_t).
  Matrix make_queries(const Matrix& tokens, QueryCache& cache) const;
  Matrix queries_backward(const QueryCache& cache, const Matrix& grad);
  std::vector<int> source_tokens(int num_tokens) const;

  ParamList encoder_params();
  ParamList rest_params();
  ParamList all_params();
  void zero_grad();

  // Checkpoint plus a JSON sidecar (`path` + ".meta.json") with the config,
  // vocabulary, rule table and edge labels.
  void save(const std::string& path);
  static ToyModel load(const std::string& path);

  Param embeddings;
  Param positions;
  std::vector<EncoderLayer> layers;
  Param mixing;  // 1 x L logits
  LayerNorm mix_norm;
  std::vector<Linear> query_proj;
  DecoderBlock decoder;
  MixtureOfSoftmaxes label_head;
  AnchorHead anchor_head;
  EdgeHeads edge_heads;
  PropertyHead property_head;
  TopHead top_head;

 private:
  TrainConfig config_;
  Vocabulary vocabulary_;
  RuleTable rules_;
  std::vector<std::string> edge_labels_;
};

}  // namespace perin
