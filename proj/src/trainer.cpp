#include "perin/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include "perin/corpus.hpp"
#include "perin/error.hpp"

namespace perin {

namespace {

std::vector<std::string> pick(const std::vector<std::string>& items, const std::vector<int>& idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(items[i]);
  return out;
}

struct Tokens {
  std::vector<std::string> forms;
  std::vector<std::string> lemmas;
};

Tokens token_strings(const Graph& g) {
  Tokens t;
  for (const auto& tok : g.tokens) {
    t.forms.push_back(tok.form);
    t.lemmas.push_back(tok.lemma);
  }
  return t;
}

Matrix rows_of(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

void scatter_rows(Matrix& into, const std::vector<int>& rows, const Matrix& values) {
  for (std::size_t i = 0; i < rows.size(); ++i) into.row(rows[i]) += values.row(i);
}

bool task_active(const TrainConfig& c, Task t) {
  switch (t) {
    case Task::kEdgeAttribute:
      return c.edge_attributes;
    case Task::kTop:
      return c.predict_top && c.framework != Framework::kPtg &&
             c.framework != Framework::kUcca;
    default:
      return true;
  }
}

}  // namespace

CompiledRules compile_rules(const std::vector<Graph>& graphs, Framework framework,
                            const RuleSpaceBounds& bounds, const std::string& cache_dir,
                            const FrameworkConfig& framework_config) {
  RuleSetBuilder builder;
  std::set<std::string> labels;
  CompiledRules out;
  for (const Graph& original : graphs) {
    Graph g = original;
    ensure_tokens(g);
    const Graph processed = preprocess(framework, g, framework_config).first;
    const Tokens t = token_strings(processed);
    for (const auto& node : processed.nodes) {
      const auto idx = anchored_tokens(processed.tokens, node.anchors);
      const std::string label = node.label.value_or("");
      labels.insert(label);
      builder.add_node(
          enumerate_applicable_rules(pick(t.forms, idx), pick(t.lemmas, idx), label, bounds));
    }
  }
  out.problem = builder.build();
  out.solution = minimal_rule_set_cached(out.problem, cache_dir);
  std::vector<Rule> kept;
  for (int i : out.solution) kept.push_back(out.problem.rules[i]);
  out.table = RuleTable(std::move(kept));
  out.distinct_labels = labels.size();
  out.nodes = builder.num_nodes();
  return out;
}

TrainingExample prepare_example(const Graph& gold, const ToyModel& model,
                                const FrameworkConfig& framework_config) {
  TrainingExample ex;
  ex.gold = gold;
  ensure_tokens(ex.gold);
  auto [processed, trace] = preprocess(model.config().framework, ex.gold, framework_config);
  ex.processed = std::move(processed);
  ex.trace = std::move(trace);
  const Tokens t = token_strings(ex.processed);
  ex.forms = t.forms;
  ex.lemmas = t.lemmas;

  std::set<int> property_nodes;
  for (const auto& p : ex.trace.nodeified) property_nodes.insert(p.node);

  std::map<int, int> index_of;
  for (const auto& node : ex.processed.nodes) {
    const auto idx = anchored_tokens(ex.processed.tokens, node.anchors);
    TargetNode target;
    target.anchor_tokens = idx;
    const std::string label = node.label.value_or("");
    target.label_classes = model.rules().applicable(pick(ex.forms, idx), pick(ex.lemmas, idx), label);
    if (target.label_classes.empty()) {
      throw InfeasibleError("graph " + gold.id + ": node " + std::to_string(node.id) +
                            " label '" + label + "' has no rule in the table");
    }
    index_of[node.id] = static_cast<int>(ex.targets.size());
    ex.targets.push_back(std::move(target));
    ex.node_ids.push_back(node.id);
    ex.is_property.push_back(property_nodes.count(node.id) ? 1 : 0);
    ex.is_top.push_back(node.is_top ? 1 : 0);
  }
  const auto& labels = model.edge_labels();
  for (const auto& e : ex.processed.edges) {
    auto it = std::lower_bound(labels.begin(), labels.end(), e.label);
    const int cls = (it != labels.end() && *it == e.label) ? static_cast<int>(it - labels.begin()) : -1;
    ex.edges.push_back({index_of.at(e.source), index_of.at(e.target), cls});
  }
  return ex;
}

double SentenceLoss::total(const TaskValues& weights) const {
  double sum = 0.0;
  for (int t = 0; t < kNumTasks; ++t) {
    if (losses[t] >= 0.0) sum += weights[t] * losses[t];
  }
  return sum;
}

SentenceLoss sentence_loss(ToyModel& model, const TrainingExample& ex, const StepOptions& opt) {
  const TrainConfig& cfg = model.config();
  SentenceLoss result;
  result.losses.fill(-1.0);

  ForwardCache fc;
  const Matrix e = model.encode(ex.forms, fc.encode, opt.dropout);
  const Matrix q = model.make_queries(e, fc.queries);
  const Matrix h = model.decoder.forward(q, e, fc.decoder);
  const Matrix probs = model.label_head.forward(h, fc.label);
  const Matrix anchor_logits = model.anchor_head.forward(h, e, fc.anchor);
  const int queries = static_cast<int>(h.rows());
  const int tokens = static_cast<int>(e.rows());
  const int n = static_cast<int>(ex.targets.size());

  // Edge targets in target order.
  EdgeTargets edge_targets;
  edge_targets.presence = Matrix::Zero(n, n);
  for (const auto& [s, t, cls] : ex.edges) {
    edge_targets.presence(s, t) = 1.0;
    if (cls < 0) continue;
    auto& v = edge_targets.labels[{s, t}];
    if (std::find(v.begin(), v.end(), cls) == v.end()) v.push_back(cls);
    if (model.edge_heads.has_attributes()) edge_targets.attributes[{s, t}] = 0;
  }

  // Matching. The edge loss for tie-breaking is evaluated on all queries.
  QueryPredictions preds{probs, sigmoid(anchor_logits), model.source_tokens(tokens)};
  MatchConfig match_config;
  match_config.anchor_mask = cfg.anchor_mask;
  match_config.mask_epsilon = cfg.mask_epsilon;
  std::optional<EdgeLogits> all_edges;
  EdgeLoss edge_loss = [&](const std::vector<int>& perm) {
    if (!all_edges) {
      EdgeHeads::Cache scratch;
      all_edges = model.edge_heads.forward(h, scratch);
    }
    std::vector<int> query_of(n, -1);
    for (int i = 0; i < queries; ++i) {
      if (perm[i] < n) query_of[perm[i]] = i;
    }
    EdgeLogits sub;
    sub.presence.resize(n, n);
    for (const auto& m : all_edges->labels) {
      (void)m;
      sub.labels.emplace_back(n, n);
    }
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        sub.presence(a, b) = all_edges->presence(query_of[a], query_of[b]);
        for (std::size_t c = 0; c < sub.labels.size(); ++c) {
          sub.labels[c](a, b) = all_edges->labels[c](query_of[a], query_of[b]);
        }
      }
    }
    const EdgeLosses l = model.edge_heads.losses(sub, edge_targets);
    return l.presence + l.label;
  };
  const Alignment alignment = align_targets(preds, ex.targets, match_config, edge_loss);
  result.warnings = alignment.warnings;

  std::vector<int> matched(n, -1);
  for (int i = 0; i < queries; ++i) {
    const int j = alignment.target_of(i);
    if (j >= 0) matched[j] = i;
  }
  for (int j = 0; j < n; ++j) result.pairs.push_back({matched[j], ex.node_ids[j]});
  std::sort(result.pairs.begin(), result.pairs.end());

  // Label loss over every query.
  const auto classes = static_cast<Eigen::Index>(model.rules().num_classes());
  Matrix label_targets(queries, classes);
  for (int i = 0; i < queries; ++i) {
    const int j = alignment.target_of(i);
    const auto row = j >= 0 ? build_rule_target(ex.targets[j].label_classes, classes,
                                                cfg.label_smoothing)
                            : build_rule_target({}, classes, cfg.label_smoothing, true);
    for (Eigen::Index c = 0; c < classes; ++c) label_targets(i, c) = row[c];
  }
  const LossGrad label = label_loss_rows(probs, label_targets, cfg.focal_gamma);
  result.losses[static_cast<int>(Task::kLabel)] = label.loss;

  // Matched-node tasks.
  LossGrad anchor, property, top;
  EdgeLosses edges;
  EdgeHeads::Cache edge_cache;
  Matrix hn;
  const bool has_top = std::any_of(ex.is_top.begin(), ex.is_top.end(), [](char c) { return c; });
  if (n > 0) {
    Matrix gold_anchor = Matrix::Zero(n, tokens);
    for (int j = 0; j < n; ++j) {
      for (int t : ex.targets[j].anchor_tokens) gold_anchor(j, t) = 1.0;
    }
    anchor = bce_with_logits(rows_of(anchor_logits, matched), gold_anchor);
    result.losses[static_cast<int>(Task::kAnchor)] = anchor.loss;

    hn = rows_of(h, matched);
    const EdgeLogits edge_logits = model.edge_heads.forward(hn, edge_cache);
    edges = model.edge_heads.losses(edge_logits, edge_targets);
    result.losses[static_cast<int>(Task::kEdgePresence)] = edges.presence;
    if (!edge_targets.labels.empty()) {
      result.losses[static_cast<int>(Task::kEdgeLabel)] = edges.label;
    }
    if (model.edge_heads.has_attributes() && !edge_targets.attributes.empty()) {
      result.losses[static_cast<int>(Task::kEdgeAttribute)] = edges.attribute;
    }

    Matrix gold_property(n, 1);
    for (int j = 0; j < n; ++j) gold_property(j, 0) = ex.is_property[j];
    property = bce_with_logits(model.property_head.forward(hn)[0], gold_property);
    result.losses[static_cast<int>(Task::kProperty)] = property.loss;

    if (task_active(cfg, Task::kTop) && has_top) {
      Eigen::VectorXd target(n);
      double tops = 0;
      for (int j = 0; j < n; ++j) tops += ex.is_top[j];
      for (int j = 0; j < n; ++j) target(j) = ex.is_top[j] / tops;
      top = TopHead::loss(model.top_head.forward(hn), target);
      result.losses[static_cast<int>(Task::kTop)] = top.loss;
    }
  }
  for (double l : result.losses) {
    if (!std::isfinite(l)) {
      throw DataError("training diverged: non-finite loss on graph " + ex.gold.id);
    }
  }
  if (!opt.backward) return result;

  auto weight = [&](Task t) {
    return opt.weights[static_cast<int>(t)] * opt.scale;
  };
  const Eigen::Index d = h.cols();
  Matrix d_tokens = Matrix::Zero(tokens, d);
  std::array<Matrix, kNumTasks> d_states;
  for (auto& m : d_states) m = Matrix::Zero(queries, d);

  d_states[static_cast<int>(Task::kLabel)] =
      model.label_head.backward(fc.label, label.grad * weight(Task::kLabel));
  if (n > 0) {
    Matrix d_anchor = Matrix::Zero(queries, tokens);
    scatter_rows(d_anchor, matched, anchor.grad * weight(Task::kAnchor));
    auto [dh_anchor, de_anchor] = model.anchor_head.backward(fc.anchor, d_anchor);
    d_states[static_cast<int>(Task::kAnchor)] = std::move(dh_anchor);
    d_tokens += de_anchor;

    auto scatter = [&](Task t, const Matrix& d_nodes) {
      scatter_rows(d_states[static_cast<int>(t)], matched, d_nodes);
    };
    {
      auto [x, y] = model.edge_heads.presence.backward(
          edge_cache.presence, {edges.grad.presence * weight(Task::kEdgePresence)});
      scatter(Task::kEdgePresence, x + y);
    }
    if (result.losses[static_cast<int>(Task::kEdgeLabel)] >= 0.0) {
      std::vector<Matrix> g;
      for (const auto& m : edges.grad.labels) g.push_back(m * weight(Task::kEdgeLabel));
      auto [x, y] = model.edge_heads.label.backward(edge_cache.label, g);
      scatter(Task::kEdgeLabel, x + y);
    }
    if (result.losses[static_cast<int>(Task::kEdgeAttribute)] >= 0.0) {
      std::vector<Matrix> g;
      for (const auto& m : edges.grad.attributes) g.push_back(m * weight(Task::kEdgeAttribute));
      auto [x, y] = model.edge_heads.attribute.backward(edge_cache.attribute, g);
      scatter(Task::kEdgeAttribute, x + y);
    }
    scatter(Task::kProperty,
            model.property_head.backward(hn, {property.grad * weight(Task::kProperty)}));
    if (result.losses[static_cast<int>(Task::kTop)] >= 0.0) {
      scatter(Task::kTop, model.top_head.backward(hn, top.grad * weight(Task::kTop)));
    }
  }

  if (opt.state_grads) *opt.state_grads = d_states;
  Matrix d_h = Matrix::Zero(queries, d);
  for (int t = 0; t < kNumTasks; ++t) {
    if (result.losses[t] < 0.0) continue;
    d_h += d_states[t];
    if (opt.shared_grads) {
      const Matrix r = model.decoder.output_grad_to_residual(fc.decoder, d_states[t]);
      const Matrix& hidden = fc.decoder.ffn.hidden;
      Matrix& acc = (*opt.shared_grads)[t];
      if (acc.size() == 0) acc = Matrix::Zero(hidden.cols() + 1, d);
      acc.topRows(hidden.cols()) += hidden.transpose() * r;
      acc.row(hidden.cols()) += r.colwise().sum();
    }
  }
  auto [d_q, d_e] = model.decoder.backward(fc.decoder, d_h);
  d_tokens += d_e;
  d_tokens += model.queries_backward(fc.queries, d_q);
  model.encode_backward(fc.encode, d_tokens);
  return result;
}

Json EpochMetrics::to_json() const {
  Json losses_json = Json::object();
  Json weights_json = Json::object();
  for (int t = 0; t < kNumTasks; ++t) {
    if (losses[t] < 0.0) continue;
    const std::string name(to_string(static_cast<Task>(t)));
    losses_json[name] = losses[t];
    weights_json[name] = weights[t];
  }
  Json f1 = Json::object();
  for (Metric m : kAllMetrics) f1[std::string(to_string(m))] = heldout[m].f1();
  f1["macro"] = heldout.macro_f1();
  return Json{{"epoch", epoch},
              {"steps", steps},
              {"losses", losses_json},
              {"weights", weights_json},
              {"f1", f1}};
}

TrainResult train(const TrainConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch,
                  const std::string& cache_dir) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<Graph> corpus = synth_corpus(config.seed, config.corpus_size);
  const int train_size = config.corpus_size - config.heldout;
  std::vector<Graph> train_graphs(corpus.begin(), corpus.begin() + train_size);
  std::vector<Graph> heldout(corpus.begin() + train_size, corpus.end());

  CompiledRules rules = compile_rules(train_graphs, config.framework, {}, cache_dir);

  std::vector<std::string> words;
  std::set<std::string> edge_label_set;
  for (auto& g : train_graphs) {
    ensure_tokens(g);
    for (const auto& t : g.tokens) words.push_back(t.form);
  }
  Rng rng(config.seed);
  // Edge labels come from the pre-processed graphs.
  for (const auto& g : train_graphs) {
    for (const auto& e : preprocess(config.framework, g).first.edges) {
      edge_label_set.insert(e.label);
    }
  }
  ToyModel model(config, Vocabulary(words), rules.table,
                 std::vector<std::string>(edge_label_set.begin(), edge_label_set.end()));
  model.init(rng);

  std::vector<TrainingExample> examples;
  examples.reserve(train_graphs.size());
  for (const auto& g : train_graphs) examples.push_back(prepare_example(g, model));

  AdamW opt_encoder{.weight_decay = config.weight_decay_encoder};
  AdamW opt_rest{.weight_decay = config.weight_decay};
  LossBalancer balancer(kNumTasks, config.balance_alpha, config.balance_lr);
  TaskValues weights;
  weights.fill(1.0);

  TrainResult result{std::move(model), {}, std::move(rules), heldout};
  ToyModel& m = result.model;
  ParamList encoder = m.encoder_params();
  ParamList rest = m.rest_params();
  ParamList all = m.all_params();

  std::vector<int> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    TaskValues epoch_sum{};
    std::array<int, kNumTasks> epoch_count{};
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& [name, p] : all) p->zero_grad();
      std::array<Matrix, kNumTasks> shared;
      TaskValues batch_sum{};
      std::array<int, kNumTasks> batch_count{};
      for (std::size_t k = start; k < end; ++k) {
        StepOptions so;
        so.backward = true;
        so.weights = weights;
        so.scale = scale;
        so.dropout = &rng;
        so.shared_grads = &shared;
        const SentenceLoss l = sentence_loss(m, examples[order[k]], so);
        for (int t = 0; t < kNumTasks; ++t) {
          if (l.losses[t] < 0.0) continue;
          batch_sum[t] += l.losses[t];
          ++batch_count[t];
        }
      }
      if (config.grad_clip > 0.0) {
        double sq = 0.0;
        for (auto& [name, p] : all) sq += p->grad.squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > config.grad_clip) {
          for (auto& [name, p] : all) p->grad *= config.grad_clip / norm;
        }
      }
      const auto [lr_encoder, lr_rest] = lr_schedule(step, config);
      opt_encoder.update(encoder, lr_encoder);
      opt_rest.update(rest, lr_rest);
      ++step;

      TaskValues batch_loss;
      TaskValues norms;
      for (int t = 0; t < kNumTasks; ++t) {
        // Losses are means over the sentences where the task applies.
        batch_loss[t] = batch_count[t] ? batch_sum[t] / batch_count[t] : -1.0;
        norms[t] = shared[t].size() ? shared[t].norm() : 0.0;
        if (batch_count[t]) {
          epoch_sum[t] += batch_loss[t];
          ++epoch_count[t];
        }
      }
      if (config.balance_losses) {
        balancer.update(norms, batch_loss);
        std::copy(balancer.weights().begin(), balancer.weights().end(), weights.begin());
      }
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.steps = step;
    for (int t = 0; t < kNumTasks; ++t) {
      metrics.losses[t] = epoch_count[t] ? epoch_sum[t] / epoch_count[t] : -1.0;
    }
    metrics.weights = weights;
    metrics.heldout = evaluate_model(m, heldout);
    result.epochs.push_back(metrics);
    if (on_epoch) on_epoch(metrics);

    if (config.time_limit > 0.0) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
      if (elapsed.count() > config.time_limit) break;
    }
  }
  return result;
}

Graph predict(const ToyModel& model, const std::string& sentence, const std::string& id) {
  const TrainConfig& cfg = model.config();
  Graph g;
  g.id = id;
  g.framework = cfg.framework;
  g.flavor = 1;
  g.input = sentence;
  g.tokens = tokenize(sentence);
  const Tokens t = token_strings(g);
  if (g.tokens.empty()) return g;

  ForwardCache fc;
  const Matrix e = model.encode(t.forms, fc.encode);
  const Matrix q = model.make_queries(e, fc.queries);
  const Matrix h = model.decoder.forward(q, e, fc.decoder);
  const Matrix probs = model.label_head.forward(h, fc.label);
  const Matrix anchors = sigmoid(model.anchor_head.forward(h, e, fc.anchor));
  const auto sources = model.source_tokens(static_cast<int>(g.tokens.size()));
  const auto null_class = static_cast<Eigen::Index>(model.rules().null_class());

  std::vector<int> accepted;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best;
    probs.row(i).maxCoeff(&best);
    if (best == null_class) continue;
    // Under masking a matched query always comes from an anchored token.
    std::vector<int> idx;
    for (Eigen::Index tok = 0; tok < anchors.cols(); ++tok) {
      if (anchors(i, tok) > 0.5 || (cfg.anchor_mask && tok == sources[i])) {
        idx.push_back(static_cast<int>(tok));
      }
    }
    if (idx.empty()) idx.push_back(sources[i]);
    std::vector<double> p(probs.cols());
    for (Eigen::Index c = 0; c < probs.cols(); ++c) p[c] = probs(i, c);
    std::optional<std::string> label;
    try {
      label = decode_label(p, pick(t.forms, idx), pick(t.lemmas, idx), model.rules());
    } catch (const DataError&) {
      continue;
    }
    if (!label) continue;
    Node node;
    node.id = static_cast<int>(g.nodes.size());
    node.label = *label;
    for (int tok : idx) node.anchors.push_back(g.tokens[tok].span);
    g.nodes.push_back(std::move(node));
    accepted.push_back(static_cast<int>(i));
  }
  const int n = static_cast<int>(accepted.size());
  if (n == 0) return g;

  const Matrix hn = rows_of(h, accepted);
  EdgeHeads::Cache edge_cache;
  const EdgeLogits edges = model.edge_heads.forward(hn, edge_cache);
  const Matrix presence = sigmoid(edges.presence);
  auto best_label = [&](int a, int b) {
    int best = 0;
    for (std::size_t c = 1; c < edges.labels.size(); ++c) {
      if (edges.labels[c](a, b) > edges.labels[best](a, b)) best = static_cast<int>(c);
    }
    return best;
  };
  const Matrix property = sigmoid(model.property_head.forward(hn)[0]);
  std::vector<char> is_property(n, 0);
  int regular = 0;
  for (int j = 0; j < n; ++j) {
    is_property[j] = property(j, 0) > 0.5;
    regular += !is_property[j];
  }
  if (regular == 0) std::fill(is_property.begin(), is_property.end(), 0);

  TransformTrace trace;
  const auto& labels = model.edge_labels();
  for (int a = 0; a < n; ++a) {
    if (is_property[a]) continue;
    for (int b = 0; b < n; ++b) {
      if (a == b || is_property[b] || presence(a, b) <= 0.5 || labels.empty()) continue;
      if (model.edge_heads.multi_label) {
        bool any = false;
        for (std::size_t c = 0; c < labels.size(); ++c) {
          if (sigmoid(edges.labels[c](a, b)) > 0.5) {
            g.edges.push_back({a, b, labels[c], {}, Json::object()});
            any = true;
          }
        }
        if (!any) g.edges.push_back({a, b, labels[best_label(a, b)], {}, Json::object()});
      } else {
        g.edges.push_back({a, b, labels[best_label(a, b)], {}, Json::object()});
      }
    }
  }
  // Each property node hangs off its most likely parent. A repeated key
  // would make an invalid graph, so such nodes stay plain nodes.
  std::set<std::pair<int, std::string>> folded;
  for (int b = 0; b < n; ++b) {
    if (!is_property[b] || labels.empty()) continue;
    int parent = -1;
    for (int a = 0; a < n; ++a) {
      if (a == b || is_property[a]) continue;
      if (parent < 0 || presence(a, b) > presence(parent, b)) parent = a;
    }
    const std::string attribute = labels[best_label(parent, b)];
    g.edges.push_back({parent, b, attribute, {}, Json::object()});
    if (folded.insert({parent, attribute}).second) trace.nodeified.push_back({parent, attribute, b});
  }

  if (task_active(cfg, Task::kTop)) {
    const Matrix top_logits = model.top_head.forward(hn);
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (is_property[j]) continue;
      if (best < 0 || top_logits(j, 0) > top_logits(best, 0)) best = j;
    }
    if (best >= 0) g.nodes[best].is_top = true;
  }

  Graph out = postprocess(cfg.framework, g, trace);
  out.tokens.clear();
  return out;
}

ScoreReport evaluate_model(const ToyModel& model, const std::vector<Graph>& gold) {
  std::vector<ScoreReport> reports;
  reports.reserve(gold.size());
  for (const auto& g : gold) {
    Graph plain = g;
    plain.tokens.clear();
    reports.push_back(score_pair(plain, predict(model, g.input, g.id)));
  }
  return aggregate(reports);
}

}  // namespace perin
