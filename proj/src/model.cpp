#include "perin/model.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "perin/checkpoint.hpp"
#include "perin/error.hpp"

namespace perin {

namespace {

using Setter = std::function<void(TrainConfig&, const std::string&)>;

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto int_field = [&](const char* name, int TrainConfig::*field) {
      t[name] = [name, field](TrainConfig& c, const std::string& v) {
        c.*field = static_cast<int>(parse_long(name, v));
      };
    };
    auto double_field = [&](const char* name, double TrainConfig::*field) {
      t[name] = [name, field](TrainConfig& c, const std::string& v) {
        c.*field = parse_double(name, v);
      };
    };
    auto bool_field = [&](const char* name, bool TrainConfig::*field) {
      t[name] = [name, field](TrainConfig& c, const std::string& v) {
        c.*field = parse_bool(name, v);
      };
    };
    int_field("dim", &TrainConfig::dim);
    int_field("queries_per_token", &TrainConfig::queries_per_token);
    int_field("layers", &TrainConfig::layers);
    int_field("ffn_hidden", &TrainConfig::ffn_hidden);
    int_field("biaffine_hidden", &TrainConfig::biaffine_hidden);
    int_field("mos_components", &TrainConfig::mos_components);
    int_field("max_positions", &TrainConfig::max_positions);
    int_field("corpus_size", &TrainConfig::corpus_size);
    int_field("heldout", &TrainConfig::heldout);
    int_field("epochs", &TrainConfig::epochs);
    int_field("batch_size", &TrainConfig::batch_size);
    int_field("warmup", &TrainConfig::warmup);
    int_field("freeze", &TrainConfig::freeze);
    double_field("lr_encoder", &TrainConfig::lr_encoder);
    double_field("lr_rest", &TrainConfig::lr_rest);
    double_field("weight_decay_encoder", &TrainConfig::weight_decay_encoder);
    double_field("weight_decay", &TrainConfig::weight_decay);
    double_field("layer_dropout", &TrainConfig::layer_dropout);
    double_field("grad_clip", &TrainConfig::grad_clip);
    double_field("focal_gamma", &TrainConfig::focal_gamma);
    double_field("label_smoothing", &TrainConfig::label_smoothing);
    double_field("mask_epsilon", &TrainConfig::mask_epsilon);
    double_field("balance_alpha", &TrainConfig::balance_alpha);
    double_field("balance_lr", &TrainConfig::balance_lr);
    double_field("time_limit", &TrainConfig::time_limit);
    bool_field("anchor_mask", &TrainConfig::anchor_mask);
    bool_field("multi_label_edges", &TrainConfig::multi_label_edges);
    bool_field("edge_attributes", &TrainConfig::edge_attributes);
    bool_field("predict_top", &TrainConfig::predict_top);
    bool_field("balance_losses", &TrainConfig::balance_losses);
    t["seed"] = [](TrainConfig& c, const std::string& v) {
      const long s = parse_long("seed", v);
      if (s < 0) throw ConfigError("config key 'seed': must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    };
    t["framework"] = [](TrainConfig& c, const std::string& v) {
      c.framework = framework_from_string(v);
    };
    return t;
  }();
  return table;
}

void check(const TrainConfig& c) {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw ConfigError(std::string("config key '") + name + "': must be positive");
  };
  positive("dim", c.dim);
  positive("queries_per_token", c.queries_per_token);
  positive("layers", c.layers);
  positive("ffn_hidden", c.ffn_hidden);
  positive("biaffine_hidden", c.biaffine_hidden);
  positive("mos_components", c.mos_components);
  positive("max_positions", c.max_positions);
  positive("corpus_size", c.corpus_size);
  positive("batch_size", c.batch_size);
  positive("warmup", c.warmup);
  positive("lr_encoder", c.lr_encoder);
  positive("lr_rest", c.lr_rest);
  if (c.epochs < 0 || c.freeze < 0 || c.heldout < 0 || c.heldout >= c.corpus_size) {
    throw ConfigError("config: epochs, freeze and heldout must be >= 0, heldout < corpus_size");
  }
  if (c.layer_dropout < 0 || c.layer_dropout >= 1 || c.label_smoothing < 0 ||
      c.label_smoothing >= 1 || c.focal_gamma < 0 || c.mask_epsilon <= 0 ||
      c.weight_decay < 0 || c.weight_decay_encoder < 0 || c.grad_clip < 0) {
    throw ConfigError("config: rate out of range");
  }
}

}  // namespace

TrainConfig TrainConfig::from(const KeyValueConfig& config) {
  TrainConfig c;
  const auto& table = setters();
  for (const auto& [key, value] : config.entries()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, value);
  }
  check(c);
  return c;
}

Json TrainConfig::to_json() const {
  return Json{{"dim", dim},
              {"queries_per_token", queries_per_token},
              {"layers", layers},
              {"ffn_hidden", ffn_hidden},
              {"biaffine_hidden", biaffine_hidden},
              {"mos_components", mos_components},
              {"max_positions", max_positions},
              {"seed", seed},
              {"corpus_size", corpus_size},
              {"heldout", heldout},
              {"framework", std::string(to_string(framework))},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"lr_encoder", lr_encoder},
              {"lr_rest", lr_rest},
              {"warmup", warmup},
              {"freeze", freeze},
              {"weight_decay_encoder", weight_decay_encoder},
              {"weight_decay", weight_decay},
              {"layer_dropout", layer_dropout},
              {"grad_clip", grad_clip},
              {"focal_gamma", focal_gamma},
              {"label_smoothing", label_smoothing},
              {"mask_epsilon", mask_epsilon},
              {"anchor_mask", anchor_mask},
              {"multi_label_edges", multi_label_edges},
              {"edge_attributes", edge_attributes},
              {"predict_top", predict_top},
              {"balance_losses", balance_losses},
              {"balance_alpha", balance_alpha},
              {"balance_lr", balance_lr},
              {"time_limit", time_limit}};
}

TrainConfig TrainConfig::from_json(const Json& object) {
  KeyValueConfig kv;
  for (const auto& [key, value] : object.items()) {
    if (value.is_string()) {
      kv.set(key, value.get<std::string>());
    } else if (value.is_boolean()) {
      kv.set(key, value.get<bool>() ? "true" : "false");
    } else if (value.is_number_integer()) {
      kv.set(key, std::to_string(value.get<long long>()));
    } else {
      std::ostringstream out;
      out.precision(17);
      out << value.get<double>();
      kv.set(key, out.str());
    }
  }
  return from(kv);
}

std::pair<double, double> lr_schedule(long step, const TrainConfig& config) {
  auto shape = [&](long s, double peak) {
    const auto warmup = static_cast<double>(config.warmup);
    if (s < config.warmup) return peak * static_cast<double>(s + 1) / warmup;
    return peak * std::sqrt(warmup / static_cast<double>(s));
  };
  const double rest = shape(step, config.lr_rest);
  const double encoder = step < config.freeze ? 0.0 : shape(step - config.freeze, config.lr_encoder);
  return {encoder, rest};
}

// ---- Vocabulary

Vocabulary::Vocabulary() : words_{"<unk>"} { index_["<unk>"] = kUnknown; }

Vocabulary::Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
  for (const auto& w : words) {
    if (index_.count(w)) continue;
    index_[w] = static_cast<int>(words_.size());
    words_.push_back(w);
  }
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnknown : it->second;
}

// ---- ToyModel

ToyModel::ToyModel(const TrainConfig& config, Vocabulary vocabulary, RuleTable rules,
                   std::vector<std::string> edge_labels)
    : embeddings(vocabulary.size(), config.dim),
      positions(config.max_positions, config.dim),
      mixing(1, config.layers),
      mix_norm(config.dim),
      decoder(config.dim, config.ffn_hidden),
      label_head(config.dim, static_cast<int>(rules.num_classes()), config.mos_components),
      anchor_head(config.dim, config.biaffine_hidden),
      edge_heads(config.dim, config.biaffine_hidden, static_cast<int>(edge_labels.size()),
                 config.edge_attributes ? 2 : 0, config.multi_label_edges),
      property_head(config.dim),
      top_head(config.dim),
      config_(config),
      vocabulary_(std::move(vocabulary)),
      rules_(std::move(rules)),
      edge_labels_(std::move(edge_labels)) {
  for (int l = 0; l < config.layers; ++l) layers.emplace_back(config.dim, config.ffn_hidden);
  for (int t = 0; t < config.queries_per_token; ++t) query_proj.emplace_back(config.dim, config.dim);
}

void ToyModel::init(Rng& rng) {
  for (Eigen::Index i = 0; i < embeddings.value.size(); ++i) {
    embeddings.value.data()[i] = 0.1 * rng.normal();
  }
  for (Eigen::Index i = 0; i < positions.value.size(); ++i) {
    positions.value.data()[i] = 0.1 * rng.normal();
  }
  for (auto& l : layers) l.init(rng);
  mixing.value.setZero();
  for (auto& q : query_proj) q.init(rng);
  decoder.init(rng);
  label_head.init(rng);
  anchor_head.init(rng);
  edge_heads.init(rng);
  property_head.init(rng);
  top_head.init(rng);
}

Matrix ToyModel::encode(const std::vector<std::string>& tokens, EncodeCache& cache,
                        Rng* dropout_rng) const {
  const int n = static_cast<int>(tokens.size());
  const int d = config_.dim;
  cache.ids.resize(n);
  cache.positions.resize(n);
  Matrix x(n, d);
  for (int i = 0; i < n; ++i) {
    cache.ids[i] = vocabulary_.id(tokens[i]);
    cache.positions[i] = std::min(i, config_.max_positions - 1);
    x.row(i) = embeddings.value.row(cache.ids[i]) + positions.value.row(cache.positions[i]);
  }
  const int count = static_cast<int>(layers.size());
  cache.layers.resize(count);
  cache.outputs.resize(count);
  for (int l = 0; l < count; ++l) {
    x = layers[l].forward(x, cache.layers[l]);
    cache.outputs[l] = x;
  }

  cache.dropped.assign(count, 0);
  if (dropout_rng && config_.layer_dropout > 0.0) {
    int kept = 0;
    for (int l = 0; l < count; ++l) {
      cache.dropped[l] = dropout_rng->bernoulli(config_.layer_dropout) ? 1 : 0;
      kept += !cache.dropped[l];
    }
    if (kept == 0) cache.dropped.assign(count, 0);
  }
  cache.mixing = RowVector::Zero(count);
  double top = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < count; ++l) {
    if (!cache.dropped[l]) top = std::max(top, mixing.value(0, l));
  }
  double total = 0.0;
  for (int l = 0; l < count; ++l) {
    if (cache.dropped[l]) continue;
    cache.mixing(l) = std::exp(mixing.value(0, l) - top);
    total += cache.mixing(l);
  }
  cache.mixing /= total;
  cache.mixed = Matrix::Zero(n, d);
  for (int l = 0; l < count; ++l) {
    if (!cache.dropped[l]) cache.mixed += cache.mixing(l) * cache.outputs[l];
  }
  return mix_norm.forward(cache.mixed, cache.norm);
}

void ToyModel::encode_backward(const EncodeCache& cache, const Matrix& grad) {
  const Matrix d_mixed = mix_norm.backward(cache.norm, grad);
  const int count = static_cast<int>(layers.size());
  RowVector d_alpha = RowVector::Zero(count);
  for (int l = 0; l < count; ++l) {
    if (!cache.dropped[l]) d_alpha(l) = (d_mixed.array() * cache.outputs[l].array()).sum();
  }
  const double dot = (d_alpha.array() * cache.mixing.array()).sum();
  for (int l = 0; l < count; ++l) {
    if (!cache.dropped[l]) mixing.grad(0, l) += cache.mixing(l) * (d_alpha(l) - dot);
  }
  Matrix d_x = Matrix::Zero(d_mixed.rows(), d_mixed.cols());
  for (int l = count - 1; l >= 0; --l) {
    Matrix g = d_x;
    if (!cache.dropped[l]) g += cache.mixing(l) * d_mixed;
    d_x = layers[l].backward(cache.layers[l], g);
  }
  for (std::size_t i = 0; i < cache.ids.size(); ++i) {
    embeddings.grad.row(cache.ids[i]) += d_x.row(i);
    positions.grad.row(cache.positions[i]) += d_x.row(i);
  }
}

Matrix ToyModel::make_queries(const Matrix& tokens, QueryCache& cache) const {
  const int q = config_.queries_per_token;
  const auto n = tokens.rows();
  cache.tokens = tokens;
  cache.activations.resize(q);
  Matrix out(n * q, tokens.cols());
  for (int t = 0; t < q; ++t) {
    cache.activations[t] = query_proj[t].forward(tokens).array().tanh();
    for (Eigen::Index i = 0; i < n; ++i) out.row(i * q + t) = cache.activations[t].row(i);
  }
  return out;
}

Matrix ToyModel::queries_backward(const QueryCache& cache, const Matrix& grad) {
  const int q = config_.queries_per_token;
  const auto n = cache.tokens.rows();
  Matrix d_tokens = Matrix::Zero(n, cache.tokens.cols());
  for (int t = 0; t < q; ++t) {
    Matrix g(n, grad.cols());
    for (Eigen::Index i = 0; i < n; ++i) g.row(i) = grad.row(i * q + t);
    const Matrix d_pre = g.array() * (1.0 - cache.activations[t].array().square());
    d_tokens += query_proj[t].backward(cache.tokens, d_pre);
  }
  return d_tokens;
}

std::vector<int> ToyModel::source_tokens(int num_tokens) const {
  std::vector<int> out;
  for (int i = 0; i < num_tokens; ++i) {
    for (int t = 0; t < config_.queries_per_token; ++t) out.push_back(i);
  }
  return out;
}

ParamList ToyModel::encoder_params() {
  ParamList out;
  out.push_back({"encoder.embeddings", &embeddings});
  out.push_back({"encoder.positions", &positions});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].collect("encoder.layer" + std::to_string(l), out);
  }
  out.push_back({"encoder.mixing", &mixing});
  mix_norm.collect("encoder.mix_norm", out);
  return out;
}

ParamList ToyModel::rest_params() {
  ParamList out;
  for (std::size_t t = 0; t < query_proj.size(); ++t) {
    query_proj[t].collect("queries.slot" + std::to_string(t), out);
  }
  decoder.collect("decoder", out);
  label_head.collect("heads.label", out);
  anchor_head.collect("heads.anchor", out);
  edge_heads.collect("heads.edge", out);
  property_head.collect("heads.property", out);
  top_head.collect("heads.top", out);
  return out;
}

ParamList ToyModel::all_params() {
  ParamList out = encoder_params();
  for (auto& p : rest_params()) out.push_back(p);
  return out;
}

void ToyModel::zero_grad() {
  for (auto& [name, p] : all_params()) p->zero_grad();
}

void ToyModel::save(const std::string& path) {
  save_checkpoint(path, all_params());
  Json meta;
  meta["config"] = config_.to_json();
  meta["vocabulary"] = vocabulary_.words();
  Json rules = Json::array();
  for (const auto& r : rules_.rules()) rules.push_back(rule_to_string(r));
  meta["rules"] = rules;
  meta["edge_labels"] = edge_labels_;
  std::ofstream out(path + ".meta.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + path + ".meta.json");
  out << meta.dump(2) << '\n';
}

ToyModel ToyModel::load(const std::string& path) {
  std::ifstream in(path + ".meta.json");
  if (!in) throw DataError("cannot read " + path + ".meta.json");
  Json meta;
  try {
    meta = Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError(path + ".meta.json: " + e.what());
  }
  try {
    const TrainConfig config = TrainConfig::from_json(meta.at("config"));
    std::vector<std::string> words = meta.at("vocabulary").get<std::vector<std::string>>();
    if (!words.empty()) words.erase(words.begin());  // <unk>
    std::vector<Rule> rules;
    for (const auto& r : meta.at("rules")) rules.push_back(rule_from_string(r.get<std::string>()));
    ToyModel model(config, Vocabulary(words), RuleTable(std::move(rules)),
                   meta.at("edge_labels").get<std::vector<std::string>>());
    ParamList params = model.all_params();
    load_checkpoint(path, params);
    return model;
  } catch (const Json::exception& e) {
    throw DataError(path + ".meta.json: " + e.what());
  }
}

}  // namespace perin
