#include "perin/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace perin {

namespace {

constexpr double kLogFloor = 1e-300;

void check_distribution(std::span<const double> p, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= -1e-12) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument(std::string(what) + " does not sum to 1");
  }
}

Matrix augment(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()).setOnes();
  return out;
}

Matrix apply_gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

Matrix gelu_backward(const Matrix& pre, const Matrix& grad) {
  return grad.array() * pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
}

}  // namespace

std::string_view to_string(Task task) {
  static constexpr std::string_view kNames[] = {
      "label", "anchor", "edge_presence", "edge_label", "edge_attribute", "property", "top"};
  return kNames[static_cast<int>(task)];
}

LossGrad bce_with_logits(const Matrix& logits, const Matrix& targets) {
  LossGrad out;
  out.grad = Matrix::Zero(logits.rows(), logits.cols());
  const auto n = static_cast<double>(logits.size());
  if (n == 0) return out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits.data()[i];
    const double t = targets.data()[i];
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    out.grad.data()[i] = (sigmoid(z) - t) / n;
  }
  out.loss = total / n;
  return out;
}

LossGrad softmax_cross_entropy(const Matrix& logits, const Matrix& targets) {
  LossGrad out;
  out.grad = Matrix::Zero(logits.rows(), logits.cols());
  const auto rows = static_cast<double>(logits.rows());
  if (logits.rows() == 0) return out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    const double lse = top + std::log((logits.row(i).array() - top).exp().sum());
    const double mass = targets.row(i).sum();
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double log_p = logits(i, c) - lse;
      total -= targets(i, c) * log_p;
      out.grad(i, c) = (std::exp(log_p) * mass - targets(i, c)) / rows;
    }
  }
  out.loss = total / rows;
  return out;
}

double label_loss(std::span<const double> pred, std::span<const double> target, double gamma,
                  std::span<double> grad) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("label_loss: size mismatch");
  }
  check_distribution(pred, "label_loss: prediction");
  check_distribution(target, "label_loss: target");
  double entropy = 0.0;
  double p_t = 0.0;
  for (std::size_t r = 0; r < pred.size(); ++r) {
    if (target[r] != 0.0) entropy -= target[r] * std::log(std::max(pred[r], kLogFloor));
    p_t += target[r] * pred[r];
  }
  const double rest = std::max(1.0 - p_t, 0.0);
  const double focal = std::pow(rest, gamma);
  if (!grad.empty()) {
    // d focal / d p_t
    double d_focal = 0.0;
    if (gamma != 0.0) {
      if (rest > 0.0) {
        d_focal = -gamma * std::pow(rest, gamma - 1.0);
      } else if (gamma == 1.0) {
        d_focal = -1.0;
      }
    }
    for (std::size_t r = 0; r < pred.size(); ++r) {
      grad[r] = -target[r] / std::max(pred[r], kLogFloor) * focal +
                entropy * d_focal * target[r];
    }
  }
  return focal * entropy;
}

LossGrad label_loss_rows(const Matrix& probs, const Matrix& targets, double gamma) {
  LossGrad out;
  out.grad = Matrix::Zero(probs.rows(), probs.cols());
  if (probs.rows() == 0) return out;
  // Row-major copies so that each row is contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p = probs;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t = targets;
  std::vector<double> row_grad(probs.cols());
  const auto rows = static_cast<double>(probs.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const auto n = static_cast<std::size_t>(probs.cols());
    total += label_loss({p.data() + i * probs.cols(), n}, {t.data() + i * probs.cols(), n}, gamma,
                        row_grad);
    for (Eigen::Index c = 0; c < probs.cols(); ++c) out.grad(i, c) = row_grad[c] / rows;
  }
  out.loss = total / rows;
  return out;
}

// ---- MixtureOfSoftmaxes

MixtureOfSoftmaxes::MixtureOfSoftmaxes(int dim, int classes, int components)
    : gate(dim, components), output(dim, classes) {
  if (components < 1) throw std::invalid_argument("mixture of softmaxes needs K >= 1");
  for (int k = 0; k < components; ++k) proj.emplace_back(dim, dim);
}

Matrix MixtureOfSoftmaxes::forward(const Matrix& h, Cache& cache) const {
  const int k_count = components();
  cache.h = h;
  cache.x.resize(k_count);
  cache.probs.resize(k_count);
  cache.gate_sigmoid = sigmoid(gate.forward(h));
  const Eigen::VectorXd total = cache.gate_sigmoid.rowwise().sum();
  if ((total.array() <= 0.0).any()) {
    throw std::domain_error("mixture of softmaxes: all gates underflowed");
  }
  cache.gates = cache.gate_sigmoid.array().colwise() / total.array();
  Matrix out = Matrix::Zero(h.rows(), output.weight.value.cols());
  for (int k = 0; k < k_count; ++k) {
    cache.x[k] = proj[k].forward(h).array().tanh();
    cache.probs[k] = softmax_rows(output.forward(cache.x[k]));
    out += (cache.probs[k].array().colwise() * cache.gates.col(k).array()).matrix();
  }
  return out;
}

Matrix MixtureOfSoftmaxes::backward(const Cache& cache, const Matrix& grad_probs) {
  const int k_count = components();
  Matrix dh = Matrix::Zero(cache.h.rows(), cache.h.cols());
  Matrix d_gates(cache.h.rows(), k_count);
  for (int k = 0; k < k_count; ++k) {
    d_gates.col(k) = (grad_probs.array() * cache.probs[k].array()).rowwise().sum();
    const Matrix d_probs = grad_probs.array().colwise() * cache.gates.col(k).array();
    const Matrix d_logits = softmax_rows_backward(cache.probs[k], d_probs);
    const Matrix d_x = output.backward(cache.x[k], d_logits);
    const Matrix d_pre = d_x.array() * (1.0 - cache.x[k].array().square());
    dh += proj[k].backward(cache.h, d_pre);
  }
  // pi_k = s_k / S
  const Eigen::VectorXd total = cache.gate_sigmoid.rowwise().sum();
  const Eigen::VectorXd dot = (d_gates.array() * cache.gates.array()).rowwise().sum();
  Matrix d_sig = (d_gates.colwise() - dot).array().colwise() / total.array();
  const Matrix d_z =
      d_sig.array() * cache.gate_sigmoid.array() * (1.0 - cache.gate_sigmoid.array());
  dh += gate.backward(cache.h, d_z);
  return dh;
}

void MixtureOfSoftmaxes::init(Rng& rng) {
  for (auto& p : proj) p.init(rng);
  gate.init(rng);
  output.init(rng);
}

void MixtureOfSoftmaxes::collect(const std::string& prefix, ParamList& out) {
  for (std::size_t k = 0; k < proj.size(); ++k) {
    proj[k].collect(prefix + ".proj" + std::to_string(k), out);
  }
  gate.collect(prefix + ".gate", out);
  output.collect(prefix + ".output", out);
}

// ---- DeepBiaffine

DeepBiaffine::DeepBiaffine(int dim, int hidden, int classes)
    : left(dim, hidden), right(dim, hidden) {
  for (int c = 0; c < classes; ++c) bilinear.emplace_back(hidden + 1, hidden + 1);
}

std::vector<Matrix> DeepBiaffine::forward(const Matrix& x, const Matrix& y, Cache& cache) const {
  cache.x = x;
  cache.y = y;
  cache.x_pre = left.forward(x);
  cache.y_pre = right.forward(y);
  cache.x_aug = augment(apply_gelu(cache.x_pre));
  cache.y_aug = augment(apply_gelu(cache.y_pre));
  std::vector<Matrix> scores;
  scores.reserve(bilinear.size());
  for (const auto& u : bilinear) {
    scores.push_back(cache.x_aug * u.value * cache.y_aug.transpose());
  }
  return scores;
}

std::pair<Matrix, Matrix> DeepBiaffine::backward(const Cache& cache,
                                                 const std::vector<Matrix>& grad_scores) {
  Matrix dx_aug = Matrix::Zero(cache.x_aug.rows(), cache.x_aug.cols());
  Matrix dy_aug = Matrix::Zero(cache.y_aug.rows(), cache.y_aug.cols());
  for (std::size_t c = 0; c < bilinear.size(); ++c) {
    const Matrix& ds = grad_scores[c];
    Param& u = bilinear[c];
    u.grad.noalias() += cache.x_aug.transpose() * ds * cache.y_aug;
    dx_aug.noalias() += ds * cache.y_aug * u.value.transpose();
    dy_aug.noalias() += ds.transpose() * cache.x_aug * u.value;
  }
  const Eigen::Index h = cache.x_pre.cols();
  Matrix dx = left.backward(cache.x, gelu_backward(cache.x_pre, dx_aug.leftCols(h)));
  Matrix dy = right.backward(cache.y, gelu_backward(cache.y_pre, dy_aug.leftCols(h)));
  return {std::move(dx), std::move(dy)};
}

void DeepBiaffine::init(Rng& rng) {
  left.init(rng);
  right.init(rng);
  for (auto& u : bilinear) u.value.setZero();
}

void DeepBiaffine::collect(const std::string& prefix, ParamList& out) {
  left.collect(prefix + ".left", out);
  right.collect(prefix + ".right", out);
  for (std::size_t c = 0; c < bilinear.size(); ++c) {
    out.push_back({prefix + ".u" + std::to_string(c), &bilinear[c]});
  }
}

// ---- AnchorHead

Matrix AnchorHead::forward(const Matrix& queries, const Matrix& tokens,
                           DeepBiaffine::Cache& cache) const {
  return biaffine.forward(queries, tokens, cache)[0];
}

std::pair<Matrix, Matrix> AnchorHead::backward(const DeepBiaffine::Cache& cache,
                                               const Matrix& grad_logits) {
  return biaffine.backward(cache, {grad_logits});
}

// ---- EdgeHeads

EdgeHeads::EdgeHeads(int dim, int hidden, int label_classes, int attribute_classes,
                     bool multi_label_)
    : presence(dim, hidden, 1),
      label(dim, hidden, label_classes),
      attribute(dim, hidden, attribute_classes),
      multi_label(multi_label_) {}

EdgeLogits EdgeHeads::forward(const Matrix& nodes, Cache& cache) const {
  EdgeLogits out;
  out.presence = presence.forward(nodes, nodes, cache.presence)[0];
  out.labels = label.forward(nodes, nodes, cache.label);
  if (has_attributes()) out.attributes = attribute.forward(nodes, nodes, cache.attribute);
  return out;
}

EdgeLosses EdgeHeads::losses(const EdgeLogits& logits, const EdgeTargets& targets) const {
  EdgeLosses out;
  const Eigen::Index n = logits.presence.rows();
  auto p = bce_with_logits(logits.presence, targets.presence);
  out.presence = p.loss;
  out.grad.presence = std::move(p.grad);
  for (std::size_t c = 0; c < logits.labels.size(); ++c) {
    out.grad.labels.push_back(Matrix::Zero(n, n));
  }
  for (std::size_t c = 0; c < logits.attributes.size(); ++c) {
    out.grad.attributes.push_back(Matrix::Zero(n, n));
  }

  const auto label_classes = static_cast<Eigen::Index>(logits.labels.size());
  if (!targets.labels.empty() && label_classes > 0) {
    const auto pairs = static_cast<Eigen::Index>(targets.labels.size());
    Matrix z(pairs, label_classes);
    Matrix t = Matrix::Zero(pairs, label_classes);
    Eigen::Index row = 0;
    for (const auto& [pair, classes] : targets.labels) {
      for (Eigen::Index c = 0; c < label_classes; ++c) {
        z(row, c) = logits.labels[c](pair.first, pair.second);
      }
      for (int c : classes) {
        t(row, c) = multi_label ? 1.0 : 1.0 / static_cast<double>(classes.size());
      }
      ++row;
    }
    auto l = multi_label ? bce_with_logits(z, t) : softmax_cross_entropy(z, t);
    out.label = l.loss;
    row = 0;
    for (const auto& [pair, classes] : targets.labels) {
      for (Eigen::Index c = 0; c < label_classes; ++c) {
        out.grad.labels[c](pair.first, pair.second) = l.grad(row, c);
      }
      ++row;
    }
  }

  const auto attribute_classes = static_cast<Eigen::Index>(logits.attributes.size());
  if (!targets.attributes.empty() && attribute_classes > 0) {
    const auto pairs = static_cast<Eigen::Index>(targets.attributes.size());
    Matrix z(pairs, attribute_classes);
    Matrix t = Matrix::Zero(pairs, attribute_classes);
    Eigen::Index row = 0;
    for (const auto& [pair, cls] : targets.attributes) {
      for (Eigen::Index c = 0; c < attribute_classes; ++c) {
        z(row, c) = logits.attributes[c](pair.first, pair.second);
      }
      t(row, cls) = 1.0;
      ++row;
    }
    auto a = softmax_cross_entropy(z, t);
    out.attribute = a.loss;
    row = 0;
    for (const auto& [pair, cls] : targets.attributes) {
      for (Eigen::Index c = 0; c < attribute_classes; ++c) {
        out.grad.attributes[c](pair.first, pair.second) = a.grad(row, c);
      }
      ++row;
    }
  }
  return out;
}

Matrix EdgeHeads::backward(const Cache& cache, const EdgeLogits& grad, double w_presence,
                           double w_label, double w_attribute) {
  auto scaled = [](const std::vector<Matrix>& g, double w) {
    std::vector<Matrix> out;
    out.reserve(g.size());
    for (const auto& m : g) out.push_back(m * w);
    return out;
  };
  auto [px, py] = presence.backward(cache.presence, {grad.presence * w_presence});
  Matrix d = px + py;
  auto [lx, ly] = label.backward(cache.label, scaled(grad.labels, w_label));
  d += lx + ly;
  if (has_attributes()) {
    auto [ax, ay] = attribute.backward(cache.attribute, scaled(grad.attributes, w_attribute));
    d += ax + ay;
  }
  return d;
}

void EdgeHeads::init(Rng& rng) {
  presence.init(rng);
  label.init(rng);
  attribute.init(rng);
}

void EdgeHeads::collect(const std::string& prefix, ParamList& out) {
  presence.collect(prefix + ".presence", out);
  label.collect(prefix + ".label", out);
  if (has_attributes()) attribute.collect(prefix + ".attribute", out);
}

// ---- PropertyHead

PropertyHead::PropertyHead(int dim, const std::vector<int>& values_per_attribute) {
  for (int v : values_per_attribute) families.emplace_back(dim, v);
}

std::vector<Matrix> PropertyHead::forward(const Matrix& nodes) const {
  if (!per_attribute()) return {binary.forward(nodes)};
  std::vector<Matrix> out;
  for (const auto& f : families) out.push_back(f.forward(nodes));
  return out;
}

Matrix PropertyHead::backward(const Matrix& nodes, const std::vector<Matrix>& grad_logits) {
  if (!per_attribute()) return binary.backward(nodes, grad_logits.at(0));
  Matrix d = Matrix::Zero(nodes.rows(), nodes.cols());
  for (std::size_t a = 0; a < families.size(); ++a) {
    d += families[a].backward(nodes, grad_logits.at(a));
  }
  return d;
}

void PropertyHead::init(Rng& rng) {
  if (!per_attribute()) binary.init(rng);
  for (auto& f : families) f.init(rng);
}

void PropertyHead::collect(const std::string& prefix, ParamList& out) {
  if (!per_attribute()) {
    binary.collect(prefix, out);
    return;
  }
  for (std::size_t a = 0; a < families.size(); ++a) {
    families[a].collect(prefix + ".family" + std::to_string(a), out);
  }
}

// ---- TopHead

Matrix TopHead::forward(const Matrix& nodes) const { return score.forward(nodes); }

Matrix TopHead::backward(const Matrix& nodes, const Matrix& grad_logits) {
  return score.backward(nodes, grad_logits);
}

Eigen::VectorXd TopHead::distribution(const Matrix& logits) {
  return softmax_rows(logits.transpose()).transpose();
}

LossGrad TopHead::loss(const Matrix& logits, const Eigen::VectorXd& target) {
  auto ce = softmax_cross_entropy(logits.transpose(), target.transpose());
  return {ce.loss, ce.grad.transpose()};
}

// ---- balancing

double total_loss(std::span<const double> losses, std::span<const double> weights) {
  if (losses.size() != weights.size()) {
    throw std::invalid_argument("total_loss: size mismatch");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < losses.size(); ++t) total += weights[t] * losses[t];
  return total;
}

std::vector<double> update_loss_weights(std::span<const double> grad_norms,
                                        std::span<const double> losses,
                                        std::span<const double> initial_losses,
                                        std::span<const double> weights, double alpha,
                                        double lr, std::vector<std::string>* warnings) {
  const std::size_t n = weights.size();
  if (grad_norms.size() != n || losses.size() != n || initial_losses.size() != n) {
    throw std::invalid_argument("update_loss_weights: size mismatch");
  }
  std::vector<double> out(weights.begin(), weights.end());
  std::vector<std::size_t> active;
  for (std::size_t t = 0; t < n; ++t) {
    if (losses[t] < 0.0) continue;
    if (initial_losses[t] <= 0.0) {
      if (warnings && initial_losses[t] == 0.0) {
        warnings->push_back("task " + std::to_string(t) +
                            " has zero initial loss; excluded from balancing");
      }
      continue;
    }
    active.push_back(t);
  }
  if (active.empty()) return out;

  const auto count = static_cast<double>(active.size());
  double mean_ratio = 0.0;
  double mean_norm = 0.0;
  for (std::size_t t : active) {
    mean_ratio += losses[t] / initial_losses[t];
    mean_norm += grad_norms[t];
  }
  mean_ratio /= count;
  mean_norm /= count;

  for (std::size_t t : active) {
    const double relative = mean_ratio > 0.0 ? (losses[t] / initial_losses[t]) / mean_ratio : 1.0;
    const double target = mean_norm * std::pow(relative, alpha);
    const double diff = grad_norms[t] - target;
    const double sign = (diff > 0.0) - (diff < 0.0);
    // G_t is linear in w_t.
    const double d_norm = weights[t] > 0.0 ? grad_norms[t] / weights[t] : 0.0;
    out[t] = std::max(weights[t] - lr * sign * d_norm, 1e-6);
  }
  double sum = 0.0;
  for (std::size_t t : active) sum += out[t];
  for (std::size_t t : active) out[t] *= count / sum;
  return out;
}

LossBalancer::LossBalancer(int tasks, double alpha, double lr)
    : alpha_(alpha), lr_(lr), weights_(tasks, 1.0) {}

void LossBalancer::update(std::span<const double> grad_norms, std::span<const double> losses) {
  if (initial_.empty()) initial_.assign(losses.size(), -1.0);
  // A task's first observed loss is its initial loss.
  for (std::size_t t = 0; t < losses.size(); ++t) {
    if (initial_[t] < 0.0 && losses[t] >= 0.0) initial_[t] = losses[t];
  }
  std::vector<std::string> fresh;
  weights_ = update_loss_weights(grad_norms, losses, initial_, weights_, alpha_, lr_, &fresh);
  for (auto& w : fresh) {
    if (std::find(warnings_.begin(), warnings_.end(), w) == warnings_.end()) {
      warnings_.push_back(std::move(w));
    }
  }
}

void LossBalancer::set_state(std::vector<double> weights, std::vector<double> initial) {
  weights_ = std::move(weights);
  initial_ = std::move(initial);
}

}  // namespace perin
