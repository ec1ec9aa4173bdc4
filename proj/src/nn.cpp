#include "perin/nn.hpp"

#include <cmath>
#include <numbers>

namespace perin {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::below(int n) {
  return static_cast<int>(uniform() * static_cast<double>(n)) % n;
}

Param::Param(Eigen::Index rows, Eigen::Index cols)
    : value(Matrix::Zero(rows, cols)),
      grad(Matrix::Zero(rows, cols)),
      m(Matrix::Zero(rows, cols)),
      v(Matrix::Zero(rows, cols)) {}

void init_uniform(Param& p, Rng& rng, double limit) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    p.value.data()[i] = rng.uniform(-limit, limit);
  }
}

void init_glorot(Param& p, Rng& rng) {
  init_uniform(p, rng, std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols())));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - top).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad) {
  const Eigen::VectorXd dot = (probs.array() * grad.array()).rowwise().sum();
  return probs.array() * (grad.colwise() - dot).array();
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// ---- Linear

Linear::Linear(int in, int out) : weight(in, out), bias(1, out) {}

Matrix Linear::forward(const Matrix& x) const {
  Matrix y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& grad_out) {
  weight.grad.noalias() += x.transpose() * grad_out;
  bias.grad.row(0) += grad_out.colwise().sum();
  return grad_out * weight.value.transpose();
}

void Linear::init(Rng& rng) {
  init_glorot(weight, rng);
  bias.value.setZero();
}

void Linear::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

// ---- LayerNorm

LayerNorm::LayerNorm(int dim, double eps_) : gain(1, dim), shift(1, dim), eps(eps_) {
  gain.value.setOnes();
}

Matrix LayerNorm::forward(const Matrix& x, Cache& cache) const {
  const auto d = static_cast<double>(x.cols());
  const Eigen::VectorXd mean = x.rowwise().sum() / d;
  Matrix centered = x.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().sum() / d;
  cache.inv_std = (var.array() + eps).rsqrt();
  cache.normalized = centered.array().colwise() * cache.inv_std.array();
  Matrix y = cache.normalized.array().rowwise() * gain.value.row(0).array();
  y.rowwise() += shift.value.row(0);
  return y;
}

Matrix LayerNorm::backward_input(const Cache& cache, const Matrix& grad_out) const {
  const auto d = static_cast<double>(grad_out.cols());
  const Matrix g = grad_out.array().rowwise() * gain.value.row(0).array();
  const Eigen::VectorXd mean_g = g.rowwise().sum() / d;
  const Eigen::VectorXd mean_gx = (g.array() * cache.normalized.array()).rowwise().sum() / d;
  Matrix dx = g.colwise() - mean_g;
  dx -= (cache.normalized.array().colwise() * mean_gx.array()).matrix();
  return dx.array().colwise() * cache.inv_std.array();
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& grad_out) {
  gain.grad.row(0) += (grad_out.array() * cache.normalized.array()).colwise().sum().matrix();
  shift.grad.row(0) += grad_out.colwise().sum();
  return backward_input(cache, grad_out);
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".shift", &shift});
}

// ---- Attention

Attention::Attention(int dim) : wq(dim, dim), wk(dim, dim), wv(dim, dim), wo(dim, dim) {}

Matrix Attention::forward(const Matrix& queries, const Matrix& keys, Cache& cache) const {
  cache.x_query = queries;
  cache.x_key = keys;
  cache.q = wq.forward(queries);
  cache.k = wk.forward(keys);
  cache.v = wv.forward(keys);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cache.q.cols()));
  cache.weights = softmax_rows((cache.q * cache.k.transpose()) * scale);
  cache.mixed = cache.weights * cache.v;
  return wo.forward(cache.mixed);
}

std::pair<Matrix, Matrix> Attention::backward(const Cache& cache, const Matrix& grad_out) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(cache.q.cols()));
  const Matrix d_mixed = wo.backward(cache.mixed, grad_out);
  const Matrix d_weights = d_mixed * cache.v.transpose();
  const Matrix d_v = cache.weights.transpose() * d_mixed;
  const Matrix d_scores = softmax_rows_backward(cache.weights, d_weights) * scale;
  const Matrix d_q = d_scores * cache.k;
  const Matrix d_k = d_scores.transpose() * cache.q;
  Matrix d_query = wq.backward(cache.x_query, d_q);
  Matrix d_key = wk.backward(cache.x_key, d_k);
  d_key += wv.backward(cache.x_key, d_v);
  return {std::move(d_query), std::move(d_key)};
}

void Attention::init(Rng& rng) {
  wq.init(rng);
  wk.init(rng);
  wv.init(rng);
  wo.init(rng);
}

void Attention::collect(const std::string& prefix, ParamList& out) {
  wq.collect(prefix + ".q", out);
  wk.collect(prefix + ".k", out);
  wv.collect(prefix + ".v", out);
  wo.collect(prefix + ".o", out);
}

// ---- FeedForward

FeedForward::FeedForward(int dim, int hidden) : in(dim, hidden), out(hidden, dim) {}

Matrix FeedForward::forward(const Matrix& x, Cache& cache) const {
  cache.x = x;
  cache.pre = in.forward(x);
  cache.hidden = cache.pre.unaryExpr([](double v) { return gelu(v); });
  return out.forward(cache.hidden);
}

Matrix FeedForward::backward(const Cache& cache, const Matrix& grad_out) {
  const Matrix d_hidden = out.backward(cache.hidden, grad_out);
  const Matrix d_pre =
      d_hidden.array() * cache.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  return in.backward(cache.x, d_pre);
}

void FeedForward::init(Rng& rng) {
  in.init(rng);
  out.init(rng);
}

void FeedForward::collect(const std::string& prefix, ParamList& out_list) {
  in.collect(prefix + ".in", out_list);
  out.collect(prefix + ".out", out_list);
}

// ---- EncoderLayer

EncoderLayer::EncoderLayer(int dim, int hidden)
    : ln1(dim), ln2(dim), attn(dim), ffn(dim, hidden) {}

Matrix EncoderLayer::forward(const Matrix& x, Cache& cache) const {
  const Matrix a = ln1.forward(x, cache.ln1);
  Matrix h = x + attn.forward(a, a, cache.attn);
  const Matrix b = ln2.forward(h, cache.ln2);
  h += ffn.forward(b, cache.ffn);
  return h;
}

Matrix EncoderLayer::backward(const Cache& cache, const Matrix& grad_out) {
  Matrix dh = grad_out + ln2.backward(cache.ln2, ffn.backward(cache.ffn, grad_out));
  auto [dq, dk] = attn.backward(cache.attn, dh);
  return dh + ln1.backward(cache.ln1, dq + dk);
}

void EncoderLayer::init(Rng& rng) {
  attn.init(rng);
  ffn.init(rng);
}

void EncoderLayer::collect(const std::string& prefix, ParamList& out) {
  ln1.collect(prefix + ".ln1", out);
  attn.collect(prefix + ".attn", out);
  ln2.collect(prefix + ".ln2", out);
  ffn.collect(prefix + ".ffn", out);
}

// ---- DecoderBlock

DecoderBlock::DecoderBlock(int dim, int hidden)
    : ln1(dim), ln2(dim), ln3(dim), ln_out(dim),
      self_attn(dim), cross_attn(dim), ffn(dim, hidden) {}

Matrix DecoderBlock::forward(const Matrix& queries, const Matrix& tokens, Cache& cache) const {
  const Matrix a = ln1.forward(queries, cache.ln1);
  Matrix h = queries + self_attn.forward(a, a, cache.self_attn);
  const Matrix b = ln2.forward(h, cache.ln2);
  h += cross_attn.forward(b, tokens, cache.cross_attn);
  const Matrix c = ln3.forward(h, cache.ln3);
  h += ffn.forward(c, cache.ffn);
  return ln_out.forward(h, cache.ln_out);
}

Matrix DecoderBlock::output_grad_to_residual(const Cache& cache, const Matrix& grad_out) const {
  return ln_out.backward_input(cache.ln_out, grad_out);
}

std::pair<Matrix, Matrix> DecoderBlock::backward(const Cache& cache, const Matrix& grad_out) {
  Matrix dh = ln_out.backward(cache.ln_out, grad_out);
  dh += ln3.backward(cache.ln3, ffn.backward(cache.ffn, dh));
  auto [d_b, d_tokens] = cross_attn.backward(cache.cross_attn, dh);
  dh += ln2.backward(cache.ln2, d_b);
  auto [d_q, d_k] = self_attn.backward(cache.self_attn, dh);
  dh += ln1.backward(cache.ln1, d_q + d_k);
  return {std::move(dh), std::move(d_tokens)};
}

void DecoderBlock::init(Rng& rng) {
  self_attn.init(rng);
  cross_attn.init(rng);
  ffn.init(rng);
}

void DecoderBlock::collect(const std::string& prefix, ParamList& out) {
  ln1.collect(prefix + ".ln1", out);
  self_attn.collect(prefix + ".self", out);
  ln2.collect(prefix + ".ln2", out);
  cross_attn.collect(prefix + ".cross", out);
  ln3.collect(prefix + ".ln3", out);
  ffn.collect(prefix + ".ffn", out);
  ln_out.collect(prefix + ".ln_out", out);
}

// ---- AdamW

void AdamW::update(ParamList& params, double lr) {
  if (lr == 0.0) return;
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (auto& [name, p] : params) {
    p->m = beta1 * p->m + (1.0 - beta1) * p->grad;
    p->v = beta2 * p->v + (1.0 - beta2) * p->grad.cwiseAbs2();
    p->value.array() -= lr * ((p->m.array() / c1) / ((p->v.array() / c2).sqrt() + eps) +
                              weight_decay * p->value.array());
  }
}

}  // namespace perin
