#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace perin {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Platform-independent random numbers (the standard distributions are not
// specified bit-for-bit).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();                     // Box-Muller
  int below(int n);                    // [0, n)
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      std::swap(items[i], items[below(i + 1)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// A trainable array, its gradient and AdamW moments.
struct Param {
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols);
  void zero_grad() { grad.setZero(); }
};

struct NamedParam {
  std::string name;
  Param* param;
};
using ParamList = std::vector<NamedParam>;

void init_uniform(Param& p, Rng& rng, double limit);
// Glorot uniform for a fan_in x fan_out matrix.
void init_glorot(Param& p, Rng& rng);

// Row-wise numerics.
Matrix softmax_rows(const Matrix& logits);
// Backward of row softmax: probs * (grad - rowsum(grad * probs)).
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad);
double sigmoid(double x);
Matrix sigmoid(const Matrix& x);
double gelu(double x);
double gelu_grad(double x);

// y = x W + b with W of shape in x out.
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out);

  Matrix forward(const Matrix& x) const;
  // Accumulates parameter gradients; returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& grad_out);
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);

  Param weight;
  Param bias;
};

class LayerNorm {
 public:
  struct Cache {
    Matrix normalized;
    Eigen::VectorXd inv_std;
  };

  LayerNorm() = default;
  explicit LayerNorm(int dim, double eps = 1e-5);

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& grad_out);
  // Input gradient only; parameters untouched.
  Matrix backward_input(const Cache& cache, const Matrix& grad_out) const;
  void collect(const std::string& prefix, ParamList& out);

  Param gain;
  Param shift;
  double eps = 1e-5;
};

// Single-head scaled dot-product attention from `queries` into `keys`.
class Attention {
 public:
  struct Cache {
    Matrix x_query, x_key;
    Matrix q, k, v;
    Matrix weights;  // softmax rows
    Matrix mixed;    // weights * v
  };

  Attention() = default;
  explicit Attention(int dim);

  Matrix forward(const Matrix& queries, const Matrix& keys, Cache& cache) const;
  // Returns (dL/dqueries, dL/dkeys). For self-attention add both.
  std::pair<Matrix, Matrix> backward(const Cache& cache, const Matrix& grad_out);
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);

  Linear wq, wk, wv, wo;
};

// Linear -> GELU -> Linear.
class FeedForward {
 public:
  struct Cache {
    Matrix x;
    Matrix pre;     // first linear output
    Matrix hidden;  // gelu(pre)
  };

  FeedForward() = default;
  FeedForward(int dim, int hidden);

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& grad_out);
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);

  Linear in, out;
};

// Pre-norm self-attention encoder layer.
class EncoderLayer {
 public:
  struct Cache {
    LayerNorm::Cache ln1, ln2;
    Attention::Cache attn;
    FeedForward::Cache ffn;
  };

  EncoderLayer() = default;
  EncoderLayer(int dim, int hidden);

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& grad_out);
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);

  LayerNorm ln1, ln2;
  Attention attn;
  FeedForward ffn;
};

// Pre-norm decoder block over query states: self-attention, cross-attention
// into the token embeddings, feed-forward, final layer norm. No positional
// signal over queries, so the block is permutation-equivariant in them.
class DecoderBlock {
 public:
  struct Cache {
    LayerNorm::Cache ln1, ln2, ln3, ln_out;
    Attention::Cache self_attn, cross_attn;
    FeedForward::Cache ffn;
  };

  DecoderBlock() = default;
  DecoderBlock(int dim, int hidden);

  Matrix forward(const Matrix& queries, const Matrix& tokens, Cache& cache) const;
  // Returns (dL/dqueries, dL/dtokens).
  std::pair<Matrix, Matrix> backward(const Cache& cache, const Matrix& grad_out);
  // Gradient reaching the input of the final layer norm; used to get per-task
  // gradients of the last feed-forward projection without touching state.
  Matrix output_grad_to_residual(const Cache& cache, const Matrix& grad_out) const;
  void init(Rng& rng);
  void collect(const std::string& prefix, ParamList& out);

  LayerNorm ln1, ln2, ln3, ln_out;
  Attention self_attn, cross_attn;
  FeedForward ffn;
};

// Decoupled weight decay Adam.
struct AdamW {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;
  long step = 0;

  // One update with learning rate `lr`. A zero rate is a frozen step:
  // neither the moments nor the step counter move.
  void update(ParamList& params, double lr);
};

}  // namespace perin
