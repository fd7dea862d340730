#ifndef SENTIGRAPH_NN_HPP
#define SENTIGRAPH_NN_HPP

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "sentigraph/types.hpp"

namespace sentigraph::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

/// Flat registry of named parameter matrices with their gradients. Module
/// objects hold indices into the store, so a deep copy of the store is a
/// complete model snapshot.
class ParamStore {
 public:
  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
          bool trainable = true);
  Tensor& at(int idx) { return tensors_[static_cast<std::size_t>(idx)]; }
  const Tensor& at(int idx) const { return tensors_[static_cast<std::size_t>(idx)]; }
  int find(const std::string& name) const;
  std::size_t size() const { return tensors_.size(); }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  void zero_grads();

 private:
  std::vector<Tensor> tensors_;
};

/// Uniform Xavier-style initialization scaled by fan-in + fan-out.
void xavier_init(Matrix& m, std::mt19937_64& rng);

/// Adam with decoupled-from-nothing classic L2: grad += l2 * value before
/// the moment updates. Frozen tensors are left untouched.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double l2, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), l2_(l2), eps_(eps) {}

  void step(ParamStore& params);

 private:
  double lr_, beta1_, beta2_, l2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

// ---------------------------------------------------------------------------
// Layers. Each forward fills a trace consumed by the matching backward.
// ---------------------------------------------------------------------------

struct LinearTrace {
  Matrix input;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out);

  Matrix forward(const ParamStore& params, const Matrix& input, LinearTrace& trace) const;
  /// Returns the gradient w.r.t. the input; accumulates parameter grads.
  Matrix backward(ParamStore& params, const LinearTrace& trace, const Matrix& d_output) const;

  int weight_index() const { return w_; }
  int bias_index() const { return b_; }

 private:
  int w_ = -1, b_ = -1;
};

struct LstmTrace {
  Matrix input;                // in × T
  Matrix i, f, g, o, c, h;     // hidden × T each
};

/// Single-direction LSTM over a column-per-step sequence; zero initial state.
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParamStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index hidden);

  Matrix forward(const ParamStore& params, const Matrix& input, LstmTrace& trace) const;
  Matrix backward(ParamStore& params, const LstmTrace& trace, const Matrix& d_output) const;

  Eigen::Index hidden() const { return hidden_; }

 private:
  int wx_ = -1, wh_ = -1, b_ = -1;
  Eigen::Index in_ = 0, hidden_ = 0;
};

/// Inverted dropout: masks scale by 1/keep at train time, identity at test
/// time. The mask is the trace.
struct DropoutTrace {
  Matrix mask;  // empty when dropout was inactive
};

Matrix dropout_forward(const Matrix& input, double rate, bool train, std::mt19937_64& rng,
                       DropoutTrace& trace);
Matrix dropout_backward(const DropoutTrace& trace, const Matrix& d_output);

}  // namespace sentigraph::nn

#endif  // SENTIGRAPH_NN_HPP
