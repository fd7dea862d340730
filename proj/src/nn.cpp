#include "sentigraph/nn.hpp"

#include <cmath>

namespace sentigraph::nn {

int ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                    bool trainable) {
  if (find(name) >= 0) throw Error("duplicate parameter name: " + name);
  Tensor t;
  t.name = name;
  t.value = Matrix::Zero(rows, cols);
  t.grad = Matrix::Zero(rows, cols);
  t.trainable = trainable;
  tensors_.push_back(std::move(t));
  return static_cast<int>(tensors_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return static_cast<int>(i);
  return -1;
}

void ParamStore::zero_grads() {
  for (Tensor& t : tensors_) t.grad.setZero();
}

void xavier_init(Matrix& m, std::mt19937_64& rng) {
  const double fan = static_cast<double>(m.rows() + m.cols());
  const double limit = std::sqrt(6.0 / fan);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

void Adam::step(ParamStore& params) {
  if (m_.empty()) {
    for (const Tensor& t : params.tensors()) {
      m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
      v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    Tensor& t = params.tensors()[i];
    if (!t.trainable) continue;
    Matrix g = t.grad;
    if (l2_ != 0.0) g += l2_ * t.value;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const Matrix m_hat = m_[i] / bc1;
    const Matrix v_hat = v_[i] / bc2;
    t.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(ParamStore& store, const std::string& prefix, Eigen::Index in,
               Eigen::Index out) {
  w_ = store.add(prefix + ".W", out, in);
  b_ = store.add(prefix + ".b", out, 1);
}

Matrix Linear::forward(const ParamStore& params, const Matrix& input,
                       LinearTrace& trace) const {
  trace.input = input;
  return (params.at(w_).value * input).colwise() +
         Vector(params.at(b_).value.col(0));
}

Matrix Linear::backward(ParamStore& params, const LinearTrace& trace,
                        const Matrix& d_output) const {
  params.at(w_).grad += d_output * trace.input.transpose();
  params.at(b_).grad.col(0) += d_output.rowwise().sum();
  return params.at(w_).value.transpose() * d_output;
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

namespace {

inline Vector sigmoid(const Vector& x) {
  return 1.0 / (1.0 + (-x.array()).exp());
}

}  // namespace

Lstm::Lstm(ParamStore& store, const std::string& prefix, Eigen::Index in,
           Eigen::Index hidden)
    : in_(in), hidden_(hidden) {
  wx_ = store.add(prefix + ".Wx", 4 * hidden, in);
  wh_ = store.add(prefix + ".Wh", 4 * hidden, hidden);
  b_ = store.add(prefix + ".b", 4 * hidden, 1);
}

Matrix Lstm::forward(const ParamStore& params, const Matrix& input, LstmTrace& trace) const {
  const Eigen::Index T = input.cols();
  const Eigen::Index H = hidden_;
  trace.input = input;
  trace.i.resize(H, T);
  trace.f.resize(H, T);
  trace.g.resize(H, T);
  trace.o.resize(H, T);
  trace.c.resize(H, T);
  trace.h.resize(H, T);

  const Matrix& Wx = params.at(wx_).value;
  const Matrix& Wh = params.at(wh_).value;
  const Vector b = params.at(b_).value.col(0);

  Vector h_prev = Vector::Zero(H);
  Vector c_prev = Vector::Zero(H);
  for (Eigen::Index t = 0; t < T; ++t) {
    Vector z = Wx * input.col(t) + Wh * h_prev + b;
    const Vector i = sigmoid(z.segment(0, H));
    const Vector f = sigmoid(z.segment(H, H));
    const Vector g = z.segment(2 * H, H).array().tanh();
    const Vector o = sigmoid(z.segment(3 * H, H));
    const Vector c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    const Vector h = o.cwiseProduct(c.array().tanh().matrix());
    trace.i.col(t) = i;
    trace.f.col(t) = f;
    trace.g.col(t) = g;
    trace.o.col(t) = o;
    trace.c.col(t) = c;
    trace.h.col(t) = h;
    h_prev = h;
    c_prev = c;
  }
  return trace.h;
}

Matrix Lstm::backward(ParamStore& params, const LstmTrace& trace,
                      const Matrix& d_output) const {
  const Eigen::Index T = trace.input.cols();
  const Eigen::Index H = hidden_;

  Matrix& gWx = params.at(wx_).grad;
  Matrix& gWh = params.at(wh_).grad;
  Matrix& gb = params.at(b_).grad;
  const Matrix& Wx = params.at(wx_).value;
  const Matrix& Wh = params.at(wh_).value;

  Matrix d_input = Matrix::Zero(in_, T);
  Vector dh_next = Vector::Zero(H);
  Vector dc_next = Vector::Zero(H);

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Vector i = trace.i.col(t);
    const Vector f = trace.f.col(t);
    const Vector g = trace.g.col(t);
    const Vector o = trace.o.col(t);
    const Vector c = trace.c.col(t);
    const Vector tanh_c = c.array().tanh();

    const Vector dh = d_output.col(t) + dh_next;
    const Vector do_ = dh.cwiseProduct(tanh_c);
    const Vector dc = dc_next +
        dh.cwiseProduct(o).cwiseProduct((1.0 - tanh_c.array().square()).matrix());

    const Vector c_prev = t > 0 ? Vector(trace.c.col(t - 1)) : Vector(Vector::Zero(H));
    const Vector di = dc.cwiseProduct(g);
    const Vector df = dc.cwiseProduct(c_prev);
    const Vector dg = dc.cwiseProduct(i);
    dc_next = dc.cwiseProduct(f);

    Vector dz(4 * H);
    dz.segment(0, H) = di.cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
    dz.segment(H, H) = df.cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
    dz.segment(2 * H, H) = dg.cwiseProduct((1.0 - g.array().square()).matrix());
    dz.segment(3 * H, H) = do_.cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());

    gWx += dz * trace.input.col(t).transpose();
    if (t > 0) gWh += dz * trace.h.col(t - 1).transpose();
    gb.col(0) += dz;

    d_input.col(t) = Wx.transpose() * dz;
    dh_next = Wh.transpose() * dz;
  }
  return d_input;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

Matrix dropout_forward(const Matrix& input, double rate, bool train, std::mt19937_64& rng,
                       DropoutTrace& trace) {
  if (!train || rate <= 0.0) {
    trace.mask.resize(0, 0);
    return input;
  }
  const double keep = 1.0 - rate;
  std::bernoulli_distribution dist(keep);
  trace.mask.resize(input.rows(), input.cols());
  for (Eigen::Index c = 0; c < input.cols(); ++c)
    for (Eigen::Index r = 0; r < input.rows(); ++r)
      trace.mask(r, c) = dist(rng) ? 1.0 / keep : 0.0;
  return input.cwiseProduct(trace.mask);
}

Matrix dropout_backward(const DropoutTrace& trace, const Matrix& d_output) {
  if (trace.mask.size() == 0) return d_output;
  return d_output.cwiseProduct(trace.mask);
}

}  // namespace sentigraph::nn
