#pragma once

// Dense tanh multilayer perceptron with batched reverse-mode gradients.
// Batches are column-major: one sample per column.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "downwash/rng.hpp"

namespace downwash {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Activations kept from a forward pass for the backward pass.
struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
};

class Mlp {
 public:
  Mlp() = default;

  /// Zero-initialised network with layer widths dims = {d_in, hidden..., d_out}.
  explicit Mlp(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
    for (std::size_t d : dims_) {
      if (d == 0) throw std::invalid_argument("Mlp: zero-width layer");
    }
    for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
      const auto in = static_cast<Eigen::Index>(dims_[i]);
      const auto out = static_cast<Eigen::Index>(dims_[i + 1]);
      layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
    }
  }

  /// Weights and biases uniform in +-1/sqrt(fan_in), drawn layer by layer in
  /// row-major order.
  static Mlp uniform_init(std::vector<std::size_t> dims, Rng& rng) {
    Mlp m(std::move(dims));
    for (auto& layer : m.layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
          layer.weight(r, c) = rng.uniform(-bound, bound);
        }
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
        layer.bias(r) = rng.uniform(-bound, bound);
      }
    }
    return m;
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim()) {
      throw std::invalid_argument("Mlp::forward: expected input of size " +
                                  std::to_string(input_dim()) + ", got " +
                                  std::to_string(x.size()));
    }
    Eigen::VectorXd a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Eigen::VectorXd z = layers_[i].weight * a + layers_[i].bias;
      a = is_hidden(i) ? Eigen::VectorXd(z.array().tanh().matrix()) : z;
    }
    return a;
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    MlpTape unused;
    return forward_batch(x, unused);
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, MlpTape& tape) const {
    if (static_cast<std::size_t>(x.rows()) != input_dim()) {
      throw std::invalid_argument("Mlp::forward_batch: expected " + std::to_string(input_dim()) +
                                  " input rows, got " + std::to_string(x.rows()));
    }
    tape.inputs.resize(layers_.size());
    tape.inputs[0] = x;
    Eigen::MatrixXd a;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Eigen::MatrixXd& in = tape.inputs[i];
      Eigen::MatrixXd z = layers_[i].weight * in;
      z.colwise() += layers_[i].bias;
      if (is_hidden(i)) {
        tape.inputs[i + 1] = z.array().tanh().matrix();
      } else {
        a = std::move(z);
      }
    }
    return a;
  }

  /// Back-propagates dL/d(output) through the tape. Parameter gradients are
  /// added into `grads` (same architecture); returns dL/d(input).
  Eigen::MatrixXd backward(const MlpTape& tape, const Eigen::MatrixXd& grad_out,
                           Mlp& grads) const {
    Eigen::MatrixXd delta = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (is_hidden(i)) {
        // tape.inputs[i + 1] holds tanh(z_i).
        delta.array() *= 1.0 - tape.inputs[i + 1].array().square();
      }
      grads.layers_[i].weight.noalias() += delta * tape.inputs[i].transpose();
      grads.layers_[i].bias += delta.rowwise().sum();
      delta = layers_[i].weight.transpose() * delta;
    }
    return delta;
  }

  /// Parameters flattened layer by layer: weight (row-major) then bias.
  void write_parameters(std::span<double> out) const {
    if (out.size() != parameter_count()) throw std::invalid_argument("Mlp: parameter span size");
    std::size_t at = 0;
    for (const auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out[at++] = l.weight(r, c);
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) out[at++] = l.bias(r);
    }
  }

  void read_parameters(std::span<const double> in) {
    if (in.size() != parameter_count()) throw std::invalid_argument("Mlp: parameter span size");
    std::size_t at = 0;
    for (auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = in[at++];
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = in[at++];
    }
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  void set_zero() {
    for (auto& l : layers_) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.dims_ != b.dims_) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      if (a.layers_[i].weight != b.layers_[i].weight || a.layers_[i].bias != b.layers_[i].bias) {
        return false;
      }
    }
    return true;
  }

 private:
  bool is_hidden(std::size_t layer) const { return layer + 1 < layers_.size(); }

  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

struct MlpSample {
  Eigen::VectorXd input;
  Eigen::VectorXd target;
};

struct MlpGradientResult {
  Mlp gradients;
  double loss = 0.0;
};

/// Weighted mean squared error over the batch:
///   L = 1/(B * d_out) * sum_b sum_a w_a (y_ab - t_ab)^2
/// and its exact gradient with respect to every parameter.
inline MlpGradientResult mlp_gradients(const Mlp& m, std::span<const MlpSample> batch,
                                       const Eigen::VectorXd& loss_weights) {
  if (batch.empty()) throw std::invalid_argument("mlp_gradients: empty batch");
  const auto d_in = static_cast<Eigen::Index>(m.input_dim());
  const auto d_out = static_cast<Eigen::Index>(m.output_dim());
  if (loss_weights.size() != d_out) throw std::invalid_argument("mlp_gradients: loss weight size");
  const auto b = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd x(d_in, b), t(d_out, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& s = batch[static_cast<std::size_t>(i)];
    if (s.input.size() != d_in || s.target.size() != d_out) {
      throw std::invalid_argument("mlp_gradients: sample dimension mismatch");
    }
    x.col(i) = s.input;
    t.col(i) = s.target;
  }
  MlpTape tape;
  const Eigen::MatrixXd y = m.forward_batch(x, tape);
  const Eigen::MatrixXd err = y - t;
  const double norm = 1.0 / static_cast<double>(b * d_out);
  MlpGradientResult out{Mlp(m.dims()), 0.0};
  out.loss = norm * (loss_weights.asDiagonal() * err.cwiseAbs2()).sum();
  const Eigen::MatrixXd grad_y = (2.0 * norm) * (loss_weights.asDiagonal() * err);
  m.backward(tape, grad_y, out.gradients);
  return out;
}

/// Adam on a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, double beta1, double beta2, double epsilon)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
        m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double learning_rate) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
  }

  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_;
  Eigen::VectorXd m_, v_;
  std::size_t t_ = 0;
};

}  // namespace downwash
