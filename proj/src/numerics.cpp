// Copyright 2026 The Essence Vector Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ev/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ev {

const char* activation_name(Activation activation) {
  switch (activation) {
    case Activation::kTanh: return "tanh";
    case Activation::kSoftmax: return "softmax";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "softmax") return Activation::kSoftmax;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

DenseLayer DenseLayer::glorot(Eigen::Index in_dim, Eigen::Index out_dim,
                              Activation activation, std::mt19937_64& rng) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("layer: empty shape");
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  DenseLayer layer = zeros(in_dim, out_dim, activation);
  // Row-major fill keeps the draw order independent of Eigen's storage.
  for (Eigen::Index r = 0; r < out_dim; ++r) {
    for (Eigen::Index c = 0; c < in_dim; ++c) layer.weight(r, c) = uniform(rng);
  }
  return layer;
}

DenseLayer DenseLayer::zeros(Eigen::Index in_dim, Eigen::Index out_dim,
                             Activation activation) {
  return DenseLayer{Matrix::Zero(out_dim, in_dim), Vector::Zero(out_dim),
                    activation};
}

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty input");
  const double top = logits.maxCoeff();
  Vector out = (logits.array() - top).exp();
  out /= out.sum();
  return out;
}

Vector apply_activation(Activation activation, const Vector& preactivation) {
  switch (activation) {
    case Activation::kTanh: return preactivation.array().tanh();
    case Activation::kSoftmax: return softmax(preactivation);
    case Activation::kIdentity: return preactivation;
  }
  throw std::logic_error("unreachable activation");
}

namespace {

// W x, skipping zero columns when the input is sparse. The summation order is
// a pure function of the input, so results stay deterministic.
Vector affine(const DenseLayer& layer, const Vector& input) {
  Eigen::Index nnz = 0;
  for (Eigen::Index i = 0; i < input.size(); ++i) nnz += input[i] != 0.0;
  if (nnz * 4 >= input.size()) return layer.weight * input + layer.bias;
  Vector out = layer.bias;
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    if (input[i] != 0.0) out.noalias() += layer.weight.col(i) * input[i];
  }
  return out;
}

}  // namespace

Vector dense_forward(const DenseLayer& layer, const Vector& input) {
  if (input.size() != layer.in_dim()) {
    throw std::invalid_argument("dense_forward: input has " +
                                std::to_string(input.size()) + " entries, layer expects " +
                                std::to_string(layer.in_dim()));
  }
  if (layer.bias.size() != layer.out_dim()) {
    throw std::invalid_argument("dense_forward: bias/weight shape mismatch");
  }
  return apply_activation(layer.activation, affine(layer, input));
}

Vector to_dense(const BowVector& p) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(p.dim()));
  for (const auto& e : p.entries()) out[static_cast<Eigen::Index>(e.index)] = e.weight;
  return out;
}

double kl_divergence(const BowVector& p, const Vector& q) {
  if (static_cast<Eigen::Index>(p.dim()) != q.size()) {
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  }
  double sum = 0.0;
  for (const auto& e : p.entries()) {
    const double qi = q[static_cast<Eigen::Index>(e.index)];
    if (!(qi > 0.0)) {
      throw std::domain_error("kl_divergence: q is zero where p is positive");
    }
    sum += e.weight * std::log(e.weight / qi);
  }
  return sum;
}

double kl_divergence(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0) throw std::domain_error("kl_divergence: negative p");
    if (p[i] == 0.0) continue;
    if (!(q[i] > 0.0)) {
      throw std::domain_error("kl_divergence: q is zero where p is positive");
    }
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return sum;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine: zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Vector cosine_similarity_grad(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine: zero-norm vector");
  const double cos = a.dot(b) / (na * nb);
  return b / (na * nb) - a * (cos / (na * na));
}

Vector network_forward(std::span<const DenseLayer> layers, const Vector& input,
                       NetworkTrace* trace) {
  if (trace) {
    trace->outputs.clear();
    trace->outputs.reserve(layers.size() + 1);
    trace->outputs.push_back(input);
  }
  Vector x = input;
  for (const auto& layer : layers) {
    x = dense_forward(layer, x);
    if (trace) trace->outputs.push_back(x);
  }
  return x;
}

LayerGrad LayerGrad::zeros_like(const DenseLayer& layer) {
  return LayerGrad{Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                   Vector::Zero(layer.bias.size())};
}

void LayerGrad::set_zero() {
  weight.setZero();
  bias.setZero();
}

LayerGrad& LayerGrad::operator+=(const LayerGrad& other) {
  weight += other.weight;
  bias += other.bias;
  return *this;
}

LayerGrad& LayerGrad::operator*=(double scale) {
  weight *= scale;
  bias *= scale;
  return *this;
}

std::vector<LayerGrad> zero_grads(std::span<const DenseLayer> layers) {
  std::vector<LayerGrad> grads;
  grads.reserve(layers.size());
  for (const auto& layer : layers) grads.push_back(LayerGrad::zeros_like(layer));
  return grads;
}

Vector activation_backward(Activation activation, const Vector& output,
                           const Vector& output_grad) {
  switch (activation) {
    case Activation::kTanh:
      return output_grad.array() * (1.0 - output.array().square());
    case Activation::kIdentity:
      return output_grad;
    case Activation::kSoftmax:
      break;
  }
  throw std::logic_error(
      "activation_backward: softmax layers take a pre-activation delta");
}

Vector backprop(std::span<const DenseLayer> layers, const NetworkTrace& trace,
                Vector top_delta, std::span<LayerGrad> grads) {
  if (trace.outputs.size() != layers.size() + 1 || grads.size() != layers.size()) {
    throw std::invalid_argument("backprop: trace/gradient shape mismatch");
  }
  Vector delta = std::move(top_delta);
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Vector& input = trace.outputs[i];
    auto& grad = grads[i];
    for (Eigen::Index c = 0; c < input.size(); ++c) {
      if (input[c] != 0.0) grad.weight.col(c).noalias() += delta * input[c];
    }
    grad.bias += delta;
    Vector input_grad = layers[i].weight.transpose() * delta;
    if (i == 0) return input_grad;
    delta = activation_backward(layers[i - 1].activation, input, input_grad);
  }
  return delta;
}

AdamState AdamState::for_params(std::span<const ParamRef> params,
                                const AdamConfig& config) {
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 &&
        config.beta2 < 1.0 && config.epsilon > 0.0 && config.learning_rate > 0.0)) {
    throw std::invalid_argument("adam: invalid hyperparameters");
  }
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.first_moment.push_back(LayerGrad::zeros_like(*p.layer));
    state.second_moment.push_back(LayerGrad::zeros_like(*p.layer));
  }
  return state;
}

void adam_step(std::span<const ParamRef> params,
               std::span<const LayerGrad> grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& layer = *params[i].layer;
    if (grads[i].weight.rows() != layer.weight.rows() ||
        grads[i].weight.cols() != layer.weight.cols() ||
        grads[i].bias.size() != layer.bias.size()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for " +
                                  params[i].name);
    }
    if (!grads[i].weight.allFinite() || !grads[i].bias.allFinite()) {
      throw std::domain_error("adam_step: non-finite gradient in " + params[i].name);
    }
  }
  const auto& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](auto& value, const auto& grad, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    value.array() -= cfg.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + cfg.epsilon);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& layer = *params[i].layer;
    update(layer.weight, grads[i].weight, state.first_moment[i].weight,
           state.second_moment[i].weight);
    update(layer.bias, grads[i].bias, state.first_moment[i].bias,
           state.second_moment[i].bias);
  }
}

GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                         std::span<const GradCheckParam> params,
                                         double step) {
  if (!(step > 0.0)) throw std::invalid_argument("gradcheck: step must be positive");
  GradCheckReport report;
  report.step_size = step;
  double max_abs_diff = 0.0;
  double scale = 1e-12;
  for (const auto& param : params) {
    if (param.values.size() != param.analytic.size()) {
      throw std::invalid_argument("gradcheck: size mismatch for " + param.name);
    }
    for (std::size_t i = 0; i < param.values.size(); ++i) {
      double& theta = param.values[i];
      const double saved = theta;
      theta = saved + step;
      const double plus = loss();
      theta = saved - step;
      const double minus = loss();
      theta = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double analytic = param.analytic[i];
      const double diff = std::abs(analytic - numeric);
      scale = std::max({scale, std::abs(analytic), std::abs(numeric)});
      if (report.worst_parameter.empty() || diff > max_abs_diff) {
        max_abs_diff = diff;
        report.worst_parameter = param.name + "[" + std::to_string(i) + "]";
      }
      ++report.checked;
    }
  }
  report.max_relative_error = max_abs_diff / scale;
  return report;
}

std::vector<GradCheckParam> gradcheck_params(std::span<const ParamRef> params,
                                             std::span<const LayerGrad> grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("gradcheck_params: count mismatch");
  }
  std::vector<GradCheckParam> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& layer = *params[i].layer;
    out.push_back({params[i].name + ".weight",
                   std::span<double>(layer.weight.data(), layer.weight.size()),
                   std::span<const double>(grads[i].weight.data(), grads[i].weight.size())});
    out.push_back({params[i].name + ".bias",
                   std::span<double>(layer.bias.data(), layer.bias.size()),
                   std::span<const double>(grads[i].bias.data(), grads[i].bias.size())});
  }
  return out;
}

}  // namespace ev
