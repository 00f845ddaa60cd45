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

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ev/corpus.hpp"

namespace ev {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { kTanh, kSoftmax, kIdentity };

const char* activation_name(Activation activation);
Activation parse_activation(std::string_view name);

struct DenseLayer {
  Matrix weight;  // [out_dim x in_dim]
  Vector bias;    // [out_dim]
  Activation activation = Activation::kTanh;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }

  // Glorot-uniform weights on +-sqrt(6/(fan_in+fan_out)), zero biases.
  static DenseLayer glorot(Eigen::Index in_dim, Eigen::Index out_dim,
                           Activation activation, std::mt19937_64& rng);
  static DenseLayer zeros(Eigen::Index in_dim, Eigen::Index out_dim,
                          Activation activation);
};

Vector softmax(const Vector& logits);
Vector apply_activation(Activation activation, const Vector& preactivation);
Vector dense_forward(const DenseLayer& layer, const Vector& input);

Vector to_dense(const BowVector& p);

// KL(p || q) with 0 log 0 = 0. Throws if q is not positive where p is.
double kl_divergence(const BowVector& p, const Vector& q);
double kl_divergence(const Vector& p, const Vector& q);

double cosine_similarity(const Vector& a, const Vector& b);

// Gradient of cosine_similarity(a, b) with respect to `a`.
Vector cosine_similarity_grad(const Vector& a, const Vector& b);

// Activations of a stack of layers. outputs[0] is the input and
// outputs[i + 1] is the post-activation output of layer i.
struct NetworkTrace {
  std::vector<Vector> outputs;

  const Vector& output() const { return outputs.back(); }
};

Vector network_forward(std::span<const DenseLayer> layers, const Vector& input,
                       NetworkTrace* trace = nullptr);

struct LayerGrad {
  Matrix weight;
  Vector bias;

  static LayerGrad zeros_like(const DenseLayer& layer);
  void set_zero();
  LayerGrad& operator+=(const LayerGrad& other);
  LayerGrad& operator*=(double scale);
};

std::vector<LayerGrad> zero_grads(std::span<const DenseLayer> layers);

// Backpropagates `top_delta`, the loss gradient with respect to the
// pre-activation of the last layer, and adds the parameter gradients into
// `grads`. Returns the loss gradient with respect to the network input.
Vector backprop(std::span<const DenseLayer> layers, const NetworkTrace& trace,
                Vector top_delta, std::span<LayerGrad> grads);

// Loss gradient with respect to the output of a tanh or identity layer,
// mapped to its pre-activation.
Vector activation_backward(Activation activation, const Vector& output,
                           const Vector& output_grad);

// Named view of one trainable parameter set and its gradient.
struct ParamRef {
  std::string name;
  DenseLayer* layer;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<LayerGrad> first_moment;
  std::vector<LayerGrad> second_moment;

  static AdamState for_params(std::span<const ParamRef> params,
                              const AdamConfig& config = {});
};

// One bias-corrected Adam update. Throws std::domain_error naming the first
// parameter with a non-finite gradient; parameters are untouched then.
void adam_step(std::span<const ParamRef> params,
               std::span<const LayerGrad> grads, AdamState& state);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double step_size = 0.0;
  std::size_t checked = 0;

  bool passes(double tolerance) const { return max_relative_error < tolerance; }
};

// A flat run of scalar parameters paired with its analytic gradient.
struct GradCheckParam {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

// Central differences on every scalar. The reported error is
// max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|, 1e-12).
GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                         std::span<const GradCheckParam> params,
                                         double step = 1e-5);

// Gradcheck views over layers, in the same order as `grads`.
std::vector<GradCheckParam> gradcheck_params(std::span<const ParamRef> params,
                                             std::span<const LayerGrad> grads);

}  // namespace ev
