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

#include "ev/dev_model.hpp"

#include "model_io.hpp"
#include "trainer.hpp"

namespace ev {
namespace {

void check_pair(const PairedExample& pair, const EvArchitecture& arch) {
  const auto dim = static_cast<std::size_t>(arch.vocab_dim);
  if (pair.noisy.dim() != dim || pair.clean.dim() != dim) {
    throw std::invalid_argument("paired example: dimension does not match the model");
  }
}

}  // namespace

void DevArchitecture::validate() const {
  ev.validate();
  for (int w : s_hidden) {
    if (w < 1) throw std::invalid_argument("architecture: s hidden widths must be >= 1");
  }
}

DevModelParams DevModelParams::initialize(const DevArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  DevModelParams params;
  params.ev = EvModelParams::initialize(arch.ev, rng);
  params.s_hidden = arch.s_hidden;
  params.s_layers = make_stack(arch.ev.embedding_dim, arch.s_hidden, arch.ev.vocab_dim,
                               Activation::kSoftmax, &rng);
  return params;
}

DevModelParams DevModelParams::zeros(const DevArchitecture& arch) {
  arch.validate();
  DevModelParams params;
  params.ev = EvModelParams::zeros(arch.ev);
  params.s_hidden = arch.s_hidden;
  params.s_layers = make_stack(arch.ev.embedding_dim, arch.s_hidden, arch.ev.vocab_dim,
                               Activation::kSoftmax, nullptr);
  return params;
}

DevModelParams DevModelParams::from_ev(const EvModelParams& ev, std::span<const int> s_hidden,
                                       std::uint64_t seed) {
  ev.validate();
  std::mt19937_64 rng(seed);
  DevModelParams params;
  params.ev = ev;
  params.s_hidden.assign(s_hidden.begin(), s_hidden.end());
  params.s_layers = make_stack(ev.arch.embedding_dim, s_hidden, ev.arch.vocab_dim,
                               Activation::kSoftmax, &rng);
  params.validate();
  return params;
}

std::vector<ParamRef> DevModelParams::params() {
  auto refs = ev.params();
  for (std::size_t i = 0; i < s_layers.size(); ++i) {
    refs.push_back({"s." + std::to_string(i), &s_layers[i]});
  }
  return refs;
}

void DevModelParams::validate() const {
  ev.validate();
  if (s_layers.size() != s_hidden.size() + 1) {
    throw std::invalid_argument("s: layer count does not match s_hidden");
  }
  Eigen::Index width = ev.arch.embedding_dim;
  for (std::size_t i = 0; i < s_layers.size(); ++i) {
    const auto& l = s_layers[i];
    const bool last = i + 1 == s_layers.size();
    const Eigen::Index out = last ? ev.arch.vocab_dim : s_hidden[i];
    if (l.in_dim() != width || l.out_dim() != out || l.bias.size() != out ||
        l.activation != (last ? Activation::kSoftmax : Activation::kTanh)) {
      throw std::invalid_argument("s: layer " + std::to_string(i) + " is malformed");
    }
    width = out;
  }
}

DevForwardTrace dev_forward(const DevModelParams& params, const PairedExample& pair,
                            const BowVector& p_bg) {
  check_pair(pair, params.ev.arch);
  DevForwardTrace trace;
  trace.ev = forward(params.ev, pair.noisy, p_bg);
  trace.p_clean_reconstructed =
      network_forward(params.s_layers, trace.ev.mixed_code, &trace.s_trace);
  return trace;
}

DevLossTerms dev_loss_terms(const DevForwardTrace& trace, const PairedExample& pair,
                            const BowVector& p_bg) {
  const auto ev_terms = ev_loss_terms(trace.ev, pair.noisy, p_bg);
  return {ev_terms.paragraph, kl_divergence(pair.clean, trace.p_clean_reconstructed),
          ev_terms.background};
}

double dev_loss(const DevForwardTrace& trace, const PairedExample& pair, const BowVector& p_bg,
                double background_weight) {
  return ev_loss(trace.ev, pair.noisy, p_bg, background_weight) +
         kl_divergence(pair.clean, trace.p_clean_reconstructed);
}

DevGradients DevGradients::zeros_like(const DevModelParams& params) {
  return {EvGradients::zeros_like(params.ev), zero_grads(params.s_layers)};
}

namespace {

void dev_backward_accumulate(const DevModelParams& params, const DevForwardTrace& trace,
                             const PairedExample& pair, const BowVector& p_bg,
                             double background_weight, double clean_weight,
                             std::span<LayerGrad> f, std::span<LayerGrad> g,
                             std::span<LayerGrad> h, std::span<LayerGrad> s) {
  Vector s_mixed_grad;
  const Vector* extra = nullptr;
  if (clean_weight != 0.0) {
    s_mixed_grad = backprop(params.s_layers, trace.s_trace,
                            clean_weight * (trace.p_clean_reconstructed - to_dense(pair.clean)),
                            s);
    extra = &s_mixed_grad;
  }
  ev_backward_accumulate(params.ev, trace.ev, pair.noisy, p_bg, background_weight, extra, f, g,
                         h);
}

}  // namespace

DevGradients dev_backward(const DevModelParams& params, const DevForwardTrace& trace,
                          const PairedExample& pair, const BowVector& p_bg,
                          double background_weight, double clean_weight) {
  DevGradients grads = DevGradients::zeros_like(params);
  dev_backward_accumulate(params, trace, pair, p_bg, background_weight, clean_weight,
                          grads.ev.f(), grads.ev.g(), grads.ev.h(), grads.s);
  return grads;
}

DevTrainResult train_dev(std::span<const PairedExample> pairs, const BowVector& p_bg,
                         const DevArchitecture& arch, const TrainingConfig& config,
                         const EpochCallback& on_epoch, const DevModelParams* init) {
  if (pairs.empty()) throw std::invalid_argument("train_dev: no paired examples");
  config.validate();
  DevTrainResult result;
  if (init) {
    init->validate();
    if (!(init->arch() == arch)) throw std::invalid_argument("train_dev: init architecture differs");
    result.params = *init;
  } else {
    result.params = DevModelParams::initialize(arch, config.seed);
  }
  if (p_bg.dim() != static_cast<std::size_t>(arch.ev.vocab_dim)) {
    throw std::invalid_argument("train_dev: background dimension does not match the model");
  }
  for (const auto& pair : pairs) check_pair(pair, arch.ev);

  const double w = config.background_weight;
  auto example = [&](const DevModelParams& params, std::size_t index,
                     std::vector<LayerGrad>& grads) {
    const PairedExample& pair = pairs[index];
    const DevForwardTrace trace = dev_forward(params, pair, p_bg);
    const DevLossTerms terms = dev_loss_terms(trace, pair, p_bg);
    std::span<LayerGrad> all(grads);
    const std::size_t nf = params.ev.f_layers.size();
    const std::size_t ng = params.ev.g_layers.size();
    const std::size_t nh = params.ev.h_layers.size();
    dev_backward_accumulate(params, trace, pair, p_bg, w, 1.0, all.first(nf),
                            all.subspan(nf, ng), all.subspan(nf + ng, nh),
                            all.subspan(nf + ng + nh));
    return detail::ExampleTerms{terms.paragraph + w * terms.background + terms.clean,
                                terms.paragraph, terms.clean, terms.background};
  };
  result.history =
      detail::run_minibatch_adam(result.params, pairs.size(), config, example, on_epoch);
  return result;
}

void save_model(const std::filesystem::path& path, const DevModelParams& params) {
  params.validate();
  detail::ModelImage image = detail::ev_image(params.ev);
  image.kind = "dev";
  image.fields["s_hidden"] = detail::format_ints(params.s_hidden);
  detail::append_layers(image, "s", params.s_layers);
  detail::write_model_image(path, image);
}

DevModelParams load_dev_model(const std::filesystem::path& path) {
  const auto image = detail::read_model_image(path);
  if (image.kind != "dev") {
    throw std::runtime_error("model file " + path.string() + " holds an EV model, not D-EV");
  }
  DevModelParams params;
  params.ev = detail::ev_from_image(image);
  params.s_hidden = detail::parse_ints(detail::require_field(image, "s_hidden"));
  params.s_layers = detail::take_layers(image, "s");
  params.validate();
  return params;
}

}  // namespace ev
