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

#include "ev/ev_model.hpp"

#include <cmath>

#include "ev/log.hpp"
#include "model_io.hpp"
#include "trainer.hpp"

namespace ev {

void EvArchitecture::validate() const {
  auto positive = [](const std::vector<int>& widths) {
    return std::all_of(widths.begin(), widths.end(), [](int w) { return w >= 1; });
  };
  if (vocab_dim < 1) throw std::invalid_argument("architecture: vocab_dim must be >= 1");
  if (embedding_dim < 1) throw std::invalid_argument("architecture: embedding_dim must be >= 1");
  if (!positive(f_hidden) || !positive(g_hidden) || !positive(h_hidden)) {
    throw std::invalid_argument("architecture: hidden widths must be >= 1");
  }
  if (!(attention_floor > 0.0 && attention_floor < 0.5)) {
    throw std::invalid_argument("architecture: attention_floor must lie in (0, 0.5)");
  }
}

std::vector<DenseLayer> make_stack(int in_dim, std::span<const int> hidden, int out_dim,
                                   Activation last_activation, std::mt19937_64* rng) {
  std::vector<DenseLayer> layers;
  int width = in_dim;
  auto add = [&](int out, Activation act) {
    layers.push_back(rng ? DenseLayer::glorot(width, out, act, *rng)
                         : DenseLayer::zeros(width, out, act));
    width = out;
  };
  for (int h : hidden) add(h, Activation::kTanh);
  add(out_dim, last_activation);
  return layers;
}

namespace {

EvModelParams build(const EvArchitecture& arch, std::mt19937_64* rng) {
  arch.validate();
  EvModelParams params;
  params.arch = arch;
  params.f_layers = make_stack(arch.vocab_dim, arch.f_hidden, arch.embedding_dim,
                               Activation::kTanh, rng);
  params.g_layers = make_stack(arch.vocab_dim, arch.g_hidden, arch.embedding_dim,
                               Activation::kTanh, rng);
  params.h_layers = make_stack(arch.embedding_dim, arch.h_hidden, arch.vocab_dim,
                               Activation::kSoftmax, rng);
  return params;
}

void check_chain(const std::vector<DenseLayer>& layers, int in_dim, int out_dim,
                 Activation last, const char* name) {
  if (layers.empty()) throw std::invalid_argument(std::string(name) + ": no layers");
  Eigen::Index width = in_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in_dim() != width || l.bias.size() != l.out_dim()) {
      throw std::invalid_argument(std::string(name) + ": layer " + std::to_string(i) +
                                  " does not chain");
    }
    const Activation expected = i + 1 == layers.size() ? last : Activation::kTanh;
    if (l.activation != expected) {
      throw std::invalid_argument(std::string(name) + ": unexpected activation in layer " +
                                  std::to_string(i));
    }
    width = l.out_dim();
  }
  if (width != out_dim) throw std::invalid_argument(std::string(name) + ": wrong output width");
}

void check_dim(const BowVector& p, const EvArchitecture& arch, const char* what) {
  if (static_cast<int>(p.dim()) != arch.vocab_dim) {
    throw std::invalid_argument(std::string(what) + ": distribution has dimension " +
                                std::to_string(p.dim()) + ", model expects " +
                                std::to_string(arch.vocab_dim));
  }
}

}  // namespace

EvModelParams EvModelParams::initialize(const EvArchitecture& arch, std::mt19937_64& rng) {
  return build(arch, &rng);
}

EvModelParams EvModelParams::initialize(const EvArchitecture& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return build(arch, &rng);
}

EvModelParams EvModelParams::zeros(const EvArchitecture& arch) { return build(arch, nullptr); }

std::vector<ParamRef> EvModelParams::params() {
  std::vector<ParamRef> refs;
  auto add = [&refs](const char* prefix, std::vector<DenseLayer>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      refs.push_back({std::string(prefix) + "." + std::to_string(i), &layers[i]});
    }
  };
  add("f", f_layers);
  add("g", g_layers);
  add("h", h_layers);
  return refs;
}

void EvModelParams::validate() const {
  arch.validate();
  check_chain(f_layers, arch.vocab_dim, arch.embedding_dim, Activation::kTanh, "f");
  check_chain(g_layers, arch.vocab_dim, arch.embedding_dim, Activation::kTanh, "g");
  check_chain(h_layers, arch.embedding_dim, arch.vocab_dim, Activation::kSoftmax, "h");
}

Vector encode_paragraph(const EvModelParams& params, const BowVector& p) {
  check_dim(p, params.arch, "encode_paragraph");
  return network_forward(params.f_layers, to_dense(p));
}

Vector encode_background(const EvModelParams& params, const BowVector& p_bg) {
  check_dim(p_bg, params.arch, "encode_background");
  return network_forward(params.g_layers, to_dense(p_bg));
}

AttentionResult attention_detail(const Vector& v_paragraph, const Vector& v_background,
                                 double floor) {
  AttentionResult result;
  if (v_paragraph.norm() == 0.0 || v_background.norm() == 0.0) {
    log::warn("attention: zero-norm embedding, using the floor weight");
    result.alpha = floor;
    result.degenerate = true;
    result.clamped = true;
    return result;
  }
  result.cosine = cosine_similarity(v_paragraph, v_background);
  result.raw = (1.0 - result.cosine) / 2.0;
  result.alpha = std::clamp(result.raw, floor, 1.0 - floor);
  result.clamped = result.raw < floor || result.raw > 1.0 - floor;
  return result;
}

double attention(const Vector& v_paragraph, const Vector& v_background, double floor) {
  return attention_detail(v_paragraph, v_background, floor).alpha;
}

ForwardTrace forward(const EvModelParams& params, const BowVector& p, const BowVector& p_bg) {
  check_dim(p, params.arch, "forward");
  check_dim(p_bg, params.arch, "forward");
  ForwardTrace trace;
  trace.v_paragraph = network_forward(params.f_layers, to_dense(p), &trace.f_trace);
  trace.v_background = network_forward(params.g_layers, to_dense(p_bg), &trace.g_trace);
  trace.attention = attention_detail(trace.v_paragraph, trace.v_background,
                                     params.arch.attention_floor);
  trace.alpha = trace.attention.alpha;
  trace.mixed_code = trace.alpha * trace.v_paragraph + (1.0 - trace.alpha) * trace.v_background;
  trace.p_reconstructed = network_forward(params.h_layers, trace.mixed_code, &trace.h_trace);
  trace.p_bg_reconstructed =
      network_forward(params.h_layers, trace.v_background, &trace.h_bg_trace);
  return trace;
}

EvLossTerms ev_loss_terms(const ForwardTrace& trace, const BowVector& p, const BowVector& p_bg) {
  return {kl_divergence(p, trace.p_reconstructed), kl_divergence(p_bg, trace.p_bg_reconstructed)};
}

double ev_loss(const ForwardTrace& trace, const BowVector& p, const BowVector& p_bg,
               double background_weight) {
  const auto terms = ev_loss_terms(trace, p, p_bg);
  return terms.paragraph + background_weight * terms.background;
}

EvGradients EvGradients::zeros_like(const EvModelParams& params) {
  EvGradients grads;
  for (const auto* stack : {&params.f_layers, &params.g_layers, &params.h_layers}) {
    for (const auto& layer : *stack) grads.layers.push_back(LayerGrad::zeros_like(layer));
  }
  grads.f_count = params.f_layers.size();
  grads.g_count = params.g_layers.size();
  return grads;
}

MixGradients backprop_mix(const ForwardTrace& trace, const Vector& mixed_grad) {
  const double alpha = trace.alpha;
  MixGradients out{alpha * mixed_grad, (1.0 - alpha) * mixed_grad};
  if (!trace.attention.clamped) {
    // alpha = (1 - cos) / 2, so d(alpha)/d(cos) = -1/2.
    const double alpha_grad = mixed_grad.dot(trace.v_paragraph - trace.v_background);
    const double cos_grad = -0.5 * alpha_grad;
    out.v_paragraph += cos_grad * cosine_similarity_grad(trace.v_paragraph, trace.v_background);
    out.v_background += cos_grad * cosine_similarity_grad(trace.v_background, trace.v_paragraph);
  }
  return out;
}

void ev_backward_accumulate(const EvModelParams& params, const ForwardTrace& trace,
                            const BowVector& p, const BowVector& p_bg,
                            double background_weight, const Vector* extra_mixed_grad,
                            std::span<LayerGrad> f, std::span<LayerGrad> g,
                            std::span<LayerGrad> h) {
  Vector mixed_grad = backprop(params.h_layers, trace.h_trace,
                               trace.p_reconstructed - to_dense(p), h);
  if (extra_mixed_grad) mixed_grad += *extra_mixed_grad;
  MixGradients codes = backprop_mix(trace, mixed_grad);
  if (background_weight != 0.0) {
    codes.v_background += backprop(params.h_layers, trace.h_bg_trace,
                                   background_weight * (trace.p_bg_reconstructed - to_dense(p_bg)),
                                   h);
  }
  if (!codes.v_paragraph.allFinite() || !codes.v_background.allFinite()) {
    throw std::domain_error("ev_backward: non-finite gradient on the embeddings");
  }
  backprop(params.f_layers, trace.f_trace,
           activation_backward(params.f_layers.back().activation, trace.v_paragraph,
                               codes.v_paragraph),
           f);
  backprop(params.g_layers, trace.g_trace,
           activation_backward(params.g_layers.back().activation, trace.v_background,
                               codes.v_background),
           g);
}

EvGradients ev_backward(const EvModelParams& params, const ForwardTrace& trace,
                        const BowVector& p, const BowVector& p_bg, double background_weight) {
  EvGradients grads = EvGradients::zeros_like(params);
  ev_backward_accumulate(params, trace, p, p_bg, background_weight, nullptr, grads.f(),
                         grads.g(), grads.h());
  return grads;
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("training: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("training: batch_size must be >= 1");
  if (threads < 1) throw std::invalid_argument("training: threads must be >= 1");
  if (!(background_weight >= 0.0)) {
    throw std::invalid_argument("training: background_weight must be >= 0");
  }
}

EvTrainResult train_ev(std::span<const BowVector> corpus, const BowVector& p_bg,
                       const EvArchitecture& arch, const TrainingConfig& config,
                       const EpochCallback& on_epoch, const EvModelParams* init) {
  if (corpus.empty()) throw std::invalid_argument("train_ev: empty corpus");
  config.validate();
  EvTrainResult result;
  if (init) {
    init->validate();
    if (!(init->arch == arch)) throw std::invalid_argument("train_ev: init architecture differs");
    result.params = *init;
  } else {
    result.params = EvModelParams::initialize(arch, config.seed);
  }
  check_dim(p_bg, arch, "train_ev");
  for (const auto& p : corpus) check_dim(p, arch, "train_ev");

  const double w = config.background_weight;
  auto example = [&](const EvModelParams& params, std::size_t index,
                     std::vector<LayerGrad>& grads) {
    const BowVector& p = corpus[index];
    const ForwardTrace trace = forward(params, p, p_bg);
    const EvLossTerms terms = ev_loss_terms(trace, p, p_bg);
    std::span<LayerGrad> all(grads);
    const std::size_t nf = params.f_layers.size(), ng = params.g_layers.size();
    ev_backward_accumulate(params, trace, p, p_bg, w, nullptr, all.first(nf),
                           all.subspan(nf, ng), all.subspan(nf + ng));
    return detail::ExampleTerms{terms.paragraph + w * terms.background, terms.paragraph, 0.0,
                                terms.background};
  };
  result.history = detail::run_minibatch_adam(result.params, corpus.size(), config, example,
                                              on_epoch);
  return result;
}

namespace detail {

void put_arch(ModelImage& image, const EvArchitecture& arch) {
  image.fields["vocab_dim"] = std::to_string(arch.vocab_dim);
  image.fields["embedding_dim"] = std::to_string(arch.embedding_dim);
  image.fields["f_hidden"] = format_ints(arch.f_hidden);
  image.fields["g_hidden"] = format_ints(arch.g_hidden);
  image.fields["h_hidden"] = format_ints(arch.h_hidden);
  image.fields["attention_floor"] = format_double(arch.attention_floor);
}

void append_layers(ModelImage& image, const char* prefix, const std::vector<DenseLayer>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    image.layer_names.push_back(std::string(prefix) + "." + std::to_string(i));
    image.layers.push_back(layers[i]);
  }
}

ModelImage ev_image(const EvModelParams& params) {
  ModelImage image;
  image.version = kModelFormatVersion;
  image.kind = "ev";
  put_arch(image, params.arch);
  append_layers(image, "f", params.f_layers);
  append_layers(image, "g", params.g_layers);
  append_layers(image, "h", params.h_layers);
  return image;
}

const std::string& require_field(const ModelImage& image, const std::string& key) {
  auto it = image.fields.find(key);
  if (it == image.fields.end()) throw std::runtime_error("model file: missing field '" + key + "'");
  return it->second;
}

std::vector<DenseLayer> take_layers(const ModelImage& image, const std::string& prefix) {
  std::vector<DenseLayer> out;
  for (std::size_t i = 0; i < image.layers.size(); ++i) {
    const auto& name = image.layer_names[i];
    if (name.rfind(prefix + ".", 0) == 0) {
      if (name != prefix + "." + std::to_string(out.size())) {
        throw std::runtime_error("model file: layers of '" + prefix + "' out of order");
      }
      out.push_back(image.layers[i]);
    }
  }
  return out;
}

EvModelParams ev_from_image(const ModelImage& image) {
  EvModelParams params;
  params.arch.vocab_dim = std::stoi(require_field(image, "vocab_dim"));
  params.arch.embedding_dim = std::stoi(require_field(image, "embedding_dim"));
  params.arch.f_hidden = parse_ints(require_field(image, "f_hidden"));
  params.arch.g_hidden = parse_ints(require_field(image, "g_hidden"));
  params.arch.h_hidden = parse_ints(require_field(image, "h_hidden"));
  params.arch.attention_floor = parse_double(require_field(image, "attention_floor"));
  params.f_layers = take_layers(image, "f");
  params.g_layers = take_layers(image, "g");
  params.h_layers = take_layers(image, "h");
  params.validate();
  return params;
}

}  // namespace detail

void save_model(const std::filesystem::path& path, const EvModelParams& params) {
  params.validate();
  detail::write_model_image(path, detail::ev_image(params));
}

EvModelParams load_ev_model(const std::filesystem::path& path) {
  return detail::ev_from_image(detail::read_model_image(path));
}

}  // namespace ev
