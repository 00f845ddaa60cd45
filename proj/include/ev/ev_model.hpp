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
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ev/corpus.hpp"
#include "ev/numerics.hpp"

namespace ev {

struct EvArchitecture {
  int vocab_dim = 0;
  int embedding_dim = 64;
  std::vector<int> f_hidden{256};
  std::vector<int> g_hidden{256};
  std::vector<int> h_hidden{256};
  double attention_floor = 0.05;

  void validate() const;
  bool operator==(const EvArchitecture&) const = default;
};

// Paragraph encoder f, background encoder g and decoder h. Hidden layers use
// tanh; the encoders end in a tanh layer of width embedding_dim and h ends in
// a softmax over the vocabulary.
struct EvModelParams {
  EvArchitecture arch;
  std::vector<DenseLayer> f_layers;
  std::vector<DenseLayer> g_layers;
  std::vector<DenseLayer> h_layers;

  // Draws f, then g, then h from `rng`.
  static EvModelParams initialize(const EvArchitecture& arch, std::mt19937_64& rng);
  static EvModelParams initialize(const EvArchitecture& arch, std::uint64_t seed);
  static EvModelParams zeros(const EvArchitecture& arch);

  // Parameter views in f, g, h order, named "f.0", "g.1", ...
  std::vector<ParamRef> params();
  void validate() const;
};

// Builds the tanh stack in_dim -> hidden... -> out_dim whose last layer uses
// `last_activation`.
std::vector<DenseLayer> make_stack(int in_dim, std::span<const int> hidden, int out_dim,
                                   Activation last_activation, std::mt19937_64* rng);

Vector encode_paragraph(const EvModelParams& params, const BowVector& p);
Vector encode_background(const EvModelParams& params, const BowVector& p_bg);

struct AttentionResult {
  double alpha = 0.0;
  double raw = 0.0;      // (1 - cos) / 2 before clamping
  double cosine = 0.0;
  bool clamped = false;  // raw fell outside [floor, 1 - floor]
  bool degenerate = false;  // an embedding had zero norm
};

// Weight on the paragraph code: (1 - cos(v_p, v_bg)) / 2 clamped to
// [floor, 1 - floor]. A zero-norm embedding yields the floor.
AttentionResult attention_detail(const Vector& v_paragraph, const Vector& v_background,
                                 double floor);
double attention(const Vector& v_paragraph, const Vector& v_background, double floor);

struct ForwardTrace {
  Vector v_paragraph;
  Vector v_background;
  AttentionResult attention;
  double alpha = 0.0;
  Vector mixed_code;
  Vector p_reconstructed;     // h(mixed_code)
  Vector p_bg_reconstructed;  // h(v_background)

  NetworkTrace f_trace;
  NetworkTrace g_trace;
  NetworkTrace h_trace;
  NetworkTrace h_bg_trace;
};

ForwardTrace forward(const EvModelParams& params, const BowVector& p,
                     const BowVector& p_bg);

struct EvLossTerms {
  double paragraph = 0.0;   // KL(P || P')
  double background = 0.0;  // KL(P_BG || P'_BG)
};

EvLossTerms ev_loss_terms(const ForwardTrace& trace, const BowVector& p,
                          const BowVector& p_bg);

// paragraph + background_weight * background.
double ev_loss(const ForwardTrace& trace, const BowVector& p, const BowVector& p_bg,
               double background_weight = 1.0);

// Gradients in EvModelParams::params() order: f layers, g layers, h layers.
struct EvGradients {
  std::vector<LayerGrad> layers;
  std::size_t f_count = 0;
  std::size_t g_count = 0;

  static EvGradients zeros_like(const EvModelParams& params);
  std::span<LayerGrad> f() { return std::span(layers).first(f_count); }
  std::span<LayerGrad> g() { return std::span(layers).subspan(f_count, g_count); }
  std::span<LayerGrad> h() { return std::span(layers).subspan(f_count + g_count); }
  std::span<const LayerGrad> f() const { return std::span(layers).first(f_count); }
  std::span<const LayerGrad> g() const { return std::span(layers).subspan(f_count, g_count); }
  std::span<const LayerGrad> h() const { return std::span(layers).subspan(f_count + g_count); }
};

// Adds the gradient of one EV example into `f`, `g`, `h`. `extra_mixed_grad`,
// when given, is an additional loss gradient on the mixed code (the D-EV
// denoising path) that joins the h path before the attention split.
void ev_backward_accumulate(const EvModelParams& params, const ForwardTrace& trace,
                            const BowVector& p, const BowVector& p_bg,
                            double background_weight, const Vector* extra_mixed_grad,
                            std::span<LayerGrad> f, std::span<LayerGrad> g,
                            std::span<LayerGrad> h);

// Loss gradient with respect to the mixed code and the two codes it mixes.
struct MixGradients {
  Vector v_paragraph;
  Vector v_background;
};

// Splits d(loss)/d(mixed_code) into the contributions to v_paragraph and
// v_background, including the path through the attention weight.
MixGradients backprop_mix(const ForwardTrace& trace, const Vector& mixed_grad);

// Analytic gradient of ev_loss, attention included. The softmax/KL pair is
// differentiated jointly: d/dlogits = P' - P.
EvGradients ev_backward(const EvModelParams& params, const ForwardTrace& trace,
                        const BowVector& p, const BowVector& p_bg,
                        double background_weight = 1.0);

struct TrainingConfig {
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam;
  bool shuffle = true;
  double background_weight = 1.0;
  int threads = 1;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;             // 1-based
  double mean_loss = 0.0;    // mean per-example weighted loss
  double kl_paragraph = 0.0;
  double kl_clean = 0.0;     // D-EV only
  double kl_background = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

struct EvTrainResult {
  EvModelParams params;
  std::vector<EpochStats> history;
};

// Raised when the loss becomes non-finite. Carries the parameters from the
// end of the last finite epoch.
template <typename Params>
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, Params last_good, std::vector<EpochStats> history)
      : std::runtime_error(what), last_good_(std::move(last_good)), history_(std::move(history)) {}
  const Params& last_good() const { return last_good_; }
  const std::vector<EpochStats>& history() const { return history_; }

 private:
  Params last_good_;
  std::vector<EpochStats> history_;
};

// Minibatch Adam on the mean per-example loss; every example carries its own
// background term. Initializes from `config.seed` unless `init` is given.
EvTrainResult train_ev(std::span<const BowVector> corpus, const BowVector& p_bg,
                       const EvArchitecture& arch, const TrainingConfig& config,
                       const EpochCallback& on_epoch = {},
                       const EvModelParams* init = nullptr);

// Model container: text header followed by little-endian doubles.
inline constexpr int kModelFormatVersion = 1;

void save_model(const std::filesystem::path& path, const EvModelParams& params);
// Loads an EV file, or the EV part of a D-EV file.
EvModelParams load_ev_model(const std::filesystem::path& path);

}  // namespace ev
