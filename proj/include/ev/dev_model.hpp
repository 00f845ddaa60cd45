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

#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "ev/corpus.hpp"
#include "ev/ev_model.hpp"
#include "ev/numerics.hpp"

namespace ev {

struct DevArchitecture {
  EvArchitecture ev;
  std::vector<int> s_hidden{256};

  void validate() const;
  bool operator==(const DevArchitecture&) const = default;
};

// EV model plus the denoising decoder s, which reconstructs the clean
// distribution from the same mixed code that feeds h.
struct DevModelParams {
  EvModelParams ev;
  std::vector<int> s_hidden;
  std::vector<DenseLayer> s_layers;

  DevArchitecture arch() const { return {ev.arch, s_hidden}; }

  // Draws f, g, h (exactly as EvModelParams::initialize with the same seed)
  // and then s.
  static DevModelParams initialize(const DevArchitecture& arch, std::uint64_t seed);
  static DevModelParams zeros(const DevArchitecture& arch);
  // Staged variant: copies a trained EV model and draws only s.
  static DevModelParams from_ev(const EvModelParams& ev, std::span<const int> s_hidden,
                                std::uint64_t seed);

  // f, g, h, then s ("s.0", ...).
  std::vector<ParamRef> params();
  void validate() const;
};

struct PairedExample {
  BowVector noisy;
  BowVector clean;
};

struct DevForwardTrace {
  ForwardTrace ev;  // computed from the noisy distribution
  Vector p_clean_reconstructed;
  NetworkTrace s_trace;
};

DevForwardTrace dev_forward(const DevModelParams& params, const PairedExample& pair,
                            const BowVector& p_bg);

struct DevLossTerms {
  double paragraph = 0.0;
  double clean = 0.0;
  double background = 0.0;
};

DevLossTerms dev_loss_terms(const DevForwardTrace& trace, const PairedExample& pair,
                            const BowVector& p_bg);

// ev_loss(trace.ev, pair.noisy, p_bg, w) + KL(clean || s(mixed_code)).
double dev_loss(const DevForwardTrace& trace, const PairedExample& pair, const BowVector& p_bg,
                double background_weight = 1.0);

struct DevGradients {
  EvGradients ev;
  std::vector<LayerGrad> s;

  static DevGradients zeros_like(const DevModelParams& params);
};

// `clean_weight` scales the clean-reconstruction term; 0 removes it.
DevGradients dev_backward(const DevModelParams& params, const DevForwardTrace& trace,
                          const PairedExample& pair, const BowVector& p_bg,
                          double background_weight = 1.0, double clean_weight = 1.0);

struct DevTrainResult {
  DevModelParams params;
  std::vector<EpochStats> history;
};

DevTrainResult train_dev(std::span<const PairedExample> pairs, const BowVector& p_bg,
                         const DevArchitecture& arch, const TrainingConfig& config,
                         const EpochCallback& on_epoch = {},
                         const DevModelParams* init = nullptr);

// D-EV container: the EV layout with an extra s section. load_ev_model reads
// the same file and ignores s.
void save_model(const std::filesystem::path& path, const DevModelParams& params);
DevModelParams load_dev_model(const std::filesystem::path& path);

}  // namespace ev
