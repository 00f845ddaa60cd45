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

// Minibatch Adam loop shared by the EV and D-EV trainers.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "ev/ev_model.hpp"
#include "ev/log.hpp"

namespace ev::detail {

struct ExampleTerms {
  double loss = 0.0;
  double kl_paragraph = 0.0;
  double kl_clean = 0.0;
  double kl_background = 0.0;
};

// `example(params, index, grads)` adds the gradient of example `index` into
// `grads` (zeroed by the caller) and returns its loss terms. Per-example
// gradients are always materialized and then summed in example order, so
// the result does not depend on `config.threads`.
template <typename Params, typename ExampleFn>
std::vector<EpochStats> run_minibatch_adam(Params& params, std::size_t num_examples,
                                           const TrainingConfig& config,
                                           const ExampleFn& example,
                                           const EpochCallback& on_epoch) {
  config.validate();
  std::vector<EpochStats> history;
  if (config.epochs == 0 || num_examples == 0) return history;

  auto refs = params.params();
  AdamState adam = AdamState::for_params(refs, config.adam);
  std::vector<LayerGrad> batch_grad;
  for (const auto& r : refs) batch_grad.push_back(LayerGrad::zeros_like(*r.layer));

  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
  const std::size_t workers = static_cast<std::size_t>(std::max(1, config.threads));
  std::vector<std::vector<LayerGrad>> slots(std::min(workers > 1 ? batch_size : 1, num_examples),
                                            batch_grad);
  std::vector<ExampleTerms> slot_terms(slots.size());

  std::vector<std::size_t> order(num_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  Params last_good = params;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
    ExampleTerms totals;
    bool finite = true;
    for (std::size_t start = 0; start < num_examples && finite; start += batch_size) {
      const std::size_t end = std::min(num_examples, start + batch_size);
      const std::size_t count = end - start;
      for (auto& g : batch_grad) g.set_zero();

      auto run_one = [&](std::size_t slot, std::size_t position) {
        for (auto& g : slots[slot]) g.set_zero();
        try {
          slot_terms[slot] =
              example(static_cast<const Params&>(params), order[position], slots[slot]);
        } catch (const std::domain_error& e) {
          // Non-finite values inside an example count as divergence.
          log::warn(e.what());
          slot_terms[slot] = ExampleTerms{std::nan(""), 0.0, 0.0, 0.0};
        }
      };
      auto absorb = [&](std::size_t slot) {
        for (std::size_t l = 0; l < batch_grad.size(); ++l) batch_grad[l] += slots[slot][l];
        const auto& t = slot_terms[slot];
        totals.loss += t.loss;
        totals.kl_paragraph += t.kl_paragraph;
        totals.kl_clean += t.kl_clean;
        totals.kl_background += t.kl_background;
        if (!std::isfinite(t.loss)) finite = false;
      };

      if (workers == 1) {
        for (std::size_t pos = start; pos < end; ++pos) {
          run_one(0, pos);
          absorb(0);
        }
      } else {
        std::vector<std::thread> pool;
        const std::size_t n_threads = std::min(workers, count);
        for (std::size_t w = 0; w < n_threads; ++w) {
          pool.emplace_back([&, w] {
            for (std::size_t k = w; k < count; k += n_threads) run_one(k, start + k);
          });
        }
        for (auto& t : pool) t.join();
        for (std::size_t k = 0; k < count; ++k) absorb(k);
      }
      if (!finite) break;

      const double scale = 1.0 / static_cast<double>(count);
      for (auto& g : batch_grad) g *= scale;
      try {
        adam_step(refs, batch_grad, adam);
      } catch (const std::domain_error& e) {
        log::warn(e.what());
        finite = false;
      }
    }
    if (!finite) {
      params = last_good;
      throw TrainingDiverged<Params>("training diverged in epoch " + std::to_string(epoch),
                                     std::move(last_good), history);
    }
    const double n = static_cast<double>(num_examples);
    EpochStats stats{epoch, totals.loss / n, totals.kl_paragraph / n, totals.kl_clean / n,
                     totals.kl_background / n};
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    last_good = params;
    refs = params.params();
  }
  return history;
}

}  // namespace ev::detail
