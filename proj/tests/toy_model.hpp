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

// Hand-set 4-word model shared by the EV and D-EV tests. The expected values
// next to it were computed independently with NumPy and frozen here.

#include "ev/dev_model.hpp"
#include "ev/ev_model.hpp"

namespace ev::testing {

inline Matrix mat(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> values) {
  Matrix m(rows, cols);
  auto it = values.begin();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = *it++;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline EvArchitecture toy_arch() {
  EvArchitecture arch;
  arch.vocab_dim = 4;
  arch.embedding_dim = 2;
  arch.f_hidden = {3};
  arch.g_hidden = {3};
  arch.h_hidden = {3};
  arch.attention_floor = 0.05;
  return arch;
}

inline EvModelParams toy_ev() {
  using A = Activation;
  EvModelParams m;
  m.arch = toy_arch();
  m.f_layers = {
      {mat(3, 4, {0.1, -0.2, 0.3, 0.05, 0.4, 0.1, -0.3, 0.2, -0.25, 0.35, 0.15, -0.1}),
       vec({0.01, -0.02, 0.03}), A::kTanh},
      {mat(2, 3, {0.5, -0.4, 0.3, 0.2, 0.6, -0.1}), vec({0.05, -0.05}), A::kTanh}};
  m.g_layers = {
      {mat(3, 4, {-0.3, 0.2, 0.1, 0.4, 0.15, -0.35, 0.25, 0.05, 0.3, 0.3, -0.2, 0.1}),
       vec({-0.01, 0.02, 0.0}), A::kTanh},
      {mat(2, 3, {0.9, -0.45, 0.6, -0.35, 0.15, -0.5}), vec({0.02, 0.03}), A::kTanh}};
  m.h_layers = {
      {mat(3, 2, {0.6, -0.3, 0.2, 0.5, -0.4, 0.1}), vec({0.0, 0.1, -0.1}), A::kTanh},
      {mat(4, 3, {0.3, -0.2, 0.5, 0.1, 0.4, -0.3, -0.5, 0.2, 0.2, 0.25, -0.1, 0.05}),
       vec({0.1, 0.0, -0.1, 0.05}), A::kSoftmax}};
  return m;
}

inline DevModelParams toy_dev() {
  using A = Activation;
  DevModelParams m;
  m.ev = toy_ev();
  m.s_hidden = {3};
  m.s_layers = {
      {mat(3, 2, {-0.1, 0.3, 0.45, -0.2, 0.05, 0.35}), vec({0.02, 0.0, -0.03}), A::kTanh},
      {mat(4, 3, {0.2, 0.1, -0.3, -0.4, 0.3, 0.1, 0.15, -0.25, 0.4, 0.3, 0.2, -0.1}),
       vec({0.0, 0.05, -0.05, 0.1}), A::kSoftmax}};
  return m;
}

// P = (0.5, 0, 0.25, 0.25), P_BG = (0.4, 0.3, 0.2, 0.1), clean = (0.25, 0.25, 0.5, 0).
inline BowVector toy_p() { return BowVector({{0, 0.5}, {2, 0.25}, {3, 0.25}}, 4); }
inline BowVector toy_bg() { return BowVector({{0, 0.4}, {1, 0.3}, {2, 0.2}, {3, 0.1}}, 4); }
inline BowVector toy_clean() { return BowVector({{0, 0.25}, {1, 0.25}, {2, 0.5}}, 4); }

namespace toy_expected {
inline const double v_paragraph[] = {0.03700066375841278, 0.07961271348773};
inline const double v_background[] = {0.10397572780586489, -0.05099762030676351};
inline const double mixed[] = {0.06978699403792953, 0.015674983787759705};
inline const double p_rec[] = {0.2530817802951562, 0.27030292645746024, 0.21924128046590632,
                               0.25737401278147715};
inline const double p_bg_rec[] = {0.25535461767601747, 0.2706077386500115, 0.2132207044401401,
                                  0.260816939233831};
inline const double p_clean_rec[] = {0.24568924607117099, 0.25485076715425037,
                                     0.22782434810773797, 0.2716356386668407};
inline const double cosine = -0.020939188463112587;
inline const double alpha = 0.5104695942315562;
inline const double kl_paragraph = 0.366002371193331;
inline const double kl_background = 0.10179122649207065;
inline const double kl_clean = 0.39256062938071973;
}  // namespace toy_expected

}  // namespace ev::testing
