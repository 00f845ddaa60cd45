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
#include <map>
#include <string>
#include <vector>

#include "ev/ev_model.hpp"
#include "ev/numerics.hpp"

namespace ev::detail {

// In-memory image of a model file. The header is a list of "key value" lines
// terminated by "payload <bytes>"; the payload holds every layer's row-major
// weights followed by its bias as little-endian IEEE-754 doubles.
struct ModelImage {
  int version = 0;
  std::string kind;  // "ev" or "dev"
  std::map<std::string, std::string> fields;
  std::vector<std::string> layer_names;
  std::vector<DenseLayer> layers;
};

void write_model_image(const std::filesystem::path& path, const ModelImage& image);
ModelImage read_model_image(const std::filesystem::path& path);

std::string format_double(double value);
double parse_double(const std::string& text);
std::string format_ints(const std::vector<int>& values);
std::vector<int> parse_ints(const std::string& text);

void put_arch(ModelImage& image, const EvArchitecture& arch);
void append_layers(ModelImage& image, const char* prefix, const std::vector<DenseLayer>& layers);
ModelImage ev_image(const EvModelParams& params);
const std::string& require_field(const ModelImage& image, const std::string& key);
std::vector<DenseLayer> take_layers(const ModelImage& image, const std::string& prefix);
EvModelParams ev_from_image(const ModelImage& image);

}  // namespace ev::detail
