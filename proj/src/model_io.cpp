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

#include "model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ev::detail {
namespace {

constexpr const char* kMagic = "EVMODEL";

void put_double(std::string& out, double value) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_double(const char* in) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

[[noreturn]] void bad(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("model file " + path.string() + ": " + what);
}

}  // namespace

std::string format_double(double value) {
  std::ostringstream out;
  out << std::hexfloat << value;
  return out.str();
}

double parse_double(const std::string& text) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return value;
}

std::string format_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out.empty() ? "-" : out;
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  if (text == "-" || text.empty()) return out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    const int value = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad integer list '" + text + "'");
    out.push_back(value);
  }
  return out;
}

void write_model_image(const std::filesystem::path& path, const ModelImage& image) {
  if (image.layer_names.size() != image.layers.size()) {
    throw std::invalid_argument("model image: names/layers mismatch");
  }
  std::string payload;
  std::ostringstream header;
  header << kMagic << ' ' << image.version << '\n';
  header << "kind " << image.kind << '\n';
  for (const auto& [key, value] : image.fields) header << key << ' ' << value << '\n';
  header << "layers " << image.layers.size() << '\n';
  for (std::size_t i = 0; i < image.layers.size(); ++i) {
    const auto& layer = image.layers[i];
    header << "layer " << image.layer_names[i] << ' ' << layer.out_dim() << ' '
           << layer.in_dim() << ' ' << activation_name(layer.activation) << '\n';
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put_double(payload, layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_double(payload, layer.bias[r]);
  }
  header << "payload " << payload.size() << '\n';

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header.str();
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelImage read_model_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ModelImage image;
  std::string line;
  if (!std::getline(in, line)) bad(path, "empty file");
  {
    std::istringstream first(line);
    std::string magic;
    first >> magic >> image.version;
    if (magic != kMagic || !first) bad(path, "not a model file");
    if (image.version < 1 || image.version > 1) {
      bad(path, "unsupported format version " + std::to_string(image.version));
    }
  }
  struct LayerSpec {
    Eigen::Index out = 0, in = 0;
    Activation activation = Activation::kTanh;
  };
  std::vector<LayerSpec> specs;
  std::size_t payload_size = 0;
  bool saw_payload = false;
  while (!saw_payload && std::getline(in, line)) {
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "kind") {
      fields >> image.kind;
    } else if (key == "layers") {
      std::size_t n = 0;
      fields >> n;
      specs.reserve(n);
    } else if (key == "layer") {
      std::string name, act;
      LayerSpec spec;
      fields >> name >> spec.out >> spec.in >> act;
      if (!fields || spec.out < 1 || spec.in < 1) bad(path, "bad layer line '" + line + "'");
      spec.activation = parse_activation(act);
      image.layer_names.push_back(name);
      specs.push_back(spec);
    } else if (key == "payload") {
      fields >> payload_size;
      saw_payload = true;
    } else if (!key.empty()) {
      std::string value;
      std::getline(fields >> std::ws, value);
      image.fields[key] = value;
    }
    if (!fields && key != "layer") bad(path, "bad header line '" + line + "'");
  }
  if (!saw_payload) bad(path, "missing payload marker");
  if (image.kind != "ev" && image.kind != "dev") bad(path, "unknown kind '" + image.kind + "'");

  std::size_t expected = 0;
  for (const auto& s : specs) expected += static_cast<std::size_t>(s.out * s.in + s.out) * 8;
  if (expected != payload_size) bad(path, "payload size does not match layer shapes");
  std::string payload(payload_size, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_size));
  if (static_cast<std::size_t>(in.gcount()) != payload_size) bad(path, "truncated payload");

  const char* cursor = payload.data();
  for (const auto& s : specs) {
    DenseLayer layer = DenseLayer::zeros(s.in, s.out, s.activation);
    for (Eigen::Index r = 0; r < s.out; ++r) {
      for (Eigen::Index c = 0; c < s.in; ++c, cursor += 8) layer.weight(r, c) = get_double(cursor);
    }
    for (Eigen::Index r = 0; r < s.out; ++r, cursor += 8) layer.bias[r] = get_double(cursor);
    image.layers.push_back(std::move(layer));
  }
  return image;
}

}  // namespace ev::detail
