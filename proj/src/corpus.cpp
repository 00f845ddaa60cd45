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

#include "ev/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace ev {
namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  });
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text,
                                  const TokenizerConfig& config) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      if (config.lowercase && c >= 'A' && c <= 'Z') c = c - 'A' + 'a';
      current.push_back(static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> words,
                       std::vector<std::size_t> counts)
    : words_(std::move(words)), counts_(std::move(counts)) {
  if (words_.size() != counts_.size()) {
    throw std::invalid_argument("vocabulary: words and counts differ in size");
  }
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) {
      throw std::invalid_argument("vocabulary: empty word at position " +
                                  std::to_string(i));
    }
    if (!index_.emplace(words_[i], i).second) {
      throw std::invalid_argument("vocabulary: duplicate word '" + words_[i] +
                                  "'");
    }
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out << words_[i] << '\t' << counts_[i] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> words;
  std::vector<std::size_t> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected <word>\\t<count>");
    }
    try {
      std::size_t used = 0;
      const std::string count_str = line.substr(tab + 1);
      counts.push_back(std::stoull(count_str, &used));
      if (used != count_str.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": bad count");
    }
    words.push_back(line.substr(0, tab));
  }
  return Vocabulary(std::move(words), std::move(counts));
}

Vocabulary build_vocabulary(std::span<const Document> docs,
                            std::size_t max_size, std::size_t min_count,
                            const TokenizerConfig& tokenizer) {
  if (docs.empty()) throw std::invalid_argument("build_vocabulary: no documents");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : docs) {
    for (auto& token : tokenize(doc.text, tokenizer)) ++counts[std::move(token)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [word, n] : counts) {
    if (n >= min_count) kept.emplace_back(word, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.size() > max_size) kept.resize(max_size);
  if (kept.empty()) {
    throw std::runtime_error(
        "build_vocabulary: no token survives min_count/max_size filtering");
  }
  std::vector<std::string> words;
  std::vector<std::size_t> freq;
  for (auto& [word, n] : kept) {
    words.push_back(std::move(word));
    freq.push_back(n);
  }
  return Vocabulary(std::move(words), std::move(freq));
}

BowVector::BowVector(std::vector<BowEntry> entries, std::size_t dim)
    : entries_(std::move(entries)), dim_(dim) {
  double sum = 0.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.index >= dim_) throw std::invalid_argument("bow: index out of range");
    if (i > 0 && e.index <= entries_[i - 1].index) {
      throw std::invalid_argument("bow: indices must be strictly increasing");
    }
    if (!(e.weight > 0.0)) throw std::invalid_argument("bow: non-positive weight");
    sum += e.weight;
  }
  if (entries_.empty() || std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("bow: weights must sum to one");
  }
}

BowVector BowVector::from_counts(
    const std::map<std::size_t, std::size_t>& counts, std::size_t dim) {
  std::size_t total = 0;
  for (const auto& [index, n] : counts) total += n;
  if (total == 0) throw EmptyBowError("bow: no in-vocabulary tokens");
  std::vector<BowEntry> entries;
  entries.reserve(counts.size());
  for (const auto& [index, n] : counts) {
    if (n == 0) continue;
    entries.push_back({index, static_cast<double>(n) / static_cast<double>(total)});
  }
  return BowVector(std::move(entries), dim);
}

std::vector<double> BowVector::dense() const {
  std::vector<double> out(dim_, 0.0);
  for (const auto& e : entries_) out[e.index] = e.weight;
  return out;
}

BowVector bow(std::span<const std::string> tokens, const Vocabulary& vocab) {
  if (vocab.empty()) throw std::invalid_argument("bow: empty vocabulary");
  std::map<std::size_t, std::size_t> counts;
  for (const auto& token : tokens) {
    if (auto index = vocab.find(token)) ++counts[*index];
  }
  return BowVector::from_counts(counts, vocab.size());
}

BowVector bow(const Document& doc, const Vocabulary& vocab,
              const TokenizerConfig& tokenizer) {
  const auto tokens = tokenize(doc.text, tokenizer);
  try {
    return bow(tokens, vocab);
  } catch (const EmptyBowError&) {
    throw EmptyBowError("bow: document '" + doc.id +
                        "' has no in-vocabulary tokens");
  }
}

BowVector background_distribution(std::span<const Document> docs,
                                  const Vocabulary& vocab,
                                  const TokenizerConfig& tokenizer) {
  if (docs.empty()) throw std::invalid_argument("background: no documents");
  if (vocab.empty()) throw std::invalid_argument("background: empty vocabulary");
  std::map<std::size_t, std::size_t> counts;
  for (const auto& doc : docs) {
    for (const auto& token : tokenize(doc.text, tokenizer)) {
      if (auto index = vocab.find(token)) ++counts[*index];
    }
  }
  return BowVector::from_counts(counts, vocab.size());
}

std::vector<Document> load_corpus(const std::filesystem::path& path,
                                  CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                             ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed JSON (") + e.what() + ")");
    }
    if (!record.is_object()) fail("record is not an object");
    auto string_field = [&](const char* key) -> std::optional<std::string> {
      auto it = record.find(key);
      if (it == record.end() || it->is_null()) return std::nullopt;
      if (!it->is_string()) fail(std::string("field '") + key + "' is not a string");
      return it->get<std::string>();
    };
    Document doc;
    auto id = string_field("id");
    auto text = string_field("text");
    if (!id || id->empty()) fail("missing or empty 'id'");
    if (!text || is_blank(*text)) fail("missing or blank 'text'");
    doc.id = std::move(*id);
    doc.text = std::move(*text);
    doc.clean_text = string_field("clean");
    if (format == CorpusFormat::kPaired && (!doc.clean_text || is_blank(*doc.clean_text))) {
      fail("paired corpus record lacks 'clean'");
    }
    if (!seen.insert(doc.id).second) fail("duplicate id '" + doc.id + "'");
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_corpus(const std::filesystem::path& path,
                 std::span<const Document> docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& doc : docs) {
    nlohmann::json record = {{"id", doc.id}, {"text", doc.text}};
    if (doc.clean_text) record["clean"] = *doc.clean_text;
    out << record.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace ev
