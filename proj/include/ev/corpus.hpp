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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ev {

struct Document {
  std::string id;
  std::string text;
  // Manual-transcript counterpart of `text` in paired (noisy/clean) corpora.
  std::optional<std::string> clean_text;
};

struct TokenizerConfig {
  bool lowercase = true;
};

// Lowercases ASCII and splits on every byte that is not an ASCII letter or
// digit. Bytes >= 0x80 are kept inside tokens so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text,
                                  const TokenizerConfig& config = {});

class Vocabulary {
 public:
  Vocabulary() = default;
  // `words` in index order; `counts` parallel to it.
  Vocabulary(std::vector<std::string> words, std::vector<std::size_t> counts);

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::string& word(std::size_t index) const { return words_.at(index); }
  std::size_t count(std::size_t index) const { return counts_.at(index); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::optional<std::size_t> find(std::string_view word) const;

  // One line per word in index order: "<word>\t<count>".
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Keeps the `max_size` most frequent tokens with count >= min_count. Ties are
// broken by lexicographic order of the word.
Vocabulary build_vocabulary(std::span<const Document> docs,
                            std::size_t max_size = 20000,
                            std::size_t min_count = 2,
                            const TokenizerConfig& tokenizer = {});

struct BowEntry {
  std::size_t index;
  double weight;

  bool operator==(const BowEntry&) const = default;
};

// Sparse unit-sum distribution over a vocabulary. Entries are strictly
// positive with strictly increasing indices.
class BowVector {
 public:
  BowVector() = default;
  BowVector(std::vector<BowEntry> entries, std::size_t dim);

  // Normalizes raw counts (index -> count) into a distribution.
  static BowVector from_counts(const std::map<std::size_t, std::size_t>& counts,
                               std::size_t dim);

  const std::vector<BowEntry>& entries() const { return entries_; }
  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return entries_.size(); }
  std::vector<double> dense() const;

  bool operator==(const BowVector&) const = default;

 private:
  std::vector<BowEntry> entries_;
  std::size_t dim_ = 0;
};

// Raised when a text has no in-vocabulary token. Callers may skip the text.
class EmptyBowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

BowVector bow(std::span<const std::string> tokens, const Vocabulary& vocab);
BowVector bow(const Document& doc, const Vocabulary& vocab,
              const TokenizerConfig& tokenizer = {});

// Pooled counts over every document, normalized once.
BowVector background_distribution(std::span<const Document> docs,
                                  const Vocabulary& vocab,
                                  const TokenizerConfig& tokenizer = {});

enum class CorpusFormat {
  kPlain,   // {"id", "text"}; an optional "clean" field is accepted
  kPaired,  // {"id", "text", "clean"}; "clean" required
};

std::vector<Document> load_corpus(const std::filesystem::path& path,
                                  CorpusFormat format = CorpusFormat::kPlain);
void save_corpus(const std::filesystem::path& path,
                 std::span<const Document> docs);

}  // namespace ev
