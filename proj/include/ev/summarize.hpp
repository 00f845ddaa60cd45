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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ev/corpus.hpp"
#include "ev/ev_model.hpp"
#include "ev/numerics.hpp"

namespace ev {

struct SentenceUnit {
  std::string doc_id;
  std::size_t index = 0;  // position within its document
  std::string text;
  std::vector<std::string> tokens;
  Vector embedding;
  std::size_t length_words = 0;
  std::size_t length_bytes = 0;
};

struct SentenceSplitConfig {
  std::string terminators = ".!?";
};

// Splits after a terminator that is followed by whitespace or the end of
// text. Returned sentences are trimmed and non-empty.
std::vector<std::string> split_sentences(std::string_view text,
                                         const SentenceSplitConfig& config = {});

struct RankedSentence {
  std::size_t position = 0;  // index into the input list
  double rho = 0.0;
  double delta = 0.0;
  double score = 0.0;
};

// Density-peaks ranking with sim(i, j) = (cos + 1) / 2:
//   rho_i   = mean over j != i of sim(i, j)
//   delta_i = min over denser j of (1 - sim(i, j)); the densest sentence takes
//             the largest delta of the others
//   score_i = rho_i * delta_i
// "Denser" orders by rho and breaks exact ties by (index, position), so of two
// identical sentences the later one is the non-peak. Output is sorted by
// score descending with the same tie-break.
std::vector<RankedSentence> density_peaks_rank(std::span<const SentenceUnit> sentences);

struct SummaryBudget {
  enum class Kind { kWords, kBytes, kRatio };
  Kind kind = Kind::kWords;
  double limit = 100;  // count, or a fraction of the total word count

  void validate() const;
};

// Greedy selection in rank order, skipping sentences that would overflow the
// budget. Returns input positions in original order.
std::vector<std::size_t> select_summary(std::span<const RankedSentence> ranked,
                                        std::span<const SentenceUnit> sentences,
                                        const SummaryBudget& budget);

struct SummarySentence {
  std::string doc_id;
  std::size_t index = 0;
  double score = 0.0;
  double rho = 0.0;
  double delta = 0.0;
  std::string text;
};

struct SummaryResult {
  std::string summary;
  std::vector<SummarySentence> sentences;
};

// Splits, embeds each sentence through the paragraph encoder, ranks and
// selects. Sentences with no in-vocabulary token are skipped with a warning.
SummaryResult summarize_document_set(std::span<const Document> docs, const EvModelParams& model,
                                     const Vocabulary& vocab, const SummaryBudget& budget,
                                     const SentenceSplitConfig& split = {},
                                     const TokenizerConfig& tokenizer = {});

}  // namespace ev
