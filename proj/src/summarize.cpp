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

#include "ev/summarize.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ev/log.hpp"

namespace ev {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Positional order used to break ties: earlier in its document first, then
// earlier in the input list.
bool positionally_before(std::span<const SentenceUnit> s, std::size_t a, std::size_t b) {
  if (s[a].index != s[b].index) return s[a].index < s[b].index;
  return a < b;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text,
                                         const SentenceSplitConfig& config) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (config.terminators.find(text[i]) == std::string::npos) continue;
    if (i + 1 < text.size() && !is_space(text[i + 1])) continue;
    auto piece = trim(text.substr(start, i + 1 - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = i + 1;
  }
  auto rest = trim(text.substr(std::min(start, text.size())));
  if (!rest.empty()) out.emplace_back(rest);
  return out;
}

std::vector<RankedSentence> density_peaks_rank(std::span<const SentenceUnit> sentences) {
  const std::size_t n = sentences.size();
  if (n == 0) throw std::invalid_argument("density_peaks_rank: no sentences");
  for (const auto& s : sentences) {
    if (s.embedding.size() != sentences[0].embedding.size()) {
      throw std::invalid_argument("density_peaks_rank: embedding dimensions differ");
    }
    if (s.embedding.norm() == 0.0) {
      throw std::invalid_argument("density_peaks_rank: zero embedding for " + s.doc_id + "#" +
                                  std::to_string(s.index));
    }
  }
  std::vector<RankedSentence> ranked(n);
  if (n == 1) {
    ranked[0] = {0, 1.0, 1.0, 1.0};
    return ranked;
  }

  Matrix sim = Matrix::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double value =
          (cosine_similarity(sentences[i].embedding, sentences[j].embedding) + 1.0) / 2.0;
      sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
      sim(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum += sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    ranked[i].position = i;
    ranked[i].rho = sum / static_cast<double>(n - 1);
  }
  auto denser = [&](std::size_t a, std::size_t b) {
    if (ranked[a].rho != ranked[b].rho) return ranked[a].rho > ranked[b].rho;
    return positionally_before(sentences, a, b);
  };
  std::size_t peak = 0;
  double max_delta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    bool has_denser = false;
    double delta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !denser(j, i)) continue;
      const double d = 1.0 - sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      delta = has_denser ? std::min(delta, d) : d;
      has_denser = true;
    }
    if (!has_denser) {
      peak = i;
      continue;
    }
    ranked[i].delta = delta;
    max_delta = std::max(max_delta, delta);
  }
  ranked[peak].delta = max_delta;
  for (auto& r : ranked) r.score = r.rho * r.delta;

  std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return positionally_before(sentences, a.position, b.position);
  });
  return ranked;
}

void SummaryBudget::validate() const {
  if (!(limit > 0.0)) throw std::invalid_argument("summary budget must be positive");
  if (kind == Kind::kRatio && limit > 1.0) {
    throw std::invalid_argument("summary ratio must lie in (0, 1]");
  }
}

std::vector<std::size_t> select_summary(std::span<const RankedSentence> ranked,
                                        std::span<const SentenceUnit> sentences,
                                        const SummaryBudget& budget) {
  budget.validate();
  if (ranked.empty()) throw std::invalid_argument("select_summary: nothing to select");
  auto length = [&](const SentenceUnit& s) {
    return static_cast<double>(budget.kind == SummaryBudget::Kind::kBytes ? s.length_bytes
                                                                          : s.length_words);
  };
  double capacity = budget.limit;
  if (budget.kind == SummaryBudget::Kind::kRatio) {
    double words = 0.0;
    for (const auto& s : sentences) words += static_cast<double>(s.length_words);
    capacity = budget.limit * words;
  }
  std::vector<std::size_t> chosen;
  double used = 0.0;
  for (const auto& r : ranked) {
    const double len = length(sentences[r.position]);
    if (used + len <= capacity) {
      chosen.push_back(r.position);
      used += len;
    }
  }
  if (chosen.empty()) log::warn("select_summary: budget is smaller than every sentence");
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

SummaryResult summarize_document_set(std::span<const Document> docs, const EvModelParams& model,
                                     const Vocabulary& vocab, const SummaryBudget& budget,
                                     const SentenceSplitConfig& split,
                                     const TokenizerConfig& tokenizer) {
  std::vector<SentenceUnit> units;
  for (const auto& doc : docs) {
    const auto sentences = split_sentences(doc.text, split);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      SentenceUnit unit;
      unit.doc_id = doc.id;
      unit.index = i;
      unit.text = sentences[i];
      unit.tokens = tokenize(unit.text, tokenizer);
      unit.length_words = unit.tokens.size();
      unit.length_bytes = unit.text.size();
      BowVector p;
      try {
        p = bow(unit.tokens, vocab);
      } catch (const EmptyBowError&) {
        log::warn("summarize: skipping " + doc.id + "#" + std::to_string(i) +
                  " (no in-vocabulary tokens)");
        continue;
      }
      unit.embedding = encode_paragraph(model, p);
      if (unit.embedding.norm() == 0.0) {
        log::warn("summarize: skipping " + doc.id + "#" + std::to_string(i) + " (zero embedding)");
        continue;
      }
      units.push_back(std::move(unit));
    }
  }
  if (units.empty()) throw std::runtime_error("summarize: no embeddable sentences");
  const auto ranked = density_peaks_rank(units);
  const auto chosen = select_summary(ranked, units, budget);
  std::vector<const RankedSentence*> by_position(units.size());
  for (const auto& r : ranked) by_position[r.position] = &r;

  SummaryResult result;
  for (std::size_t pos : chosen) {
    const auto& unit = units[pos];
    const auto& r = *by_position[pos];
    if (!result.summary.empty()) result.summary += ' ';
    result.summary += unit.text;
    result.sentences.push_back({unit.doc_id, unit.index, r.score, r.rho, r.delta, unit.text});
  }
  return result;
}

}  // namespace ev
