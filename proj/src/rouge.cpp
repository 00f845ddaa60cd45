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

#include "ev/rouge.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace ev {
namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(std::span<const std::string> tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + len)];
  }
  return counts;
}

std::size_t total(const NgramCounts& counts) {
  std::size_t sum = 0;
  for (const auto& [gram, c] : counts) sum += c;
  return sum;
}

struct PerReference {
  double precision;
  double recall;
};

RougeScore aggregate(RougeVariant variant, const std::vector<PerReference>& scores,
                     RougeAggregation aggregation) {
  RougeScore out;
  out.variant = variant;
  if (scores.empty()) return out;
  if (aggregation == RougeAggregation::kMax) {
    double best = -1.0;
    for (const auto& s : scores) {
      const double f = f_measure(s.precision, s.recall);
      if (f > best) {
        best = f;
        out.precision = s.precision;
        out.recall = s.recall;
      }
    }
  } else {
    for (const auto& s : scores) {
      out.precision += s.precision;
      out.recall += s.recall;
    }
    out.precision /= static_cast<double>(scores.size());
    out.recall /= static_cast<double>(scores.size());
  }
  out.f = f_measure(out.precision, out.recall);
  return out;
}

}  // namespace

const char* rouge_variant_name(RougeVariant variant) {
  switch (variant) {
    case RougeVariant::kRouge1: return "rouge1";
    case RougeVariant::kRouge2: return "rouge2";
    case RougeVariant::kRougeL: return "rougeL";
  }
  return "?";
}

double f_measure(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

RougeScore rouge_n(std::span<const std::string> candidate, std::span<const TokenList> references,
                   int n, RougeAggregation aggregation) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n: n must be 1 or 2");
  const auto cand = count_ngrams(candidate, n);
  const double cand_total = static_cast<double>(total(cand));
  std::vector<PerReference> scores;
  for (const auto& ref_tokens : references) {
    const auto ref = count_ngrams(ref_tokens, n);
    const double ref_total = static_cast<double>(total(ref));
    std::size_t overlap = 0;
    for (const auto& [gram, c] : cand) {
      auto it = ref.find(gram);
      if (it != ref.end()) overlap += std::min(c, it->second);
    }
    const double o = static_cast<double>(overlap);
    scores.push_back({cand_total > 0 ? o / cand_total : 0.0, ref_total > 0 ? o / ref_total : 0.0});
  }
  return aggregate(n == 1 ? RougeVariant::kRouge1 : RougeVariant::kRouge2, scores, aggregation);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

RougeScore rouge_l(std::span<const std::string> candidate, std::span<const TokenList> references,
                   RougeAggregation aggregation) {
  std::vector<PerReference> scores;
  for (const auto& ref : references) {
    const double lcs = static_cast<double>(lcs_length(candidate, ref));
    scores.push_back({candidate.empty() ? 0.0 : lcs / static_cast<double>(candidate.size()),
                      ref.empty() ? 0.0 : lcs / static_cast<double>(ref.size())});
  }
  return aggregate(RougeVariant::kRougeL, scores, aggregation);
}

}  // namespace ev
