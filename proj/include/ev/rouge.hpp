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
#include <vector>

namespace ev {

enum class RougeVariant { kRouge1, kRouge2, kRougeL };

const char* rouge_variant_name(RougeVariant variant);

struct RougeScore {
  RougeVariant variant = RougeVariant::kRouge1;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// How per-reference scores are combined.
enum class RougeAggregation {
  kMean,  // average precision and recall, then F
  kMax,   // the single reference with the highest F
};

using TokenList = std::vector<std::string>;

// F = 2pr / (p + r), or 0 when p + r = 0.
double f_measure(double precision, double recall);

// Clipped n-gram overlap. A reference shorter than n contributes zeros.
RougeScore rouge_n(std::span<const std::string> candidate, std::span<const TokenList> references,
                   int n, RougeAggregation aggregation = RougeAggregation::kMean);

// LCS-based ROUGE-L.
RougeScore rouge_l(std::span<const std::string> candidate, std::span<const TokenList> references,
                   RougeAggregation aggregation = RougeAggregation::kMean);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

}  // namespace ev
