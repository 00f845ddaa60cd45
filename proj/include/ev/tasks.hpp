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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ev/corpus.hpp"
#include "ev/numerics.hpp"

namespace ev {

// ---------------------------------------------------------------- PCA

struct PcaModel {
  Vector mean;
  Matrix components;  // [k x d], row-orthonormal
  Vector explained_variance;

  Eigen::Index dim() const { return mean.size(); }
  Eigen::Index rank() const { return components.rows(); }
};

// Top-k principal components of the mean-centered rows of `data`, from the
// covariance (d <= N) or the Gram matrix (d > N). Each component's
// largest-magnitude entry is made positive. Zero total variance is an error
// unless `allow_degenerate`, in which case the components are still an
// orthonormal set with zero explained variance.
PcaModel pca_fit(std::span<const Vector> data, Eigen::Index k, bool allow_degenerate = false);
Vector pca_transform(const PcaModel& model, const Vector& x);
Vector pca_reconstruct(const PcaModel& model, const Vector& projection);

// ------------------------------------------------------- linear classifier

enum class Label { kNegative = -1, kPositive = 1 };

struct LabeledExample {
  Vector features;
  Label label;
};

struct LinearClassifierConfig {
  double lambda = 1e-4;  // L2 strength
  int epochs = 50;
  std::uint64_t seed = 1;
};

struct LinearModel {
  Vector weight;
  double bias = 0.0;

  double decision(const Vector& x) const { return weight.dot(x) + bias; }
  Label predict(const Vector& x) const {
    return decision(x) >= 0.0 ? Label::kPositive : Label::kNegative;
  }
};

// Pegasos-style stochastic subgradient descent on the L2-regularized hinge
// loss. The bias is learned as the weight of a constant feature.
LinearModel linear_classifier_train(std::span<const LabeledExample> examples,
                                    const LinearClassifierConfig& config = {});
double accuracy(const LinearModel& model, std::span<const LabeledExample> examples);

// ------------------------------------------------------- cross-validation

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;  // example -> fold id

  // Shuffles positions with `seed` and deals them round-robin into k folds.
  static FoldPlan make(std::size_t num_examples, int k, std::uint64_t seed);
  std::vector<std::size_t> fold_members(int fold) const;
};

struct LabeledDocument {
  std::string id;
  std::string text;
  Label label;
};

std::vector<LabeledDocument> load_labeled_dataset(const std::filesystem::path& path);

struct Featurizer {
  std::string name;
  std::function<Vector(const LabeledDocument&)> featurize;
};

// Concatenates feature vectors; the name joins the parts with '+'.
Featurizer concat_featurizers(std::span<const Featurizer> parts);

// Unit-sum counts of every n-gram order in [min_n, max_n] over a fixed n-gram
// vocabulary (n-grams joined by a single space).
class NgramFeaturizer {
 public:
  NgramFeaturizer(std::span<const LabeledDocument> docs, int min_n, int max_n,
                  std::size_t max_features, std::size_t min_count);
  Vector operator()(const LabeledDocument& doc) const;
  const Vocabulary& vocabulary() const { return vocab_; }

 private:
  std::vector<std::string> grams(const std::string& text) const;
  int min_n_, max_n_;
  Vocabulary vocab_;
};

struct CrossValidationResult {
  FoldPlan plan;
  std::vector<std::string> featurizers;
  std::vector<std::vector<double>> fold_accuracy;  // [featurizer][fold]
  std::vector<double> mean_accuracy;
};

// Every featurizer is evaluated on the same FoldPlan. Fold f trains with seed
// derived from (classifier.seed, f).
CrossValidationResult crossvalidate(std::span<const LabeledDocument> dataset,
                                    std::span<const Featurizer> featurizers, int k,
                                    std::uint64_t seed,
                                    const LinearClassifierConfig& classifier = {});

std::uint64_t fold_seed(std::uint64_t seed, int fold);

// TSV: featurizer, fold_1..fold_k, mean.
std::string format_cv_table(const CrossValidationResult& result);

// ------------------------------------------------------- noise simulation

struct NoiseResult {
  Document doc;  // text: noisy transcript, clean_text: the input text verbatim
  std::size_t tokens = 0;
  std::size_t corrupted = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
};

// Each token is corrupted with probability `wer`: substituted by a word drawn
// from `background` (80%), deleted (10%), or kept and followed by an inserted
// draw (10%).
NoiseResult simulate_recognition_noise(const Document& doc, const Vocabulary& vocab,
                                       const BowVector& background, double wer,
                                       std::uint64_t seed,
                                       const TokenizerConfig& tokenizer = {});

// ------------------------------------------------------- synthetic corpus

struct SyntheticCorpusConfig {
  int num_topics = 4;
  int docs_per_topic = 50;
  int doc_length = 16;
  int vocab_size = 500;
  double background_mass = 0.6;
  int sentence_length = 10;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  std::vector<Document> docs;
  std::vector<int> labels;  // topic per document
  std::vector<std::string> background_words;
  std::vector<std::vector<std::string>> topic_words;  // disjoint blocks

  // One reference per topic: its most probable content words.
  std::vector<std::string> gold_summaries(std::size_t words_per_summary = 20) const;
};

// A fifth of the vocabulary is shared "function" words with Zipf weights;
// the rest is split into one disjoint block per topic, also Zipf-weighted.
// Each token comes from the background with probability background_mass and
// from the document's topic block otherwise.
SyntheticCorpus make_synthetic_topic_corpus(const SyntheticCorpusConfig& config);

// Leave-one-out nearest-centroid accuracy under cosine similarity.
double nearest_centroid_accuracy(std::span<const Vector> vectors, std::span<const int> labels);

}  // namespace ev
