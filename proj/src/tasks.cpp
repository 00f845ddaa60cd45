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

#include "ev/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace ev {

// ---------------------------------------------------------------- PCA

namespace {

void fix_sign(Eigen::Ref<Vector> component) {
  Eigen::Index arg = 0;
  component.cwiseAbs().maxCoeff(&arg);
  if (component[arg] < 0.0) component = -component;
}

// Orthonormalizes the rows of `basis` in order, replacing rows that collapse
// with standard basis vectors orthogonal to the rows before them.
void orthonormalize_rows(Matrix& basis) {
  const Eigen::Index d = basis.cols();
  Eigen::Index next_unit = 0;
  for (Eigen::Index i = 0; i < basis.rows(); ++i) {
    for (int attempt = 0;; ++attempt) {
      Vector row = basis.row(i).transpose();
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < i; ++j) row -= basis.row(j).dot(row) * basis.row(j).transpose();
      }
      const double norm = row.norm();
      if (norm > 1e-10) {
        basis.row(i) = (row / norm).transpose();
        break;
      }
      if (next_unit >= d) throw std::logic_error("pca: cannot complete basis");
      basis.row(i).setZero();
      basis(i, next_unit++) = 1.0;
      (void)attempt;
    }
  }
}

}  // namespace

PcaModel pca_fit(std::span<const Vector> data, Eigen::Index k, bool allow_degenerate) {
  if (data.empty()) throw std::invalid_argument("pca_fit: no data");
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index d = data[0].size();
  if (k < 1 || k > std::min(n, d)) {
    throw std::invalid_argument("pca_fit: k=" + std::to_string(k) + " exceeds min(d, N)=" +
                                std::to_string(std::min(n, d)));
  }
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data[static_cast<std::size_t>(i)].size() != d) {
      throw std::invalid_argument("pca_fit: rows differ in dimension");
    }
    x.row(i) = data[static_cast<std::size_t>(i)].transpose();
  }
  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  x.rowwise() -= model.mean.transpose();
  const double denom = static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  if (x.squaredNorm() == 0.0 && !allow_degenerate) {
    throw std::invalid_argument("pca_fit: data has zero variance");
  }

  model.components.resize(k, d);
  model.explained_variance.resize(k);
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver((x.transpose() * x) / denom);
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigensolver failed");
    for (Eigen::Index i = 0; i < k; ++i) {
      model.components.row(i) = solver.eigenvectors().col(d - 1 - i).transpose();
      model.explained_variance[i] = std::max(0.0, solver.eigenvalues()[d - 1 - i]);
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(x * x.transpose());
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigensolver failed");
    for (Eigen::Index i = 0; i < k; ++i) {
      const double lambda = std::max(0.0, solver.eigenvalues()[n - 1 - i]);
      model.explained_variance[i] = lambda / denom;
      Vector v = x.transpose() * solver.eigenvectors().col(n - 1 - i);
      model.components.row(i) = v.transpose();
    }
  }
  orthonormalize_rows(model.components);
  for (Eigen::Index i = 0; i < k; ++i) {
    Vector row = model.components.row(i).transpose();
    fix_sign(row);
    model.components.row(i) = row.transpose();
  }
  return model;
}

Vector pca_transform(const PcaModel& model, const Vector& x) {
  if (x.size() != model.dim()) throw std::invalid_argument("pca_transform: dimension mismatch");
  return model.components * (x - model.mean);
}

Vector pca_reconstruct(const PcaModel& model, const Vector& projection) {
  if (projection.size() != model.rank()) {
    throw std::invalid_argument("pca_reconstruct: dimension mismatch");
  }
  return model.mean + model.components.transpose() * projection;
}

// ------------------------------------------------------- linear classifier

LinearModel linear_classifier_train(std::span<const LabeledExample> examples,
                                    const LinearClassifierConfig& config) {
  if (examples.empty()) throw std::invalid_argument("classifier: no examples");
  if (!(config.lambda > 0.0) || config.epochs < 1) {
    throw std::invalid_argument("classifier: lambda must be > 0 and epochs >= 1");
  }
  const Eigen::Index d = examples[0].features.size();
  bool has_pos = false, has_neg = false;
  for (const auto& e : examples) {
    if (e.features.size() != d) throw std::invalid_argument("classifier: ragged features");
    (e.label == Label::kPositive ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("classifier: both classes are required");

  // w = scale * v, so the shrink step is O(1).
  Vector v = Vector::Zero(d);
  double v_bias = 0.0;
  double scale = 1.0;
  Vector avg = Vector::Zero(d);
  double avg_bias = 0.0;
  std::size_t averaged = 0;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const bool last_epoch = epoch + 1 == config.epochs;
    for (std::size_t i : order) {
      ++t;
      const auto& e = examples[i];
      const double y = static_cast<double>(static_cast<int>(e.label));
      const double eta = 1.0 / (config.lambda * static_cast<double>(t));
      const double margin = y * scale * (v.dot(e.features) + v_bias);
      const double shrink = 1.0 - eta * config.lambda;
      if (shrink <= 0.0) {
        v.setZero();
        v_bias = 0.0;
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (margin < 1.0) {
        v += (eta * y / scale) * e.features;
        v_bias += eta * y / scale;
      }
      if (scale < 1e-9) {
        v *= scale;
        v_bias *= scale;
        scale = 1.0;
      }
      if (last_epoch) {
        avg += scale * v;
        avg_bias += scale * v_bias;
        ++averaged;
      }
    }
  }
  LinearModel model;
  model.weight = avg / static_cast<double>(averaged);
  model.bias = avg_bias / static_cast<double>(averaged);
  return model;
}

double accuracy(const LinearModel& model, std::span<const LabeledExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& e : examples) correct += model.predict(e.features) == e.label;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// ------------------------------------------------------- cross-validation

FoldPlan FoldPlan::make(std::size_t num_examples, int k, std::uint64_t seed) {
  if (k < 2 || num_examples < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("fold plan: need k >= 2 and at least k examples");
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  std::vector<std::size_t> perm(num_examples);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  plan.assignments.assign(num_examples, 0);
  for (std::size_t i = 0; i < num_examples; ++i) {
    plan.assignments[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return plan;
}

std::vector<std::size_t> FoldPlan::fold_members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<LabeledDocument> load_labeled_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<LabeledDocument> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    auto fail = [&](const std::string& what) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      fail("malformed JSON");
    }
    if (!record.is_object() || !record.contains("id") || !record.contains("text") ||
        !record.contains("label") || !record["id"].is_string() || !record["text"].is_string() ||
        !record["label"].is_string()) {
      fail("expected {\"id\", \"text\", \"label\"} strings");
    }
    LabeledDocument doc;
    doc.id = record["id"].get<std::string>();
    doc.text = record["text"].get<std::string>();
    const auto label = record["label"].get<std::string>();
    if (label == "pos") {
      doc.label = Label::kPositive;
    } else if (label == "neg") {
      doc.label = Label::kNegative;
    } else {
      fail("label must be \"pos\" or \"neg\"");
    }
    if (doc.id.empty()) fail("empty id");
    if (!seen.insert(doc.id).second) fail("duplicate id '" + doc.id + "'");
    out.push_back(std::move(doc));
  }
  return out;
}

Featurizer concat_featurizers(std::span<const Featurizer> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_featurizers: nothing to concatenate");
  Featurizer out;
  std::vector<Featurizer> owned(parts.begin(), parts.end());
  for (std::size_t i = 0; i < owned.size(); ++i) out.name += (i ? "+" : "") + owned[i].name;
  out.featurize = [owned](const LabeledDocument& doc) {
    std::vector<Vector> pieces;
    Eigen::Index total = 0;
    for (const auto& part : owned) {
      pieces.push_back(part.featurize(doc));
      total += pieces.back().size();
    }
    Vector joined(total);
    Eigen::Index offset = 0;
    for (const auto& p : pieces) {
      joined.segment(offset, p.size()) = p;
      offset += p.size();
    }
    return joined;
  };
  return out;
}

NgramFeaturizer::NgramFeaturizer(std::span<const LabeledDocument> docs, int min_n, int max_n,
                                 std::size_t max_features, std::size_t min_count)
    : min_n_(min_n), max_n_(max_n) {
  if (min_n < 1 || max_n < min_n) throw std::invalid_argument("ngram featurizer: bad orders");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& d : docs) {
    for (auto& g : grams(d.text)) ++counts[std::move(g)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [g, c] : counts) {
    if (c >= min_count) kept.emplace_back(g, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (kept.size() > max_features) kept.resize(max_features);
  if (kept.empty()) throw std::runtime_error("ngram featurizer: no n-gram survives filtering");
  std::vector<std::string> words;
  std::vector<std::size_t> freq;
  for (auto& [g, c] : kept) {
    words.push_back(g);
    freq.push_back(c);
  }
  vocab_ = Vocabulary(std::move(words), std::move(freq));
}

std::vector<std::string> NgramFeaturizer::grams(const std::string& text) const {
  const auto tokens = tokenize(text);
  std::vector<std::string> out;
  for (int n = min_n_; n <= max_n_; ++n) {
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (std::size_t j = 1; j < len; ++j) g += ' ' + tokens[i + j];
      out.push_back(std::move(g));
    }
  }
  return out;
}

Vector NgramFeaturizer::operator()(const LabeledDocument& doc) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(vocab_.size()));
  double total = 0.0;
  for (const auto& g : grams(doc.text)) {
    if (auto index = vocab_.find(g)) {
      out[static_cast<Eigen::Index>(*index)] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) out /= total;
  return out;
}

std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  // splitmix64 finalizer over (seed, fold)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(fold) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CrossValidationResult crossvalidate(std::span<const LabeledDocument> dataset,
                                    std::span<const Featurizer> featurizers, int k,
                                    std::uint64_t seed,
                                    const LinearClassifierConfig& classifier) {
  if (featurizers.empty()) throw std::invalid_argument("crossvalidate: no featurizers");
  CrossValidationResult result;
  result.plan = FoldPlan::make(dataset.size(), k, seed);
  // Every training split must see both classes; leave-one-out on a small
  // balanced set qualifies even though a class may have fewer than k members.
  for (int fold = 0; fold < k; ++fold) {
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (result.plan.assignments[i] == fold) continue;
      (dataset[i].label == Label::kPositive ? pos : neg) = true;
    }
    if (!pos || !neg) {
      throw std::invalid_argument("crossvalidate: training split " + std::to_string(fold + 1) +
                                  " lacks one of the classes");
    }
  }
  for (const auto& featurizer : featurizers) {
    std::vector<LabeledExample> examples;
    examples.reserve(dataset.size());
    for (const auto& doc : dataset) examples.push_back({featurizer.featurize(doc), doc.label});
    std::vector<double> per_fold;
    for (int fold = 0; fold < k; ++fold) {
      std::vector<LabeledExample> train, test;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        (result.plan.assignments[i] == fold ? test : train).push_back(examples[i]);
      }
      LinearClassifierConfig cfg = classifier;
      cfg.seed = fold_seed(classifier.seed, fold);
      const auto model = linear_classifier_train(train, cfg);
      per_fold.push_back(accuracy(model, test));
    }
    result.featurizers.push_back(featurizer.name);
    result.mean_accuracy.push_back(std::accumulate(per_fold.begin(), per_fold.end(), 0.0) /
                                   static_cast<double>(k));
    result.fold_accuracy.push_back(std::move(per_fold));
  }
  return result;
}

std::string format_cv_table(const CrossValidationResult& result) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << "featurizer";
  for (int f = 0; f < result.plan.k; ++f) out << "\tfold_" << (f + 1);
  out << "\tmean\n";
  for (std::size_t i = 0; i < result.featurizers.size(); ++i) {
    out << result.featurizers[i];
    for (double a : result.fold_accuracy[i]) out << '\t' << a;
    out << '\t' << result.mean_accuracy[i] << '\n';
  }
  return out.str();
}

// ------------------------------------------------------- noise simulation

NoiseResult simulate_recognition_noise(const Document& doc, const Vocabulary& vocab,
                                       const BowVector& background, double wer,
                                       std::uint64_t seed, const TokenizerConfig& tokenizer) {
  if (!(wer >= 0.0 && wer < 1.0)) throw std::invalid_argument("noise: wer must lie in [0, 1)");
  if (background.dim() != vocab.size()) {
    throw std::invalid_argument("noise: background does not match the vocabulary");
  }
  std::vector<double> weights;
  for (const auto& e : background.entries()) weights.push_back(e.weight);
  std::discrete_distribution<std::size_t> draw_entry(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::mt19937_64 rng(seed);
  auto draw_word = [&]() -> const std::string& {
    return vocab.word(background.entries()[draw_entry(rng)].index);
  };

  NoiseResult result;
  const auto tokens = tokenize(doc.text, tokenizer);
  std::vector<std::string> out;
  for (const auto& token : tokens) {
    ++result.tokens;
    if (unit(rng) >= wer) {
      out.push_back(token);
      continue;
    }
    ++result.corrupted;
    const double kind = unit(rng);
    if (kind < 0.8) {
      out.push_back(draw_word());
      ++result.substitutions;
    } else if (kind < 0.9) {
      ++result.deletions;
    } else {
      out.push_back(token);
      out.push_back(draw_word());
      ++result.insertions;
    }
  }
  if (out.empty() && !tokens.empty()) {
    out.push_back(draw_word());
    ++result.insertions;
  }
  result.doc.id = doc.id;
  result.doc.clean_text = doc.text;
  if (result.corrupted == 0) {
    result.doc.text = doc.text;
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) result.doc.text += (i ? " " : "") + out[i];
  }
  return result;
}

// ------------------------------------------------------- synthetic corpus

SyntheticCorpus make_synthetic_topic_corpus(const SyntheticCorpusConfig& config) {
  if (config.num_topics < 1 || config.docs_per_topic < 1 || config.doc_length < 1 ||
      config.sentence_length < 1) {
    throw std::invalid_argument("synthetic corpus: counts must be >= 1");
  }
  if (!(config.background_mass >= 0.0 && config.background_mass < 1.0)) {
    throw std::invalid_argument("synthetic corpus: background_mass must lie in [0, 1)");
  }
  const int block = (config.vocab_size - config.vocab_size / 5) / config.num_topics;
  if (block < 1) throw std::invalid_argument("synthetic corpus: vocabulary too small");
  const int n_background = config.vocab_size - block * config.num_topics;

  SyntheticCorpus corpus;
  for (int i = 0; i < n_background; ++i) corpus.background_words.push_back("fw" + std::to_string(i));
  for (int t = 0; t < config.num_topics; ++t) {
    corpus.topic_words.emplace_back();
    for (int j = 0; j < block; ++j) {
      corpus.topic_words.back().push_back("t" + std::to_string(t) + "w" + std::to_string(j));
    }
  }
  auto zipf = [](int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) w[static_cast<std::size_t>(r)] = 1.0 / (r + 1.0);
    return std::discrete_distribution<int>(w.begin(), w.end());
  };
  auto background = zipf(n_background);
  auto topic = zipf(block);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::mt19937_64 rng(config.seed);

  int doc_no = 0;
  for (int t = 0; t < config.num_topics; ++t) {
    for (int d = 0; d < config.docs_per_topic; ++d, ++doc_no) {
      std::string text;
      for (int i = 0; i < config.doc_length; ++i) {
        const bool from_background = unit(rng) < config.background_mass;
        const std::string& word =
            from_background
                ? corpus.background_words[static_cast<std::size_t>(background(rng))]
                : corpus.topic_words[static_cast<std::size_t>(t)][static_cast<std::size_t>(topic(rng))];
        if (i > 0) text += ' ';
        text += word;
        if ((i + 1) % config.sentence_length == 0 || i + 1 == config.doc_length) text += '.';
      }
      char id[32];
      std::snprintf(id, sizeof id, "doc%04d", doc_no);
      corpus.docs.push_back({id, std::move(text), std::nullopt});
      corpus.labels.push_back(t);
    }
  }
  return corpus;
}

std::vector<std::string> SyntheticCorpus::gold_summaries(std::size_t words_per_summary) const {
  std::vector<std::string> out;
  for (const auto& words : topic_words) {
    std::string summary;
    const std::size_t n = std::min(words_per_summary, words.size());
    for (std::size_t i = 0; i < n; ++i) summary += (i ? " " : "") + words[i];
    out.push_back(summary + ".");
  }
  return out;
}

double nearest_centroid_accuracy(std::span<const Vector> vectors, std::span<const int> labels) {
  if (vectors.size() != labels.size() || vectors.empty()) {
    throw std::invalid_argument("nearest_centroid_accuracy: size mismatch");
  }
  const int num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  const Eigen::Index d = vectors[0].size();
  std::vector<Vector> sums(static_cast<std::size_t>(num_classes), Vector::Zero(d));
  std::vector<std::size_t> sizes(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    sums[static_cast<std::size_t>(labels[i])] += vectors[i];
    ++sizes[static_cast<std::size_t>(labels[i])];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double xn = vectors[i].norm();
    if (xn == 0.0) continue;
    int best = -1;
    double best_cos = -2.0;
    for (int c = 0; c < num_classes; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      Vector centroid = sums[cu];
      std::size_t size = sizes[cu];
      if (c == labels[i]) {
        centroid -= vectors[i];
        --size;
      }
      if (size == 0) continue;
      centroid /= static_cast<double>(size);
      const double cn = centroid.norm();
      if (cn == 0.0) continue;
      const double cos = vectors[i].dot(centroid) / (xn * cn);
      if (cos > best_cos) {
        best_cos = cos;
        best = c;
      }
    }
    correct += best == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(vectors.size());
}

}  // namespace ev
