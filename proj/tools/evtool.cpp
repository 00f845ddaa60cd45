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

// evtool: command-line driver for vocabulary building, EV / D-EV training,
// encoding, summarization, evaluation and synthetic data generation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ev/corpus.hpp"
#include "ev/dev_model.hpp"
#include "ev/ev_model.hpp"
#include "ev/log.hpp"
#include "ev/rouge.hpp"
#include "ev/summarize.hpp"
#include "ev/tasks.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using namespace ev;

// Files written by the current command. On failure they are deleted so no
// half-written output survives.
class Outputs {
 public:
  const fs::path& add(const fs::path& path) {
    paths_.push_back(path);
    return paths_.back();
  }
  void remove_all() const {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove(p, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

Outputs g_outputs;

std::ofstream open_output(const fs::path& path) {
  g_outputs.add(path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

// ------------------------------------------------------------ shared flags

// Hidden layer widths as "256", "512,256" or "none".
std::vector<int> parse_widths(const std::string& text) {
  std::vector<int> widths;
  if (text == "none" || text.empty()) return widths;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    int w = 0;
    try {
      w = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || w <= 0) {
      throw std::invalid_argument("bad layer width list '" + text + "'");
    }
    widths.push_back(w);
  }
  return widths;
}

CLI::Option* add_widths(CLI::App* app, const std::string& name, std::string& value,
                        const std::string& help) {
  return app->add_option(name, value, help + " (comma list or none)")
      ->check([](const std::string& v) {
        try {
          parse_widths(v);
          return std::string();
        } catch (const std::exception& e) {
          return std::string(e.what());
        }
      })
      ->capture_default_str();
}

struct ArchFlags {
  int embedding_dim = 64;
  std::string f_hidden = "256";
  std::string g_hidden = "256";
  std::string h_hidden = "256";
  double attention_floor = 0.05;

  void add(CLI::App* app) {
    app->add_option("--embedding-dim", embedding_dim, "Essence vector size")->capture_default_str();
    add_widths(app, "--f-hidden", f_hidden, "Hidden widths of the paragraph encoder");
    add_widths(app, "--g-hidden", g_hidden, "Hidden widths of the background encoder");
    add_widths(app, "--h-hidden", h_hidden, "Hidden widths of the decoder");
    app->add_option("--attention-floor", attention_floor, "Clamp for the attention weight")
        ->capture_default_str();
  }

  EvArchitecture make(int vocab_dim) const {
    EvArchitecture arch;
    arch.vocab_dim = vocab_dim;
    arch.embedding_dim = embedding_dim;
    arch.f_hidden = parse_widths(f_hidden);
    arch.g_hidden = parse_widths(g_hidden);
    arch.h_hidden = parse_widths(h_hidden);
    arch.attention_floor = attention_floor;
    arch.validate();
    return arch;
  }
};

struct TrainFlags {
  std::uint64_t seed = 0;
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double background_weight = 1.0;
  int threads = 1;
  bool no_shuffle = false;

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "Random seed (required)")->required();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--batch-size", batch_size)->capture_default_str();
    app->add_option("--lr", learning_rate, "Adam learning rate")->capture_default_str();
    app->add_option("--beta1", beta1)->capture_default_str();
    app->add_option("--beta2", beta2)->capture_default_str();
    app->add_option("--adam-epsilon", adam_epsilon)->capture_default_str();
    app->add_option("--background-weight", background_weight,
                    "Weight of the background reconstruction term")
        ->capture_default_str();
    app->add_option("--threads", threads, "Worker threads inside a minibatch")
        ->capture_default_str();
    app->add_flag("--no-shuffle", no_shuffle, "Keep corpus order in every epoch");
  }

  TrainingConfig make() const {
    TrainingConfig c;
    c.seed = seed;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.adam = {learning_rate, beta1, beta2, adam_epsilon};
    c.background_weight = background_weight;
    c.threads = threads;
    c.shuffle = !no_shuffle;
    c.validate();
    return c;
  }
};

// Writes the subcommand's fully resolved options as a config section that
// `evtool --config <file> <command>` accepts.
void write_resolved_config(const CLI::App* sub, const fs::path& path) {
  auto out = open_output(path);
  out << "# resolved configuration; rerun with: evtool --config " << path.filename().string()
      << " " << sub->get_name() << "\n";
  out << "[" << sub->get_name() << "]\n" << sub->config_to_str(true, false);
}

fs::path config_path_for(const fs::path& output) {
  return fs::path(output.string() + ".config.toml");
}

Vocabulary load_vocab_for(const fs::path& path, int expected_dim) {
  auto vocab = Vocabulary::load(path);
  if (expected_dim >= 0 && static_cast<int>(vocab.size()) != expected_dim) {
    throw std::runtime_error("vocabulary " + path.string() + " has " +
                             std::to_string(vocab.size()) + " words but the model expects " +
                             std::to_string(expected_dim));
  }
  return vocab;
}

void write_loss_history(const fs::path& path, const std::vector<EpochStats>& history) {
  auto out = open_output(path);
  out << "epoch\tmean_loss\tkl_paragraph\tkl_clean\tkl_background\n";
  for (const auto& s : history) {
    out << s.epoch << '\t' << fmt(s.mean_loss) << '\t' << fmt(s.kl_paragraph) << '\t'
        << fmt(s.kl_clean) << '\t' << fmt(s.kl_background) << '\n';
  }
}

EpochCallback epoch_logger() {
  return [](const EpochStats& s) {
    log::info("epoch " + std::to_string(s.epoch) + " loss " + fmt(s.mean_loss));
  };
}

// Blocks of text separated by blank lines.
std::vector<std::string> read_blocks(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> blocks;
  std::string line, current;
  auto flush = [&] {
    if (!current.empty()) blocks.push_back(current);
    current.clear();
  };
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      flush();
    } else {
      current += (current.empty() ? "" : "\n") + line;
    }
  }
  flush();
  return blocks;
}

// ------------------------------------------------------------ build-vocab

struct BuildVocab {
  std::string corpus, out;
  std::size_t max_size = 20000;
  std::size_t min_count = 2;
  bool keep_case = false;

  void add(CLI::App* app) {
    app->add_option("--corpus", corpus, "JSONL corpus")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Vocabulary file")->required();
    app->add_option("--max-size", max_size)->capture_default_str();
    app->add_option("--min-count", min_count)->capture_default_str();
    app->add_flag("--keep-case", keep_case, "Do not lowercase tokens");
  }

  void run(const CLI::App* sub) const {
    const auto docs = load_corpus(corpus);
    const auto vocab = build_vocabulary(docs, max_size, min_count, {.lowercase = !keep_case});
    g_outputs.add(out);
    vocab.save(out);
    write_resolved_config(sub, config_path_for(out));
    log::info("vocabulary: " + std::to_string(vocab.size()) + " words");
  }
};

// ------------------------------------------------------------ train-ev

std::vector<BowVector> bows_of(const std::vector<Document>& docs, const Vocabulary& vocab) {
  std::vector<BowVector> out;
  for (const auto& d : docs) {
    try {
      out.push_back(bow(d, vocab));
    } catch (const EmptyBowError&) {
      log::warn("skipping " + d.id + ": no in-vocabulary tokens");
    }
  }
  if (out.empty()) throw std::runtime_error("no document has an in-vocabulary token");
  return out;
}

struct TrainEv {
  std::string corpus, vocab, background, out, loss_tsv;
  ArchFlags arch;
  TrainFlags train;

  void add(CLI::App* app) {
    app->add_option("--corpus", corpus, "JSONL training corpus")->required()->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    app->add_option("--background", background,
                    "Corpus for the background distribution (default: the training corpus)");
    app->add_option("--out", out, "Model file")->required();
    app->add_option("--loss-tsv", loss_tsv, "Loss history (default: <out>.loss.tsv)");
    arch.add(app);
    train.add(app);
  }

  void run(const CLI::App* sub) const {
    const auto docs = load_corpus(corpus);
    const auto v = load_vocab_for(vocab, -1);
    const auto corpus_bows = bows_of(docs, v);
    const auto p_bg =
        background.empty() ? background_distribution(docs, v)
                           : background_distribution(load_corpus(background), v);
    const auto architecture = arch.make(static_cast<int>(v.size()));
    const auto config = train.make();
    EvTrainResult result;
    try {
      result = train_ev(corpus_bows, p_bg, architecture, config, epoch_logger());
    } catch (const TrainingDiverged<EvModelParams>& e) {
      const fs::path checkpoint = out + ".last_good";
      save_model(checkpoint, e.last_good());
      throw std::runtime_error(std::string(e.what()) + "; last good parameters saved to " +
                               checkpoint.string());
    }
    g_outputs.add(out);
    save_model(out, result.params);
    write_loss_history(loss_tsv.empty() ? out + ".loss.tsv" : loss_tsv, result.history);
    write_resolved_config(sub, config_path_for(out));
  }
};

// ------------------------------------------------------------ train-dev

struct TrainDev {
  std::string corpus, vocab, background, out, loss_tsv, init_ev;
  std::string s_hidden = "256";
  ArchFlags arch;
  TrainFlags train;

  void add(CLI::App* app) {
    app->add_option("--corpus", corpus, "JSONL with noisy \"text\" and \"clean\" fields")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    app->add_option("--background", background,
                    "Corpus for the background distribution (default: the noisy texts)");
    app->add_option("--out", out, "Model file")->required();
    app->add_option("--loss-tsv", loss_tsv, "Loss history (default: <out>.loss.tsv)");
    add_widths(app, "--s-hidden", s_hidden, "Hidden widths of the denoising decoder");
    app->add_option("--init-ev", init_ev,
                    "Start from a trained EV model (staged training); its architecture wins");
    arch.add(app);
    train.add(app);
  }

  void run(const CLI::App* sub) const {
    const auto docs = load_corpus(corpus, CorpusFormat::kPaired);
    const auto v = load_vocab_for(vocab, -1);
    std::vector<PairedExample> pairs;
    std::vector<Document> noisy_docs;
    for (const auto& d : docs) {
      try {
        pairs.push_back({bow(d, v), bow(tokenize(*d.clean_text), v)});
        noisy_docs.push_back(d);
      } catch (const EmptyBowError&) {
        log::warn("skipping " + d.id + ": no in-vocabulary tokens on one side");
      }
    }
    if (pairs.empty()) throw std::runtime_error("no usable paired document");
    const auto p_bg = background.empty() ? background_distribution(noisy_docs, v)
                                         : background_distribution(load_corpus(background), v);
    const auto config = train.make();

    DevArchitecture architecture;
    std::unique_ptr<DevModelParams> init;
    if (!init_ev.empty()) {
      const auto ev = load_ev_model(init_ev);
      init = std::make_unique<DevModelParams>(DevModelParams::from_ev(ev, parse_widths(s_hidden), config.seed));
      architecture = init->arch();
    } else {
      architecture = {arch.make(static_cast<int>(v.size())), parse_widths(s_hidden)};
    }
    DevTrainResult result;
    try {
      result = train_dev(pairs, p_bg, architecture, config, epoch_logger(), init.get());
    } catch (const TrainingDiverged<DevModelParams>& e) {
      const fs::path checkpoint = out + ".last_good";
      save_model(checkpoint, e.last_good());
      throw std::runtime_error(std::string(e.what()) + "; last good parameters saved to " +
                               checkpoint.string());
    }
    g_outputs.add(out);
    save_model(out, result.params);
    write_loss_history(loss_tsv.empty() ? out + ".loss.tsv" : loss_tsv, result.history);
    write_resolved_config(sub, config_path_for(out));
  }
};

// ------------------------------------------------------------ encode

struct Encode {
  std::string model, vocab, corpus, out;

  void add(CLI::App* app) {
    app->add_option("--model", model, "EV or D-EV model file")->required()->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "JSONL corpus")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Embedding JSONL")->required();
  }

  void run(const CLI::App* sub) const {
    const auto params = load_ev_model(model);
    const auto v = load_vocab_for(vocab, params.arch.vocab_dim);
    const auto docs = load_corpus(corpus);
    auto stream = open_output(out);
    for (const auto& d : docs) {
      BowVector p;
      try {
        p = bow(d, v);
      } catch (const EmptyBowError&) {
        log::warn("skipping " + d.id + ": no in-vocabulary tokens");
        continue;
      }
      const Vector e = encode_paragraph(params, p);
      json record{{"id", d.id}, {"vector", std::vector<double>(e.data(), e.data() + e.size())}};
      stream << record.dump() << '\n';
    }
    write_resolved_config(sub, config_path_for(out));
  }
};

// ------------------------------------------------------------ summarize

SummaryBudget::Kind parse_budget_kind(const std::string& kind) {
  if (kind == "words") return SummaryBudget::Kind::kWords;
  if (kind == "bytes") return SummaryBudget::Kind::kBytes;
  if (kind == "ratio") return SummaryBudget::Kind::kRatio;
  throw std::invalid_argument("unknown budget kind '" + kind + "'");
}

struct Summarize {
  std::string model, vocab, corpus, manifest, out, text_out;
  std::string budget_kind = "words";
  double budget = 100;
  std::string terminators = ".!?";

  void add(CLI::App* app) {
    app->add_option("--model", model, "EV or D-EV model file")->required()->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "JSONL documents")->required()->check(CLI::ExistingFile);
    app->add_option("--manifest", manifest, "JSON object: cluster id -> document ids")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--out", out, "Summary JSONL, one cluster per line")->required();
    app->add_option("--text-out", text_out, "Summaries as blank-line separated blocks");
    app->add_option("--budget-kind", budget_kind, "words, bytes or ratio")
        ->check(CLI::IsMember({"words", "bytes", "ratio"}))
        ->capture_default_str();
    app->add_option("--budget", budget, "Word/byte limit or fraction of words")
        ->capture_default_str();
    app->add_option("--terminators", terminators, "Sentence-ending characters")
        ->capture_default_str();
  }

  void run(const CLI::App* sub) const {
    const auto params = load_ev_model(model);
    const auto v = load_vocab_for(vocab, params.arch.vocab_dim);
    const auto docs = load_corpus(corpus);
    std::map<std::string, const Document*> by_id;
    for (const auto& d : docs) by_id[d.id] = &d;

    std::ifstream min(manifest);
    json clusters;
    try {
      clusters = json::parse(min);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(manifest + ": " + e.what());
    }
    if (!clusters.is_object()) throw std::runtime_error(manifest + ": expected a JSON object");
    const SummaryBudget b{parse_budget_kind(budget_kind), budget};
    b.validate();

    auto stream = open_output(out);
    std::unique_ptr<std::ofstream> text;
    if (!text_out.empty()) text = std::make_unique<std::ofstream>(open_output(text_out));
    bool first = true;
    for (const auto& [cluster_id, ids] : clusters.items()) {
      std::vector<Document> members;
      for (const auto& id : ids) {
        auto it = by_id.find(id.get<std::string>());
        if (it == by_id.end()) {
          throw std::runtime_error("cluster " + cluster_id + ": unknown document '" +
                                   id.get<std::string>() + "'");
        }
        members.push_back(*it->second);
      }
      const auto result = summarize_document_set(members, params, v, b, {terminators});
      json sentences = json::array();
      for (const auto& s : result.sentences) {
        sentences.push_back({{"doc_id", s.doc_id},
                             {"index", s.index},
                             {"score", s.score},
                             {"rho", s.rho},
                             {"delta", s.delta}});
      }
      stream << json{{"cluster_id", cluster_id}, {"summary", result.summary}, {"sentences", sentences}}
                    .dump()
             << '\n';
      if (text) *text << (first ? "" : "\n") << result.summary << '\n';
      first = false;
    }
    write_resolved_config(sub, config_path_for(out));
  }
};

// ------------------------------------------------------------ rouge

struct Rouge {
  std::string candidate, out;
  std::vector<std::string> references;
  std::string aggregation = "mean";

  void add(CLI::App* app) {
    app->add_option("--candidate", candidate, "Candidate summaries, blank-line separated")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--reference", references, "Reference file(s), same block layout")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--aggregation", aggregation, "mean or max over references")
        ->check(CLI::IsMember({"mean", "max"}))
        ->capture_default_str();
    app->add_option("--out", out, "TSV output (default: stdout)");
  }

  void run(const CLI::App* sub) const {
    const auto cand_blocks = read_blocks(candidate);
    std::vector<std::vector<std::string>> ref_blocks;
    for (const auto& r : references) {
      ref_blocks.push_back(read_blocks(r));
      if (ref_blocks.back().size() != cand_blocks.size()) {
        throw std::runtime_error(r + " has " + std::to_string(ref_blocks.back().size()) +
                                 " blocks, candidate has " + std::to_string(cand_blocks.size()));
      }
    }
    if (cand_blocks.empty()) throw std::runtime_error(candidate + ": no summaries");
    const auto agg = aggregation == "max" ? RougeAggregation::kMax : RougeAggregation::kMean;

    // Mean precision, recall and F over summaries.
    double totals[3][3] = {};
    for (std::size_t i = 0; i < cand_blocks.size(); ++i) {
      const auto cand = tokenize(cand_blocks[i]);
      std::vector<TokenList> refs;
      for (const auto& rb : ref_blocks) refs.push_back(tokenize(rb[i]));
      const RougeScore scores[3] = {rouge_n(cand, refs, 1, agg), rouge_n(cand, refs, 2, agg),
                                    rouge_l(cand, refs, agg)};
      for (int k = 0; k < 3; ++k) {
        totals[k][0] += scores[k].precision;
        totals[k][1] += scores[k].recall;
        totals[k][2] += scores[k].f;
      }
    }
    std::ostringstream table;
    table << "variant\tprecision\trecall\tf\n";
    const RougeVariant variants[3] = {RougeVariant::kRouge1, RougeVariant::kRouge2,
                                      RougeVariant::kRougeL};
    const double n = static_cast<double>(cand_blocks.size());
    for (int k = 0; k < 3; ++k) {
      table << rouge_variant_name(variants[k]) << '\t' << fixed6(totals[k][0] / n) << '\t'
            << fixed6(totals[k][1] / n) << '\t' << fixed6(totals[k][2] / n) << '\n';
    }
    if (out.empty()) {
      std::cout << table.str();
    } else {
      open_output(out) << table.str();
      write_resolved_config(sub, config_path_for(out));
    }
  }
};

// ------------------------------------------------------------ sentiment-cv

struct SentimentCv {
  std::string dataset, model, vocab, out;
  std::string featurizers = "unigram";
  int k = 10;
  std::uint64_t seed = 0;
  double lambda = 1e-4;
  int classifier_epochs = 50;
  std::size_t max_features = 20000;
  std::size_t min_count = 1;
  int pca_dim = 0;

  void add(CLI::App* app) {
    app->add_option("--dataset", dataset, "Labeled JSONL {id, text, label}")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--featurizers", featurizers,
                    "Comma list of unigram, bigram, ev, pca; join with '+' to concatenate")
        ->capture_default_str();
    app->add_option("--model", model, "EV model (for ev)");
    app->add_option("--vocab", vocab, "Vocabulary (for ev and pca)");
    app->add_option("--k", k, "Number of folds")->capture_default_str();
    app->add_option("--seed", seed, "Fold and classifier seed (required)")->required();
    app->add_option("--lambda", lambda, "L2 strength of the classifier")->capture_default_str();
    app->add_option("--classifier-epochs", classifier_epochs)->capture_default_str();
    app->add_option("--max-features", max_features, "N-gram vocabulary cap")->capture_default_str();
    app->add_option("--min-count", min_count, "N-gram minimum count")->capture_default_str();
    app->add_option("--pca-dim", pca_dim, "PCA size (default: the EV embedding size, else 64)")
        ->capture_default_str();
    app->add_option("--out", out, "Accuracy TSV (default: stdout)");
  }

  void run(const CLI::App* sub) const {
    const auto docs = load_labeled_dataset(dataset);
    std::unique_ptr<EvModelParams> ev_model;
    std::unique_ptr<Vocabulary> v;
    if (!model.empty()) ev_model = std::make_unique<EvModelParams>(load_ev_model(model));
    if (!vocab.empty()) {
      v = std::make_unique<Vocabulary>(
          load_vocab_for(vocab, ev_model ? ev_model->arch.vocab_dim : -1));
    }
    auto dense_bow = [&v](const LabeledDocument& d) -> Vector {
      try {
        return to_dense(bow(tokenize(d.text), *v));
      } catch (const EmptyBowError&) {
        return Vector::Zero(static_cast<Eigen::Index>(v->size()));
      }
    };

    std::map<std::string, Featurizer> base;
    auto unigram = std::make_shared<NgramFeaturizer>(docs, 1, 1, max_features, min_count);
    base["unigram"] = {"unigram", [unigram](const LabeledDocument& d) { return (*unigram)(d); }};
    auto bigram = std::make_shared<NgramFeaturizer>(docs, 2, 2, max_features, min_count);
    base["bigram"] = {"bigram", [bigram](const LabeledDocument& d) { return (*bigram)(d); }};
    if (ev_model && v) {
      const auto dim = ev_model->arch.embedding_dim;
      base["ev"] = {"ev", [&, dim](const LabeledDocument& d) -> Vector {
                      try {
                        return encode_paragraph(*ev_model, bow(tokenize(d.text), *v));
                      } catch (const EmptyBowError&) {
                        return Vector::Zero(dim);
                      }
                    }};
    }
    if (v) {
      std::vector<Vector> rows;
      for (const auto& d : docs) rows.push_back(dense_bow(d));
      const int dim = pca_dim > 0 ? pca_dim : (ev_model ? ev_model->arch.embedding_dim : 64);
      auto pca = std::make_shared<PcaModel>(pca_fit(rows, dim));
      base["pca"] = {"pca", [pca, dense_bow](const LabeledDocument& d) {
                       return pca_transform(*pca, dense_bow(d));
                     }};
    }

    std::vector<Featurizer> chosen;
    std::stringstream list(featurizers);
    std::string item;
    while (std::getline(list, item, ',')) {
      std::vector<Featurizer> parts;
      std::stringstream plus(item);
      std::string name;
      while (std::getline(plus, name, '+')) {
        auto it = base.find(name);
        if (it == base.end()) {
          throw std::invalid_argument("featurizer '" + name +
                                      "' is unknown or needs --model/--vocab");
        }
        parts.push_back(it->second);
      }
      chosen.push_back(parts.size() == 1 ? parts[0] : concat_featurizers(parts));
    }
    LinearClassifierConfig classifier;
    classifier.lambda = lambda;
    classifier.epochs = classifier_epochs;
    classifier.seed = seed;
    const auto result = crossvalidate(docs, chosen, k, seed, classifier);
    const auto table = format_cv_table(result);
    if (out.empty()) {
      std::cout << table;
    } else {
      open_output(out) << table;
      write_resolved_config(sub, config_path_for(out));
    }
  }
};

// ------------------------------------------------------------ gradcheck

struct GradCheck {
  int vocab_dim = 6;
  ArchFlags arch;
  std::string s_hidden = "4";
  bool dev = false;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  double inflate = 1.0;
  std::string out;

  GradCheck() {
    arch.embedding_dim = 3;
    arch.f_hidden = arch.g_hidden = arch.h_hidden = "4";
  }

  void add(CLI::App* app) {
    app->add_option("--vocab-dim", vocab_dim)->capture_default_str();
    arch.add(app);
    add_widths(app, "--s-hidden", s_hidden, "Hidden widths of the denoising decoder");
    app->add_flag("--dev", dev, "Check the D-EV objective");
    app->add_option("--seed", seed, "Seed for weights and inputs (required)")->required();
    app->add_option("--step", step, "Central difference step")->capture_default_str();
    app->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
    app->add_option("--inflate", inflate, "Scale initial weights")->capture_default_str();
    app->add_option("--out", out, "Report file (default: stdout)");
  }

  int run(const CLI::App* sub) const {
    std::mt19937_64 rng(seed);
    const auto a = arch.make(vocab_dim);
    DevModelParams params = DevModelParams::initialize({a, parse_widths(s_hidden)}, seed);
    for (auto ref : params.params()) ref.layer->weight *= inflate;

    auto random_dist = [&](double density) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::map<std::size_t, std::size_t> counts;
      for (int i = 0; i < vocab_dim; ++i) {
        if (unit(rng) < density) counts[static_cast<std::size_t>(i)] = 1 + rng() % 9;
      }
      if (counts.empty()) counts[rng() % static_cast<std::size_t>(vocab_dim)] = 1;
      return BowVector::from_counts(counts, static_cast<std::size_t>(vocab_dim));
    };
    const PairedExample pair{random_dist(0.5), random_dist(0.5)};
    const BowVector p_bg = random_dist(1.0);

    GradCheckReport report;
    bool clamped = false;
    if (dev) {
      const auto trace = dev_forward(params, pair, p_bg);
      clamped = trace.ev.attention.clamped;
      const auto grads = dev_backward(params, trace, pair, p_bg);
      std::vector<LayerGrad> flat = grads.ev.layers;
      flat.insert(flat.end(), grads.s.begin(), grads.s.end());
      auto refs = params.params();
      auto checked = gradcheck_params(refs, flat);
      report = finite_difference_check(
          [&] { return dev_loss(dev_forward(params, pair, p_bg), pair, p_bg); }, checked, step);
    } else {
      auto& ev = params.ev;
      const auto trace = forward(ev, pair.noisy, p_bg);
      clamped = trace.attention.clamped;
      const auto grads = ev_backward(ev, trace, pair.noisy, p_bg);
      auto refs = ev.params();
      auto checked = gradcheck_params(refs, grads.layers);
      report = finite_difference_check(
          [&] { return ev_loss(forward(ev, pair.noisy, p_bg), pair.noisy, p_bg); }, checked, step);
    }
    std::ostringstream text;
    text << "objective\t" << (dev ? "dev" : "ev") << "\n"
         << "max_relative_error\t" << fmt(report.max_relative_error) << "\n"
         << "worst_parameter\t" << report.worst_parameter << "\n"
         << "checked\t" << report.checked << "\n"
         << "step_size\t" << fmt(report.step_size) << "\n"
         << "attention_clamped\t" << (clamped ? "true" : "false") << "\n"
         << "tolerance\t" << fmt(tolerance) << "\n"
         << "status\t" << (report.passes(tolerance) ? "pass" : "fail") << "\n";
    if (out.empty()) {
      std::cout << text.str();
    } else {
      open_output(out) << text.str();
      write_resolved_config(sub, config_path_for(out));
    }
    return report.passes(tolerance) ? 0 : 1;
  }
};

// ------------------------------------------------------------ make-synthetic

struct MakeSynthetic {
  SyntheticCorpusConfig config;
  std::string out_dir;
  std::size_t gold_words = 20;
  double noisy_wer = 0.0;
  bool labeled = false;

  void add(CLI::App* app) {
    app->add_option("--seed", config.seed, "Generator seed (required)")->required();
    app->add_option("--topics", config.num_topics)->capture_default_str();
    app->add_option("--docs-per-topic", config.docs_per_topic)->capture_default_str();
    app->add_option("--doc-length", config.doc_length, "Tokens per document")->capture_default_str();
    app->add_option("--vocab-size", config.vocab_size)->capture_default_str();
    app->add_option("--background-mass", config.background_mass)->capture_default_str();
    app->add_option("--sentence-length", config.sentence_length)->capture_default_str();
    app->add_option("--gold-words", gold_words, "Words per gold summary")->capture_default_str();
    app->add_option("--noisy-wer", noisy_wer, "Also write noisy/clean pairs at this error rate")
        ->capture_default_str();
    app->add_flag("--labeled", labeled, "Also write a pos/neg dataset (even/odd topics)");
    app->add_option("--out-dir", out_dir, "Output directory")->required();
  }

  void run(const CLI::App* sub) const {
    const auto corpus = make_synthetic_topic_corpus(config);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    save_corpus(g_outputs.add(dir / "corpus.jsonl"), corpus.docs);

    {
      auto labels = open_output(dir / "labels.tsv");
      labels << "id\ttopic\n";
      for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        labels << corpus.docs[i].id << '\t' << corpus.labels[i] << '\n';
      }
    }
    // Cluster ids sort in topic order as long as they share a width.
    const int width = static_cast<int>(std::to_string(config.num_topics - 1).size());
    json manifest = json::object();
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "topic%0*d", width, corpus.labels[i]);
      manifest[id].push_back(corpus.docs[i].id);
    }
    open_output(dir / "manifest.json") << manifest.dump(2) << '\n';
    {
      const auto gold = corpus.gold_summaries(gold_words);
      auto out = open_output(dir / "gold.txt");
      for (std::size_t t = 0; t < gold.size(); ++t) out << (t ? "\n" : "") << gold[t] << '\n';
    }
    if (labeled) {
      auto out = open_output(dir / "labeled.jsonl");
      for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        out << json{{"id", corpus.docs[i].id},
                    {"text", corpus.docs[i].text},
                    {"label", corpus.labels[i] % 2 == 0 ? "pos" : "neg"}}
                   .dump()
            << '\n';
      }
    }
    if (noisy_wer > 0.0) {
      const auto vocab = build_vocabulary(corpus.docs, 1u << 20, 1);
      const auto bg = background_distribution(corpus.docs, vocab);
      std::vector<Document> pairs;
      for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        pairs.push_back(simulate_recognition_noise(corpus.docs[i], vocab, bg, noisy_wer,
                                                   fold_seed(config.seed, static_cast<int>(i)))
                            .doc);
      }
      save_corpus(g_outputs.add(dir / "paired.jsonl"), pairs);
    }
    write_resolved_config(sub, dir / "config.toml");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Essence vector toolkit"};
  app.set_config("--config", "", "Config file with one [command] section; flags win");
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print warnings and errors");

  BuildVocab build_vocab;
  TrainEv train_ev_cmd;
  TrainDev train_dev_cmd;
  Encode encode;
  Summarize summarize;
  Rouge rouge;
  SentimentCv sentiment_cv;
  GradCheck gradcheck;
  MakeSynthetic make_synthetic;

  auto* s_vocab = app.add_subcommand("build-vocab", "Build a vocabulary from a corpus");
  build_vocab.add(s_vocab);
  auto* s_train_ev = app.add_subcommand("train-ev", "Train an EV model");
  train_ev_cmd.add(s_train_ev);
  auto* s_train_dev = app.add_subcommand("train-dev", "Train a denoising EV model on pairs");
  train_dev_cmd.add(s_train_dev);
  auto* s_encode = app.add_subcommand("encode", "Embed documents with the paragraph encoder");
  encode.add(s_encode);
  auto* s_summarize = app.add_subcommand("summarize", "Extractive summaries per cluster");
  summarize.add(s_summarize);
  auto* s_rouge = app.add_subcommand("rouge", "ROUGE-1/2/L of candidate summaries");
  rouge.add(s_rouge);
  auto* s_cv = app.add_subcommand("sentiment-cv", "k-fold classification accuracy");
  sentiment_cv.add(s_cv);
  auto* s_grad = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  gradcheck.add(s_grad);
  auto* s_synth = app.add_subcommand("make-synthetic", "Generate a synthetic topic corpus");
  make_synthetic.add(s_synth);

  CLI11_PARSE(app, argc, argv);
  if (quiet) {
    ev::log::set_sink([](ev::log::Level level, std::string_view message) {
      if (level == ev::log::Level::kWarning) std::cerr << "warning: " << message << '\n';
    });
  }

  try {
    if (s_vocab->parsed()) build_vocab.run(s_vocab);
    if (s_train_ev->parsed()) train_ev_cmd.run(s_train_ev);
    if (s_train_dev->parsed()) train_dev_cmd.run(s_train_dev);
    if (s_encode->parsed()) encode.run(s_encode);
    if (s_summarize->parsed()) summarize.run(s_summarize);
    if (s_rouge->parsed()) rouge.run(s_rouge);
    if (s_cv->parsed()) sentiment_cv.run(s_cv);
    if (s_synth->parsed()) make_synthetic.run(s_synth);
    if (s_grad->parsed()) return gradcheck.run(s_grad);
  } catch (const std::exception& e) {
    g_outputs.remove_all();
    std::cerr << "evtool: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
