#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "evlink/clustering.hpp"
#include "evlink/corpus.hpp"
#include "evlink/embeddings.hpp"
#include "evlink/errors.hpp"
#include "evlink/metrics.hpp"
#include "evlink/pairs.hpp"
#include "evlink/random.hpp"
#include "evlink/scorers.hpp"

namespace evlink {

// ---------------------------------------------------------------------------
// Methods

enum class MethodKind { Cosine, Regressor, RegressorType, RegressorLemma, RegressorCosine, Baseline };

struct Method {
  MethodKind kind = MethodKind::Cosine;
  BaselineRule rule = BaselineRule::Singletons;  // Baseline only

  bool trains_regressor() const {
    return kind == MethodKind::Regressor || kind == MethodKind::RegressorType ||
           kind == MethodKind::RegressorLemma || kind == MethodKind::RegressorCosine;
  }

  // The pair strategy a method is defined with.
  PairStrategy strategy() const {
    switch (kind) {
      case MethodKind::RegressorType: return PairStrategy::SameType;
      case MethodKind::RegressorLemma: return PairStrategy::LemmaMatch;
      default: return PairStrategy::AllPreceding;
    }
  }
};

inline std::string to_string(const Method& m) {
  switch (m.kind) {
    case MethodKind::Cosine: return "cosine";
    case MethodKind::Regressor: return "regressor";
    case MethodKind::RegressorType: return "regressor_type";
    case MethodKind::RegressorLemma: return "regressor_lemma";
    case MethodKind::RegressorCosine: return "regressor_cosine";
    case MethodKind::Baseline: return "baseline:" + std::string(to_string(m.rule));
  }
  return "cosine";
}

inline Method parse_method(std::string_view s) {
  if (s == "cosine") return {MethodKind::Cosine};
  if (s == "regressor") return {MethodKind::Regressor};
  if (s == "regressor_type") return {MethodKind::RegressorType};
  if (s == "regressor_lemma") return {MethodKind::RegressorLemma};
  if (s == "regressor_cosine") return {MethodKind::RegressorCosine};
  if (s.starts_with("baseline:")) return {MethodKind::Baseline, parse_baseline_rule(s.substr(9))};
  throw ValidationError("unknown method '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Configuration

// 0.00, 0.01, ..., 1.00
inline std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

// "start:stop:step" or a comma-separated list.
inline std::vector<double> parse_threshold_grid(const std::string& spec) {
  std::vector<double> grid;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("bad number '" + s + "' in threshold grid");
    }
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ValidationError("threshold grid range must be start:stop:step");
    const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
    if (!(step > 0) || stop < start) throw ValidationError("threshold grid range is empty");
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) grid.push_back(start + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) grid.push_back(number(p));
  }
  if (grid.empty()) throw ValidationError("threshold grid is empty");
  for (double t : grid) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("threshold grid values must lie in [0, 1]");
  }
  return grid;
}

struct PipelineConfig {
  std::string train_corpus, dev_corpus, test_corpus;
  std::string train_embeddings, dev_embeddings, test_embeddings;
  std::optional<std::size_t> embedding_dim;
  Method method;
  std::optional<PairStrategy> strategy;  // must agree with the method when given
  TrainConfig train;
  std::vector<double> threshold_grid = default_threshold_grid();
  Aggregation mode = Aggregation::Micro;
  std::string out_dir = "evlink-out";
  std::string cosine_transform;  // checkpoint for regressor_cosine or a pre-trained cosine model
  bool train_transform = false;  // cosine: learn the transform on the train split first

  PairStrategy pair_strategy() const { return method.strategy(); }

  // Split scored at the end: test when configured, dev otherwise.
  bool has_test() const { return !test_corpus.empty(); }

  void check() const {
    train.check();
    if (strategy && *strategy != method.strategy()) {
      throw ValidationError("strategy '" + std::string(to_string(*strategy)) +
                            "' conflicts with method '" + to_string(method) + "'");
    }
    auto need = [](const std::string& path, const char* key) {
      if (path.empty()) throw ValidationError(std::string("config needs '") + key + "'");
      if (!std::filesystem::exists(path)) {
        throw ValidationError(std::string(key) + ": '" + path + "' does not exist");
      }
    };
    auto optional_path = [&](const std::string& path, const char* key) {
      if (!path.empty()) need(path, key);
    };
    const bool baseline = method.kind == MethodKind::Baseline;
    if (!baseline) {
      need(dev_corpus, "dev_corpus");
      need(dev_embeddings, "dev_embeddings");
    }
    if (method.trains_regressor() || (method.kind == MethodKind::Cosine && train_transform)) {
      need(train_corpus, "train_corpus");
      need(train_embeddings, "train_embeddings");
    }
    if (has_test()) {
      need(test_corpus, "test_corpus");
      if (!baseline) need(test_embeddings, "test_embeddings");
    } else if (baseline) {
      need(dev_corpus, "dev_corpus");
    }
    if (method.kind == MethodKind::RegressorCosine) need(cosine_transform, "cosine_transform");
    if (method.kind == MethodKind::Cosine) {
      optional_path(cosine_transform, "cosine_transform");
      if (train_transform && !cosine_transform.empty()) {
        throw ValidationError("set either cosine_transform or train_transform, not both");
      }
    }
    if (threshold_grid.empty()) throw ValidationError("threshold grid is empty");
  }
};

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ValidationError("expected a boolean, got '" + s + "'");
}

// Flat "key = value" lines; '#' starts a comment. Relative paths resolve
// against `base_dir`.
inline PipelineConfig parse_config(const std::string& text, const std::string& base_dir = {},
                                   const std::string& source = "<config>") {
  PipelineConfig c;
  auto path = [&](const std::string& v) {
    if (v.empty() || base_dir.empty() || std::filesystem::path(v).is_absolute()) return v;
    return (std::filesystem::path(base_dir) / v).lexically_normal().string();
  };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "train_corpus") c.train_corpus = path(value);
      else if (key == "dev_corpus") c.dev_corpus = path(value);
      else if (key == "test_corpus") c.test_corpus = path(value);
      else if (key == "train_embeddings") c.train_embeddings = path(value);
      else if (key == "dev_embeddings") c.dev_embeddings = path(value);
      else if (key == "test_embeddings") c.test_embeddings = path(value);
      else if (key == "embedding_dim") c.embedding_dim = std::stoul(value);
      else if (key == "method") c.method = parse_method(value);
      else if (key == "strategy") c.strategy = parse_strategy(value);
      else if (key == "epochs") c.train.epochs = std::stoul(value);
      else if (key == "lr") c.train.lr = std::stod(value);
      else if (key == "weight_decay") c.train.weight_decay = std::stod(value);
      else if (key == "batch_size") c.train.batch_size = std::stoul(value);
      else if (key == "shuffle") c.train.shuffle = parse_bool(value);
      else if (key == "seed") c.train.seed = std::stoull(value);
      else if (key == "negative_keep_ratio") c.train.negative_keep_ratio = std::stod(value);
      else if (key == "threshold_grid") c.threshold_grid = parse_threshold_grid(value);
      else if (key == "mode") c.mode = parse_aggregation(value);
      else if (key == "out_dir") c.out_dir = path(value);
      else if (key == "cosine_transform") c.cosine_transform = path(value);
      else if (key == "train_transform") c.train_transform = parse_bool(value);
      else throw ParseError(where + ": unknown key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const std::logic_error&) {
      throw ParseError(where + ": bad value for '" + key + "'");
    }
  }
  return c;
}

inline PipelineConfig load_config(const std::string& file) {
  const auto dir = std::filesystem::path(file).parent_path().string();
  return parse_config(detail::read_file(file), dir, file);
}

// ---------------------------------------------------------------------------
// Threshold tuning

struct ThresholdPoint {
  double threshold = 0.0;
  double b3_f1 = 0.0;
  double muc_f1 = 0.0;
  double average = 0.0;
  std::size_t predicted_positive = 0;
};

struct ThresholdTuning {
  double threshold = 0.0;
  std::vector<ThresholdPoint> trace;
};

// Grid value with the best mean of B3 and MUC F1; ties keep the smallest
// threshold.
inline double select_threshold(const std::vector<ThresholdPoint>& trace) {
  if (trace.empty()) throw ValidationError("no thresholds were evaluated");
  const ThresholdPoint* best = &trace.front();
  for (const auto& p : trace) {
    if (p.average > best->average || (p.average == best->average && p.threshold < best->threshold)) {
      best = &p;
    }
  }
  return best->threshold;
}

inline ThresholdTuning tune_threshold(const std::optional<CosineTransformModel>& transform,
                                      const Corpus& dev, const EmbeddingTable& table,
                                      std::vector<double> grid, PairStrategy strategy,
                                      Aggregation mode = Aggregation::Micro) {
  if (grid.empty()) throw ValidationError("threshold grid is empty");
  for (double t : grid) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("threshold grid values must lie in [0, 1]");
  }
  std::sort(grid.begin(), grid.end());
  struct Scored {
    MentionPair pair;
    std::optional<double> score;
  };
  std::vector<std::vector<Scored>> scored(dev.documents.size());
  std::vector<Clustering> gold;
  for (std::size_t d = 0; d < dev.documents.size(); ++d) {
    const auto& doc = dev.documents[d];
    gold.push_back(gold_clustering(doc));
    for (auto& p : generate_pairs(doc, strategy)) {
      auto s = pair_cosine(transform, table.lookup(p.first), table.lookup(p.second));
      scored[d].push_back({std::move(p), s});
    }
  }

  ThresholdTuning out;
  for (double theta : grid) {
    std::vector<DocumentCounts> counts;
    std::size_t positives = 0;
    for (std::size_t d = 0; d < dev.documents.size(); ++d) {
      std::vector<MentionPair> decisions;
      for (const auto& s : scored[d]) {
        MentionPair p = s.pair;
        p.label = s.score && *s.score > theta;
        positives += *p.label;
        decisions.push_back(std::move(p));
      }
      const auto sys = connected_components(adjacency_from_decisions(dev.documents[d], decisions));
      counts.push_back({dev.documents[d].doc_id, count_all(gold[d], sys)});
    }
    const auto report = aggregate_corpus(counts, mode);
    ThresholdPoint pt{theta, report.b3.f1, report.muc.f1, report.b3_muc_average(), positives};
    out.trace.push_back(pt);
  }
  out.threshold = select_threshold(out.trace);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction

struct Models {
  std::optional<CosineThresholdModel> cosine;
  std::optional<LogisticRegressorModel> regressor;
};

// Decisions for every pair the strategy generates; excluded pairs are absent.
inline std::vector<MentionPair> predict_pairs(const Method& method, const Models& models,
                                              const Document& doc, const EmbeddingTable& table,
                                              PairStrategy strategy) {
  if (strategy != method.strategy()) {
    throw ValidationError("strategy '" + std::string(to_string(strategy)) +
                          "' does not match method '" + to_string(method) + "'");
  }
  switch (method.kind) {
    case MethodKind::Cosine:
      if (!models.cosine) throw ValidationError("cosine method needs a cosine model");
      return cosine_predict(*models.cosine, doc, table, strategy);
    case MethodKind::Baseline: {
      const auto adj = baseline_adjacency(doc, method.rule);
      auto pairs = generate_pairs(doc, strategy);
      for (std::size_t j = 1, k = 0; j < doc.mentions.size(); ++j) {
        for (std::size_t i = 0; i < j; ++i, ++k) pairs[k].label = adj.edge(i, j);
      }
      return pairs;
    }
    default:
      if (!models.regressor) throw ValidationError(to_string(method) + " needs a regressor model");
      if (method.kind == MethodKind::RegressorCosine && !models.regressor->frozen_transform) {
        throw ValidationError("regressor_cosine needs a regressor with a frozen transform");
      }
      return regressor_predict(*models.regressor, doc, table, strategy);
  }
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t documents = 200;
  std::size_t dim = 32;
  double separation_noise_ratio = 5.0;  // centroid std / per-mention noise std
  std::size_t min_mentions = 4;
  std::size_t max_mentions = 12;
  double join_probability = 0.45;  // chance a mention joins an existing chain
  double train_fraction = 0.6;
  double dev_fraction = 0.2;
};

struct SynthData {
  Corpus train, dev, test;
  EmbeddingTable embeddings;  // every mention of every split
};

// Planted chains: each chain draws a centroid from N(0, I); each mention is
// its chain centroid plus N(0, (1/ratio)^2 I). Chains carry an event type and
// a head lemma, which mentions keep with probability 0.75.
inline SynthData synthesize(const SynthConfig& cfg) {
  if (cfg.documents == 0 || cfg.dim == 0 || cfg.min_mentions == 0 ||
      cfg.max_mentions < cfg.min_mentions || !(cfg.separation_noise_ratio > 0)) {
    throw ValidationError("invalid synthetic corpus settings");
  }
  static const std::vector<std::string> types{"Attack", "Transport", "Meet",     "Die",
                                              "Elect",  "Arrest",    "Sentence", "Transfer"};
  static const std::vector<std::string> lemmas{
      "attack", "counterattack", "capture", "seize",  "fire", "misfire", "elect",  "reelect",
      "meet",   "talk",          "arrest",  "detain", "kill", "die",     "travel", "move",
      "pay",    "buy",           "sell",    "strike", "bomb", "shoot",   "visit",  "sentence"};
  Rng rng(cfg.seed, "synth");
  SynthData data;
  data.embeddings = EmbeddingTable(cfg.dim, "synthetic");
  data.train.split = Split::Train;
  data.dev.split = Split::Dev;
  data.test.split = Split::Test;
  const double noise = 1.0 / cfg.separation_noise_ratio;
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * cfg.documents));
  const auto n_dev = static_cast<std::size_t>(std::llround(cfg.dev_fraction * cfg.documents));

  for (std::size_t d = 0; d < cfg.documents; ++d) {
    Corpus& target = d < n_train ? data.train : d < n_train + n_dev ? data.dev : data.test;
    char doc_id[32];
    std::snprintf(doc_id, sizeof doc_id, "doc%04zu", d);
    Document doc;
    doc.doc_id = doc_id;
    const std::size_t n =
        cfg.min_mentions + rng.below(cfg.max_mentions - cfg.min_mentions + 1);

    struct Chain {
      std::vector<double> centroid;
      std::string type, lemma;
      std::size_t size = 0;
    };
    std::vector<Chain> chains;
    std::vector<std::size_t> chain_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!chains.empty() && rng.bernoulli(cfg.join_probability)) {
        chain_of[i] = rng.below(chains.size());
      } else {
        Chain c;
        for (std::size_t k = 0; k < cfg.dim; ++k) c.centroid.push_back(rng.normal());
        c.type = types[rng.below(types.size())];
        c.lemma = lemmas[rng.below(lemmas.size())];
        chain_of[i] = chains.size();
        chains.push_back(std::move(c));
      }
      ++chains[chain_of[i]].size;
    }

    for (std::size_t i = 0; i < n; ++i) {
      const Chain& c = chains[chain_of[i]];
      const std::string lemma = rng.bernoulli(0.75) ? c.lemma : lemmas[rng.below(lemmas.size())];
      const std::size_t len = 6 + rng.below(7);
      std::vector<std::string> sentence;
      for (std::size_t t = 0; t < len; ++t) sentence.push_back("w" + std::to_string(rng.below(500)));
      const std::size_t pos = rng.below(len);
      sentence[pos] = lemma;
      doc.sentences.push_back(std::move(sentence));

      EventMention m;
      m.mention_id = doc.doc_id + "-m" + std::to_string(i);
      m.doc_id = doc.doc_id;
      m.sent_idx = i;
      m.tok_start = pos;
      m.tok_end = pos + 1;
      m.event_type = c.type;
      m.head_lemma = lemma;
      // Singleton chains are unannotated half of the time.
      if (c.size > 1 || rng.bernoulli(0.5)) m.chain_id = "c" + std::to_string(chain_of[i]);
      Vector v(cfg.dim);
      for (std::size_t k = 0; k < cfg.dim; ++k) {
        v[k] = static_cast<float>(c.centroid[k] + noise * rng.normal());
      }
      data.embeddings.insert(m.mention_id, std::move(v));
      doc.mentions.push_back(std::move(m));
    }
    sort_mentions(doc);
    target.documents.push_back(std::move(doc));
  }
  return data;
}

// Writes train/dev/test corpora, one embedding file, and a pipeline config
// that points at them.
inline void write_synth(const SynthData& data, const std::string& dir, const SynthConfig& cfg) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  save_corpus(data.train, (base / "train.json").string());
  save_corpus(data.dev, (base / "dev.json").string());
  save_corpus(data.test, (base / "test.json").string());
  write_embeddings(data.embeddings, (base / "embeddings.jsonl").string());
  std::ostringstream cfgtext;
  cfgtext << "# synthetic corpus, seed " << cfg.seed << ", " << cfg.documents << " documents\n"
          << "train_corpus = train.json\n"
          << "dev_corpus = dev.json\n"
          << "test_corpus = test.json\n"
          << "train_embeddings = embeddings.jsonl\n"
          << "dev_embeddings = embeddings.jsonl\n"
          << "test_embeddings = embeddings.jsonl\n"
          << "embedding_dim = " << cfg.dim << "\n"
          << "method = cosine\n"
          << "seed = " << cfg.seed << "\n"
          << "out_dir = out\n";
  detail::write_file((base / "pipeline.cfg").string(), cfgtext.str());
}

// ---------------------------------------------------------------------------
// End-to-end run

struct PipelineResult {
  MetricReport report;
  ErrorBreakdown breakdown;
  Models models;
  std::optional<ThresholdTuning> tuning;
  std::optional<RegressorTraining> training;
  std::optional<CosineDiagnostics> dev_diagnostics_before;
  std::optional<CosineDiagnostics> dev_diagnostics_after;
  std::vector<Clustering> system;
  std::string report_path, checkpoint_path, system_path;
};

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(name) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(std::string(name) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

inline std::vector<MentionPair> labeled_pairs(const Corpus& corpus, PairStrategy strategy) {
  std::vector<MentionPair> out;
  for (const auto& doc : corpus.documents) {
    auto pairs = label_pairs(generate_pairs(doc, strategy), gold_clustering(doc));
    out.insert(out.end(), std::make_move_iterator(pairs.begin()),
               std::make_move_iterator(pairs.end()));
  }
  return out;
}

inline nlohmann::json diagnostics_json(const CosineDiagnostics& d) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"cos_plus", opt(d.cos_plus)},
          {"cos_minus", opt(d.cos_minus)},
          {"cos_delta", opt(d.cos_delta())},
          {"positives", d.positives},
          {"negatives", d.negatives},
          {"skipped", d.skipped}};
}

}  // namespace detail

using detail::diagnostics_json;

inline ErrorBreakdown breakdown_for(const Corpus& corpus,
                                    const std::vector<std::vector<MentionPair>>& decisions) {
  std::vector<PairOutcome> outcomes;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& doc = corpus.documents[d];
    std::unordered_map<std::string, const EventMention*> by_id;
    for (const auto& m : doc.mentions) by_id[m.mention_id] = &m;
    std::unordered_map<std::string, bool> predicted;
    for (const auto& p : decisions[d]) predicted[p.first + '\n' + p.second] = p.label.value_or(false);
    for (const auto& p : label_pairs(generate_pairs(doc, PairStrategy::AllPreceding),
                                     gold_clustering(doc))) {
      auto it = predicted.find(p.first + '\n' + p.second);
      outcomes.push_back({*p.label, it != predicted.end() && it->second,
                          lemma_match(*by_id[p.first], *by_id[p.second])});
    }
  }
  return error_analysis(outcomes);
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  detail::stage("config", [&] { cfg.check(); return 0; });
  PipelineResult result;
  const Method method = cfg.method;
  const PairStrategy strategy = cfg.pair_strategy();
  const bool baseline = method.kind == MethodKind::Baseline;

  // Load and check coverage of everything before any training.
  struct Split {
    Corpus corpus;
    EmbeddingTable table;
  };
  auto load = [&](const std::string& corpus_path, const std::string& emb_path, bool need_emb) {
    Split s;
    s.corpus = load_corpus(corpus_path);
    if (need_emb) {
      s.table = read_embeddings(emb_path, cfg.embedding_dim);
      require_coverage(s.corpus, s.table);
    }
    return s;
  };
  const bool need_train =
      method.trains_regressor() || (method.kind == MethodKind::Cosine && cfg.train_transform);
  Split train, dev, test;
  detail::stage("load", [&] {
    if (need_train) train = load(cfg.train_corpus, cfg.train_embeddings, true);
    if (!baseline || !cfg.has_test()) dev = load(cfg.dev_corpus, cfg.dev_embeddings, !baseline);
    if (cfg.has_test()) test = load(cfg.test_corpus, cfg.test_embeddings, !baseline);
    return 0;
  });
  const Split& eval = cfg.has_test() ? test : dev;

  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path out(cfg.out_dir);
  nlohmann::json extra = nlohmann::json::object();
  std::optional<Checkpoint> checkpoint;

  detail::stage("train", [&] {
    std::optional<CosineTransformModel> transform;
    if (!cfg.cosine_transform.empty()) {
      auto ck = load_checkpoint(cfg.cosine_transform);
      if (auto* t = std::get_if<CosineTransformModel>(&ck)) {
        transform = *t;
      } else if (auto* c = std::get_if<CosineThresholdModel>(&ck); c && c->transform) {
        transform = c->transform;
      } else {
        throw ValidationError("'" + cfg.cosine_transform + "' holds no cosine transform");
      }
    }
    if (method.kind == MethodKind::Cosine) {
      const auto dev_pairs = detail::labeled_pairs(dev.corpus, strategy);
      if (cfg.train_transform) {
        const auto training = train_cosine_transform(detail::labeled_pairs(train.corpus, strategy),
                                                     train.table, cfg.train);
        transform = training.model;
        nlohmann::json trace = nlohmann::json::array();
        for (const auto& e : training.trace) {
          trace.push_back({{"epoch", e.epoch},
                           {"loss", e.loss},
                           {"train", detail::diagnostics_json(e.diagnostics)}});
        }
        extra["transform_trace"] = trace;
      }
      if (!dev_pairs.empty()) {
        result.dev_diagnostics_before = compute_diagnostics(dev_pairs, dev.table);
        result.dev_diagnostics_after = compute_diagnostics(dev_pairs, dev.table, transform);
        extra["dev_diagnostics"] = {
            {"untransformed", detail::diagnostics_json(*result.dev_diagnostics_before)},
            {"model", detail::diagnostics_json(*result.dev_diagnostics_after)}};
      }
      result.tuning = tune_threshold(transform, dev.corpus, dev.table, cfg.threshold_grid,
                                     strategy, cfg.mode);
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& p : result.tuning->trace) {
        trace.push_back({{"threshold", p.threshold},
                         {"b3_f1", p.b3_f1},
                         {"muc_f1", p.muc_f1},
                         {"average", p.average},
                         {"predicted_positive", p.predicted_positive}});
      }
      extra["threshold"] = result.tuning->threshold;
      extra["threshold_trace"] = trace;
      result.models.cosine = CosineThresholdModel{result.tuning->threshold, transform};
      checkpoint = *result.models.cosine;
    } else if (method.trains_regressor()) {
      if (method.kind != MethodKind::RegressorCosine) transform.reset();
      result.training = train_logistic_regressor(train.corpus, train.table,
                                                 DevSet{&dev.corpus, &dev.table, cfg.mode},
                                                 strategy, cfg.train, transform);
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& e : result.training->trace) {
        trace.push_back({{"epoch", e.epoch},
                         {"train_loss", e.train_loss},
                         {"dev_b3_f1", e.dev_b3_f1},
                         {"dev_muc_f1", e.dev_muc_f1},
                         {"dev_average", e.dev_average}});
      }
      extra["best_epoch"] = result.training->best_epoch;
      extra["training_trace"] = trace;
      result.models.regressor = result.training->model;
      checkpoint = result.training->model;
    }
    return 0;
  });

  std::vector<std::vector<MentionPair>> decisions;
  detail::stage("predict", [&] {
    for (const auto& doc : eval.corpus.documents) {
      decisions.push_back(predict_pairs(method, result.models, doc, eval.table, strategy));
    }
    return 0;
  });

  std::vector<Clustering> gold;
  detail::stage("cluster", [&] {
    for (std::size_t d = 0; d < eval.corpus.documents.size(); ++d) {
      const auto& doc = eval.corpus.documents[d];
      result.system.push_back(connected_components(adjacency_from_decisions(doc, decisions[d])));
      gold.push_back(gold_clustering(doc));
    }
    return 0;
  });

  detail::stage("score", [&] {
    result.report = score_corpus(gold, result.system, cfg.mode);
    result.breakdown = breakdown_for(eval.corpus, decisions);
    return 0;
  });

  detail::stage("write", [&] {
    result.system_path = (out / "system.jsonl").string();
    write_clusterings(result.system, result.system_path);
    if (checkpoint) {
      result.checkpoint_path = (out / "model.ckpt.json").string();
      save_checkpoint(*checkpoint, result.checkpoint_path);
    }
    auto j = to_json(result.report);
    j["method"] = to_string(method);
    j["strategy"] = std::string(to_string(strategy));
    j["evaluated_split"] = cfg.has_test() ? "test" : "dev";
    j["error_analysis"] = to_json(result.breakdown);
    for (auto& [k, v] : extra.items()) j[k] = v;
    result.report_path = (out / "report.json").string();
    detail::write_file(result.report_path, j.dump(2) + "\n");
    detail::write_file((out / "report.txt").string(),
                       "method: " + to_string(method) + "\n" + format_table(result.report) + "\n" +
                           format_table(result.breakdown));
    return 0;
  });
  return result;
}

}  // namespace evlink
