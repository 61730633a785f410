// evlink: within-document event coreference from mention embeddings.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evlink/evlink.hpp"

namespace {

using namespace evlink;

struct TrainFlags {
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<double> weight_decay;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<double> negative_keep_ratio;
  bool no_shuffle = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "training epochs (default 50)");
    cmd->add_option("--lr", lr, "AdamW learning rate (default 5e-6)");
    cmd->add_option("--weight-decay", weight_decay, "AdamW decoupled weight decay (default 0.01)");
    cmd->add_option("--batch-size", batch_size, "regressor mini-batch size (default 32)");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--negative-keep-ratio", negative_keep_ratio,
                    "fraction of negative training pairs kept (default 1)");
    cmd->add_flag("--no-shuffle", no_shuffle, "keep training pairs in corpus order");
  }

  void apply(TrainConfig& c) const {
    if (epochs) c.epochs = *epochs;
    if (lr) c.lr = *lr;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (batch_size) c.batch_size = *batch_size;
    if (seed) c.seed = *seed;
    if (negative_keep_ratio) c.negative_keep_ratio = *negative_keep_ratio;
    if (no_shuffle) c.shuffle = false;
  }
};

std::string fmt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

void print_diagnostics(const char* label, const CosineDiagnostics& d) {
  std::cout << label << "  cos+ " << fmt(d.cos_plus) << "  cos- " << fmt(d.cos_minus)
            << "  cosdelta " << fmt(d.cos_delta()) << "  (" << d.positives << " positive, "
            << d.negatives << " negative pairs";
  if (d.skipped) std::cout << ", " << d.skipped << " skipped: zero vector";
  std::cout << ")\n";
}

std::vector<MentionPair> labeled_pairs(const Corpus& corpus, PairStrategy strategy) {
  std::vector<MentionPair> out;
  for (const auto& doc : corpus.documents) {
    auto pairs = label_pairs(generate_pairs(doc, strategy), gold_clustering(doc));
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  return out;
}

std::optional<CosineTransformModel> transform_from(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto ck = load_checkpoint(path);
  if (auto* t = std::get_if<CosineTransformModel>(&ck)) return *t;
  if (auto* c = std::get_if<CosineThresholdModel>(&ck); c && c->transform) return c->transform;
  throw ValidationError("'" + path + "' holds no cosine transform");
}

EmbeddingTable load_table(const std::string& path, std::optional<std::size_t> dim,
                          const Corpus& corpus) {
  auto table = read_embeddings(path, dim);
  require_coverage(corpus, table);
  return table;
}

int run(int argc, char** argv) {
  CLI::App app{"evlink: event coreference from mention embeddings"};
  app.require_subcommand(1);

  // validate
  std::string corpus_path, emb_path, out_path, dev_corpus, dev_emb, config_path, transform_path;
  std::optional<std::size_t> dim;
  auto* validate = app.add_subcommand("validate", "check a corpus and its embedding coverage");
  validate->add_option("--corpus", corpus_path)->required();
  validate->add_option("--embeddings", emb_path);
  validate->add_option("--dim", dim, "expected embedding dimension");

  // pairs
  std::string strategy_name = "all";
  auto* pairs_cmd = app.add_subcommand("pairs", "dump labeled mention pairs");
  pairs_cmd->add_option("--corpus", corpus_path)->required();
  pairs_cmd->add_option("--strategy", strategy_name, "all | type | lemma");
  pairs_cmd->add_option("--out", out_path, "output file (default stdout)");

  // diagnostics
  auto* diag = app.add_subcommand("diagnostics", "mean cosine of coreferent and other pairs");
  diag->add_option("--corpus", corpus_path)->required();
  diag->add_option("--embeddings", emb_path)->required();
  diag->add_option("--dim", dim);
  diag->add_option("--strategy", strategy_name);
  diag->add_option("--transform", transform_path, "cosine transform checkpoint");
  diag->add_option("--out", out_path, "write JSON here");

  // train-cosine
  TrainFlags tflags;
  auto* train_cos = app.add_subcommand("train-cosine", "train the cosine transform");
  train_cos->add_option("--config", config_path);
  train_cos->add_option("--corpus", corpus_path, "training corpus");
  train_cos->add_option("--embeddings", emb_path);
  train_cos->add_option("--dev-corpus", dev_corpus, "report dev diagnostics before/after");
  train_cos->add_option("--dev-embeddings", dev_emb);
  train_cos->add_option("--dim", dim);
  train_cos->add_option("--out", out_path, "checkpoint path")->required();
  tflags.add(train_cos);

  // train-regressor
  std::string method_name = "regressor";
  std::string mode_name;
  auto* train_reg = app.add_subcommand("train-regressor", "train the joint-feature regressor");
  train_reg->add_option("--config", config_path);
  train_reg->add_option("--corpus", corpus_path, "training corpus");
  train_reg->add_option("--embeddings", emb_path);
  train_reg->add_option("--dev-corpus", dev_corpus);
  train_reg->add_option("--dev-embeddings", dev_emb);
  train_reg->add_option("--dim", dim);
  train_reg->add_option("--method", method_name,
                        "regressor | regressor_type | regressor_lemma | regressor_cosine");
  train_reg->add_option("--transform", transform_path, "frozen cosine transform checkpoint");
  train_reg->add_option("--mode", mode_name, "dev aggregation: micro | macro");
  train_reg->add_option("--out", out_path, "checkpoint path")->required();
  tflags.add(train_reg);

  // tune-threshold
  std::string grid_spec;
  auto* tune = app.add_subcommand("tune-threshold", "pick the cosine threshold on a dev set");
  tune->add_option("--config", config_path);
  tune->add_option("--corpus", corpus_path, "dev corpus");
  tune->add_option("--embeddings", emb_path);
  tune->add_option("--dim", dim);
  tune->add_option("--transform", transform_path, "cosine transform checkpoint");
  tune->add_option("--grid", grid_spec, "start:stop:step or a list (default 0:1:0.01)");
  tune->add_option("--mode", mode_name);
  tune->add_option("--out", out_path, "cosine checkpoint path")->required();

  // predict
  std::string model_path;
  auto* predict = app.add_subcommand("predict", "pairwise decisions from a checkpoint");
  predict->add_option("--model", model_path)->required();
  predict->add_option("--corpus", corpus_path)->required();
  predict->add_option("--embeddings", emb_path)->required();
  predict->add_option("--dim", dim);
  predict->add_option("--strategy", strategy_name, "regressor pair strategy: all | type | lemma");
  predict->add_option("--out", out_path, "decision file (default stdout)");

  // cluster
  std::string decisions_path, baseline_name;
  auto* cluster = app.add_subcommand("cluster", "transitive closure of pairwise decisions");
  cluster->add_option("--corpus", corpus_path)->required();
  auto* dec_opt = cluster->add_option("--decisions", decisions_path, "decision file from predict");
  auto* base_opt = cluster->add_option("--baseline", baseline_name,
                                       "singletons | type | lemma | lemma_type");
  dec_opt->excludes(base_opt);
  cluster->add_option("--out", out_path, "system output (default stdout)");

  // score
  std::string system_path;
  auto* score = app.add_subcommand("score", "B3, MUC, CEAF-E, BLANC and CoNLL F1");
  score->add_option("--corpus", corpus_path, "gold corpus")->required();
  score->add_option("--system", system_path, "system output")->required();
  score->add_option("--mode", mode_name, "micro | macro (default micro)");
  score->add_option("--out", out_path, "write the JSON report here");

  // report
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto* report = app.add_subcommand("report", "run the configured pipeline end to end");
  report->add_option("--config", config_path)->required();
  report->add_option("--seed", seed);
  report->add_option("--mode", mode_name);
  report->add_option("--out", out_dir, "output directory");

  // synth
  SynthConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted chains");
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--docs", synth_cfg.documents);
  synth->add_option("--dim", synth_cfg.dim);
  synth->add_option("--ratio", synth_cfg.separation_noise_ratio, "separation / noise");
  synth->add_option("--min-mentions", synth_cfg.min_mentions);
  synth->add_option("--max-mentions", synth_cfg.max_mentions);
  synth->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto emit = [&](const std::string& text) {
    if (out_path.empty()) {
      std::cout << text;
    } else {
      detail::write_file(out_path, text);
    }
  };

  if (validate->parsed()) {
    const auto corpus = load_corpus(corpus_path);
    std::size_t no_type = 0, no_lemma = 0, no_chain = 0;
    for (const auto& d : corpus.documents) {
      for (const auto& m : d.mentions) {
        no_type += !m.event_type;
        no_lemma += !m.head_lemma;
        no_chain += !m.chain_id;
      }
    }
    std::cout << corpus_path << ": " << corpus.documents.size() << " documents, "
              << corpus.mention_count() << " mentions\n"
              << "  without event_type: " << no_type << "\n"
              << "  without head_lemma: " << no_lemma << "\n"
              << "  without chain_id (singletons): " << no_chain << "\n";
    if (!emb_path.empty()) {
      const auto table = read_embeddings(emb_path, dim);
      const auto missing = missing_embeddings(corpus, table);
      std::cout << emb_path << ": " << table.size() << " vectors of dim " << table.dim() << "\n";
      if (!missing.empty()) {
        std::cout << "  missing embeddings: " << missing.size() << "\n";
        for (const auto& id : missing) std::cout << "    " << id << "\n";
        return 1;
      }
      std::cout << "  coverage: complete\n";
    }
    return 0;
  }

  if (pairs_cmd->parsed()) {
    const auto corpus = load_corpus(corpus_path);
    emit(pair_dump(labeled_pairs(corpus, parse_strategy(strategy_name))));
    return 0;
  }

  if (diag->parsed()) {
    const auto corpus = load_corpus(corpus_path);
    const auto table = load_table(emb_path, dim, corpus);
    const auto pairs = labeled_pairs(corpus, parse_strategy(strategy_name));
    const auto d = compute_diagnostics(pairs, table, transform_from(transform_path));
    print_diagnostics(table.encoder().empty() ? "embeddings" : table.encoder().c_str(), d);
    if (!out_path.empty()) {
      auto j = diagnostics_json(d);
      j["encoder"] = table.encoder();
      detail::write_file(out_path, j.dump(2) + "\n");
    }
    return 0;
  }

  // Subcommands that can take their inputs from a pipeline config.
  PipelineConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  auto pick = [](const std::string& flag, const std::string& from_cfg) {
    return flag.empty() ? from_cfg : flag;
  };
  if (!dim) dim = cfg.embedding_dim;
  tflags.apply(cfg.train);
  const Aggregation mode = mode_name.empty() ? cfg.mode : parse_aggregation(mode_name);

  if (train_cos->parsed()) {
    const auto train = load_corpus(pick(corpus_path, cfg.train_corpus));
    const auto table = load_table(pick(emb_path, cfg.train_embeddings), dim, train);
    const auto training = train_cosine_transform(labeled_pairs(train, PairStrategy::AllPreceding),
                                                 table, cfg.train);
    const std::string dc = pick(dev_corpus, cfg.dev_corpus);
    if (!dc.empty()) {
      const auto dev = load_corpus(dc);
      const auto dev_table = load_table(pick(dev_emb, cfg.dev_embeddings), dim, dev);
      const auto pairs = labeled_pairs(dev, PairStrategy::AllPreceding);
      print_diagnostics("dev before", compute_diagnostics(pairs, dev_table));
      print_diagnostics("dev after ", compute_diagnostics(pairs, dev_table, training.model));
    }
    save_checkpoint(training.model, out_path);
    std::cout << "final training loss " << training.trace.back().loss << ", wrote " << out_path
              << "\n";
    return 0;
  }

  if (train_reg->parsed()) {
    const Method method = parse_method(method_name);
    if (!method.trains_regressor()) throw ValidationError("--method must be a regressor variant");
    const std::string tpath = pick(transform_path, cfg.cosine_transform);
    if (method.kind == MethodKind::RegressorCosine && tpath.empty()) {
      throw ValidationError("regressor_cosine needs --transform");
    }
    const auto train = load_corpus(pick(corpus_path, cfg.train_corpus));
    const auto table = load_table(pick(emb_path, cfg.train_embeddings), dim, train);
    const auto dev = load_corpus(pick(dev_corpus, cfg.dev_corpus));
    const auto dev_table = load_table(pick(dev_emb, cfg.dev_embeddings), dim, dev);
    const auto transform =
        method.kind == MethodKind::RegressorCosine ? transform_from(tpath) : std::nullopt;
    const auto result = train_logistic_regressor(train, table, DevSet{&dev, &dev_table, mode},
                                                 method.strategy(), cfg.train, transform);
    for (const auto& e : result.trace) {
      std::printf("epoch %3zu  loss %.6f  dev B3 %.4f  MUC %.4f  avg %.4f\n", e.epoch,
                  e.train_loss, e.dev_b3_f1, e.dev_muc_f1, e.dev_average);
    }
    save_checkpoint(result.model, out_path);
    std::cout << "best epoch " << result.best_epoch << ", wrote " << out_path << "\n";
    return 0;
  }

  if (tune->parsed()) {
    const auto dev = load_corpus(pick(corpus_path, cfg.dev_corpus));
    const auto table = load_table(pick(emb_path, cfg.dev_embeddings), dim, dev);
    const auto grid = grid_spec.empty() ? cfg.threshold_grid : parse_threshold_grid(grid_spec);
    const auto transform = transform_from(pick(transform_path, cfg.cosine_transform));
    const auto tuning = tune_threshold(transform, dev, table, grid, PairStrategy::AllPreceding, mode);
    for (const auto& p : tuning.trace) {
      std::printf("theta %.4f  B3 %.4f  MUC %.4f  avg %.4f\n", p.threshold, p.b3_f1, p.muc_f1,
                  p.average);
    }
    save_checkpoint(CosineThresholdModel{tuning.threshold, transform}, out_path);
    std::cout << "threshold " << tuning.threshold << ", wrote " << out_path << "\n";
    return 0;
  }

  if (predict->parsed()) {
    const auto corpus = load_corpus(corpus_path);
    const auto table = load_table(emb_path, dim, corpus);
    const auto ck = load_checkpoint(model_path);
    Models models;
    Method method;
    if (auto* c = std::get_if<CosineThresholdModel>(&ck)) {
      models.cosine = *c;
      method = {MethodKind::Cosine};
    } else if (auto* r = std::get_if<LogisticRegressorModel>(&ck)) {
      models.regressor = *r;
      switch (parse_strategy(strategy_name)) {
        case PairStrategy::SameType: method = {MethodKind::RegressorType}; break;
        case PairStrategy::LemmaMatch: method = {MethodKind::RegressorLemma}; break;
        case PairStrategy::AllPreceding:
          method = {r->frozen_transform ? MethodKind::RegressorCosine : MethodKind::Regressor};
          break;
      }
    } else {
      throw ValidationError("a bare cosine transform cannot decide; run tune-threshold first");
    }
    std::vector<MentionPair> all;
    for (const auto& doc : corpus.documents) {
      auto d = predict_pairs(method, models, doc, table, method.strategy());
      all.insert(all.end(), d.begin(), d.end());
    }
    emit(pair_dump(all));
    return 0;
  }

  if (cluster->parsed()) {
    const auto corpus = load_corpus(corpus_path);
    std::vector<Clustering> out;
    if (!baseline_name.empty()) {
      const auto rule = parse_baseline_rule(baseline_name);
      for (const auto& doc : corpus.documents) {
        out.push_back(connected_components(baseline_adjacency(doc, rule)));
      }
    } else {
      if (decisions_path.empty()) throw ValidationError("cluster needs --decisions or --baseline");
      const auto decisions = parse_pair_dump(detail::read_file(decisions_path), decisions_path);
      std::unordered_map<std::string, std::string> doc_of;
      for (const auto& doc : corpus.documents) {
        for (const auto& m : doc.mentions) doc_of[m.mention_id] = doc.doc_id;
      }
      std::unordered_map<std::string, std::vector<MentionPair>> per_doc;
      for (const auto& d : decisions) {
        auto it = doc_of.find(d.first);
        if (it == doc_of.end()) throw ValidationError("decision names unknown mention '" + d.first + "'");
        per_doc[it->second].push_back(d);
      }
      for (const auto& doc : corpus.documents) {
        out.push_back(connected_components(adjacency_from_decisions(doc, per_doc[doc.doc_id])));
      }
    }
    emit(serialize_clusterings(out));
    return 0;
  }

  if (score->parsed()) {
    const auto corpus = load_corpus(corpus_path);
    std::vector<Clustering> gold;
    for (const auto& doc : corpus.documents) gold.push_back(gold_clustering(doc));
    const auto result = score_corpus(gold, read_clusterings(system_path), mode);
    std::cout << format_table(result);
    if (!out_path.empty()) detail::write_file(out_path, to_json(result).dump(2) + "\n");
    return 0;
  }

  if (report->parsed()) {
    if (seed) cfg.train.seed = *seed;
    if (!mode_name.empty()) cfg.mode = mode;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    const auto result = run_pipeline(cfg);
    std::cout << "method: " << to_string(cfg.method) << "\n" << format_table(result.report);
    if (result.tuning) std::cout << "tuned threshold: " << result.tuning->threshold << "\n";
    if (result.training) std::cout << "best epoch: " << result.training->best_epoch << "\n";
    std::cout << "wrote " << result.report_path << "\n";
    return 0;
  }

  if (synth->parsed()) {
    const auto data = synthesize(synth_cfg);
    write_synth(data, out_dir, synth_cfg);
    std::cout << "wrote " << data.train.documents.size() << "/" << data.dev.documents.size() << "/"
              << data.test.documents.size() << " train/dev/test documents, "
              << data.embeddings.size() << " embeddings to " << out_dir << "\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const evlink::ValidationError& e) {
    std::cerr << "evlink: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "evlink: " << e.what() << "\n";
    return 2;
  }
}
