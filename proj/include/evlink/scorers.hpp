#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "evlink/clustering.hpp"
#include "evlink/corpus.hpp"
#include "evlink/detail/io.hpp"
#include "evlink/embeddings.hpp"
#include "evlink/errors.hpp"
#include "evlink/metrics.hpp"
#include "evlink/nn.hpp"
#include "evlink/pairs.hpp"
#include "evlink/random.hpp"

namespace evlink {

struct TrainConfig {
  std::size_t epochs = 50;
  double lr = 5e-6;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t batch_size = 32;  // regressor only; the cosine transform is full-batch
  double negative_keep_ratio = 1.0;

  void check() const {
    if (epochs < 1) throw ValidationError("epochs must be at least 1");
    if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
    if (batch_size < 1) throw ValidationError("batch size must be at least 1");
    if (!(negative_keep_ratio > 0.0)) throw ValidationError("negative keep ratio must be positive");
  }

  nn::AdamWConfig optimizer() const {
    nn::AdamWConfig c;
    c.lr = lr;
    c.weight_decay = weight_decay;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Cosine scorers

// Shared linear map applied to both mentions before taking the cosine.
// Starts as the identity, so an untrained transform changes nothing.
struct CosineTransformModel {
  nn::DenseLayer layer;

  static CosineTransformModel identity(std::size_t dim) { return {nn::DenseLayer::identity(dim)}; }

  std::size_t dim() const { return layer.cols; }

  Vector apply(std::span<const float> e) const {
    if (e.size() != layer.cols) throw DimensionError("transform input dimension mismatch");
    std::vector<double> x(e.begin(), e.end());
    std::vector<double> z;
    nn::affine(layer, x, z);
    return Vector(z.begin(), z.end());
  }

  // Same table with every vector mapped through the transform.
  EmbeddingTable apply(const EmbeddingTable& table) const {
    EmbeddingTable out(table.dim(), table.encoder());
    for (const auto& [id, v] : table.entries()) out.insert(id, apply(v));
    return out;
  }

  bool operator==(const CosineTransformModel&) const = default;
};

struct CosineThresholdModel {
  double threshold = 0.5;
  std::optional<CosineTransformModel> transform;

  void check() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw ValidationError("cosine threshold must lie in [0, 1]");
    }
  }

  bool operator==(const CosineThresholdModel&) const = default;
};

struct CosineDecision {
  double score = 0.0;
  bool coreferent = false;
  bool undefined = false;  // a zero vector was involved
};

inline std::optional<double> pair_cosine(const std::optional<CosineTransformModel>& transform,
                                         std::span<const float> e1, std::span<const float> e2) {
  try {
    if (transform) {
      const auto t1 = transform->apply(e1);
      const auto t2 = transform->apply(e2);
      return nn::cosine_similarity(std::span<const float>(t1), std::span<const float>(t2));
    }
    return nn::cosine_similarity(e1, e2);
  } catch (const UndefinedSimilarityError&) {
    return std::nullopt;
  }
}

// Coreferent iff cosine > threshold (strict).
inline CosineDecision cosine_decide(const CosineThresholdModel& model, std::span<const float> e1,
                                    std::span<const float> e2) {
  const auto score = pair_cosine(model.transform, e1, e2);
  if (!score) return {0.0, false, true};
  return {*score, *score > model.threshold, false};
}

struct CosineDiagnostics {
  std::optional<double> cos_plus;
  std::optional<double> cos_minus;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t skipped = 0;  // pairs with a zero vector

  std::optional<double> cos_delta() const {
    if (!cos_plus || !cos_minus) return std::nullopt;
    return *cos_plus - *cos_minus;
  }
};

inline CosineDiagnostics compute_diagnostics(const std::vector<MentionPair>& pairs,
                                             const EmbeddingTable& table,
                                             const std::optional<CosineTransformModel>& transform =
                                                 std::nullopt) {
  if (pairs.empty()) throw ValidationError("cosine diagnostics need at least one labeled pair");
  std::unordered_map<std::string, Vector> cache;
  auto vec = [&](const std::string& id) -> const Vector& {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    const Vector& raw = table.lookup(id);
    return cache.emplace(id, transform ? transform->apply(raw) : raw).first->second;
  };
  CosineDiagnostics d;
  double plus = 0.0, minus = 0.0;
  for (const auto& p : pairs) {
    if (!p.label) throw ValidationError("diagnostics need labeled pairs");
    double c;
    try {
      c = nn::cosine_similarity(vec(p.first), vec(p.second));
    } catch (const UndefinedSimilarityError&) {
      ++d.skipped;
      continue;
    }
    if (*p.label) {
      plus += c;
      ++d.positives;
    } else {
      minus += c;
      ++d.negatives;
    }
  }
  if (d.positives) d.cos_plus = plus / static_cast<double>(d.positives);
  if (d.negatives) d.cos_minus = minus / static_cast<double>(d.negatives);
  return d;
}

// Unique mention vectors and the labeled pairs over them.
struct CosineTrainingSet {
  struct Pair {
    std::size_t a, b;
    bool coreferent;
  };
  std::size_t dim = 0;
  std::vector<Vector> vectors;
  std::vector<Pair> pairs;

  static CosineTrainingSet build(const std::vector<MentionPair>& labeled,
                                 const EmbeddingTable& table) {
    CosineTrainingSet set;
    set.dim = table.dim();
    std::unordered_map<std::string, std::size_t> index;
    auto slot = [&](const std::string& id) {
      auto [it, inserted] = index.emplace(id, set.vectors.size());
      if (inserted) set.vectors.push_back(table.lookup(id));
      return it->second;
    };
    for (const auto& p : labeled) {
      if (!p.label) throw ValidationError("cosine transform training needs labeled pairs");
      const auto a = slot(p.first);
      const auto b = slot(p.second);
      set.pairs.push_back({a, b, *p.label});
    }
    return set;
  }
};

// Mean squared cosine loss over the set; fills `grad` when given.
inline double cosine_transform_objective(const nn::DenseLayer& layer, const CosineTrainingSet& set,
                                         nn::LayerGrad* grad) {
  if (set.pairs.empty()) throw ValidationError("cosine transform training needs at least one pair");
  std::vector<std::vector<double>> t(set.vectors.size());
  std::vector<double> x;
  for (std::size_t i = 0; i < set.vectors.size(); ++i) {
    x.assign(set.vectors[i].begin(), set.vectors[i].end());
    nn::affine(layer, x, t[i]);
  }
  std::vector<std::vector<double>> gt;
  if (grad) gt.assign(t.size(), std::vector<double>(layer.rows, 0.0));
  double total = 0.0;
  for (const auto& p : set.pairs) {
    const auto l = nn::mse_cosine_loss(t[p.a], t[p.b], p.coreferent);
    total += l.loss;
    if (grad) {
      for (std::size_t r = 0; r < layer.rows; ++r) {
        gt[p.a][r] += l.grad_t1[r];
        gt[p.b][r] += l.grad_t2[r];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(set.pairs.size());
  if (grad) {
    grad->weights.assign(layer.weights.size(), 0.0);
    grad->bias.assign(layer.rows, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& v = set.vectors[i];
      for (std::size_t r = 0; r < layer.rows; ++r) {
        const double g = gt[i][r] * inv;
        if (g == 0.0) continue;
        grad->bias[r] += g;
        double* row = grad->weights.data() + r * layer.cols;
        for (std::size_t c = 0; c < layer.cols; ++c) row[c] += g * v[c];
      }
    }
  }
  return total * inv;
}

struct CosineEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;
  CosineDiagnostics diagnostics;  // on the training pairs, after the step
};

struct CosineTransformTraining {
  CosineTransformModel model;
  std::vector<CosineEpoch> trace;
};

inline CosineDiagnostics diagnostics_of(const CosineTrainingSet& set, const nn::DenseLayer& layer) {
  CosineDiagnostics d;
  double plus = 0, minus = 0;
  std::vector<Vector> t;
  const CosineTransformModel m{layer};
  for (const auto& v : set.vectors) t.push_back(m.apply(v));
  for (const auto& p : set.pairs) {
    const auto c = pair_cosine(std::nullopt, t[p.a], t[p.b]);
    if (!c) {
      ++d.skipped;
      continue;
    }
    (p.coreferent ? plus : minus) += *c;
    ++(p.coreferent ? d.positives : d.negatives);
  }
  if (d.positives) d.cos_plus = plus / static_cast<double>(d.positives);
  if (d.negatives) d.cos_minus = minus / static_cast<double>(d.negatives);
  return d;
}

// Full-batch AdamW on the mean squared cosine loss, identity start. Returns
// the final-epoch transform.
inline CosineTransformTraining train_cosine_transform(const CosineTrainingSet& set,
                                                      const TrainConfig& config) {
  config.check();
  if (set.pairs.empty()) throw ValidationError("cosine transform training needs at least one pair");
  CosineTransformTraining out{CosineTransformModel::identity(set.dim), {}};
  std::vector<nn::DenseLayer> layers{out.model.layer};
  nn::AdamW optimizer(layers, config.optimizer());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    nn::Gradients grads(1);
    double loss;
    try {
      loss = cosine_transform_objective(layers[0], set, &grads[0]);
    } catch (const UndefinedSimilarityError&) {
      throw NumericError("cosine transform epoch " + std::to_string(epoch) +
                         ": a transformed vector collapsed to zero");
    }
    if (!std::isfinite(loss)) {
      throw NumericError("cosine transform epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    optimizer.step(layers, grads);
    out.trace.push_back({epoch, loss, diagnostics_of(set, layers[0])});
  }
  out.model.layer = std::move(layers[0]);
  return out;
}

inline CosineTransformTraining train_cosine_transform(const std::vector<MentionPair>& labeled,
                                                      const EmbeddingTable& table,
                                                      const TrainConfig& config) {
  return train_cosine_transform(CosineTrainingSet::build(labeled, table), config);
}

// ---------------------------------------------------------------------------
// Joint-feature logistic regressor

inline constexpr std::size_t kRegressorHidden = 512;

// [e1, e2, e1*e2] -> 512 (square) -> 2 (log-softmax). Class 1 is coreferent.
struct LogisticRegressorModel {
  std::vector<nn::DenseLayer> layers;
  std::optional<CosineTransformModel> frozen_transform;

  static LogisticRegressorModel create(std::size_t dim, std::uint64_t seed,
                                       std::size_t hidden = kRegressorHidden) {
    Rng rng(seed, "regressor-init");
    LogisticRegressorModel m;
    m.layers.push_back(nn::DenseLayer::uniform(hidden, 3 * dim, nn::Activation::Square, rng));
    m.layers.push_back(nn::DenseLayer::uniform(2, hidden, nn::Activation::LogSoftmax, rng));
    return m;
  }

  std::size_t dim() const { return layers.front().cols / 3; }

  void check() const {
    if (layers.size() != 2) throw CheckpointError("regressor needs exactly two layers");
    for (const auto& l : layers) l.check();
    if (layers[0].cols % 3 != 0 || layers[0].activation != nn::Activation::Square ||
        layers[1].cols != layers[0].rows || layers[1].rows != 2 ||
        layers[1].activation != nn::Activation::LogSoftmax) {
      throw CheckpointError("regressor layers have the wrong shape or activations");
    }
    if (frozen_transform && frozen_transform->dim() != dim()) {
      throw CheckpointError("frozen transform dimension differs from regressor input");
    }
  }

  bool operator==(const LogisticRegressorModel&) const = default;
};

struct RegressorDecision {
  double log_p_negative = 0.0;
  double log_p_positive = 0.0;
  bool coreferent = false;  // ties go to the negative class
};

inline RegressorDecision regressor_decide(const LogisticRegressorModel& model,
                                          const PairFeature& feature) {
  if (feature.joint.size() != model.layers.front().cols) {
    throw DimensionError("regressor expects features of size " +
                         std::to_string(model.layers.front().cols) + ", got " +
                         std::to_string(feature.joint.size()));
  }
  const auto out = nn::evaluate<float>(model.layers, feature.joint);
  return {out[0], out[1], out[1] > out[0]};
}

// Raw embeddings in; the frozen transform (if any) is applied first.
inline RegressorDecision regressor_decide(const LogisticRegressorModel& model,
                                          std::span<const float> e1, std::span<const float> e2) {
  if (model.frozen_transform) {
    const auto t1 = model.frozen_transform->apply(e1);
    const auto t2 = model.frozen_transform->apply(e2);
    return regressor_decide(model, joint_representation(t1, t2));
  }
  return regressor_decide(model, joint_representation(e1, e2));
}

// Mean NLL over `batch`; accumulates mean gradients into `grads`.
inline double regressor_batch_gradient(const std::vector<nn::DenseLayer>& layers,
                                       const std::vector<const PairFeature*>& features,
                                       const std::vector<bool>& labels, nn::Gradients& grads) {
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto pass = nn::forward(layers, std::span<const float>(features[i]->joint));
    const auto nll = nn::nll_loss(pass.output, labels[i] ? 1 : 0);
    total += nll.loss;
    nn::backward(layers, pass, nll.grad_log_probs, grads);
  }
  const double n = static_cast<double>(features.size());
  nn::scale(grads, 1.0 / n);
  return total / n;
}

// Decisions for every pair the strategy generates in `doc`.
inline std::vector<MentionPair> regressor_predict(const LogisticRegressorModel& model,
                                                  const Document& doc, const EmbeddingTable& table,
                                                  PairStrategy strategy) {
  auto pairs = generate_pairs(doc, strategy);
  for (auto& p : pairs) {
    p.label = regressor_decide(model, table.lookup(p.first), table.lookup(p.second)).coreferent;
  }
  return pairs;
}

inline std::vector<MentionPair> cosine_predict(const CosineThresholdModel& model,
                                               const Document& doc, const EmbeddingTable& table,
                                               PairStrategy strategy) {
  auto pairs = generate_pairs(doc, strategy);
  for (auto& p : pairs) {
    p.label = cosine_decide(model, table.lookup(p.first), table.lookup(p.second)).coreferent;
  }
  return pairs;
}

// Cluster and score a whole corpus given per-document decisions.
template <typename Predict>
MetricReport evaluate_decisions(const Corpus& corpus, Predict&& predict, Aggregation mode) {
  std::vector<DocumentCounts> counts;
  for (const auto& doc : corpus.documents) {
    const auto sys = connected_components(adjacency_from_decisions(doc, predict(doc)));
    counts.push_back({doc.doc_id, count_all(gold_clustering(doc), sys)});
  }
  return aggregate_corpus(counts, mode);
}

struct TrainingExample {
  PairFeature feature;
  bool coreferent = false;
};

// Labeled joint features for every strategy pair of every document.
inline std::vector<TrainingExample> build_examples(const Corpus& corpus, const EmbeddingTable& table,
                                                   PairStrategy strategy,
                                                   const std::optional<CosineTransformModel>& transform,
                                                   double negative_keep_ratio, Rng& rng) {
  const EmbeddingTable* source = &table;
  EmbeddingTable mapped;
  if (transform) {
    mapped = transform->apply(table);
    source = &mapped;
  }
  std::vector<TrainingExample> out;
  for (const auto& doc : corpus.documents) {
    auto pairs = label_pairs(generate_pairs(doc, strategy), gold_clustering(doc));
    pairs = downsample_negatives(std::move(pairs), negative_keep_ratio, rng);
    for (const auto& p : pairs) {
      out.push_back({joint_representation(source->lookup(p.first), source->lookup(p.second)),
                     *p.label});
    }
  }
  return out;
}

struct RegressorEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_b3_f1 = 0.0;
  double dev_muc_f1 = 0.0;
  double dev_average = 0.0;
};

struct RegressorTraining {
  LogisticRegressorModel model;  // parameters of the best dev epoch
  std::size_t best_epoch = 0;
  std::vector<RegressorEpoch> trace;
};

struct DevSet {
  const Corpus* corpus = nullptr;
  const EmbeddingTable* table = nullptr;
  Aggregation mode = Aggregation::Micro;
};

// Mini-batch AdamW on NLL. After every epoch the model is run end to end on
// the dev set (decide, cluster, score) and the epoch with the best mean of
// B3 and MUC F1 is kept; ties keep the earlier epoch.
inline RegressorTraining train_logistic_regressor(const std::vector<TrainingExample>& examples,
                                                  const DevSet& dev, PairStrategy strategy,
                                                  const TrainConfig& config,
                                                  const std::optional<CosineTransformModel>&
                                                      frozen_transform = std::nullopt,
                                                  std::size_t hidden = kRegressorHidden) {
  config.check();
  if (examples.empty()) throw ValidationError("regressor training needs at least one pair");
  if (!dev.corpus || !dev.table) throw ValidationError("regressor training needs a dev set");
  const std::size_t dim = examples.front().feature.dim;
  for (const auto& e : examples) {
    if (e.feature.dim != dim) throw DimensionError("training features have mixed dimensions");
  }
  if (frozen_transform && frozen_transform->dim() != dim) {
    throw DimensionError("frozen transform dimension differs from the embeddings");
  }

  RegressorTraining out;
  auto model = LogisticRegressorModel::create(dim, config.seed, hidden);
  model.frozen_transform = frozen_transform;
  nn::AdamW optimizer(model.layers, config.optimizer());
  Rng shuffle_rng(config.seed, "regressor-shuffle");

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const PairFeature*> batch;
      std::vector<bool> labels;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&examples[order[k]].feature);
        labels.push_back(examples[order[k]].coreferent);
      }
      auto grads = nn::zero_gradients(model.layers);
      const double loss = regressor_batch_gradient(model.layers, batch, labels, grads);
      if (!std::isfinite(loss)) {
        throw NumericError("regressor epoch " + std::to_string(epoch) + ", batch at " +
                           std::to_string(start) + ": non-finite loss");
      }
      loss_sum += loss * static_cast<double>(end - start);
      optimizer.step(model.layers, grads);
    }

    MetricReport report;
    try {
      report = evaluate_decisions(
          *dev.corpus,
          [&](const Document& doc) { return regressor_predict(model, doc, *dev.table, strategy); },
          dev.mode);
    } catch (const Error& e) {
      throw Error("dev evaluation failed after epoch " + std::to_string(epoch) + ": " + e.what());
    }
    RegressorEpoch rec{epoch, loss_sum / static_cast<double>(examples.size()), report.b3.f1,
                       report.muc.f1, report.b3_muc_average()};
    out.trace.push_back(rec);
    if (rec.dev_average > best) {
      best = rec.dev_average;
      out.best_epoch = epoch;
      out.model = model;
    }
  }
  return out;
}

inline RegressorTraining train_logistic_regressor(const Corpus& train, const EmbeddingTable& train_table,
                                                  const DevSet& dev, PairStrategy strategy,
                                                  const TrainConfig& config,
                                                  const std::optional<CosineTransformModel>&
                                                      frozen_transform = std::nullopt) {
  Rng rng(config.seed, "negative-sampling");
  const auto examples = build_examples(train, train_table, strategy, frozen_transform,
                                       config.negative_keep_ratio, rng);
  return train_logistic_regressor(examples, dev, strategy, config, frozen_transform);
}

// FNV-1a over the raw bytes of every parameter.
inline std::uint64_t parameter_checksum(const nn::DenseLayer& layer) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::vector<float>& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(float); ++i) h = (h ^ bytes[i]) * 0x100000001b3ULL;
  };
  feed(layer.weights);
  feed(layer.bias);
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoints

using Checkpoint = std::variant<CosineThresholdModel, CosineTransformModel, LogisticRegressorModel>;

namespace detail {

inline nlohmann::json layer_json(const nn::DenseLayer& l) {
  nlohmann::json w = nlohmann::json::array();
  for (float x : l.weights) w.push_back(static_cast<double>(x));
  nlohmann::json b = nlohmann::json::array();
  for (float x : l.bias) b.push_back(static_cast<double>(x));
  return {{"rows", l.rows},
          {"cols", l.cols},
          {"weights", std::move(w)},
          {"bias", std::move(b)},
          {"activation", std::string(nn::to_string(l.activation))}};
}

inline nn::DenseLayer layer_from_json(const nlohmann::json& j) {
  nn::DenseLayer l;
  l.rows = j.at("rows").get<std::size_t>();
  l.cols = j.at("cols").get<std::size_t>();
  for (const auto& x : j.at("weights")) l.weights.push_back(static_cast<float>(x.get<double>()));
  for (const auto& x : j.at("bias")) l.bias.push_back(static_cast<float>(x.get<double>()));
  l.activation = nn::parse_activation(j.at("activation").get<std::string>());
  try {
    l.check();
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("checkpoint layer: ") + e.what());
  }
  return l;
}

inline CosineTransformModel transform_from_layers(const nlohmann::json& layers) {
  if (!layers.is_array() || layers.size() != 1) {
    throw CheckpointError("cosine transform needs exactly one layer");
  }
  CosineTransformModel m{layer_from_json(layers[0])};
  if (m.layer.rows != m.layer.cols || m.layer.activation != nn::Activation::Identity) {
    throw CheckpointError("cosine transform must be a square identity-activation layer");
  }
  return m;
}

}  // namespace detail

inline nlohmann::json checkpoint_json(const Checkpoint& ckpt) {
  nlohmann::json j{{"format", "evlink-ckpt"}, {"version", 1}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CosineThresholdModel>) {
          j["kind"] = "cosine";
          j["threshold"] = m.threshold;
          j["layers"] = nlohmann::json::array();
          if (m.transform) {
            j["dim"] = m.transform->dim();
            j["layers"].push_back(detail::layer_json(m.transform->layer));
          } else {
            j["dim"] = nullptr;
          }
        } else if constexpr (std::is_same_v<T, CosineTransformModel>) {
          j["kind"] = "cosine_transform";
          j["dim"] = m.dim();
          j["layers"] = nlohmann::json::array({detail::layer_json(m.layer)});
        } else {
          j["kind"] = "regressor";
          j["dim"] = m.dim();
          j["layers"] = nlohmann::json::array();
          for (const auto& l : m.layers) j["layers"].push_back(detail::layer_json(l));
          if (m.frozen_transform) {
            j["frozen_transform"] = {
                {"dim", m.frozen_transform->dim()},
                {"layers", nlohmann::json::array({detail::layer_json(m.frozen_transform->layer)})}};
          }
        }
      },
      ckpt);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "evlink-ckpt") throw CheckpointError("not an evlink checkpoint");
    if (j.at("version") != 1) throw CheckpointError("unsupported checkpoint version");
    const auto kind = j.at("kind").get<std::string>();
    const auto& layers = j.at("layers");
    if (kind == "cosine") {
      CosineThresholdModel m;
      m.threshold = j.at("threshold").get<double>();
      if (!layers.empty()) m.transform = detail::transform_from_layers(layers);
      try {
        m.check();
      } catch (const ValidationError& e) {
        throw CheckpointError(e.what());
      }
      return m;
    }
    if (kind == "cosine_transform") {
      auto m = detail::transform_from_layers(layers);
      if (j.at("dim").get<std::size_t>() != m.dim()) throw CheckpointError("dim field mismatch");
      return m;
    }
    if (kind == "regressor") {
      LogisticRegressorModel m;
      for (const auto& l : layers) m.layers.push_back(detail::layer_from_json(l));
      if (auto f = j.find("frozen_transform"); f != j.end() && !f->is_null()) {
        m.frozen_transform = detail::transform_from_layers(f->at("layers"));
      }
      m.check();
      if (j.at("dim").get<std::size_t>() != m.dim()) throw CheckpointError("dim field mismatch");
      return m;
    }
    throw CheckpointError("unknown checkpoint kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  return checkpoint_json(ckpt).dump() + "\n";
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  detail::write_file(path, serialize_checkpoint(ckpt));
}

inline Checkpoint parse_checkpoint(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("unreadable checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(detail::read_file(path));
}

}  // namespace evlink
