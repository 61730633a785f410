#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "evlink/corpus.hpp"
#include "evlink/embeddings.hpp"
#include "evlink/errors.hpp"
#include "evlink/partition.hpp"
#include "evlink/random.hpp"

namespace evlink {

// Ordered pair: `first` precedes `second` in the document.
struct MentionPair {
  std::string first;
  std::string second;
  std::optional<bool> label;

  bool operator==(const MentionPair&) const = default;
};

enum class PairStrategy { AllPreceding, SameType, LemmaMatch };

inline std::string_view to_string(PairStrategy s) {
  switch (s) {
    case PairStrategy::AllPreceding: return "all";
    case PairStrategy::SameType: return "type";
    case PairStrategy::LemmaMatch: return "lemma";
  }
  return "all";
}

inline PairStrategy parse_strategy(std::string_view s) {
  if (s == "all" || s == "all_preceding") return PairStrategy::AllPreceding;
  if (s == "type" || s == "same_type") return PairStrategy::SameType;
  if (s == "lemma" || s == "lemma_match") return PairStrategy::LemmaMatch;
  throw ValidationError("unknown pair strategy '" + std::string(s) + "'");
}

inline bool admits(PairStrategy strategy, const EventMention& a, const EventMention& b) {
  switch (strategy) {
    case PairStrategy::AllPreceding: return true;
    case PairStrategy::SameType: return same_type(a, b);
    case PairStrategy::LemmaMatch: return lemma_match(a, b);
  }
  return false;
}

// Every mention paired with each preceding mention, ordered by (second, first).
inline std::vector<MentionPair> generate_pairs(const Document& doc, PairStrategy strategy) {
  std::vector<MentionPair> pairs;
  const auto& ms = doc.mentions;
  for (std::size_t j = 1; j < ms.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (admits(strategy, ms[i], ms[j])) pairs.push_back({ms[i].mention_id, ms[j].mention_id, {}});
    }
  }
  return pairs;
}

inline std::vector<MentionPair> label_pairs(std::vector<MentionPair> pairs, const Clustering& gold) {
  std::unordered_map<std::string, std::size_t> cluster_of;
  for (std::size_t c = 0; c < gold.clusters.size(); ++c) {
    for (const auto& id : gold.clusters[c]) cluster_of[id] = c;
  }
  auto find = [&](const std::string& id) {
    auto it = cluster_of.find(id);
    if (it == cluster_of.end()) {
      throw ValidationError("mention '" + id + "' is not in the gold clustering of '" +
                            gold.doc_id + "'");
    }
    return it->second;
  };
  for (auto& p : pairs) p.label = find(p.first) == find(p.second);
  return pairs;
}

// Keeps every positive and each negative with probability `keep_ratio`.
// A ratio of 1 or more keeps everything.
inline std::vector<MentionPair> downsample_negatives(std::vector<MentionPair> pairs,
                                                     double keep_ratio, Rng& rng) {
  if (keep_ratio >= 1.0) return pairs;
  std::vector<MentionPair> kept;
  for (auto& p : pairs) {
    if (p.label.value_or(false) || rng.bernoulli(keep_ratio)) kept.push_back(std::move(p));
  }
  return kept;
}

// [e1, e2, e1*e2] with elementwise product.
struct PairFeature {
  std::size_t dim = 0;
  std::vector<float> joint;

  std::span<const float> e1() const { return {joint.data(), dim}; }
  std::span<const float> e2() const { return {joint.data() + dim, dim}; }
  std::span<const float> product() const { return {joint.data() + 2 * dim, dim}; }
};

inline PairFeature joint_representation(std::span<const float> e1, std::span<const float> e2) {
  if (e1.size() != e2.size()) {
    throw DimensionError("joint representation of vectors with dims " + std::to_string(e1.size()) +
                         " and " + std::to_string(e2.size()));
  }
  const std::size_t d = e1.size();
  PairFeature f;
  f.dim = d;
  f.joint.resize(3 * d);
  for (std::size_t i = 0; i < d; ++i) {
    f.joint[i] = e1[i];
    f.joint[d + i] = e2[i];
    f.joint[2 * d + i] = e1[i] * e2[i];
  }
  return f;
}

inline std::string pair_dump(const std::vector<MentionPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::json j{{"first", p.first}, {"second", p.second}};
    j["label"] = p.label ? nlohmann::json(*p.label) : nlohmann::json(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<MentionPair> parse_pair_dump(const std::string& text,
                                                const std::string& source = "<pairs>") {
  std::vector<MentionPair> pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = detail::parse_json(line, source, line_no);
    const std::string where = source + ":" + std::to_string(line_no);
    MentionPair p{detail::get_field<std::string>(j, "first", where),
                  detail::get_field<std::string>(j, "second", where),
                  {}};
    if (auto l = j.find("label"); l != j.end() && !l->is_null()) {
      if (!l->is_boolean()) throw ParseError(where + ".label: expected boolean or null");
      p.label = l->get<bool>();
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace evlink
