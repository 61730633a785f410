#pragma once

#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "evlink/corpus.hpp"
#include "evlink/detail/io.hpp"
#include "evlink/errors.hpp"
#include "evlink/pairs.hpp"
#include "evlink/partition.hpp"

namespace evlink {

// Symmetric boolean matrix over a document's mentions, diagonal set.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  AdjacencyMatrix(std::string doc_id, std::vector<std::string> mention_ids)
      : doc_id_(std::move(doc_id)),
        ids_(std::move(mention_ids)),
        bits_(ids_.size() * ids_.size(), 0) {
    for (std::size_t i = 0; i < ids_.size(); ++i) bits_[i * ids_.size() + i] = 1;
  }

  static AdjacencyMatrix for_document(const Document& doc) {
    std::vector<std::string> ids;
    ids.reserve(doc.mentions.size());
    for (const auto& m : doc.mentions) ids.push_back(m.mention_id);
    return AdjacencyMatrix(doc.doc_id, std::move(ids));
  }

  std::size_t size() const { return ids_.size(); }
  const std::string& doc_id() const { return doc_id_; }
  const std::vector<std::string>& mention_ids() const { return ids_; }

  bool edge(std::size_t i, std::size_t j) const { return bits_[i * size() + j] != 0; }

  void connect(std::size_t i, std::size_t j) {
    bits_[i * size() + j] = 1;
    bits_[j * size() + i] = 1;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t j = i + 1; j < size(); ++j) n += edge(i, j);
    }
    return n;
  }

  bool operator==(const AdjacencyMatrix&) const = default;

 private:
  std::string doc_id_;
  std::vector<std::string> ids_;
  std::vector<unsigned char> bits_;
};

// Pairs absent from `decisions` stay unconnected.
inline AdjacencyMatrix adjacency_from_decisions(const Document& doc,
                                                const std::vector<MentionPair>& decisions) {
  auto adj = AdjacencyMatrix::for_document(doc);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < doc.mentions.size(); ++i) index[doc.mentions[i].mention_id] = i;
  auto find = [&](const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw ValidationError("decision references mention '" + id + "' outside document '" +
                            doc.doc_id + "'");
    }
    return it->second;
  };
  for (const auto& d : decisions) {
    const auto i = find(d.first);
    const auto j = find(d.second);
    if (d.label.value_or(false)) adj.connect(i, j);
  }
  return adj;
}

// Disjoint sets with union by size and path halving.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// Cluster labels per index, numbered by first occurrence.
inline std::vector<std::size_t> component_labels(const AdjacencyMatrix& adj) {
  const std::size_t n = adj.size();
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (adj.edge(i, j)) uf.unite(i, j);
    }
  }
  std::vector<std::size_t> label(n);
  std::unordered_map<std::size_t, std::size_t> root_label;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, _] = root_label.emplace(uf.find(i), root_label.size());
    label[i] = it->second;
  }
  return label;
}

inline Clustering connected_components(const AdjacencyMatrix& adj) {
  const auto label = component_labels(adj);
  Clustering out;
  out.doc_id = adj.doc_id();
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == out.clusters.size()) out.clusters.emplace_back();
    out.clusters[label[i]].push_back(adj.mention_ids()[i]);
  }
  return out;
}

enum class BaselineRule { Singletons, Type, Lemma, LemmaAndType };

inline std::string_view to_string(BaselineRule r) {
  switch (r) {
    case BaselineRule::Singletons: return "singletons";
    case BaselineRule::Type: return "type";
    case BaselineRule::Lemma: return "lemma";
    case BaselineRule::LemmaAndType: return "lemma_type";
  }
  return "singletons";
}

inline BaselineRule parse_baseline_rule(std::string_view s) {
  if (s == "singletons") return BaselineRule::Singletons;
  if (s == "type") return BaselineRule::Type;
  if (s == "lemma") return BaselineRule::Lemma;
  if (s == "lemma_type" || s == "lemma_and_type") return BaselineRule::LemmaAndType;
  throw ValidationError("unknown baseline rule '" + std::string(s) + "'");
}

inline AdjacencyMatrix baseline_adjacency(const Document& doc, BaselineRule rule) {
  auto adj = AdjacencyMatrix::for_document(doc);
  if (rule == BaselineRule::Singletons) return adj;
  const auto& ms = doc.mentions;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    for (std::size_t j = i + 1; j < ms.size(); ++j) {
      bool linked = false;
      switch (rule) {
        case BaselineRule::Type: linked = same_type(ms[i], ms[j]); break;
        case BaselineRule::Lemma: linked = lemma_match(ms[i], ms[j]); break;
        case BaselineRule::LemmaAndType:
          linked = same_type(ms[i], ms[j]) && lemma_match(ms[i], ms[j]);
          break;
        case BaselineRule::Singletons: break;
      }
      if (linked) adj.connect(i, j);
    }
  }
  return adj;
}

// System-output file: one {"doc_id","clusters"} object per line.
inline std::string serialize_clusterings(const std::vector<Clustering>& docs) {
  std::string out;
  for (const auto& c : docs) {
    out += nlohmann::json{{"doc_id", c.doc_id}, {"clusters", c.clusters}}.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Clustering> parse_clusterings(const std::string& text,
                                                 const std::string& source = "<system>") {
  std::vector<Clustering> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = detail::parse_json(line, source, line_no);
    const std::string where = source + ":" + std::to_string(line_no);
    out.push_back({detail::get_field<std::string>(j, "doc_id", where),
                   detail::get_field<std::vector<std::vector<std::string>>>(j, "clusters", where)});
  }
  return out;
}

inline void write_clusterings(const std::vector<Clustering>& docs, const std::string& path) {
  detail::write_file(path, serialize_clusterings(docs));
}

inline std::vector<Clustering> read_clusterings(const std::string& path) {
  return parse_clusterings(detail::read_file(path), path);
}

}  // namespace evlink
