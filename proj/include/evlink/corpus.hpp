#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "evlink/detail/io.hpp"
#include "evlink/errors.hpp"
#include "evlink/partition.hpp"

namespace evlink {

struct EventMention {
  std::string mention_id;
  std::string doc_id;
  std::size_t sent_idx = 0;
  std::size_t tok_start = 0;
  std::size_t tok_end = 0;  // exclusive
  std::optional<std::string> event_type;
  std::optional<std::string> head_lemma;
  std::optional<std::string> chain_id;

  bool operator==(const EventMention&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<std::vector<std::string>> sentences;
  std::vector<EventMention> mentions;  // document order

  bool operator==(const Document&) const = default;
};

enum class Split { Train, Dev, Test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "test";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

struct Corpus {
  std::vector<Document> documents;
  Split split = Split::Test;

  std::size_t mention_count() const {
    std::size_t n = 0;
    for (const auto& d : documents) n += d.mentions.size();
    return n;
  }

  bool operator==(const Corpus&) const = default;
};

struct CorefChain {
  std::string chain_id;
  std::vector<std::string> member_ids;
};

// Total document order: (sent_idx, tok_start), ties by mention_id.
inline bool precedes(const EventMention& a, const EventMention& b) {
  return std::tie(a.sent_idx, a.tok_start, a.mention_id) <
         std::tie(b.sent_idx, b.tok_start, b.mention_id);
}

inline void sort_mentions(Document& doc) {
  std::sort(doc.mentions.begin(), doc.mentions.end(), precedes);
}

// Checks every structural invariant; sorts mentions into document order.
inline void validate(Corpus& corpus) {
  std::unordered_set<std::string> doc_ids;
  std::unordered_set<std::string> mention_ids;
  for (auto& doc : corpus.documents) {
    if (!doc_ids.insert(doc.doc_id).second) {
      throw ValidationError("duplicate doc_id '" + doc.doc_id + "'");
    }
    for (const auto& m : doc.mentions) {
      if (!mention_ids.insert(m.mention_id).second) {
        throw ValidationError("duplicate mention_id '" + m.mention_id + "'");
      }
      if (m.doc_id != doc.doc_id) {
        throw ValidationError("mention '" + m.mention_id + "' has doc_id '" + m.doc_id +
                              "' inside document '" + doc.doc_id + "'");
      }
      if (m.tok_end <= m.tok_start) {
        throw ValidationError("mention '" + m.mention_id + "': tok_end must exceed tok_start");
      }
      if (m.sent_idx >= doc.sentences.size()) {
        throw ValidationError("mention '" + m.mention_id + "': sent_idx out of range");
      }
      if (m.tok_end > doc.sentences[m.sent_idx].size()) {
        throw ValidationError("mention '" + m.mention_id + "': span exceeds sentence length");
      }
    }
    sort_mentions(doc);
  }
}

namespace detail {

inline std::size_t get_index(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + "." + key + ": missing field");
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    throw ParseError(where + "." + key + ": expected a non-negative integer");
  }
  return it->get<std::size_t>();
}

inline std::size_t locate_line(const std::string& text, const std::string& needle) {
  const auto pos = text.find(needle);
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

}  // namespace detail

// Parses the corpus interchange format from memory. `source` labels errors.
inline Corpus parse_corpus(const std::string& text, const std::string& source = "<corpus>") {
  const nlohmann::json root = detail::parse_json(text, source);
  if (!root.is_object()) throw ParseError(source + ": top level must be an object");
  auto docs_it = root.find("documents");
  if (docs_it == root.end() || !docs_it->is_array()) {
    throw ParseError(source + ": missing \"documents\" array");
  }
  Corpus corpus;
  if (auto s = root.find("split"); s != root.end() && s->is_string()) {
    corpus.split = parse_split(s->get<std::string>());
  }

  for (std::size_t di = 0; di < docs_it->size(); ++di) {
    const auto& jd = (*docs_it)[di];
    const std::string where = "documents[" + std::to_string(di) + "]";
    try {
      Document doc;
      doc.doc_id = detail::get_field<std::string>(jd, "doc_id", where);
      doc.sentences =
          detail::get_field<std::vector<std::vector<std::string>>>(jd, "sentences", where);
      auto ms = jd.find("mentions");
      if (ms == jd.end() || !ms->is_array()) {
        throw ParseError(where + ".mentions: expected an array");
      }
      for (std::size_t mi = 0; mi < ms->size(); ++mi) {
        const auto& jm = (*ms)[mi];
        const std::string mw = where + ".mentions[" + std::to_string(mi) + "]";
        EventMention m;
        m.mention_id = detail::get_field<std::string>(jm, "mention_id", mw);
        m.doc_id = doc.doc_id;
        detail::get_optional_string(jm, "doc_id", mw, m.doc_id);
        m.sent_idx = detail::get_index(jm, "sent_idx", mw);
        m.tok_start = detail::get_index(jm, "tok_start", mw);
        m.tok_end = detail::get_index(jm, "tok_end", mw);
        std::string s;
        if (detail::get_optional_string(jm, "event_type", mw, s)) m.event_type = s;
        if (detail::get_optional_string(jm, "head_lemma", mw, s) && !s.empty()) m.head_lemma = s;
        if (detail::get_optional_string(jm, "chain_id", mw, s)) m.chain_id = s;
        doc.mentions.push_back(std::move(m));
      }
      corpus.documents.push_back(std::move(doc));
    } catch (const ParseError& e) {
      // Point at the line holding the offending document when it can be found.
      std::string id;
      if (jd.is_object() && jd.contains("doc_id") && jd["doc_id"].is_string()) {
        id = jd["doc_id"].get<std::string>();
      }
      const std::size_t line = id.empty() ? 0 : detail::locate_line(text, "\"" + id + "\"");
      throw ParseError(source + (line ? ":" + std::to_string(line) : std::string()) + ": " +
                       e.what());
    }
  }
  validate(corpus);
  return corpus;
}

inline Corpus load_corpus(const std::string& path) {
  return parse_corpus(detail::read_file(path), path);
}

inline nlohmann::json to_json(const Corpus& corpus) {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& doc : corpus.documents) {
    nlohmann::json mentions = nlohmann::json::array();
    for (const auto& m : doc.mentions) {
      auto opt = [](const std::optional<std::string>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
      };
      mentions.push_back({{"mention_id", m.mention_id},
                          {"doc_id", m.doc_id},
                          {"sent_idx", m.sent_idx},
                          {"tok_start", m.tok_start},
                          {"tok_end", m.tok_end},
                          {"event_type", opt(m.event_type)},
                          {"head_lemma", opt(m.head_lemma)},
                          {"chain_id", opt(m.chain_id)}});
    }
    docs.push_back({{"doc_id", doc.doc_id}, {"sentences", doc.sentences}, {"mentions", mentions}});
  }
  return {{"split", std::string(to_string(corpus.split))}, {"documents", docs}};
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  detail::write_file(path, to_json(corpus).dump(1) + "\n");
}

// Gold partition: equal non-null chain_ids grouped, null chains as singletons.
inline Clustering gold_clustering(const Document& doc) {
  Clustering out;
  out.doc_id = doc.doc_id;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& m : doc.mentions) {
    if (!m.chain_id) {
      out.clusters.push_back({m.mention_id});
      continue;
    }
    auto [it, inserted] = slot.emplace(*m.chain_id, out.clusters.size());
    if (inserted) out.clusters.emplace_back();
    out.clusters[it->second].push_back(m.mention_id);
  }
  return out;
}

inline std::vector<CorefChain> gold_chains(const Document& doc) {
  std::vector<CorefChain> chains;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& m : doc.mentions) {
    const std::string id = m.chain_id ? *m.chain_id : "singleton:" + m.mention_id;
    auto [it, inserted] = slot.emplace(id, chains.size());
    if (inserted) chains.push_back({id, {}});
    chains[it->second].member_ids.push_back(m.mention_id);
  }
  return chains;
}

// Exact or partial (substring either way) head-lemma match.
inline bool lemma_match(std::string_view a, std::string_view b) {
  if (a.empty() || b.empty()) return false;
  return a == b || a.find(b) != std::string_view::npos || b.find(a) != std::string_view::npos;
}

inline bool lemma_match(const EventMention& a, const EventMention& b) {
  return a.head_lemma && b.head_lemma && lemma_match(*a.head_lemma, *b.head_lemma);
}

// Null types never match.
inline bool same_type(const EventMention& a, const EventMention& b) {
  return a.event_type && b.event_type && *a.event_type == *b.event_type;
}

}  // namespace evlink
