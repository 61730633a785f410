#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evlink/corpus.hpp"
#include "evlink/detail/io.hpp"
#include "evlink/errors.hpp"

namespace evlink {

using Vector = std::vector<float>;

// mention_id -> 32-bit vector of a fixed dimension. Immutable once built.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim, std::string encoder = {})
      : dim_(dim), encoder_(std::move(encoder)) {
    if (dim == 0) throw DimensionError("embedding dimension must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::string& encoder() const { return encoder_; }
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }

  void insert(const std::string& id, Vector v) {
    if (dim_ == 0) throw DimensionError("embedding dimension must be positive");
    if (v.size() != dim_) {
      throw DimensionError("mention '" + id + "': vector has " + std::to_string(v.size()) +
                           " components, expected " + std::to_string(dim_));
    }
    for (float x : v) {
      if (!std::isfinite(x)) throw ValidationError("mention '" + id + "': non-finite component");
    }
    if (!entries_.emplace(id, std::move(v)).second) {
      throw ValidationError("duplicate embedding for mention '" + id + "'");
    }
  }

  const Vector& lookup(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw MissingEmbeddingError(id);
    return it->second;
  }

  const std::map<std::string, Vector>& entries() const { return entries_; }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t dim_ = 0;
  std::string encoder_;
  std::map<std::string, Vector> entries_;
};

inline const Vector& lookup(const EmbeddingTable& table, const std::string& id) {
  return table.lookup(id);
}

inline EmbeddingTable parse_embeddings(const std::string& text,
                                       std::optional<std::size_t> expected_dim = std::nullopt,
                                       const std::string& source = "<embeddings>") {
  std::optional<std::size_t> header_dim;
  std::string encoder;
  std::vector<std::pair<std::string, Vector>> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto obj = detail::parse_json(line, source, line_no);
    const std::string where = source + ":" + std::to_string(line_no);
    if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
    if (obj.contains("format")) {
      if (!records.empty() || header_dim) throw ParseError(where + ": header must be the first line");
      if (obj["format"] != "evlink-emb") throw ParseError(where + ": unknown format tag");
      if (obj.value("version", 0) != 1) throw ParseError(where + ": unsupported version");
      header_dim = detail::get_field<std::size_t>(obj, "dim", where);
      if (auto e = obj.find("encoder"); e != obj.end() && e->is_string()) encoder = *e;
      continue;
    }
    auto id = detail::get_field<std::string>(obj, "mention_id", where);
    auto vit = obj.find("vector");
    if (vit == obj.end() || !vit->is_array()) throw ParseError(where + ".vector: expected array");
    Vector v;
    v.reserve(vit->size());
    for (const auto& x : *vit) {
      if (!x.is_number()) {
        throw ValidationError(where + ": mention '" + id + "' has a non-numeric component");
      }
      v.push_back(static_cast<float>(x.get<double>()));
    }
    records.emplace_back(std::move(id), std::move(v));
  }

  std::size_t dim = header_dim ? *header_dim
                    : records.empty() ? expected_dim.value_or(1)
                                      : records.front().second.size();
  if (expected_dim && dim != *expected_dim && (header_dim || !records.empty())) {
    throw DimensionError(source + ": dimension " + std::to_string(dim) + ", expected " +
                         std::to_string(*expected_dim));
  }
  EmbeddingTable table(dim, encoder);
  for (auto& [id, v] : records) table.insert(id, std::move(v));
  return table;
}

inline EmbeddingTable read_embeddings(const std::string& path,
                                      std::optional<std::size_t> expected_dim = std::nullopt) {
  return parse_embeddings(detail::read_file(path), expected_dim, path);
}

// Header line then one record per mention, sorted by mention_id. Components
// are written as the shortest decimal of the widened double, which parses
// back to the same float.
inline std::string serialize_embeddings(const EmbeddingTable& table) {
  if (table.dim() == 0) throw DimensionError("cannot serialize a table of dimension 0");
  std::string out = nlohmann::json{{"format", "evlink-emb"},
                                   {"version", 1},
                                   {"dim", table.dim()},
                                   {"encoder", table.encoder()}}
                        .dump();
  out += '\n';
  for (const auto& [id, v] : table.entries()) {
    nlohmann::json vec = nlohmann::json::array();
    for (float x : v) vec.push_back(static_cast<double>(x));
    out += nlohmann::json{{"mention_id", id}, {"vector", std::move(vec)}}.dump();
    out += '\n';
  }
  return out;
}

inline void write_embeddings(const EmbeddingTable& table, const std::string& path) {
  detail::write_file(path, serialize_embeddings(table));
}

// Corpus mention ids without a vector, in corpus order.
inline std::vector<std::string> missing_embeddings(const Corpus& corpus,
                                                   const EmbeddingTable& table) {
  std::vector<std::string> missing;
  for (const auto& doc : corpus.documents) {
    for (const auto& m : doc.mentions) {
      if (!table.contains(m.mention_id)) missing.push_back(m.mention_id);
    }
  }
  return missing;
}

inline void require_coverage(const Corpus& corpus, const EmbeddingTable& table) {
  const auto missing = missing_embeddings(corpus, table);
  if (missing.empty()) return;
  std::string msg = std::to_string(missing.size()) + " corpus mention(s) lack embeddings:";
  for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
  if (missing.size() > 10) msg += " ...";
  throw ValidationError(msg);
}

}  // namespace evlink
