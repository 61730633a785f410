#pragma once

#include <unistd.h>

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "evlink/corpus.hpp"
#include "evlink/detail/io.hpp"

namespace fixtures {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("evlink-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    evlink::detail::write_file(file(name), text);
    return file(name);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

using Opt = std::optional<std::string>;

struct MentionSpec {
  Opt type;
  Opt lemma;
  Opt chain;
};

// One mention per sentence, ids m1..mN prefixed by `prefix`.
inline evlink::Document make_doc(const std::string& doc_id, const std::vector<MentionSpec>& specs,
                                 const std::string& prefix = "m") {
  evlink::Document doc;
  doc.doc_id = doc_id;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    doc.sentences.push_back({"the", specs[i].lemma.value_or("event"), "happened"});
    evlink::EventMention m;
    m.mention_id = prefix + std::to_string(i + 1);
    m.doc_id = doc_id;
    m.sent_idx = i;
    m.tok_start = 1;
    m.tok_end = 2;
    m.event_type = specs[i].type;
    m.head_lemma = specs[i].lemma;
    m.chain_id = specs[i].chain;
    doc.mentions.push_back(m);
  }
  return doc;
}

inline evlink::Document chain_doc(const std::string& doc_id, const std::vector<Opt>& chains,
                                  const std::string& prefix = "m") {
  std::vector<MentionSpec> specs;
  for (const auto& c : chains) specs.push_back({std::nullopt, std::nullopt, c});
  return make_doc(doc_id, specs, prefix);
}

}  // namespace fixtures
