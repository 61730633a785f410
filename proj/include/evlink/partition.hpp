#pragma once

#include <string>
#include <vector>

namespace evlink {

// A partition of one document's mentions. Clusters are listed in order of
// their earliest member and members in document order when produced by this
// library; consumers must not rely on order for anything but output stability.
struct Clustering {
  std::string doc_id;
  std::vector<std::vector<std::string>> clusters;

  std::size_t mention_count() const {
    std::size_t n = 0;
    for (const auto& c : clusters) n += c.size();
    return n;
  }

  bool operator==(const Clustering&) const = default;
};

}  // namespace evlink
