#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evlink/errors.hpp"
#include "evlink/partition.hpp"

namespace evlink {

// Precision/recall/F1 with the raw fractions kept for micro aggregation.
struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double p_num = 0.0, p_den = 0.0;
  double r_num = 0.0, r_den = 0.0;

  static double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

  static PRF from_ratio(double p_num, double p_den, double r_num, double r_den) {
    PRF out{0, 0, 0, p_num, p_den, r_num, r_den};
    out.precision = p_den == 0.0 ? 0.0 : p_num / p_den;
    out.recall = r_den == 0.0 ? 0.0 : r_num / r_den;
    out.f1 = harmonic(out.precision, out.recall);
    return out;
  }

  static PRF from_values(double p, double r) { return {p, r, harmonic(p, r), 0, 0, 0, 0}; }
};

// ---------------------------------------------------------------------------
// Assignment

struct Assignment {
  std::vector<std::ptrdiff_t> row_to_col;  // -1 when a row is unassigned
  double total = 0.0;
};

// Maximum-weight one-to-one assignment of rows to columns (Kuhn-Munkres with
// potentials, O(n^2 m)). Rectangular input leaves max(rows, cols) - min(...)
// rows or columns unassigned.
inline Assignment hungarian_max(const std::vector<std::vector<double>>& scores) {
  Assignment out;
  const std::size_t rows = scores.size();
  if (rows == 0) return out;
  const std::size_t cols = scores.front().size();
  for (const auto& r : scores) {
    if (r.size() != cols) throw DimensionError("hungarian_max: ragged score matrix");
  }
  out.row_to_col.assign(rows, -1);
  if (cols == 0) return out;

  const bool transposed = rows > cols;
  const std::size_t n = transposed ? cols : rows;
  const std::size_t m = transposed ? rows : cols;
  auto cost = [&](std::size_t i, std::size_t j) {
    return transposed ? -scores[j][i] : -scores[i][j];
  };

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    const std::size_t small = p[j] - 1, large = j - 1;
    if (transposed) {
      out.row_to_col[large] = static_cast<std::ptrdiff_t>(small);
    } else {
      out.row_to_col[small] = static_cast<std::ptrdiff_t>(large);
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (out.row_to_col[r] >= 0) out.total += scores[r][static_cast<std::size_t>(out.row_to_col[r])];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-document counts

namespace detail {

// Cluster index per mention for both partitions over a shared mention index.
struct AlignedPartitions {
  std::vector<std::size_t> gold_of;
  std::vector<std::size_t> sys_of;
  std::vector<std::size_t> gold_sizes;
  std::vector<std::size_t> sys_sizes;
  // overlap[g][s] = |G_g intersect S_s|
  std::vector<std::vector<std::size_t>> overlap;
};

inline AlignedPartitions align(const Clustering& gold, const Clustering& sys) {
  AlignedPartitions a;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t g = 0; g < gold.clusters.size(); ++g) {
    if (gold.clusters[g].empty()) throw ValidationError("empty gold cluster in '" + gold.doc_id + "'");
    for (const auto& id : gold.clusters[g]) {
      if (!index.emplace(id, a.gold_of.size()).second) {
        throw ValidationError("mention '" + id + "' appears twice in gold '" + gold.doc_id + "'");
      }
      a.gold_of.push_back(g);
    }
    a.gold_sizes.push_back(gold.clusters[g].size());
  }
  a.sys_of.assign(a.gold_of.size(), SIZE_MAX);
  for (std::size_t s = 0; s < sys.clusters.size(); ++s) {
    if (sys.clusters[s].empty()) throw ValidationError("empty system cluster in '" + sys.doc_id + "'");
    for (const auto& id : sys.clusters[s]) {
      auto it = index.find(id);
      if (it == index.end()) {
        throw ValidationError("system mention '" + id + "' not in gold for '" + gold.doc_id + "'");
      }
      if (a.sys_of[it->second] != SIZE_MAX) {
        throw ValidationError("mention '" + id + "' appears twice in system '" + sys.doc_id + "'");
      }
      a.sys_of[it->second] = s;
    }
    a.sys_sizes.push_back(sys.clusters[s].size());
  }
  for (std::size_t i = 0; i < a.sys_of.size(); ++i) {
    if (a.sys_of[i] == SIZE_MAX) {
      throw ValidationError("system output for '" + gold.doc_id + "' misses a gold mention");
    }
  }
  a.overlap.assign(a.gold_sizes.size(), std::vector<std::size_t>(a.sys_sizes.size(), 0));
  for (std::size_t i = 0; i < a.gold_of.size(); ++i) ++a.overlap[a.gold_of[i]][a.sys_of[i]];
  return a;
}

inline double choose2(std::size_t k) { return 0.5 * static_cast<double>(k) * (k > 0 ? k - 1 : 0); }

}  // namespace detail

// Raw sums for one document; every metric is a ratio of these.
struct MetricCounts {
  double mentions = 0;
  double b3_p_num = 0, b3_r_num = 0;
  double muc_p_num = 0, muc_p_den = 0, muc_r_num = 0, muc_r_den = 0;
  double ceaf_phi = 0, gold_clusters = 0, sys_clusters = 0;
  double coref_common = 0, coref_gold = 0, coref_sys = 0;
  double non_common = 0, non_gold = 0, non_sys = 0;

  MetricCounts& operator+=(const MetricCounts& o) {
    mentions += o.mentions;
    b3_p_num += o.b3_p_num;
    b3_r_num += o.b3_r_num;
    muc_p_num += o.muc_p_num;
    muc_p_den += o.muc_p_den;
    muc_r_num += o.muc_r_num;
    muc_r_den += o.muc_r_den;
    ceaf_phi += o.ceaf_phi;
    gold_clusters += o.gold_clusters;
    sys_clusters += o.sys_clusters;
    coref_common += o.coref_common;
    coref_gold += o.coref_gold;
    coref_sys += o.coref_sys;
    non_common += o.non_common;
    non_gold += o.non_gold;
    non_sys += o.non_sys;
    return *this;
  }
};

inline MetricCounts count_b_cubed(const detail::AlignedPartitions& a, MetricCounts c = {}) {
  c.mentions = static_cast<double>(a.gold_of.size());
  for (std::size_t g = 0; g < a.overlap.size(); ++g) {
    for (std::size_t s = 0; s < a.overlap[g].size(); ++s) {
      const double k = static_cast<double>(a.overlap[g][s]);
      if (k == 0) continue;
      // each of the k shared mentions contributes k/|S| and k/|G|
      c.b3_p_num += k * k / static_cast<double>(a.sys_sizes[s]);
      c.b3_r_num += k * k / static_cast<double>(a.gold_sizes[g]);
    }
  }
  return c;
}

inline MetricCounts count_muc(const detail::AlignedPartitions& a, MetricCounts c = {}) {
  for (std::size_t g = 0; g < a.overlap.size(); ++g) {
    std::size_t parts = 0;
    for (std::size_t k : a.overlap[g]) parts += k > 0;
    c.muc_r_num += static_cast<double>(a.gold_sizes[g] - parts);
    c.muc_r_den += static_cast<double>(a.gold_sizes[g] - 1);
  }
  for (std::size_t s = 0; s < a.sys_sizes.size(); ++s) {
    std::size_t parts = 0;
    for (std::size_t g = 0; g < a.overlap.size(); ++g) parts += a.overlap[g][s] > 0;
    c.muc_p_num += static_cast<double>(a.sys_sizes[s] - parts);
    c.muc_p_den += static_cast<double>(a.sys_sizes[s] - 1);
  }
  return c;
}

inline MetricCounts count_ceaf_e(const detail::AlignedPartitions& a, MetricCounts c = {}) {
  std::vector<std::vector<double>> phi(a.gold_sizes.size(),
                                       std::vector<double>(a.sys_sizes.size(), 0.0));
  for (std::size_t g = 0; g < phi.size(); ++g) {
    for (std::size_t s = 0; s < a.sys_sizes.size(); ++s) {
      phi[g][s] = 2.0 * static_cast<double>(a.overlap[g][s]) /
                  static_cast<double>(a.gold_sizes[g] + a.sys_sizes[s]);
    }
  }
  c.ceaf_phi = hungarian_max(phi).total;
  c.gold_clusters = static_cast<double>(a.gold_sizes.size());
  c.sys_clusters = static_cast<double>(a.sys_sizes.size());
  return c;
}

inline MetricCounts count_blanc(const detail::AlignedPartitions& a, MetricCounts c = {}) {
  const double total = detail::choose2(a.gold_of.size());
  for (auto k : a.gold_sizes) c.coref_gold += detail::choose2(k);
  for (auto k : a.sys_sizes) c.coref_sys += detail::choose2(k);
  for (const auto& row : a.overlap) {
    for (auto k : row) c.coref_common += detail::choose2(k);
  }
  c.non_gold = total - c.coref_gold;
  c.non_sys = total - c.coref_sys;
  c.non_common = total - c.coref_gold - c.coref_sys + c.coref_common;
  return c;
}

inline MetricCounts count_all(const Clustering& gold, const Clustering& sys) {
  const auto a = detail::align(gold, sys);
  MetricCounts c = count_b_cubed(a);
  c = count_muc(a, c);
  c = count_ceaf_e(a, c);
  return count_blanc(a, c);
}

inline PRF b_cubed_of(const MetricCounts& c) {
  return PRF::from_ratio(c.b3_p_num, c.mentions, c.b3_r_num, c.mentions);
}

// All-singleton partitions have zero MUC denominators and score 0.
inline PRF muc_of(const MetricCounts& c) {
  return PRF::from_ratio(c.muc_p_num, c.muc_p_den, c.muc_r_num, c.muc_r_den);
}

inline PRF ceaf_e_of(const MetricCounts& c) {
  return PRF::from_ratio(c.ceaf_phi, c.sys_clusters, c.ceaf_phi, c.gold_clusters);
}

struct BlancScore {
  PRF coref;
  PRF non_coref;
  bool coref_defined = true;
  bool non_coref_defined = true;
  PRF overall;  // f1 is the BLANC score

  double score() const { return overall.f1; }
};

// A link class that is empty on both sides is left out of the average; when
// both are empty the score is vacuously perfect. Empty on one side only
// gives that class F = 0.
inline BlancScore blanc_of(const MetricCounts& c) {
  BlancScore b;
  b.coref = PRF::from_ratio(c.coref_common, c.coref_sys, c.coref_common, c.coref_gold);
  b.non_coref = PRF::from_ratio(c.non_common, c.non_sys, c.non_common, c.non_gold);
  b.coref_defined = c.coref_gold > 0 || c.coref_sys > 0;
  b.non_coref_defined = c.non_gold > 0 || c.non_sys > 0;
  if (b.coref_defined && b.non_coref_defined) {
    b.overall = {(b.coref.precision + b.non_coref.precision) / 2,
                 (b.coref.recall + b.non_coref.recall) / 2,
                 (b.coref.f1 + b.non_coref.f1) / 2, 0, 0, 0, 0};
  } else if (b.coref_defined) {
    b.overall = {b.coref.precision, b.coref.recall, b.coref.f1, 0, 0, 0, 0};
  } else if (b.non_coref_defined) {
    b.overall = {b.non_coref.precision, b.non_coref.recall, b.non_coref.f1, 0, 0, 0, 0};
  } else {
    b.overall = {1.0, 1.0, 1.0, 0, 0, 0, 0};
  }
  return b;
}

inline PRF b_cubed(const Clustering& gold, const Clustering& sys) {
  return b_cubed_of(count_b_cubed(detail::align(gold, sys)));
}

inline PRF muc(const Clustering& gold, const Clustering& sys) {
  return muc_of(count_muc(detail::align(gold, sys)));
}

inline PRF ceaf_e(const Clustering& gold, const Clustering& sys) {
  return ceaf_e_of(count_ceaf_e(detail::align(gold, sys)));
}

inline BlancScore blanc(const Clustering& gold, const Clustering& sys) {
  return blanc_of(count_blanc(detail::align(gold, sys)));
}

inline double conll_f1(const PRF& b3, const PRF& muc, const PRF& ceafe) {
  return (b3.f1 + muc.f1 + ceafe.f1) / 3.0;
}

// ---------------------------------------------------------------------------
// Corpus aggregation

enum class Aggregation { Micro, Macro };

inline std::string_view to_string(Aggregation a) { return a == Aggregation::Micro ? "micro" : "macro"; }

inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "micro") return Aggregation::Micro;
  if (s == "macro") return Aggregation::Macro;
  throw ValidationError("unknown aggregation mode '" + std::string(s) + "'");
}

struct DocumentCounts {
  std::string doc_id;
  MetricCounts counts;
};

struct DocumentScores {
  std::string doc_id;
  PRF b3, muc, ceaf_e;
  BlancScore blanc;
  double conll_f1 = 0.0;
};

struct MetricReport {
  PRF b3, muc, ceaf_e;
  BlancScore blanc;
  double conll_f1 = 0.0;
  Aggregation mode = Aggregation::Micro;
  std::vector<DocumentScores> per_doc;

  // The model-selection criterion: mean of B3 and MUC F1.
  double b3_muc_average() const { return (b3.f1 + muc.f1) / 2.0; }
};

inline DocumentScores score_counts(const DocumentCounts& d) {
  DocumentScores s{d.doc_id, b_cubed_of(d.counts), muc_of(d.counts), ceaf_e_of(d.counts),
                   blanc_of(d.counts), 0.0};
  s.conll_f1 = conll_f1(s.b3, s.muc, s.ceaf_e);
  return s;
}

// Micro sums counts over documents before dividing; macro averages the
// per-document values. Nothing is ever compared across documents.
inline MetricReport aggregate_corpus(const std::vector<DocumentCounts>& docs, Aggregation mode) {
  if (docs.empty()) throw ValidationError("cannot aggregate metrics over an empty corpus");
  MetricReport r;
  r.mode = mode;
  for (const auto& d : docs) r.per_doc.push_back(score_counts(d));

  if (mode == Aggregation::Micro) {
    MetricCounts total;
    for (const auto& d : docs) total += d.counts;
    r.b3 = b_cubed_of(total);
    r.muc = muc_of(total);
    r.ceaf_e = ceaf_e_of(total);
    r.blanc = blanc_of(total);
  } else {
    const double n = static_cast<double>(docs.size());
    auto mean = [&](auto field) {
      double p = 0, rc = 0, f = 0;
      for (const auto& s : r.per_doc) {
        const PRF& x = field(s);
        p += x.precision;
        rc += x.recall;
        f += x.f1;
      }
      return PRF{p / n, rc / n, f / n, 0, 0, 0, 0};
    };
    r.b3 = mean([](const DocumentScores& s) -> const PRF& { return s.b3; });
    r.muc = mean([](const DocumentScores& s) -> const PRF& { return s.muc; });
    r.ceaf_e = mean([](const DocumentScores& s) -> const PRF& { return s.ceaf_e; });
    r.blanc.coref = mean([](const DocumentScores& s) -> const PRF& { return s.blanc.coref; });
    r.blanc.non_coref = mean([](const DocumentScores& s) -> const PRF& { return s.blanc.non_coref; });
    r.blanc.overall = mean([](const DocumentScores& s) -> const PRF& { return s.blanc.overall; });
  }
  r.conll_f1 = conll_f1(r.b3, r.muc, r.ceaf_e);
  return r;
}

// Pairs gold and system partitions by doc_id; every gold document must have
// a system partition over the same mentions.
inline MetricReport score_corpus(const std::vector<Clustering>& gold,
                                 const std::vector<Clustering>& sys, Aggregation mode) {
  std::unordered_map<std::string, const Clustering*> by_id;
  for (const auto& s : sys) {
    if (!by_id.emplace(s.doc_id, &s).second) {
      throw ValidationError("system output lists document '" + s.doc_id + "' twice");
    }
  }
  if (by_id.size() != gold.size()) {
    throw ValidationError("system output covers " + std::to_string(by_id.size()) +
                          " documents, gold has " + std::to_string(gold.size()));
  }
  std::vector<DocumentCounts> docs;
  for (const auto& g : gold) {
    auto it = by_id.find(g.doc_id);
    if (it == by_id.end()) throw ValidationError("no system output for document '" + g.doc_id + "'");
    docs.push_back({g.doc_id, count_all(g, *it->second)});
  }
  return aggregate_corpus(docs, mode);
}

// ---------------------------------------------------------------------------
// Same-lemma error breakdown

struct PairOutcome {
  bool coreferent = false;  // gold label
  bool predicted = false;
  bool same_lemma = false;
};

struct BreakdownCell {
  std::size_t actual = 0;
  std::size_t correct = 0;
  std::optional<double> ratio() const {
    if (actual == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(actual);
  }
};

struct ErrorBreakdown {
  BreakdownCell positive_same_lemma;
  BreakdownCell positive_different_lemma;
  BreakdownCell negative_same_lemma;
  BreakdownCell negative_different_lemma;

  std::size_t total() const {
    return positive_same_lemma.actual + positive_different_lemma.actual +
           negative_same_lemma.actual + negative_different_lemma.actual;
  }
};

// Correct means predicted positive for positive cells and predicted negative
// for negative cells.
inline ErrorBreakdown error_analysis(const std::vector<PairOutcome>& pairs) {
  ErrorBreakdown b;
  for (const auto& p : pairs) {
    BreakdownCell& cell = p.coreferent
                              ? (p.same_lemma ? b.positive_same_lemma : b.positive_different_lemma)
                              : (p.same_lemma ? b.negative_same_lemma : b.negative_different_lemma);
    ++cell.actual;
    if (p.predicted == p.coreferent) ++cell.correct;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::json prf_json(const PRF& x) {
  return {{"p", x.precision}, {"r", x.recall}, {"f", x.f1}};
}

inline nlohmann::json blanc_json(const BlancScore& b) {
  auto j = prf_json(b.overall);
  j["coref"] = prf_json(b.coref);
  j["non_coref"] = prf_json(b.non_coref);
  j["coref_defined"] = b.coref_defined;
  j["non_coref_defined"] = b.non_coref_defined;
  return j;
}

inline nlohmann::json to_json(const ErrorBreakdown& b) {
  auto cell = [](const BreakdownCell& c) {
    nlohmann::json j{{"actual", c.actual}, {"predicted", c.correct}};
    const auto r = c.ratio();
    j["ratio"] = r ? nlohmann::json(*r) : nlohmann::json(nullptr);
    return j;
  };
  return {{"positive_same_lemma", cell(b.positive_same_lemma)},
          {"positive_different_lemma", cell(b.positive_different_lemma)},
          {"negative_same_lemma", cell(b.negative_same_lemma)},
          {"negative_different_lemma", cell(b.negative_different_lemma)}};
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json per_doc = nlohmann::json::array();
  for (const auto& d : r.per_doc) {
    per_doc.push_back({{"doc_id", d.doc_id},
                       {"b3", prf_json(d.b3)},
                       {"muc", prf_json(d.muc)},
                       {"ceaf_e", prf_json(d.ceaf_e)},
                       {"blanc", blanc_json(d.blanc)},
                       {"conll_f1", d.conll_f1}});
  }
  return {{"b3", prf_json(r.b3)},
          {"muc", prf_json(r.muc)},
          {"ceaf_e", prf_json(r.ceaf_e)},
          {"blanc", blanc_json(r.blanc)},
          {"conll_f1", r.conll_f1},
          {"mode", std::string(to_string(r.mode))},
          {"per_doc", per_doc}};
}

inline std::string format_table(const MetricReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  auto row = [&](const char* name, const PRF& x) {
    out << std::left << std::setw(8) << name << std::right << std::setw(8) << 100 * x.precision
        << std::setw(8) << 100 * x.recall << std::setw(8) << 100 * x.f1 << '\n';
  };
  out << "aggregation: " << to_string(r.mode) << ", documents: " << r.per_doc.size() << '\n';
  out << std::left << std::setw(8) << "metric" << std::right << std::setw(8) << "P" << std::setw(8)
      << "R" << std::setw(8) << "F" << '\n';
  row("B3", r.b3);
  row("MUC", r.muc);
  row("CEAF-E", r.ceaf_e);
  row("BLANC", r.blanc.overall);
  out << std::left << std::setw(8) << "CoNLL" << std::right << std::setw(24) << 100 * r.conll_f1
      << '\n';
  return out.str();
}

inline std::string format_table(const ErrorBreakdown& b) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  auto col = [&](const BreakdownCell& c) {
    const auto r = c.ratio();
    out << std::setw(12) << c.actual << std::setw(12) << c.correct << std::setw(10);
    if (r) {
      out << *r;
    } else {
      out << "-";
    }
    out << '\n';
  };
  out << std::left << std::setw(28) << "cell" << std::right << std::setw(12) << "actual"
      << std::setw(12) << "predicted" << std::setw(10) << "ratio" << '\n';
  out << std::left << std::setw(28) << "+ve pairs, same lemma" << std::right;
  col(b.positive_same_lemma);
  out << std::left << std::setw(28) << "+ve pairs, different lemma" << std::right;
  col(b.positive_different_lemma);
  out << std::left << std::setw(28) << "-ve pairs, same lemma" << std::right;
  col(b.negative_same_lemma);
  out << std::left << std::setw(28) << "-ve pairs, different lemma" << std::right;
  col(b.negative_different_lemma);
  return out.str();
}

}  // namespace evlink
