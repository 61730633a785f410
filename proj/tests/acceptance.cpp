// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Runs standalone or under ctest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "evlink/evlink.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace evlink;

namespace {

constexpr double kExact = 1e-12;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

bool prf_matches(const PRF& x, const oracle::Prf& o) {
  return near(x.precision, o.p, kExact) && near(x.recall, o.r, kExact) && near(x.f1, o.f, kExact);
}

// Labels drawn from at most six clusters so the exhaustive alignment stays small.
oracle::Labels small_partition(std::size_t n, Rng& rng) {
  const std::uint64_t k = 1 + rng.below(std::min<std::size_t>(n, 6));
  oracle::Labels l(n);
  for (auto& x : l) x = static_cast<int>(rng.below(k));
  return l;
}

Outcome metric_oracles() {
  Outcome o;
  Rng rng(101, "acceptance-metrics");
  const auto t0 = Clock::now();
  int trials = 0;
  for (; trials < 1000; ++trials) {
    const std::size_t n = 1 + rng.below(8);
    const auto gl = small_partition(n, rng), sl = small_partition(n, rng);
    const auto gold = oracle::to_clustering(gl), sys = oracle::to_clustering(sl);
    o.require(prf_matches(b_cubed(gold, sys), oracle::b_cubed(gl, sl)), "B3 differs");
    o.require(prf_matches(muc(gold, sys), oracle::muc(gl, sl)), "MUC differs");
    o.require(prf_matches(ceaf_e(gold, sys), oracle::ceaf_e(gl, sl)), "CEAF-E differs");
    o.require(near(blanc(gold, sys).score(), oracle::blanc(gl, sl), kExact), "BLANC differs");
  }
  const double secs = seconds_since(t0);
  o.require(secs < 30, "runtime " + fmt("%.1f", secs) + " s");
  if (o.pass) o.detail = std::to_string(trials) + " partition pairs, " + fmt("%.2f", secs) + " s";
  return o;
}

Outcome worked_examples() {
  Outcome o;
  const Clustering gold{"d", {{"a", "b", "c"}}};
  const Clustering sys{"d", {{"a", "b"}, {"c"}}};
  o.require(near(b_cubed(gold, sys).f1, 5.0 / 7.0, kExact), "B3 F != 5/7");
  o.require(near(muc(gold, sys).f1, 2.0 / 3.0, kExact), "MUC F != 2/3");
  o.require(near(ceaf_e(gold, sys).f1, 8.0 / 15.0, kExact), "CEAF-E F != 8/15");

  // Perfect response. MUC needs at least one link to be defined, so every
  // partition here has a multi-mention cluster.
  Rng rng(102, "acceptance-perfect");
  std::vector<Clustering> cases{gold};
  while (cases.size() < 200) {
    const auto l = small_partition(2 + rng.below(7), rng);
    const auto c = oracle::to_clustering(l);
    if (c.clusters.size() < l.size()) cases.push_back(c);
  }
  for (const auto& c : cases) {
    for (const auto& x : {b_cubed(c, c), muc(c, c), ceaf_e(c, c), blanc(c, c).overall}) {
      o.require(x.precision == 1.0 && x.recall == 1.0 && x.f1 == 1.0, "perfect response below 1");
    }
  }
  if (o.pass) o.detail = "5/7, 2/3, 8/15; perfect response on " + std::to_string(cases.size());
  return o;
}

PRF f1_only(double percent) { return {0.0, 0.0, percent / 100.0}; }

Outcome conll_rows() {
  Outcome o;
  const double a = 100 * conll_f1(f1_only(92.71), f1_only(65.45), f1_only(88.78));
  const double b = 100 * conll_f1(f1_only(89.35), f1_only(61.81), f1_only(85.74));
  o.require(near(a, 82.31, 0.005), "first row gives " + fmt("%.4f", a));
  o.require(near(b, 78.97, 0.005), "second row gives " + fmt("%.4f", b));
  if (o.pass) o.detail = fmt("%.4f", a) + ", " + fmt("%.4f", b);
  return o;
}

Outcome average_of_two() {
  Outcome o;
  MetricReport r;
  r.b3.f1 = 0.9054;
  r.muc.f1 = 0.5988;
  const double avg = 100 * r.b3_muc_average();
  o.require(near(avg, 75.21, 0.005), "average " + fmt("%.4f", avg));
  if (o.pass) o.detail = fmt("%.4f", avg);
  return o;
}

Outcome hungarian() {
  Outcome o;
  Rng rng(103, "acceptance-hungarian");
  const auto t0 = Clock::now();
  int trials = 0;
  for (; trials < 1000; ++trials) {
    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(6);
    std::vector<std::vector<double>> s(rows, std::vector<double>(cols));
    // Integer weights make every total exactly representable, so the first
    // half compares with ==; the rest uses real weights.
    const bool integral = trials < 500;
    for (auto& row : s) {
      for (auto& x : row) x = integral ? static_cast<double>(rng.below(100)) : rng.uniform();
    }
    const double got = hungarian_max(s).total, want = oracle::best_alignment(s);
    o.require(integral ? got == want : near(got, want, kExact),
              std::to_string(rows) + "x" + std::to_string(cols) + " total differs");
  }
  const double secs = seconds_since(t0);
  o.require(secs < 10, "runtime " + fmt("%.1f", secs) + " s");
  if (o.pass) o.detail = std::to_string(trials) + " matrices, " + fmt("%.2f", secs) + " s";
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  Rng rng(104, "acceptance-gradients");
  double worst_reg = 0, worst_cos = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 2 + rng.below(4), hidden = 3 + rng.below(6);
    const auto model = LogisticRegressorModel::create(dim, rng.next(), hidden);
    Vector e1(dim), e2(dim);
    for (auto& v : e1) v = static_cast<float>(rng.normal());
    for (auto& v : e2) v = static_cast<float>(rng.normal());
    const auto feature = joint_representation(e1, e2);
    const std::vector<double> x(feature.joint.begin(), feature.joint.end());
    const std::size_t target = rng.below(2);
    const nn::OutputLoss loss = [target](std::span<const double> y) {
      const auto r = nn::nll_loss(y, target);
      return std::pair<double, std::vector<double>>{r.loss, r.grad_log_probs};
    };
    const auto r = nn::finite_difference_check(model.layers, loss, x, 1e-3);
    worst_reg = std::max(worst_reg, r.max_rel_error);
    o.require(r.passed, "regressor trial " + std::to_string(trial));
  }
  // The cosine is strongly curved, so its check uses a finer step.
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 2 + rng.below(5);
    CosineTrainingSet set;
    set.dim = dim;
    const std::size_t nvec = 2 + rng.below(4);
    for (std::size_t i = 0; i < nvec; ++i) {
      Vector v(dim);
      for (auto& x : v) x = static_cast<float>(rng.normal());
      set.vectors.push_back(v);
    }
    for (std::size_t i = 0, n = 1 + rng.below(5); i < n; ++i) {
      const auto a = rng.below(nvec);
      auto b = rng.below(nvec - 1);
      if (b >= a) ++b;
      set.pairs.push_back({a, b, rng.bernoulli(0.5)});
    }
    auto layer = nn::DenseLayer::identity(dim);
    for (auto& w : layer.weights) w += static_cast<float>(0.3 * rng.normal());
    for (auto& b : layer.bias) b = static_cast<float>(0.1 * rng.normal());
    nn::LayerGrad grad;
    cosine_transform_objective(layer, set, &grad);
    std::vector<double> analytic = grad.weights;
    analytic.insert(analytic.end(), grad.bias.begin(), grad.bias.end());
    auto eval = [&] { return cosine_transform_objective(layer, set, nullptr); };
    auto numeric = nn::numeric_gradient(layer.weights, eval, 1e-4);
    const auto nb = nn::numeric_gradient(layer.bias, eval, 1e-4);
    numeric.insert(numeric.end(), nb.begin(), nb.end());
    const auto r = nn::compare_gradients(analytic, numeric, 1e-3);
    worst_cos = std::max(worst_cos, r.max_rel_error);
    o.require(r.passed, "cosine transform trial " + std::to_string(trial));
  }
  if (o.pass) {
    o.detail = "100 + 100 instances, worst rel err " + fmt("%.2e", worst_reg) + " / " +
               fmt("%.2e", worst_cos);
  }
  return o;
}

// Synthetic benchmark data, generated once and shared by the later criteria.
struct Bench {
  fixtures::TempDir dir;
  SynthData data;
  PipelineConfig base;

  Bench() {
    const SynthConfig cfg;  // seed 7, 200 documents, ratio 5
    data = synthesize(cfg);
    write_synth(data, dir.file("data"), cfg);
    base = load_config(dir.file("data/pipeline.cfg"));
  }

  PipelineConfig config(const std::string& method, const std::string& out) const {
    auto cfg = base;
    cfg.method = parse_method(method);
    cfg.out_dir = dir.file(out);
    return cfg;
  }
};

Outcome identity_noop(const Bench& b) {
  Outcome o;
  const auto& dev = b.data.dev;
  const auto& table = b.data.embeddings;
  const auto identity = CosineTransformModel::identity(table.dim());
  const auto pairs = detail::labeled_pairs(dev, PairStrategy::AllPreceding);

  const auto d0 = compute_diagnostics(pairs, table);
  const auto d1 = compute_diagnostics(pairs, table, identity);
  o.require(d0.cos_plus == d1.cos_plus && d0.cos_minus == d1.cos_minus, "diagnostics differ");

  const CosineThresholdModel raw{0.5, std::nullopt}, mapped{0.5, identity};
  for (const auto& p : pairs) {
    const auto a = cosine_decide(raw, table.lookup(p.first), table.lookup(p.second));
    const auto c = cosine_decide(mapped, table.lookup(p.first), table.lookup(p.second));
    o.require(a.score == c.score && a.coreferent == c.coreferent, "score differs");
  }

  const auto grid = default_threshold_grid();
  const auto t0 = tune_threshold(std::nullopt, dev, table, grid, PairStrategy::AllPreceding);
  const auto t1 = tune_threshold(identity, dev, table, grid, PairStrategy::AllPreceding);
  o.require(t0.threshold == t1.threshold, "tuned thresholds differ");

  const Method cosine{MethodKind::Cosine};
  const Models plain{CosineThresholdModel{t0.threshold, std::nullopt}, std::nullopt};
  const Models with_id{CosineThresholdModel{t0.threshold, identity}, std::nullopt};
  for (const auto& doc : dev.documents) {
    const auto a = predict_pairs(cosine, plain, doc, table, PairStrategy::AllPreceding);
    const auto c = predict_pairs(cosine, with_id, doc, table, PairStrategy::AllPreceding);
    o.require(a == c, "decisions differ in " + doc.doc_id);
    o.require(connected_components(adjacency_from_decisions(doc, a)) ==
                  connected_components(adjacency_from_decisions(doc, c)),
              "clusters differ in " + doc.doc_id);
  }
  if (o.pass) o.detail = std::to_string(pairs.size()) + " dev pairs";
  return o;
}

Outcome freeze_contract(const Bench& b) {
  Outcome o;
  auto transform = CosineTransformModel::identity(b.data.embeddings.dim());
  Rng rng(105, "acceptance-freeze");
  for (auto& w : transform.layer.weights) w += static_cast<float>(0.1 * rng.normal());
  const auto before = parameter_checksum(transform.layer);
  const auto result = train_logistic_regressor(
      b.data.train, b.data.embeddings, DevSet{&b.data.dev, &b.data.embeddings, Aggregation::Micro},
      PairStrategy::AllPreceding, TrainConfig{}, transform);
  o.require(result.model.frozen_transform.has_value(), "transform not kept");
  if (result.model.frozen_transform) {
    o.require(parameter_checksum(result.model.frozen_transform->layer) == before,
              "frozen transform changed");
  }
  o.require(parameter_checksum(transform.layer) == before, "caller's transform changed");
  if (o.pass) {
    o.detail = std::to_string(result.trace.size()) + " epochs, checksum " + std::to_string(before);
  }
  return o;
}

Outcome clustering() {
  Outcome o;
  Rng rng(106, "acceptance-clustering");
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const double p = rng.uniform(0, std::min(1.0, 4.0 / n));
    std::vector<std::vector<bool>> g(n, std::vector<bool>(n, false));
    const auto doc = fixtures::chain_doc("d", std::vector<fixtures::Opt>(n));
    auto adj = AdjacencyMatrix::for_document(doc);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng.bernoulli(p)) {
          g[i][j] = g[j][i] = true;
          adj.connect(i, j);
        }
      }
    }
    const auto comp = connected_components(adj);
    std::vector<std::size_t> label(n);
    for (std::size_t k = 0; k < comp.clusters.size(); ++k) {
      for (const auto& id : comp.clusters[k]) {
        const auto& ids = adj.mention_ids();
        label[std::find(ids.begin(), ids.end(), id) - ids.begin()] = k;
      }
    }
    o.require(oracle::same_partition(label, oracle::closure_labels(g)),
              "components differ from closure, n=" + std::to_string(n));
  }

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    std::vector<fixtures::Opt> chains(n);
    for (auto& c : chains) c = "c" + std::to_string(rng.below(n));
    chains[1] = chains[0];  // at least one multi-mention chain
    const auto doc = fixtures::chain_doc("d", chains);
    const auto sys = connected_components(baseline_adjacency(doc, BaselineRule::Singletons));
    o.require(muc(gold_clustering(doc), sys).f1 == 0.0, "singletons MUC above 0");
  }
  if (o.pass) o.detail = "1000 graphs; singletons MUC 0 on 200 golds";
  return o;
}

struct BenchRuns {
  PipelineResult cosine, transformed, regressor;
  double seconds = 0;
};

Outcome benchmark(const Bench& b, BenchRuns& runs) {
  Outcome o;
  const auto t0 = Clock::now();
  runs.cosine = run_pipeline(b.config("cosine", "cosine"));
  auto tcfg = b.config("cosine", "cosine-transform");
  tcfg.train_transform = true;
  runs.transformed = run_pipeline(tcfg);
  runs.regressor = run_pipeline(b.config("regressor", "regressor"));
  runs.seconds = seconds_since(t0);

  const double cos_f1 = runs.cosine.report.conll_f1;
  const double reg_f1 = runs.regressor.report.conll_f1;
  o.require(cos_f1 >= 0.95, "cosine CoNLL " + fmt("%.4f", cos_f1));
  o.require(reg_f1 >= 0.9, "regressor CoNLL " + fmt("%.4f", reg_f1));
  const auto& before = runs.transformed.dev_diagnostics_before;
  const auto& after = runs.transformed.dev_diagnostics_after;
  const bool have = before && after && before->cos_delta() && after->cos_delta();
  o.require(have, "dev cosine diagnostics missing");
  if (have) {
    o.require(*after->cos_delta() > *before->cos_delta(),
              "dev cosDelta " + fmt("%.9f", *before->cos_delta()) + " -> " +
                  fmt("%.9f", *after->cos_delta()));
  }
  o.require(runs.seconds < 300, "runtime " + fmt("%.1f", runs.seconds) + " s");
  if (o.pass) {
    o.detail = "cosine " + fmt("%.4f", cos_f1) + " (theta " +
               fmt("%.2f", runs.cosine.tuning->threshold) + "), regressor " +
               fmt("%.4f", reg_f1) + ", dev cosDelta " + fmt("%.9f", *before->cos_delta()) +
               " -> " + fmt("%.9f", *after->cos_delta()) + ", " + fmt("%.1f", runs.seconds) +
               " s";
  }
  return o;
}

bool same_bytes(const std::string& a, const std::string& b) {
  return detail::read_file(a) == detail::read_file(b);
}

Outcome determinism(const Bench& b, const BenchRuns& first) {
  Outcome o;
  auto tcfg = b.config("cosine", "cosine-transform-again");
  tcfg.train_transform = true;
  const auto transformed = run_pipeline(tcfg);
  const auto regressor = run_pipeline(b.config("regressor", "regressor-again"));
  const std::pair<const PipelineResult*, const PipelineResult*> runs[] = {
      {&first.transformed, &transformed}, {&first.regressor, &regressor}};
  int files = 0;
  for (const auto& [x, y] : runs) {
    for (const auto& [p, q] : {std::pair{x->report_path, y->report_path},
                               std::pair{x->checkpoint_path, y->checkpoint_path},
                               std::pair{x->system_path, y->system_path}}) {
      o.require(same_bytes(p, q), std::filesystem::path(p).filename().string() + " differs");
      ++files;
    }
  }
  if (o.pass) o.detail = std::to_string(files) + " files byte-identical across two runs";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  report("metric oracle equivalence", metric_oracles);
  report("worked examples", worked_examples);
  report("CoNLL average arithmetic", conll_rows);
  report("average of B3 and MUC", average_of_two);
  report("Hungarian optimality", hungarian);
  report("gradient checks", gradient_checks);

  const Bench bench;
  BenchRuns runs;
  report("identity transform is a no-op", [&] { return identity_noop(bench); });
  report("frozen transform is untouched", [&] { return freeze_contract(bench); });
  report("clustering", clustering);
  bool bench_ok = false;
  report("synthetic benchmark", [&] {
    auto o = benchmark(bench, runs);
    bench_ok = true;
    return o;
  });
  report("determinism", [&]() -> Outcome {
    if (!bench_ok) return {false, "benchmark runs did not complete"};
    return determinism(bench, runs);
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
