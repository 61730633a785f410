#include <gtest/gtest.h>

#include <algorithm>
#include <string>

#include "evlink/pairs.hpp"
#include "evlink/random.hpp"
#include "fixtures.hpp"

using namespace evlink;
using fixtures::MentionSpec;

namespace {

std::vector<std::pair<std::string, std::string>> ids(const std::vector<MentionPair>& ps) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : ps) out.emplace_back(p.first, p.second);
  return out;
}

using IdPairs = std::vector<std::pair<std::string, std::string>>;

Document random_doc(Rng& rng, std::size_t n) {
  std::vector<MentionSpec> specs;
  const char* lemmas[] = {"attack", "counterattack", "seize", "capture", "tack"};
  for (std::size_t i = 0; i < n; ++i) {
    MentionSpec s;
    if (!rng.bernoulli(0.2)) s.type = "T" + std::to_string(rng.below(3));
    if (!rng.bernoulli(0.2)) s.lemma = lemmas[rng.below(5)];
    if (!rng.bernoulli(0.2)) s.chain = "c" + std::to_string(rng.below(3));
    specs.push_back(s);
  }
  return fixtures::make_doc("d", specs);
}

}  // namespace

TEST(GeneratePairs, AllPrecedingOnThreeMentions) {
  const auto doc = fixtures::chain_doc("d", {std::nullopt, std::nullopt, std::nullopt});
  EXPECT_EQ(ids(generate_pairs(doc, PairStrategy::AllPreceding)),
            (IdPairs{{"m1", "m2"}, {"m1", "m3"}, {"m2", "m3"}}));
}

TEST(GeneratePairs, SameType) {
  const auto doc = fixtures::make_doc(
      "d", {{"Attack", std::nullopt, std::nullopt}, {"Attack", std::nullopt, std::nullopt},
            {"Transport", std::nullopt, std::nullopt}});
  EXPECT_EQ(ids(generate_pairs(doc, PairStrategy::SameType)), (IdPairs{{"m1", "m2"}}));
}

TEST(GeneratePairs, LemmaMatch) {
  const auto doc = fixtures::make_doc(
      "d", {{std::nullopt, "capture", std::nullopt}, {std::nullopt, "seize", std::nullopt},
            {std::nullopt, "capture", std::nullopt}});
  EXPECT_EQ(ids(generate_pairs(doc, PairStrategy::LemmaMatch)), (IdPairs{{"m1", "m3"}}));
}

TEST(GeneratePairs, CountsAndSubsets) {
  Rng rng(2, "pairs-props");
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng.below(15);
    const auto doc = random_doc(rng, n);
    const auto all = generate_pairs(doc, PairStrategy::AllPreceding);
    EXPECT_EQ(all.size(), n * (n - (n ? 1 : 0)) / 2);
    for (auto s : {PairStrategy::SameType, PairStrategy::LemmaMatch}) {
      const auto sub = generate_pairs(doc, s);
      // Subsequence of the full list, preserving order.
      auto it = all.begin();
      for (const auto& p : sub) {
        it = std::find(it, all.end(), p);
        ASSERT_NE(it, all.end());
      }
    }
    // First member always earlier in the document.
    for (const auto& p : all) {
      const auto pos = [&](const std::string& id) {
        return std::find_if(doc.mentions.begin(), doc.mentions.end(),
                            [&](const auto& m) { return m.mention_id == id; }) -
               doc.mentions.begin();
      };
      EXPECT_LT(pos(p.first), pos(p.second));
    }
  }
}

TEST(LabelPairs, Examples) {
  Clustering gold{"d", {{"m1", "m3"}, {"m2"}}};
  const auto labeled = label_pairs({{"m1", "m3", {}}, {"m1", "m2", {}}}, gold);
  EXPECT_EQ(labeled[0].label, true);
  EXPECT_EQ(labeled[1].label, false);

  const auto doc = fixtures::chain_doc("d", {std::nullopt, std::nullopt, std::nullopt, std::nullopt});
  for (const auto& p : label_pairs(generate_pairs(doc, PairStrategy::AllPreceding),
                                   gold_clustering(doc))) {
    EXPECT_EQ(p.label, false);
  }
  EXPECT_THROW(label_pairs({{"m1", "zz", {}}}, gold), ValidationError);
}

TEST(LabelPairs, PositiveLabelsAreTransitive) {
  Rng rng(4, "label-transitive");
  for (int trial = 0; trial < 200; ++trial) {
    const auto doc = random_doc(rng, rng.below(10));
    const auto labeled = label_pairs(generate_pairs(doc, PairStrategy::AllPreceding), gold_clustering(doc));
    std::map<std::pair<std::string, std::string>, bool> same;
    for (const auto& p : labeled) {
      same[{p.first, p.second}] = *p.label;
      same[{p.second, p.first}] = *p.label;
    }
    for (const auto& a : doc.mentions)
      for (const auto& b : doc.mentions)
        for (const auto& c : doc.mentions) {
          if (a.mention_id == b.mention_id || b.mention_id == c.mention_id ||
              a.mention_id == c.mention_id)
            continue;
          if (same[{a.mention_id, b.mention_id}] && same[{b.mention_id, c.mention_id}]) {
            EXPECT_TRUE((same[{a.mention_id, c.mention_id}]));
          }
        }
  }
}

TEST(DownsampleNegatives, KeepsPositivesAndDefaultsToEverything) {
  std::vector<MentionPair> pairs;
  for (int i = 0; i < 200; ++i) pairs.push_back({"a", "b" + std::to_string(i), i % 4 == 0});
  Rng rng(9, "ds");
  EXPECT_EQ(downsample_negatives(pairs, 1.0, rng), pairs);
  const auto kept = downsample_negatives(pairs, 0.0, rng);
  EXPECT_EQ(kept.size(), 50u);
  for (const auto& p : kept) EXPECT_TRUE(*p.label);
}

TEST(JointRepresentation, Examples) {
  const float e1[] = {1, 2}, e2[] = {3, 4};
  EXPECT_EQ(joint_representation(e1, e2).joint, (std::vector<float>{1, 2, 3, 4, 3, 8}));
  const std::vector<float> z(7, 0.0f);
  EXPECT_EQ(joint_representation(z, z).joint, std::vector<float>(21, 0.0f));
  const std::vector<float> big(1024, 0.5f);
  EXPECT_EQ(joint_representation(big, big).joint.size(), 3072u);
  const float three[] = {1, 2, 3};
  EXPECT_THROW(joint_representation(e1, three), DimensionError);
}

TEST(JointRepresentation, ProductBlockIsSymmetric) {
  Rng rng(6, "joint");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.below(12);
    std::vector<float> a(d), b(d);
    for (auto& x : a) x = static_cast<float>(rng.normal());
    for (auto& x : b) x = static_cast<float>(rng.normal());
    const auto ab = joint_representation(a, b), ba = joint_representation(b, a);
    ASSERT_EQ(ab.joint.size(), 3 * d);
    for (std::size_t i = 0; i < d; ++i) {
      EXPECT_EQ(ab.product()[i], ba.product()[i]);
      EXPECT_EQ(ab.joint[2 * d + i], a[i] * b[i]);
      EXPECT_EQ(ab.e1()[i], a[i]);
      EXPECT_EQ(ab.e2()[i], b[i]);
    }
  }
}

TEST(PairDump, RoundTrip) {
  const std::vector<MentionPair> pairs{{"m1", "m2", true}, {"m1", "m3", false}, {"m2", "m3", {}}};
  EXPECT_EQ(parse_pair_dump(pair_dump(pairs)), pairs);
  EXPECT_THROW(parse_pair_dump("{\"first\":\"a\",\"second\":\"b\",\"label\":3}\n"), ParseError);
}

TEST(PairStrategyNames, RoundTrip) {
  for (auto s : {PairStrategy::AllPreceding, PairStrategy::SameType, PairStrategy::LemmaMatch}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_THROW(parse_strategy("nearest"), ValidationError);
}
