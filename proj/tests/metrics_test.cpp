#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "vcrn/metrics/caption_metrics.hpp"

namespace vcrn::metrics {
namespace {

Sentence S(const std::string& s) { return tokenize(s); }

struct Toy {
  std::vector<Sentence> hyps{S("a man is playing a guitar"), S("a dog runs in the park"),
                             S("a woman is cooking food")};
  std::vector<std::vector<Sentence>> refs{
      {S("a man is playing a guitar"), S("a man plays the guitar")},
      {S("a dog is running in a park"), S("the dog runs"), S("a puppy plays in the park")},
      {S("a woman cooks food in a kitchen"), S("someone is cooking")}};
};

TEST(Bleu4, IdenticalToOnlyReferenceIsOne) {
  EXPECT_DOUBLE_EQ(bleu4({S("a cat sat on the mat")}, {{S("a cat sat on the mat")}}), 1.0);
}

TEST(Bleu4, NoSharedUnigramIsNearZero) {
  EXPECT_LE(bleu4({S("x y z w")}, {{S("a b c d")}}), 1e-6);
}

TEST(Bleu4, ShortHypothesisHandValue) {
  // precisions 3/3, 2/2, 1/1, 0 → 1e-9; BP = exp(1 - 4/3)
  const double want = std::exp(1 - 4.0 / 3) * std::pow(1e-9, 0.25);
  EXPECT_NEAR(bleu4({S("the cat sat")}, {{S("the cat sat down")}}), want, 1e-9);
  EXPECT_NEAR(want, 0.0040293516672844235, 1e-15);
}

TEST(Bleu4, ClippingAndClosestLengthOracle) {
  double got = bleu4({S("the the the the the cat"), S("a dog is running in a park")},
                     {{S("the cat is on the mat"), S("there is a cat")},
                      {S("a dog is running in the park"), S("a dog runs")}});
  EXPECT_NEAR(got, 0.4160751652217845, 1e-12);
  Toy t;
  EXPECT_NEAR(bleu4(t.hyps, t.refs), 0.6049483675122199, 1e-12);
}

TEST(Bleu4, OrderInvarianceAndRange) {
  Toy t;
  const double base = bleu4(t.hyps, t.refs);
  std::vector<std::size_t> perm{2, 0, 1};
  std::vector<Sentence> h;
  std::vector<std::vector<Sentence>> r;
  for (auto i : perm) {
    h.push_back(t.hyps[i]);
    auto set = t.refs[i];
    std::reverse(set.begin(), set.end());
    r.push_back(set);
  }
  EXPECT_DOUBLE_EQ(bleu4(h, r), base);
  EXPECT_GE(base, 0);
  EXPECT_LE(base, 1);
}

TEST(Bleu4, SwappingInAReferenceNeverHurtsThatVideo) {
  Toy t;
  for (std::size_t i = 0; i < t.hyps.size(); ++i) {
    const double before = bleu4({t.hyps[i]}, {t.refs[i]});
    for (const auto& ref : t.refs[i]) {
      if (ref.size() < 4) continue;  // shorter sentences have no 4-grams to match
      EXPECT_GE(bleu4({ref}, {t.refs[i]}), before) << i;
      EXPECT_DOUBLE_EQ(bleu4({ref}, {t.refs[i]}), 1.0) << i;
    }
  }
}

TEST(Bleu4, CorpusPoolingCanDropWhenSwappingInAReference) {
  // The first hypothesis already equals a 6-word reference; the 5-word
  // reference is also perfect but carries fewer n-grams into the pooled
  // precisions, so the corpus score falls.
  Toy t;
  auto h = t.hyps;
  h[0] = t.refs[0][1];
  EXPECT_LT(bleu4(h, t.refs), bleu4(t.hyps, t.refs));
}

TEST(Bleu4, Errors) {
  EXPECT_THROW(bleu4({}, {}), ContractError);
  EXPECT_THROW(bleu4({S("a")}, {}), DimensionError);
  EXPECT_THROW(bleu4({S("a")}, {{}}), ContractError);
}

TEST(Cider, ToyCorpusMatchesDefinitionOracle) {
  Toy t;
  CiderScore c = cider(t.hyps, t.refs);
  EXPECT_NEAR(c.corpus, 3.583676042328319, 1e-6);
  EXPECT_NEAR(c.per_video[0], 6.236999134073815, 1e-6);
  EXPECT_NEAR(c.per_video[1], 2.576294468850271, 1e-6);
  EXPECT_NEAR(c.per_video[2], 1.9377345240608714, 1e-6);
  EXPECT_FALSE(c.degenerate_idf);
}

TEST(Cider, NoOverlapScoresZero) {
  Toy t;
  auto h = t.hyps;
  h[1] = S("zebra quantum");
  EXPECT_EQ(cider(h, t.refs).per_video[1], 0.0);
}

TEST(Cider, NonNegativeAndOrderInvariant) {
  Toy t;
  const double base = cider(t.hyps, t.refs).corpus;
  std::vector<Sentence> h{t.hyps[1], t.hyps[2], t.hyps[0]};
  std::vector<std::vector<Sentence>> r{t.refs[1], t.refs[2], t.refs[0]};
  for (auto& set : r) std::reverse(set.begin(), set.end());
  EXPECT_NEAR(cider(h, r).corpus, base, 1e-12);
  for (double s : cider(t.hyps, t.refs).per_video) EXPECT_GE(s, 0);
}

TEST(Cider, SingleVideoIsFlaggedDegenerate) {
  CiderScore c = cider({S("a b")}, {{S("a b")}});
  EXPECT_TRUE(c.degenerate_idf);
  EXPECT_EQ(c.corpus, 0.0);
}

// Every substitution, deletion and insertion of one token around a reference.
std::vector<Sentence> single_edits(const Sentence& s, const std::set<std::string>& words) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Sentence d = s;
    d.erase(d.begin() + static_cast<std::ptrdiff_t>(i));
    out.push_back(d);
    for (const auto& w : words) {
      if (w == s[i]) continue;
      Sentence sub = s;
      sub[i] = w;
      out.push_back(sub);
    }
  }
  for (std::size_t i = 0; i <= s.size(); ++i)
    for (const auto& w : words) {
      Sentence ins = s;
      ins.insert(ins.begin() + static_cast<std::ptrdiff_t>(i), w);
      out.push_back(ins);
    }
  return out;
}

TEST(Cider, ExactReferenceBeatsEverySingleEdit) {
  std::vector<std::vector<Sentence>> refs{{S("a man is playing a guitar")},
                                          {S("a dog is running in the park")},
                                          {S("a woman cooks food in a kitchen")}};
  std::set<std::string> words{"zebra"};
  for (const auto& set : refs)
    for (const auto& r : set) words.insert(r.begin(), r.end());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::vector<Sentence> hyps{refs[0][0], refs[1][0], refs[2][0]};
    const double exact = cider(hyps, refs).corpus;
    for (const auto& e : single_edits(refs[i][0], words)) {
      hyps[i] = e;
      ASSERT_LE(cider(hyps, refs).corpus, exact + 1e-12) << i;
    }
  }
}

TEST(EvalReport, IdenticalCorpusGivesBleuOne) {
  std::vector<std::string> hyps{"a man is playing a guitar", "the dog runs in the park"};
  std::vector<std::vector<std::string>> refs{{"A man is playing a guitar."},
                                             {"the dog runs in the park"}};
  EvalReport r = evaluate_captions(hyps, refs);
  EXPECT_DOUBLE_EQ(r.bleu4, 1.0);
  EXPECT_EQ(r.num_videos, 2u);
  EXPECT_EQ(r.num_refs_total, 2u);
  auto j = r.to_json();
  EXPECT_EQ(j["bleu4"], 1.0);
  EXPECT_TRUE(j.contains("cider"));
}

}  // namespace
}  // namespace vcrn::metrics
