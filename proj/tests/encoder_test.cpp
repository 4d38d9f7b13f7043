#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "vcrn/model/encoder.hpp"
#include "vcrn/numerics/gradcheck.hpp"

namespace vcrn::model {
namespace {

using M = Matrix<double>;
using V = Var<double>;

M random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  M m(r, c);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

CmcaBlockParams<double> random_block(std::size_t d, std::mt19937_64& rng) {
  return {V::leaf(random_matrix(d, d, rng, 0.5)), V::leaf(random_matrix(d, d, rng, 0.5)),
          V::leaf(random_matrix(d, d, rng, 0.5)), V::leaf(random_matrix(d, d, rng, 0.5)),
          V::leaf(random_matrix(1, d, rng, 1.0)), V::leaf(random_matrix(1, d, rng, 0.2))};
}

// Straight loops over the block definition, in long double.
M cmca_oracle(const M& x, const M& c, const CmcaBlockParams<double>& p, std::size_t heads,
              double eps) {
  const std::size_t L = x.rows(), Mc = c.rows(), d = x.cols(), dh = d / heads;
  auto project = [&](const M& in, const M& w) {
    M out(in.rows(), w.rows());
    for (std::size_t i = 0; i < in.rows(); ++i)
      for (std::size_t o = 0; o < w.rows(); ++o) {
        long double s = 0;
        for (std::size_t k = 0; k < in.cols(); ++k) s += (long double)in(i, k) * w(o, k);
        out(i, o) = double(s);
      }
    return out;
  };
  M q = project(x, p.query.value()), k = project(c, p.key.value()), v = project(c, p.value.value());
  M cat(L, d);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < L; ++i) {
      std::vector<long double> logits(Mc);
      for (std::size_t j = 0; j < Mc; ++j) {
        long double s = 0;
        for (std::size_t t = 0; t < dh; ++t) s += (long double)q(i, h * dh + t) * k(j, h * dh + t);
        logits[j] = s / std::sqrt((long double)dh);
      }
      long double mx = *std::max_element(logits.begin(), logits.end()), z = 0;
      for (auto& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t t = 0; t < dh; ++t) {
        long double s = 0;
        for (std::size_t j = 0; j < Mc; ++j) s += logits[j] / z * v(j, h * dh + t);
        cat(i, h * dh + t) = double(s);
      }
    }
  }
  M cs = project(cat, p.output.value());
  M out(L, d);
  for (std::size_t i = 0; i < L; ++i) {
    long double mean = 0, var = 0;
    for (std::size_t t = 0; t < d; ++t) mean += cs(i, t);
    mean /= d;
    for (std::size_t t = 0; t < d; ++t) var += (cs(i, t) - mean) * (cs(i, t) - mean);
    var /= d;
    for (std::size_t t = 0; t < d; ++t) {
      long double n = (cs(i, t) - mean) / std::sqrt(var + eps);
      out(i, t) = double(x(i, t) + n * p.ln_gain.value()(0, t) + p.ln_bias.value()(0, t));
    }
  }
  return out;
}

TEST(ScaledSimilarity, HandCase) {
  V q = V::constant(M{{1, 0}});
  V k = V::constant(M{{1, 0}, {0, 1}});
  M s = scaled_similarity(q, k).value();
  const double e = std::exp(1 / std::sqrt(2.0));
  EXPECT_NEAR(s(0, 0), e / (e + 1), 1e-15);
  EXPECT_NEAR(s(0, 1), 1 / (e + 1), 1e-15);
}

TEST(ScaledSimilarity, RowsAreDistributions) {
  std::mt19937_64 rng(3);
  M s = scaled_similarity(V::constant(random_matrix(5, 4, rng, 3)),
                          V::constant(random_matrix(7, 4, rng, 3)))
            .value();
  ASSERT_EQ(s.cols(), 7u);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double sum = 0;
    for (double v : s.row(i)) {
      EXPECT_GT(v, 0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1, 1e-12);
  }
}

TEST(ScaledSimilarity, WidthMismatchThrows) {
  EXPECT_THROW(scaled_similarity(V::constant(M(2, 3)), V::constant(M(2, 4))), DimensionError);
}

TEST(CmcaForward, MatchesLoopOracle) {
  std::mt19937_64 rng(11);
  EncoderConfig cfg{.d_model = 8, .heads = 2, .blocks = 1, .dropout = 0.3};
  auto p = random_block(8, rng);
  M x = random_matrix(5, 8, rng), c = random_matrix(6, 8, rng);
  numerics::Rng drop(0);
  auto r = cmca_forward(V::constant(x), V::constant(c), p, cfg, false, drop, 1e-5);
  M want = cmca_oracle(x, c, p, 2, 1e-5);
  EXPECT_LT(numerics::max_abs_diff(r.output.value(), want), 1e-12);
  ASSERT_EQ(r.attention.size(), 2u);
  EXPECT_EQ(r.attention[0].shape_string(), "[5x6]");
}

TEST(CmcaForward, DictionaryRowOrderDoesNotMatter) {
  std::mt19937_64 rng(5);
  EncoderConfig cfg{.d_model = 8, .heads = 4, .blocks = 1, .dropout = 0};
  auto p = random_block(8, rng);
  M x = random_matrix(4, 8, rng), c = random_matrix(6, 8, rng);
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  M cp(6, 8);
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t t = 0; t < 8; ++t) cp(j, t) = c(perm[j], t);
  numerics::Rng drop(0);
  auto a = cmca_forward(V::constant(x), V::constant(c), p, cfg, false, drop);
  auto b = cmca_forward(V::constant(x), V::constant(cp), p, cfg, false, drop);
  EXPECT_LT(numerics::max_abs_diff(a.output.value(), b.output.value()), 1e-12);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      EXPECT_NEAR(b.attention[1](i, j), a.attention[1](i, perm[j]), 1e-14);
}

TEST(CmcaForward, EvalIsDeterministicAndTrainUsesDropout) {
  std::mt19937_64 rng(9);
  EncoderConfig cfg{.d_model = 8, .heads = 2, .blocks = 1, .dropout = 0.5};
  auto p = random_block(8, rng);
  V x = V::constant(random_matrix(4, 8, rng)), c = V::constant(random_matrix(3, 8, rng));
  numerics::Rng r1(1), r2(2);
  EXPECT_EQ(cmca_forward(x, c, p, cfg, false, r1).output.value(),
            cmca_forward(x, c, p, cfg, false, r2).output.value());
  numerics::Rng t1(1), t2(2), t1b(1);
  M a = cmca_forward(x, c, p, cfg, true, t1).output.value();
  EXPECT_NE(a, cmca_forward(x, c, p, cfg, true, t2).output.value());
  EXPECT_EQ(a, cmca_forward(x, c, p, cfg, true, t1b).output.value());
}

TEST(CmcaForward, WrongWidthThrows) {
  std::mt19937_64 rng(1);
  EncoderConfig cfg{.d_model = 8, .heads = 2, .blocks = 1, .dropout = 0};
  auto p = random_block(8, rng);
  numerics::Rng drop(0);
  EXPECT_THROW(cmca_forward(V::constant(M(3, 6)), V::constant(M(2, 8)), p, cfg, false, drop),
               DimensionError);
  cfg.heads = 3;
  EXPECT_THROW(cmca_forward(V::constant(M(3, 8)), V::constant(M(2, 8)), p, cfg, false, drop),
               ConfigError);
}

TEST(VcsEncode, StacksBlocksAndKeepsEveryAttentionMap) {
  std::mt19937_64 rng(21);
  EncoderConfig cfg{.d_model = 8, .heads = 2, .blocks = 3, .dropout = 0};
  std::vector<CmcaBlockParams<double>> blocks;
  for (int b = 0; b < 3; ++b) blocks.push_back(random_block(8, rng));
  M x = random_matrix(4, 8, rng), c = random_matrix(5, 8, rng);
  numerics::Rng drop(0);
  auto out = vcs_encode(V::constant(x), V::constant(c), blocks, cfg, false, drop);
  M want = x;
  for (const auto& b : blocks) want = cmca_oracle(want, c, b, 2, 1e-5);
  EXPECT_LT(numerics::max_abs_diff(out.concept_feature.value(), want), 1e-11);
  ASSERT_EQ(out.attention.size(), 3u);
  EXPECT_EQ(out.attention[2].size(), 2u);
  EXPECT_THROW(vcs_encode(V::constant(x), V::constant(c), {}, cfg, false, drop), ConfigError);
}

TEST(VcsEncode, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  EncoderConfig cfg{.d_model = 8, .heads = 2, .blocks = 2, .dropout = 0.2};
  numerics::ParameterStore<double> store;
  std::vector<CmcaBlockParams<double>> blocks;
  for (int b = 0; b < 2; ++b) {
    const std::string pre = "block" + std::to_string(b) + ".";
    CmcaBlockParams<double> p;
    p.query = store.add(pre + "query", random_matrix(8, 8, rng, 0.5));
    p.key = store.add(pre + "key", random_matrix(8, 8, rng, 0.5));
    p.value = store.add(pre + "value", random_matrix(8, 8, rng, 0.5));
    p.output = store.add(pre + "output", random_matrix(8, 8, rng, 0.5));
    p.ln_gain = store.add(pre + "ln_gain", random_matrix(1, 8, rng, 1));
    p.ln_bias = store.add(pre + "ln_bias", random_matrix(1, 8, rng, 1));
    blocks.push_back(p);
  }
  V x = V::constant(random_matrix(3, 8, rng));
  V& c = store.add("centers", random_matrix(4, 8, rng));
  V weights = V::constant(random_matrix(3, 8, rng));
  auto loss = [&] {
    numerics::Rng drop(77);  // same mask on every evaluation
    auto out = vcs_encode(x, c, blocks, cfg, true, drop);
    return numerics::sum_all(numerics::hadamard(out.concept_feature, weights));
  };
  auto report = numerics::check_gradients<double>(loss, store, 1e-5);
  EXPECT_LT(report.max_relative_error, 1e-6) << report.worst_parameter;
  EXPECT_EQ(report.parameters.size(), store.size());
}

}  // namespace
}  // namespace vcrn::model
