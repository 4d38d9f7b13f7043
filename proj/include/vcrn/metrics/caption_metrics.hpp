#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcrn/corpus/vocabulary.hpp"
#include "vcrn/error.hpp"

namespace vcrn::metrics {

using Sentence = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

inline constexpr double kZeroPrecision = 1e-9;

inline NgramCounts ngrams(const Sentence& s, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++out[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                   s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

inline void check_inputs(const std::vector<Sentence>& hyps,
                         const std::vector<std::vector<Sentence>>& refs) {
  if (hyps.empty()) throw ContractError("no hypotheses to score");
  if (hyps.size() != refs.size()) {
    throw DimensionError(std::to_string(hyps.size()) + " hypotheses but " +
                         std::to_string(refs.size()) + " reference sets");
  }
  for (std::size_t i = 0; i < refs.size(); ++i)
    if (refs[i].empty()) throw ContractError("hypothesis " + std::to_string(i) + " has no references");
}

/// Corpus BLEU-4: clipped n-gram precisions pooled over the corpus, geometric
/// mean with a closest-reference-length brevity penalty. A zero precision
/// (including 0/0) is replaced by 1e-9.
inline double bleu4(const std::vector<Sentence>& hyps, const std::vector<std::vector<Sentence>>& refs) {
  check_inputs(hyps, refs);
  double matched[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  double hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const Sentence& h = hyps[i];
    hyp_len += static_cast<double>(h.size());
    std::size_t closest = refs[i][0].size();
    for (const auto& r : refs[i]) {
      const auto dr = std::abs(static_cast<long>(r.size()) - static_cast<long>(h.size()));
      const auto dc = std::abs(static_cast<long>(closest) - static_cast<long>(h.size()));
      if (dr < dc || (dr == dc && r.size() < closest)) closest = r.size();
    }
    ref_len += static_cast<double>(closest);
    for (std::size_t n = 1; n <= 4; ++n) {
      NgramCounts max_ref;
      for (const auto& r : refs[i])
        for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : ngrams(h, n)) {
        auto it = max_ref.find(g);
        matched[n - 1] += static_cast<double>(std::min(c, it == max_ref.end() ? 0 : it->second));
        total[n - 1] += static_cast<double>(c);
      }
    }
  }
  double log_sum = 0;
  for (int n = 0; n < 4; ++n) {
    const double p = matched[n] > 0 ? matched[n] / total[n] : kZeroPrecision;
    log_sum += std::log(p);
  }
  if (hyp_len == 0) return 0;
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1 - ref_len / hyp_len);
  return bp * std::exp(log_sum / 4);
}

struct CiderScore {
  double corpus = 0;
  std::vector<double> per_video;
  bool degenerate_idf = false;  // one video: every idf is zero
};

/// Plain CIDEr: tf-idf n-gram vectors (df counted over reference sets),
/// cosine between hypothesis and each reference, averaged over references,
/// then over n = 1..4, times 10; the corpus score is the mean over videos.
inline CiderScore cider(const std::vector<Sentence>& hyps,
                        const std::vector<std::vector<Sentence>>& refs) {
  check_inputs(hyps, refs);
  const double n_videos = static_cast<double>(refs.size());
  CiderScore out;
  out.degenerate_idf = refs.size() == 1;
  out.per_video.assign(hyps.size(), 0.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, double> df;
    for (const auto& set : refs) {
      std::set<std::vector<std::string>> seen;
      for (const auto& r : set)
        for (const auto& [g, _] : ngrams(r, n)) seen.insert(g);
      for (const auto& g : seen) df[g] += 1;
    }
    auto vec = [&](const Sentence& s) {
      std::map<std::vector<std::string>, double> v;
      const NgramCounts c = ngrams(s, n);
      double count = 0;
      for (const auto& [_, k] : c) count += static_cast<double>(k);
      for (const auto& [g, k] : c) {
        auto it = df.find(g);
        const double d = it == df.end() ? 1.0 : std::max(1.0, it->second);
        v[g] = static_cast<double>(k) / count * std::log(n_videos / d);
      }
      return v;
    };
    auto norm = [](const std::map<std::vector<std::string>, double>& v) {
      double s = 0;
      for (const auto& [_, x] : v) s += x * x;
      return std::sqrt(s);
    };
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      const auto hv = vec(hyps[i]);
      const double hn = norm(hv);
      double sum = 0;
      for (const auto& r : refs[i]) {
        const auto rv = vec(r);
        const double rn = norm(rv);
        if (hn == 0 || rn == 0) continue;
        double dot = 0;
        for (const auto& [g, x] : hv) {
          auto it = rv.find(g);
          if (it != rv.end()) dot += x * it->second;
        }
        sum += dot / (hn * rn);
      }
      out.per_video[i] += 10.0 * sum / static_cast<double>(refs[i].size()) / 4.0;
    }
  }
  for (double s : out.per_video) out.corpus += s;
  out.corpus /= n_videos;
  return out;
}

/// Caption text split the same way training captions are.
inline Sentence tokenize(const std::string& text) { return corpus::split_words(text); }

struct EvalReport {
  double bleu4 = 0;
  double cider = 0;
  std::size_t num_videos = 0;
  std::size_t num_refs_total = 0;
  bool degenerate_idf = false;

  nlohmann::json to_json() const {
    return {{"bleu4", bleu4}, {"cider", cider}, {"num_videos", num_videos},
            {"num_refs_total", num_refs_total}};
  }
};

/// Scores one hypothesis string per video against raw reference strings.
inline EvalReport evaluate_captions(const std::vector<std::string>& hyps,
                                    const std::vector<std::vector<std::string>>& refs) {
  std::vector<Sentence> h;
  std::vector<std::vector<Sentence>> r;
  EvalReport rep;
  for (const auto& s : hyps) h.push_back(tokenize(s));
  for (const auto& set : refs) {
    r.emplace_back();
    for (const auto& s : set) r.back().push_back(tokenize(s));
    rep.num_refs_total += set.size();
  }
  rep.num_videos = hyps.size();
  rep.bleu4 = bleu4(h, r);
  CiderScore c = cider(h, r);
  rep.cider = c.corpus;
  rep.degenerate_idf = c.degenerate_idf;
  return rep;
}

}  // namespace vcrn::metrics
