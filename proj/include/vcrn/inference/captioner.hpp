#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcrn/corpus/vocabulary.hpp"
#include "vcrn/inference/beam_search.hpp"
#include "vcrn/model/caption_model.hpp"

namespace vcrn::inference {

using numerics::Matrix;

/// Adapts a trained captioner, with one video already encoded, to the
/// step-model interface. Runs in eval mode without recording gradients.
template <class Real>
class CaptionStepModel {
 public:
  using State = model::DecoderState<Real>;

  CaptionStepModel(const model::CaptionModel<Real>& m, const Matrix<float>& features) : m_(m) {
    numerics::NoGradGuard no_grad;
    numerics::Rng unused(0);
    enc_ = m_.encode(features, false, unused);
  }

  State initial_state() const { return m_.initial_state(); }
  std::int32_t start_token() const { return corpus::kBosId; }

  std::pair<State, std::vector<double>> advance(const State& s, std::int32_t tok) const {
    numerics::NoGradGuard no_grad;
    auto out = m_.step(enc_, tok, s);
    std::vector<double> logp;
    logp.reserve(out.probs.cols());
    for (Real p : out.probs.value().data())
      logp.push_back(std::log(std::max(static_cast<double>(p), 1e-300)));
    return {std::move(out.state), std::move(logp)};
  }

  const model::EncodedVideo<Real>& encoded() const { return enc_; }

 private:
  const model::CaptionModel<Real>& m_;
  model::EncodedVideo<Real> enc_;
};

/// pad and bos never appear inside a generated caption.
inline DecodeOptions caption_options(std::size_t max_len = corpus::kDefaultMaxWords) {
  return DecodeOptions{.max_len = max_len, .eos_id = corpus::kEosId,
                       .banned = {corpus::kPadId, corpus::kBosId}, .length_alpha = 0};
}

struct CaptionResult {
  std::string video_id;
  std::string caption;
  std::vector<std::int32_t> tokens;
  double score = 0;

  nlohmann::json to_json() const {
    return {{"video_id", video_id}, {"caption", caption}, {"score", score},
            {"length", tokens.size()}};
  }
};

/// beam = 1 runs the greedy decoder.
template <class Real>
CaptionResult caption_video(const model::CaptionModel<Real>& m, const corpus::Vocabulary& vocab,
                            const corpus::Video& video, std::size_t beam,
                            const DecodeOptions& opt) {
  CaptionStepModel<Real> step(m, video.features);
  Hypothesis h = beam == 1 ? greedy_decode(step, opt) : beam_search(step, beam, opt).best;
  return {video.id, vocab.decode(h.tokens), h.tokens, h.score};
}

/// Per-step diagnostics of decoding `tokens` (eos appended) for one video.
struct AttentionRecord {
  std::size_t step = 0;
  std::int32_t token = 0;
  std::string word;
  std::vector<double> alpha_video;
  std::vector<double> alpha_concept;
  double lambda_mean = 0;  // 0 when the strategy has no gate
  std::vector<std::size_t> top_concepts;
  std::vector<double> top_weights;

  nlohmann::json to_json() const {
    return {{"step", step}, {"token", token}, {"word", word}, {"alpha_video", alpha_video},
            {"alpha_concept", alpha_concept}, {"lambda_mean", lambda_mean},
            {"top_concepts", top_concepts}, {"top_weights", top_weights}};
  }
};

/// First-block similarity S averaged over heads: L × M.
template <class Real>
Matrix<double> head_averaged_similarity(const model::EncodedVideo<Real>& enc) {
  if (enc.attention.empty() || enc.attention[0].empty()) return {};
  const auto& heads = enc.attention[0];
  Matrix<double> s(heads[0].rows(), heads[0].cols());
  for (const auto& h : heads)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += static_cast<double>(h[i]) / heads.size();
  return s;
}

/// Dictionary entries ranked by S mass summed over frames, best first, ties by index.
inline std::vector<std::size_t> rank_concepts(const Matrix<double>& s, std::vector<double>* mass) {
  std::vector<double> col(s.cols(), 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) col[j] += s(i, j) / static_cast<double>(s.rows());
  std::vector<std::size_t> idx(s.cols());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return col[a] > col[b]; });
  if (mass) *mass = std::move(col);
  return idx;
}

template <class Real>
std::vector<AttentionRecord> dump_attention(const model::CaptionModel<Real>& m,
                                            const corpus::Vocabulary& vocab,
                                            const corpus::Video& video,
                                            std::vector<std::int32_t> tokens, std::size_t top_k = 5) {
  CaptionStepModel<Real> step(m, video.features);
  std::vector<double> mass;
  const Matrix<double> s = head_averaged_similarity(step.encoded());
  std::vector<std::size_t> ranked = s.size() ? rank_concepts(s, &mass) : std::vector<std::size_t>{};
  ranked.resize(std::min(top_k, ranked.size()));
  std::vector<double> weights;
  for (std::size_t j : ranked) weights.push_back(mass[j]);

  tokens.push_back(corpus::kEosId);
  std::vector<AttentionRecord> out;
  numerics::NoGradGuard no_grad;
  auto state = m.initial_state();
  std::int32_t prev = corpus::kBosId;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto o = m.step(step.encoded(), prev, state);
    AttentionRecord r;
    r.step = t;
    r.token = tokens[t];
    r.word = vocab.token(tokens[t]);
    for (Real a : o.diagnostics.alpha_video.data()) r.alpha_video.push_back(a);
    for (Real a : o.diagnostics.alpha_concept.data()) r.alpha_concept.push_back(a);
    const auto& lam = o.diagnostics.lambda;
    if (lam.size()) {
      double sum = 0;
      for (Real l : lam.data()) sum += l;
      r.lambda_mean = sum / static_cast<double>(lam.size());
    }
    r.top_concepts = ranked;
    r.top_weights = weights;
    out.push_back(std::move(r));
    state = o.state;
    prev = tokens[t];
  }
  return out;
}

}  // namespace vcrn::inference
