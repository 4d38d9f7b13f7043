#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vcrn/model/decoder.hpp"
#include "vcrn/model/encoder.hpp"
#include "vcrn/numerics/graph.hpp"

namespace vcrn::model {

using numerics::ParameterStore;

inline constexpr char kDictionaryParam[] = "dictionary.centers";

template <class Real>
struct EncodedVideo {
  Var<Real> frames;    // V after the shared input projection, L × d_model
  Var<Real> concepts;  // Ĉ, L × d_model; null when the dictionary branch is off
  Var<Real> mean;      // v̄, 1 × d_model
  std::vector<std::vector<Matrix<Real>>> attention;  // [block][head] → L × M
};

template <class Real>
struct StepDiagnostics {
  Matrix<Real> alpha_video;
  Matrix<Real> alpha_concept;
  Matrix<Real> lambda;  // empty unless the strategy is GATE
  Matrix<Real> video_context;    // V′
  Matrix<Real> concept_context;  // C′
  Matrix<Real> fused;            // e′
};

template <class Real>
struct StepOutput {
  Var<Real> probs;  // 1 × |vocab|
  DecoderState<Real> state;
  StepDiagnostics<Real> diagnostics;
};

/// Test and ablation hooks for a single decode step.
template <class Real>
struct StepOptions {
  std::optional<Real> forced_lambda{};  // replaces λ by a constant vector
  Matrix<Real> video_context_delta{};    // added to V′ when non-empty
  Matrix<Real> concept_context_delta{};  // added to C′ when non-empty
};

/// Dictionary-aware captioner: input projection, stacked C-MCA blocks and the
/// gated two-LSTM decoder, with every weight registered in one store.
template <class Real>
class CaptionModel {
 public:
  explicit CaptionModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.init_seed);
    build(rng);
  }
  // Member handles alias the store's nodes, so a copy would share weights.
  CaptionModel(const CaptionModel&) = delete;
  CaptionModel& operator=(const CaptionModel&) = delete;
  CaptionModel(CaptionModel&&) = default;
  CaptionModel& operator=(CaptionModel&&) = default;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<Real>& params() { return store_; }
  const ParameterStore<Real>& params() const { return store_; }

  /// Installs M × feature_dim centers. In joint mode they become a trainable
  /// parameter; otherwise they stay a constant.
  void set_dictionary(const Matrix<float>& centers) {
    if (!cfg_.use_dictionary) return;
    if (centers.rows() != cfg_.num_concepts || centers.cols() != cfg_.feature_dim) {
      throw DimensionError("dictionary " + centers.shape_string() + " does not match model (M = " +
                           std::to_string(cfg_.num_concepts) + ", d = " +
                           std::to_string(cfg_.feature_dim) + ")");
    }
    if (cfg_.fixed_dictionary) {
      dictionary_ = Var<Real>::constant(centers.template cast<Real>());
    } else {
      store_.at(kDictionaryParam).mutable_value() = centers.template cast<Real>();
      dictionary_ = store_.at(kDictionaryParam);
    }
    has_dictionary_ = true;
  }
  bool has_dictionary() const { return has_dictionary_; }
  Matrix<float> dictionary_centers() const {
    if (!dictionary_) return {};
    return dictionary_.value().template cast<float>();
  }

  EncodedVideo<Real> encode(const Matrix<float>& features, bool train, numerics::Rng& rng) const {
    using namespace numerics;
    if (features.cols() != cfg_.feature_dim || features.rows() == 0) {
      throw DimensionError("video features " + features.shape_string() +
                           " do not match model feature_dim " + std::to_string(cfg_.feature_dim));
    }
    EncodedVideo<Real> out;
    out.frames = project(Var<Real>::constant(features.template cast<Real>()));
    out.mean = mean_pool_video(out.frames);
    if (cfg_.use_dictionary) {
      if (!has_dictionary_) throw ConfigError("model has no dictionary installed");
      auto vcs = vcs_encode(out.frames, project(dictionary_), blocks_, cfg_.encoder, train, rng,
                            static_cast<Real>(cfg_.layer_norm_eps));
      out.concepts = vcs.concept_feature;
      out.attention = std::move(vcs.attention);
    }
    return out;
  }

  StepOutput<Real> step(const EncodedVideo<Real>& enc, std::int32_t prev_token,
                        const DecoderState<Real>& state,
                        const StepOptions<Real>& opt = {}) const {
    using namespace numerics;
    StepOutput<Real> out;
    LstmState<Real> att = attention_lstm_step(state.language.h, enc.mean, prev_token, embedding_,
                                              state.attention, att_lstm_);
    AttendedContext<Real> v_ctx = attend(enc.frames, att.h, att_video_);
    AttendedContext<Real> c_ctx = v_ctx;
    if (cfg_.use_dictionary) c_ctx = attend(enc.concepts, att.h, att_concept_);
    Var<Real> video_ctx = offset(v_ctx.context, opt.video_context_delta);
    Var<Real> concept_ctx = offset(c_ctx.context, opt.concept_context_delta);

    Var<Real> lambda;
    if (cfg_.strategy == FusionStrategy::kGate) {
      lambda = opt.forced_lambda
                   ? Var<Real>::constant(Matrix<Real>(1, cfg_.d_model(), *opt.forced_lambda))
                   : gate_lambda(video_ctx, concept_ctx, att.h, gate_weight_);
      out.diagnostics.lambda = lambda.value();
    }
    Var<Real> fused = fuse(video_ctx, concept_ctx, lambda, att.h, cfg_.strategy, fusion_);
    LanguageOutput<Real> lang =
        language_lstm_step(att.h, fused, state.language, lang_lstm_, out_weight_, out_bias_);
    out.probs = lang.probs;
    out.state = {att, lang.state};
    out.diagnostics.alpha_video = v_ctx.weights.value();
    out.diagnostics.alpha_concept = c_ctx.weights.value();
    out.diagnostics.video_context = video_ctx.value();
    out.diagnostics.concept_context = concept_ctx.value();
    out.diagnostics.fused = fused.value();
    return out;
  }

  DecoderState<Real> initial_state() const { return DecoderState<Real>::zeros(cfg_.d_hidden); }

  /// Teacher-forced distributions p_1..p_T for tokens[1..]: step t is fed
  /// tokens[t-1].
  std::vector<Var<Real>> teacher_forced(const Matrix<float>& features,
                                        const std::vector<std::int32_t>& tokens, bool train,
                                        numerics::Rng& rng) const {
    if (tokens.size() < 2) throw ContractError("teacher_forced: need at least bos and one target");
    EncodedVideo<Real> enc = encode(features, train, rng);
    DecoderState<Real> state = initial_state();
    std::vector<Var<Real>> probs;
    probs.reserve(tokens.size() - 1);
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      StepOutput<Real> s = step(enc, tokens[t - 1], state);
      probs.push_back(s.probs);
      state = std::move(s.state);
    }
    return probs;
  }

 private:
  Var<Real>& weight(const std::string& name, std::size_t rows, std::size_t cols,
                    std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-cfg_.init_range, cfg_.init_range);
    Matrix<Real> m(rows, cols);
    for (auto& v : m.data()) v = static_cast<Real>(u(rng));
    return store_.add(name, std::move(m));
  }
  Var<Real>& filled(const std::string& name, std::size_t rows, std::size_t cols, Real value) {
    return store_.add(name, Matrix<Real>(rows, cols, value));
  }

  void build(std::mt19937_64& rng) {
    const std::size_t dm = cfg_.d_model(), dh = cfg_.d_hidden, vocab = cfg_.vocab_size;
    in_weight_ = weight("encoder.input.weight", dm, cfg_.feature_dim, rng);
    in_bias_ = filled("encoder.input.bias", 1, dm, 0);
    if (cfg_.use_dictionary) {
      for (std::size_t b = 0; b < cfg_.encoder.blocks; ++b) {
        const std::string pre = "encoder.block" + std::to_string(b) + ".";
        CmcaBlockParams<Real> p;
        p.query = weight(pre + "query", dm, dm, rng);
        p.key = weight(pre + "key", dm, dm, rng);
        p.value = weight(pre + "value", dm, dm, rng);
        p.output = weight(pre + "output", dm, dm, rng);
        p.ln_gain = filled(pre + "ln_gain", 1, dm, 1);
        p.ln_bias = filled(pre + "ln_bias", 1, dm, 0);
        blocks_.push_back(p);
      }
      if (!cfg_.fixed_dictionary) filled(kDictionaryParam, cfg_.num_concepts, cfg_.feature_dim, 0);
    }

    embedding_ = weight("decoder.embedding", vocab, dh, rng);
    att_lstm_ = {weight("decoder.att_lstm.weight", 4 * dh, dh + dm + dh + dh, rng),
                 filled("decoder.att_lstm.bias", 1, 4 * dh, 0)};
    att_video_ = {weight("decoder.att_video.w1", 1, dh, rng),
                  weight("decoder.att_video.w2", dh, dm, rng),
                  weight("decoder.att_video.w3", dh, dh, rng)};
    if (cfg_.use_dictionary) {
      att_concept_ = {weight("decoder.att_concept.w1", 1, dh, rng),
                      weight("decoder.att_concept.w2", dh, dm, rng),
                      weight("decoder.att_concept.w3", dh, dh, rng)};
    }
    switch (cfg_.strategy) {
      case FusionStrategy::kGate:
        gate_weight_ = weight("decoder.gate.weight", dm, 2 * dm + dh, rng);
        if (cfg_.learnable_f) {
          fusion_.f_weight = weight("decoder.fuse_f.weight", dm, dm, rng);
          fusion_.f_bias = filled("decoder.fuse_f.bias", 1, dm, 0);
        }
        break;
      case FusionStrategy::kMlp:
        fusion_.mlp_w1 = weight("decoder.fuse_mlp.w1", dm, 2 * dm, rng);
        fusion_.mlp_b1 = filled("decoder.fuse_mlp.b1", 1, dm, 0);
        fusion_.mlp_w2 = weight("decoder.fuse_mlp.w2", dm, dm, rng);
        fusion_.mlp_b2 = filled("decoder.fuse_mlp.b2", 1, dm, 0);
        break;
      case FusionStrategy::kMha:
        fusion_.mha_query = weight("decoder.fuse_mha.query", dm, dh, rng);
        fusion_.mha_key = weight("decoder.fuse_mha.key", dm, dm, rng);
        fusion_.mha_value = weight("decoder.fuse_mha.value", dm, dm, rng);
        fusion_.mha_output = weight("decoder.fuse_mha.output", dm, dm, rng);
        fusion_.mha_heads = cfg_.encoder.heads;
        break;
      case FusionStrategy::kAdd:
        break;
    }
    lang_lstm_ = {weight("decoder.lang_lstm.weight", 4 * dh, dh + dm + dh, rng),
                  filled("decoder.lang_lstm.bias", 1, 4 * dh, 0)};
    out_weight_ = weight("decoder.output.weight", vocab, dh, rng);
    out_bias_ = filled("decoder.output.bias", 1, vocab, 0);
  }

  static Var<Real> offset(const Var<Real>& x, const Matrix<Real>& delta) {
    if (delta.rows() == 0) return x;
    return numerics::add(x, Var<Real>::constant(delta));
  }

  // Shared map from raw feature space to d_model, used for frames and centers.
  Var<Real> project(const Var<Real>& x) const {
    return numerics::add_row(numerics::matmul_bt(x, in_weight_), in_bias_);
  }

  ModelConfig cfg_;
  ParameterStore<Real> store_;
  Var<Real> dictionary_;
  bool has_dictionary_ = false;

  Var<Real> in_weight_, in_bias_;
  std::vector<CmcaBlockParams<Real>> blocks_;
  Var<Real> embedding_;
  LstmParams<Real> att_lstm_, lang_lstm_;
  AttentionParams<Real> att_video_, att_concept_;
  Var<Real> gate_weight_;
  FusionParams<Real> fusion_;
  Var<Real> out_weight_, out_bias_;
};

}  // namespace vcrn::model
