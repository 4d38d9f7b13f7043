#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "vcrn/model/config.hpp"
#include "vcrn/numerics/ops.hpp"

namespace vcrn::model {

using numerics::Matrix;
using numerics::Var;

/// Fused-gate LSTM: `weight` is 4h × (in + h) acting on [x; h_prev], gate
/// order input, forget, output, candidate.
template <class Real>
struct LstmParams {
  Var<Real> weight;
  Var<Real> bias;  // 1 × 4h
};

template <class Real>
struct LstmState {
  Var<Real> h;
  Var<Real> c;
};

template <class Real>
LstmState<Real> lstm_cell(const Var<Real>& x, const LstmState<Real>& prev,
                          const LstmParams<Real>& p) {
  using namespace numerics;
  const std::size_t hd = prev.h.cols();
  if (p.weight.rows() != 4 * hd || p.weight.cols() != x.cols() + hd) {
    throw DimensionError("lstm_cell: weight " + p.weight.value().shape_string() + " for input " +
                         x.value().shape_string() + " and hidden width " + std::to_string(hd));
  }
  Var<Real> gates = add_row(matmul_bt(concat_cols<Real>({x, prev.h}), p.weight), p.bias);
  Var<Real> i = sigmoid(slice_cols(gates, 0, hd));
  Var<Real> f = sigmoid(slice_cols(gates, hd, hd));
  Var<Real> o = sigmoid(slice_cols(gates, 2 * hd, hd));
  Var<Real> g = tanh(slice_cols(gates, 3 * hd, hd));
  Var<Real> c = add(hadamard(f, prev.c), hadamard(i, g));
  return {hadamard(o, tanh(c)), c};
}

template <class Real>
struct DecoderState {
  LstmState<Real> attention;  // (h^a, c^a)
  LstmState<Real> language;   // (h^l, c^l)

  static DecoderState zeros(std::size_t d_hidden) {
    auto z = [&] { return Var<Real>::constant(Matrix<Real>(1, d_hidden)); };
    return {{z(), z()}, {z(), z()}};
  }
};

/// Arithmetic mean over frames.
template <class Real>
Var<Real> mean_pool_video(const Var<Real>& frames) {
  if (frames.rows() < 1) throw ContractError("mean_pool_video: no frames");
  return numerics::mean_rows(frames);
}

/// Attention-LSTM input is [h^l_{t-1}; v̄; W_e·w_{t-1}].
template <class Real>
LstmState<Real> attention_lstm_step(const Var<Real>& prev_language_h, const Var<Real>& video_mean,
                                    std::int32_t prev_token, const Var<Real>& embedding,
                                    const LstmState<Real>& state, const LstmParams<Real>& p) {
  if (prev_token < 0 || static_cast<std::size_t>(prev_token) >= embedding.rows()) {
    throw ContractError("token id " + std::to_string(prev_token) + " outside vocabulary of size " +
                        std::to_string(embedding.rows()));
  }
  Var<Real> word = numerics::pick_row(embedding, static_cast<std::size_t>(prev_token));
  return lstm_cell(numerics::concat_cols<Real>({prev_language_h, video_mean, word}), state, p);
}

/// Multiplicative attention weights: w1 (1 × d_att), w2 (d_att × d_feat),
/// w3 (d_att × d_hid).
template <class Real>
struct AttentionParams {
  Var<Real> w1;
  Var<Real> w2;
  Var<Real> w3;
};

template <class Real>
struct AttendedContext {
  Var<Real> context;  // 1 × d_model
  Var<Real> weights;  // 1 × R, sums to one
};

/// α = softmax_i(w1·tanh(W2·f_i + W3·h)); context = Σ α_i f_i.
template <class Real>
AttendedContext<Real> attend(const Var<Real>& features, const Var<Real>& hidden,
                             const AttentionParams<Real>& p) {
  using namespace numerics;
  if (features.rows() < 1) throw ContractError("attend: no feature rows");
  Var<Real> mixed = tanh(add_row(matmul_bt(features, p.w2), matmul_bt(hidden, p.w3)));
  Var<Real> alpha = softmax_rows(transpose(matmul_bt(mixed, p.w1)));
  return {matmul(alpha, features), alpha};
}

/// λ = σ(W_λ·[V′; C′; h^a]), one gate per feature.
template <class Real>
Var<Real> gate_lambda(const Var<Real>& video_ctx, const Var<Real>& concept_ctx,
                      const Var<Real>& hidden, const Var<Real>& gate_weight) {
  using namespace numerics;
  Var<Real> in = concat_cols<Real>({video_ctx, concept_ctx, hidden});
  if (gate_weight.cols() != in.cols() || gate_weight.rows() != video_ctx.cols()) {
    throw DimensionError("gate_lambda: W_lambda " + gate_weight.value().shape_string() +
                         " does not fit input " + in.value().shape_string());
  }
  return sigmoid(matmul_bt(in, gate_weight));
}

/// Parameters of the optional pieces of the fusion step; unused members stay null.
template <class Real>
struct FusionParams {
  Var<Real> f_weight, f_bias;            // learnable f(·) for GATE
  Var<Real> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  Var<Real> mha_query, mha_key, mha_value, mha_output;
  std::size_t mha_heads = 1;
};

template <class Real>
Var<Real> apply_f(const Var<Real>& x, const FusionParams<Real>& p) {
  if (!p.f_weight) return x;
  return numerics::add_row(numerics::matmul_bt(x, p.f_weight), p.f_bias);
}

/// Combines V′ and C′ into e′. `lambda` is read only by GATE and `hidden`
/// only by MHA.
template <class Real>
Var<Real> fuse(const Var<Real>& video_ctx, const Var<Real>& concept_ctx, const Var<Real>& lambda,
               const Var<Real>& hidden, FusionStrategy strategy, const FusionParams<Real>& p) {
  using namespace numerics;
  if (video_ctx.cols() != concept_ctx.cols() || video_ctx.rows() != concept_ctx.rows()) {
    throw DimensionError("fuse: V' " + video_ctx.value().shape_string() + " vs C' " +
                         concept_ctx.value().shape_string());
  }
  switch (strategy) {
    case FusionStrategy::kGate: {
      Var<Real> complement = affine(lambda, Real(-1), Real(1));
      return add(hadamard(lambda, apply_f(video_ctx, p)),
                 hadamard(complement, apply_f(concept_ctx, p)));
    }
    case FusionStrategy::kAdd:
      return add(video_ctx, concept_ctx);
    case FusionStrategy::kMlp: {
      Var<Real> h = tanh(add_row(matmul_bt(concat_cols<Real>({video_ctx, concept_ctx}), p.mlp_w1),
                                 p.mlp_b1));
      return add_row(matmul_bt(h, p.mlp_w2), p.mlp_b2);
    }
    case FusionStrategy::kMha: {
      Var<Real> stack = concat_rows<Real>({video_ctx, concept_ctx});  // 2 × d_model
      Var<Real> q = matmul_bt(hidden, p.mha_query);
      Var<Real> k = matmul_bt(stack, p.mha_key);
      Var<Real> v = matmul_bt(stack, p.mha_value);
      const std::size_t dh = q.cols() / p.mha_heads;
      const Real inv_sqrt = Real(1) / std::sqrt(static_cast<Real>(dh));
      std::vector<Var<Real>> heads;
      for (std::size_t h = 0; h < p.mha_heads; ++h) {
        Var<Real> a = softmax_rows(
            scale(matmul_bt(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh)), inv_sqrt));
        heads.push_back(matmul(a, slice_cols(v, h * dh, dh)));
      }
      return matmul_bt(concat_cols(heads), p.mha_output);
    }
  }
  throw ConfigError("fuse: unknown strategy");
}

template <class Real>
struct LanguageOutput {
  LstmState<Real> state;  // (h^l, c^l)
  Var<Real> probs;        // 1 × |vocab|
};

/// Language-LSTM on [h^a; e′] followed by softmax(W_v·h^l + b_v).
template <class Real>
LanguageOutput<Real> language_lstm_step(const Var<Real>& attention_h, const Var<Real>& fused,
                                        const LstmState<Real>& state,
                                        const LstmParams<Real>& lstm, const Var<Real>& out_weight,
                                        const Var<Real>& out_bias) {
  using namespace numerics;
  LstmState<Real> next = lstm_cell(concat_cols<Real>({attention_h, fused}), state, lstm);
  Var<Real> logits = add_row(matmul_bt(next.h, out_weight), out_bias);
  return {next, softmax_rows(logits)};
}

}  // namespace vcrn::model
