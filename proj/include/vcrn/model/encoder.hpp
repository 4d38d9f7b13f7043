#pragma once

#include <cmath>
#include <vector>

#include "vcrn/model/config.hpp"
#include "vcrn/numerics/ops.hpp"

namespace vcrn::model {

using numerics::Matrix;
using numerics::Rng;
using numerics::Var;

/// Weights of one concept-aware cross-attention block. Projections are stored
/// out×in and each is read as `heads` consecutive column slices.
template <class Real>
struct CmcaBlockParams {
  Var<Real> query;   // d_model × d_model
  Var<Real> key;     // d_model × d_model
  Var<Real> value;   // d_model × d_model
  Var<Real> output;  // W^O, d_model × d_model
  Var<Real> ln_gain;
  Var<Real> ln_bias;
};

/// softmax(Q·Kᵀ / sqrt(d_h)) row-wise: one distribution over concepts per frame.
template <class Real>
Var<Real> scaled_similarity(const Var<Real>& q, const Var<Real>& k) {
  if (q.cols() != k.cols()) {
    throw DimensionError("scaled_similarity: query width " + std::to_string(q.cols()) +
                         " vs key width " + std::to_string(k.cols()));
  }
  const Real inv_sqrt = Real(1) / std::sqrt(static_cast<Real>(q.cols()));
  return numerics::softmax_rows(numerics::scale(numerics::matmul_bt(q, k), inv_sqrt));
}

template <class Real>
struct CmcaOutput {
  Var<Real> output;                    // C_t, L × d_model
  std::vector<Matrix<Real>> attention;  // per head, L × M
};

/// One block: per-head attention from the queries `x` into the projected
/// dictionary, dropout on S·V_c, concatenation, W^O, layer norm and the
/// residual from `x`.
template <class Real>
CmcaOutput<Real> cmca_forward(const Var<Real>& x, const Var<Real>& concepts,
                              const CmcaBlockParams<Real>& p, const EncoderConfig& cfg,
                              bool train, Rng& rng, Real ln_eps = Real(1e-5)) {
  cfg.validate();
  if (x.cols() != cfg.d_model || concepts.cols() != cfg.d_model) {
    throw DimensionError("cmca_forward: inputs " + x.value().shape_string() + " and " +
                         concepts.value().shape_string() + " must have d_model = " +
                         std::to_string(cfg.d_model) + " columns");
  }
  using namespace numerics;
  const std::size_t dh = cfg.head_dim();
  Var<Real> q = matmul_bt(x, p.query);
  Var<Real> k = matmul_bt(concepts, p.key);
  Var<Real> v = matmul_bt(concepts, p.value);

  CmcaOutput<Real> out;
  std::vector<Var<Real>> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Var<Real> s = scaled_similarity(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh));
    out.attention.push_back(s.value());
    heads.push_back(dropout(matmul(s, slice_cols(v, h * dh, dh)), static_cast<Real>(cfg.dropout),
                            train, rng));
  }
  Var<Real> cs = matmul_bt(concat_cols(heads), p.output);
  out.output = add(x, layer_norm(cs, p.ln_gain, p.ln_bias, ln_eps));
  return out;
}

template <class Real>
struct VcsOutput {
  Var<Real> concept_feature;                        // Ĉ, L × d_model
  std::vector<std::vector<Matrix<Real>>> attention;  // [block][head] → L × M
};

/// Stacked blocks. Block 1 queries with the frames, later blocks with the
/// previous block's output; keys and values always come from the dictionary.
template <class Real>
VcsOutput<Real> vcs_encode(const Var<Real>& frames, const Var<Real>& concepts,
                           const std::vector<CmcaBlockParams<Real>>& blocks,
                           const EncoderConfig& cfg, bool train, Rng& rng,
                           Real ln_eps = Real(1e-5)) {
  if (blocks.empty()) throw ConfigError("vcs_encode: no C-MCA blocks");
  VcsOutput<Real> out;
  Var<Real> x = frames;
  for (const auto& block : blocks) {
    auto r = cmca_forward(x, concepts, block, cfg, train, rng, ln_eps);
    x = r.output;
    out.attention.push_back(std::move(r.attention));
  }
  out.concept_feature = x;
  return out;
}

}  // namespace vcrn::model
