#pragma once

#include <random>
#include <vector>

#include "vcrn/model/caption_model.hpp"
#include "vcrn/numerics/gradcheck.hpp"
#include "vcrn/training/loss.hpp"

namespace vcrn::training {

using numerics::Matrix;

/// |vocab| = 11, d_model = d_hid = feature dim = 8, M = 4, one block, GATE.
/// Weights are drawn from ±0.5: at ±0.08 several gradients sit near 1e-10,
/// which is the rounding floor of a central difference with h = 1e-5.
inline model::ModelConfig tiny_gradcheck_config() {
  model::ModelConfig cfg;
  cfg.feature_dim = 8;
  cfg.vocab_size = 11;
  cfg.num_concepts = 4;
  cfg.encoder = {.d_model = 8, .heads = 2, .blocks = 1, .dropout = 0.0};
  cfg.d_hidden = 8;
  cfg.strategy = model::FusionStrategy::kGate;
  cfg.init_range = 0.5;
  return cfg;
}

struct GradcheckOptions {
  std::size_t frames = 3;
  std::size_t caption_words = 4;
  double step = 1e-5;
};

/// Builds a model from `cfg` in double precision, draws one random video,
/// dictionary and caption from `seed`, and compares backward() against
/// central differences on the caption NLL for every registered parameter.
inline numerics::GradCheckReport gradcheck_model(model::ModelConfig cfg, std::uint64_t seed,
                                                 const GradcheckOptions& opt = {}) {
  cfg.encoder.dropout = 0;
  model::CaptionModel<double> m(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0, 1);
  Matrix<float> features(opt.frames, cfg.feature_dim);
  for (auto& v : features.data()) v = static_cast<float>(normal(rng));
  Matrix<float> centers(cfg.num_concepts, cfg.feature_dim);
  for (auto& v : centers.data()) v = static_cast<float>(normal(rng));
  m.set_dictionary(centers);

  std::uniform_int_distribution<std::int32_t> word(corpus::kReservedCount,
                                                   static_cast<std::int32_t>(cfg.vocab_size) - 1);
  std::vector<std::int32_t> tokens{corpus::kBosId};
  for (std::size_t i = 0; i < opt.caption_words; ++i) tokens.push_back(word(rng));
  tokens.push_back(corpus::kEosId);
  const std::vector<std::int32_t> targets(tokens.begin() + 1, tokens.end());

  auto loss = [&] {
    numerics::Rng unused(0);
    return sequence_nll(m.teacher_forced(features, tokens, false, unused), targets);
  };
  return numerics::check_gradients<double>(loss, m.params(), opt.step);
}

}  // namespace vcrn::training
