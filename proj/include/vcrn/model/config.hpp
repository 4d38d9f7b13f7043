#pragma once

#include <cstdint>
#include <string>

#include "vcrn/error.hpp"

namespace vcrn::model {

/// How the attended video context V′ and concept context C′ are combined.
enum class FusionStrategy { kGate, kAdd, kMlp, kMha };

inline std::string to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kGate: return "GATE";
    case FusionStrategy::kAdd: return "ADD";
    case FusionStrategy::kMlp: return "MLP";
    case FusionStrategy::kMha: return "MHA";
  }
  return "?";
}

inline FusionStrategy parse_strategy(const std::string& s) {
  if (s == "GATE" || s == "gate") return FusionStrategy::kGate;
  if (s == "ADD" || s == "add") return FusionStrategy::kAdd;
  if (s == "MLP" || s == "mlp") return FusionStrategy::kMlp;
  if (s == "MHA" || s == "mha") return FusionStrategy::kMha;
  throw ConfigError("unknown fusion strategy \"" + s + "\" (expected GATE, ADD, MLP or MHA)");
}

struct EncoderConfig {
  std::size_t d_model = 32;
  std::size_t heads = 4;
  std::size_t blocks = 1;
  double dropout = 0.1;

  std::size_t head_dim() const { return d_model / heads; }
  void validate() const {
    if (heads == 0 || d_model % heads != 0) {
      throw ConfigError("d_model (" + std::to_string(d_model) +
                        ") must be divisible by the head count (" + std::to_string(heads) + ")");
    }
    if (blocks == 0) throw ConfigError("the encoder needs at least one C-MCA block");
    if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  }
};

struct ModelConfig {
  std::size_t feature_dim = 64;  // d_a + d_m
  std::size_t vocab_size = 0;
  std::size_t num_concepts = 16;  // M
  EncoderConfig encoder;
  std::size_t d_hidden = 32;  // LSTM width; also embedding and attention width
  FusionStrategy strategy = FusionStrategy::kGate;
  bool use_dictionary = true;
  bool fixed_dictionary = true;
  bool learnable_f = false;  // f(·) in the bilateral gate: identity unless set
  double init_range = 0.08;
  double layer_norm_eps = 1e-5;
  std::uint64_t init_seed = 1;

  std::size_t d_model() const { return encoder.d_model; }

  void validate() const {
    encoder.validate();
    if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
    if (vocab_size < 4) throw ConfigError("vocab_size must include the 4 reserved tokens");
    if (d_hidden == 0) throw ConfigError("d_hidden must be positive");
    if (use_dictionary && num_concepts == 0) throw ConfigError("num_concepts must be positive");
    if (encoder.d_model < 2) throw ConfigError("d_model must be at least 2 for layer norm");
  }
};

}  // namespace vcrn::model
