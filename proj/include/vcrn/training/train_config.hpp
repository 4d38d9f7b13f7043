#pragma once

#include <cstdint>
#include <string>

#include "vcrn/config_file.hpp"
#include "vcrn/model/config.hpp"

namespace vcrn::training {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip_norm = 5.0;  // global norm; 0 disables clipping
  std::uint64_t seed = 0;
  double val_fraction = 0.1;  // tail of the id-sorted video list held out
  std::size_t max_words = 26;
  std::size_t min_occurrences = 2;
  bool log_wall_time = true;  // false writes 0 so logs compare byte for byte

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0)) throw ConfigError("eps must be positive");
    if (!(grad_clip_norm >= 0)) throw ConfigError("grad_clip_norm must be non-negative");
    if (!(val_fraction >= 0 && val_fraction < 1)) throw ConfigError("val_fraction must lie in [0, 1)");
    if (max_words < 1) throw ConfigError("max_words must be at least 1");
  }
};

inline constexpr char kModelSection[] = "model";
inline constexpr char kTrainSection[] = "train";

inline void write_model_config(config::ConfigFile& f, const model::ModelConfig& m) {
  const std::string s = kModelSection;
  f.set(s, "feature_dim", m.feature_dim);
  f.set(s, "vocab_size", m.vocab_size);
  f.set(s, "num_concepts", m.num_concepts);
  f.set(s, "d_model", m.encoder.d_model);
  f.set(s, "heads", m.encoder.heads);
  f.set(s, "blocks", m.encoder.blocks);
  f.set(s, "dropout", m.encoder.dropout);
  f.set(s, "d_hidden", m.d_hidden);
  f.set(s, "strategy", model::to_string(m.strategy));
  f.set(s, "use_dictionary", m.use_dictionary);
  f.set(s, "fixed_dictionary", m.fixed_dictionary);
  f.set(s, "learnable_f", m.learnable_f);
  f.set(s, "init_range", m.init_range);
  f.set(s, "layer_norm_eps", m.layer_norm_eps);
  f.set(s, "init_seed", m.init_seed);
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline model::ModelConfig read_model_config(const config::ConfigFile& f) {
  const std::string s = kModelSection;
  f.require_known(s, {"feature_dim", "vocab_size", "num_concepts", "d_model", "heads", "blocks",
                      "dropout", "d_hidden", "strategy", "use_dictionary", "fixed_dictionary",
                      "learnable_f", "init_range", "layer_norm_eps", "init_seed"});
  model::ModelConfig m;
  m.feature_dim = f.get(s, "feature_dim", m.feature_dim);
  m.vocab_size = f.get(s, "vocab_size", m.vocab_size);
  m.num_concepts = f.get(s, "num_concepts", m.num_concepts);
  m.encoder.d_model = f.get(s, "d_model", m.encoder.d_model);
  m.encoder.heads = f.get(s, "heads", m.encoder.heads);
  m.encoder.blocks = f.get(s, "blocks", m.encoder.blocks);
  m.encoder.dropout = f.get(s, "dropout", m.encoder.dropout);
  m.d_hidden = f.get(s, "d_hidden", m.d_hidden);
  if (f.has(s, "strategy")) m.strategy = model::parse_strategy(f.raw(s, "strategy"));
  m.use_dictionary = f.get(s, "use_dictionary", m.use_dictionary);
  m.fixed_dictionary = f.get(s, "fixed_dictionary", m.fixed_dictionary);
  m.learnable_f = f.get(s, "learnable_f", m.learnable_f);
  m.init_range = f.get(s, "init_range", m.init_range);
  m.layer_norm_eps = f.get(s, "layer_norm_eps", m.layer_norm_eps);
  m.init_seed = f.get(s, "init_seed", m.init_seed);
  return m;
}

inline void write_train_config(config::ConfigFile& f, const TrainConfig& t) {
  const std::string s = kTrainSection;
  f.set(s, "learning_rate", t.learning_rate);
  f.set(s, "batch_size", t.batch_size);
  f.set(s, "epochs", t.epochs);
  f.set(s, "beta1", t.beta1);
  f.set(s, "beta2", t.beta2);
  f.set(s, "eps", t.eps);
  f.set(s, "grad_clip_norm", t.grad_clip_norm);
  f.set(s, "seed", t.seed);
  f.set(s, "val_fraction", t.val_fraction);
  f.set(s, "max_words", t.max_words);
  f.set(s, "min_occurrences", t.min_occurrences);
  f.set(s, "log_wall_time", t.log_wall_time);
}

inline TrainConfig read_train_config(const config::ConfigFile& f) {
  const std::string s = kTrainSection;
  f.require_known(s, {"learning_rate", "batch_size", "epochs", "beta1", "beta2", "eps",
                      "grad_clip_norm", "seed", "val_fraction", "max_words", "min_occurrences",
                      "log_wall_time"});
  TrainConfig t;
  t.learning_rate = f.get(s, "learning_rate", t.learning_rate);
  t.batch_size = f.get(s, "batch_size", t.batch_size);
  t.epochs = f.get(s, "epochs", t.epochs);
  t.beta1 = f.get(s, "beta1", t.beta1);
  t.beta2 = f.get(s, "beta2", t.beta2);
  t.eps = f.get(s, "eps", t.eps);
  t.grad_clip_norm = f.get(s, "grad_clip_norm", t.grad_clip_norm);
  t.seed = f.get(s, "seed", t.seed);
  t.val_fraction = f.get(s, "val_fraction", t.val_fraction);
  t.max_words = f.get(s, "max_words", t.max_words);
  t.min_occurrences = f.get(s, "min_occurrences", t.min_occurrences);
  t.log_wall_time = f.get(s, "log_wall_time", t.log_wall_time);
  return t;
}

}  // namespace vcrn::training
