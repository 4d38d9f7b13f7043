#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcrn/corpus/corpus_io.hpp"
#include "vcrn/corpus/vocabulary.hpp"
#include "vcrn/model/caption_model.hpp"
#include "vcrn/training/adam.hpp"
#include "vcrn/training/checkpoint.hpp"
#include "vcrn/training/loss.hpp"
#include "vcrn/training/train_config.hpp"

namespace vcrn::training {

/// One teacher-forced caption: `tokens` is [bos, w_1, ..., w_n, eos].
struct Example {
  const corpus::Video* video = nullptr;
  std::vector<std::int32_t> tokens;
};

struct Split {
  std::vector<std::string> train_ids;
  std::vector<std::string> held_out_ids;
};

/// The last ceil(val_fraction · n) videos in id order are held out; at least
/// one video always stays in training.
inline Split split_videos(const corpus::Corpus& c, double val_fraction) {
  const std::size_t n = c.videos.size();
  std::size_t held = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(n)));
  held = std::min(held, n > 0 ? n - 1 : 0);
  Split s;
  for (std::size_t i = 0; i < n; ++i)
    (i < n - held ? s.train_ids : s.held_out_ids).push_back(c.videos[i].id);
  return s;
}

inline corpus::Vocabulary vocabulary_for(const corpus::Corpus& c,
                                         const std::vector<std::string>& ids,
                                         std::size_t max_words, std::size_t min_occurrences) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<std::vector<std::string>> tokenized;
  for (const auto& rec : c.captions)
    if (keep.count(rec.video_id)) tokenized.push_back(corpus::tokenize_caption(rec.text, max_words));
  return corpus::build_vocabulary(tokenized, min_occurrences);
}

/// Every caption of the listed videos, in caption-file order.
inline std::vector<Example> examples_for(const corpus::Corpus& c, const corpus::Vocabulary& vocab,
                                         const std::vector<std::string>& ids,
                                         std::size_t max_words) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<Example> out;
  for (const auto& rec : c.captions) {
    if (!keep.count(rec.video_id)) continue;
    const corpus::Video* v = c.find(rec.video_id);
    if (!v) throw ConfigError("caption refers to unknown video " + rec.video_id);
    out.push_back({v, corpus::encode_caption(vocab, rec, max_words).token_ids});
  }
  return out;
}

inline std::vector<std::int32_t> targets_of(const Example& e) {
  return {e.tokens.begin() + 1, e.tokens.end()};
}

struct Evaluation {
  double loss = 0;  // mean per-caption summed NLL
  TokenCounts tokens;
};

/// Teacher-forced loss and token accuracy in eval mode.
template <class Real>
Evaluation evaluate(const model::CaptionModel<Real>& m, const std::vector<Example>& examples) {
  numerics::NoGradGuard no_grad;
  numerics::Rng unused(0);
  Evaluation ev;
  for (const auto& ex : examples) {
    auto probs = m.teacher_forced(ex.video->features, ex.tokens, false, unused);
    auto targets = targets_of(ex);
    ev.loss += static_cast<double>(sequence_nll(probs, targets).scalar());
    TokenCounts c = count_correct(probs, targets);
    ev.tokens.correct += c.correct;
    ev.tokens.total += c.total;
  }
  if (!examples.empty()) ev.loss /= static_cast<double>(examples.size());
  return ev;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;  // mean over the epoch's batches, dropout on
  std::optional<double> val_loss;
  std::optional<double> val_token_acc;
  double wall_time_s = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["epoch"] = epoch;
    j["train_loss"] = train_loss;
    j["val_loss"] = val_loss ? nlohmann::json(*val_loss) : nlohmann::json(nullptr);
    j["val_token_acc"] = val_token_acc ? nlohmann::json(*val_token_acc) : nlohmann::json(nullptr);
    j["wall_time_s"] = wall_time_s;
    return j;
  }
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

inline void check_compatible(const model::ModelConfig& cfg, const corpus::Vocabulary& vocab,
                             const std::vector<Example>& examples) {
  if (cfg.vocab_size != vocab.size()) {
    throw ConfigError("model vocab_size " + std::to_string(cfg.vocab_size) +
                      " does not match vocabulary of " + std::to_string(vocab.size()));
  }
  for (const auto& ex : examples) {
    if (ex.video->dim() != cfg.feature_dim) {
      throw ConfigError("video " + ex.video->id + " has " + std::to_string(ex.video->dim()) +
                        "-dim features, model expects " + std::to_string(cfg.feature_dim));
    }
  }
}

/// Mini-batch Adam on the batch-mean of per-caption summed NLL. Leaves the
/// model holding the parameters of the epoch with the lowest held-out loss
/// (the last epoch when nothing is held out).
template <class Real>
TrainResult train(model::CaptionModel<Real>& m, const corpus::Vocabulary& vocab,
                  const std::vector<Example>& train_set, const std::vector<Example>& held_out,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("no training captions");
  check_compatible(m.config(), vocab, train_set);
  check_compatible(m.config(), vocab, held_out);
  if (m.config().use_dictionary && !m.has_dictionary()) {
    throw ConfigError("model needs a dictionary before training");
  }

  Adam<Real> adam({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, cfg.grad_clip_norm});
  numerics::Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::map<std::string, Matrix<float>> best_tensors;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const Real inv = Real(1) / static_cast<Real>(end - b);
      m.params().zero_grad();
      double batch_loss = 0;
      for (std::size_t k = b; k < end; ++k) {
        const Example& ex = train_set[order[k]];
        auto probs = m.teacher_forced(ex.video->features, ex.tokens, true, rng);
        Var<Real> nll = sequence_nll(probs, targets_of(ex));
        numerics::backward(numerics::scale(nll, inv));
        batch_loss += static_cast<double>(nll.scalar());
      }
      batch_loss /= static_cast<double>(end - b);
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
      }
      adam.step(m.params());
      loss_sum += batch_loss;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    double score = static_cast<double>(epoch);  // later epochs win without held-out data
    if (!held_out.empty()) {
      Evaluation ev = evaluate(m, held_out);
      rec.val_loss = ev.loss;
      rec.val_token_acc = ev.tokens.accuracy();
      score = ev.loss;
    } else {
      score = -score;
    }
    if (cfg.log_wall_time) {
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (score < best) {
      best = score;
      result.best_epoch = epoch;
      best_tensors = model_tensors(m);
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.steps = adam.steps();
  if (!best_tensors.empty()) load_tensors(m, best_tensors);
  return result;
}

inline void write_log(std::ostream& out, const std::vector<EpochRecord>& log) {
  for (const auto& r : log) out << r.to_json().dump() << '\n';
}

}  // namespace vcrn::training
