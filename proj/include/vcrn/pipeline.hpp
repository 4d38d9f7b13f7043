#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vcrn/config_file.hpp"
#include "vcrn/corpus/corpus_io.hpp"
#include "vcrn/dictionary/video_dictionary.hpp"
#include "vcrn/inference/captioner.hpp"
#include "vcrn/metrics/caption_metrics.hpp"
#include "vcrn/training/trainer.hpp"

namespace vcrn::pipeline {

/// Data and configuration for one training run, derived from a corpus, a
/// config file and (when the dictionary branch is on) a fitted dictionary.
struct TrainingSetup {
  model::ModelConfig model;
  training::TrainConfig train;
  training::Split split;
  corpus::Vocabulary vocab;
  std::vector<training::Example> train_set;
  std::vector<training::Example> held_out;
};

/// Fills in the data-dependent sizes: feature_dim from the corpus,
/// vocab_size from the training captions and M from the dictionary.
inline TrainingSetup prepare_training(const corpus::Corpus& c, const config::ConfigFile& cfg,
                                      const dictionary::VideoDictionary* dict) {
  if (c.videos.empty()) throw ConfigError("corpus has no videos");
  TrainingSetup s;
  s.model = training::read_model_config(cfg);
  s.train = training::read_train_config(cfg);
  s.train.validate();
  s.split = training::split_videos(c, s.train.val_fraction);
  s.vocab = training::vocabulary_for(c, s.split.train_ids, s.train.max_words,
                                     s.train.min_occurrences);
  s.train_set = training::examples_for(c, s.vocab, s.split.train_ids, s.train.max_words);
  s.held_out = training::examples_for(c, s.vocab, s.split.held_out_ids, s.train.max_words);
  s.model.feature_dim = c.videos.front().dim();
  s.model.vocab_size = s.vocab.size();
  if (s.model.use_dictionary) {
    if (!dict) throw ConfigError("use_dictionary = true needs a dictionary file");
    if (dict->dim() != s.model.feature_dim) {
      throw DimensionError("dictionary centers are " + std::to_string(dict->dim()) +
                           "-dim but corpus features are " + std::to_string(s.model.feature_dim) +
                           "-dim");
    }
    s.model.num_concepts = dict->size();
  }
  s.model.validate();
  return s;
}

template <class Real>
model::CaptionModel<Real> build_model(const TrainingSetup& s,
                                      const dictionary::VideoDictionary* dict) {
  model::CaptionModel<Real> m(s.model);
  if (s.model.use_dictionary) m.set_dictionary(dict->centers);
  return m;
}

/// Videos named by `ids`, in the given order.
inline std::vector<const corpus::Video*> select_videos(const corpus::Corpus& c,
                                                       const std::vector<std::string>& ids) {
  std::vector<const corpus::Video*> out;
  for (const auto& id : ids) {
    const corpus::Video* v = c.find(id);
    if (!v) throw ConfigError("unknown video id " + id);
    out.push_back(v);
  }
  return out;
}

template <class Real>
std::vector<inference::CaptionResult> caption_videos(const model::CaptionModel<Real>& m,
                                                     const corpus::Vocabulary& vocab,
                                                     const std::vector<const corpus::Video*>& videos,
                                                     std::size_t beam,
                                                     const inference::DecodeOptions& opt) {
  std::vector<inference::CaptionResult> out;
  out.reserve(videos.size());
  for (const auto* v : videos) out.push_back(inference::caption_video(m, vocab, *v, beam, opt));
  return out;
}

/// Scores generated captions against every reference caption of their videos.
inline metrics::EvalReport score_captions(const std::vector<inference::CaptionResult>& caps,
                                          const std::vector<corpus::CaptionRecord>& references) {
  std::map<std::string, std::vector<std::string>> refs;
  for (const auto& r : references) refs[r.video_id].push_back(r.text);
  std::vector<std::string> hyps;
  std::vector<std::vector<std::string>> ref_sets;
  for (const auto& c : caps) {
    auto it = refs.find(c.video_id);
    if (it == refs.end()) throw ContractError("no reference captions for video " + c.video_id);
    hyps.push_back(c.caption);
    ref_sets.push_back(it->second);
  }
  return metrics::evaluate_captions(hyps, ref_sets);
}

}  // namespace vcrn::pipeline
