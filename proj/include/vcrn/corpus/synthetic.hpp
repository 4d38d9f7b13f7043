#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "vcrn/corpus/corpus_io.hpp"

namespace vcrn::corpus {

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t num_videos = 50;
  std::size_t num_concepts = 4;
  std::size_t frames = 26;
  std::size_t dim_appearance = 32;
  std::size_t dim_motion = 32;
  double noise_sigma = 0.3;
  double prototype_scale = 1.0;
  double second_concept_prob = 0.5;
  std::size_t captions_per_video = 3;
};

/// Corpus plus the latent structure it was drawn from.
struct SyntheticCorpus {
  Corpus corpus;
  numerics::Matrix<double> prototypes;              // num_concepts × d
  std::vector<std::vector<std::size_t>> concepts;   // per video, in frame order
  std::vector<std::vector<std::size_t>> frame_concept;  // per video, per frame
  std::vector<std::string> nouns;                   // per concept
  std::vector<std::string> verbs;                   // per concept
};

namespace detail {

inline std::string concept_word(const char* const* list, std::size_t list_size,
                                const char* stem, std::size_t k) {
  if (k < list_size) return list[k];
  return std::string(stem) + std::to_string(k);
}

inline const char* const kNouns[] = {
    "man",   "woman", "dog",   "cat",    "car",    "bird",  "horse", "child",
    "chef",  "girl",  "boy",   "player", "monkey", "train", "plane", "fish",
    "baby",  "panda", "robot", "tiger",  "cow",    "duck",  "snake", "rabbit",
    "lion",  "band",  "truck", "boat",   "dancer", "crowd", "bear",  "goat"};
inline const char* const kVerbs[] = {
    "running",  "cooking", "singing",  "jumping", "swimming", "dancing", "driving",  "eating",
    "talking",  "playing", "riding",   "walking", "sleeping", "flying",  "climbing", "writing",
    "painting", "reading", "skating",  "fishing", "laughing", "fighting", "rolling", "sliding",
    "drawing",  "typing",  "spinning", "waving",  "crawling", "cutting", "digging",  "kicking"};

// Paraphrase templates. {n}/{v} are the concept's noun and verb.
inline const char* const kSingleTemplates[] = {
    "a {n} is {v}", "the {n} is {v}", "there is a {n} {v}", "a {n} is {v} here"};
inline const char* const kPairTemplates[] = {
    "a {n} is {v} and a {m} is {w}", "the {n} is {v} while the {m} is {w}",
    "there is a {n} {v} and a {m} {w}", "a {n} is {v} next to a {m} {w}"};

inline std::string fill(std::string tpl, const std::string& key, const std::string& value) {
  for (auto pos = tpl.find(key); pos != std::string::npos; pos = tpl.find(key))
    tpl.replace(pos, key.size(), value);
  return tpl;
}

}  // namespace detail

/// Deterministic corpus with planted concepts. Every video shows one or two
/// concepts (a contiguous frame segment each) and its captions name exactly
/// those concepts' noun and verb.
inline SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  const std::size_t d = spec.dim_appearance + spec.dim_motion;
  if (d < 2) throw ConfigError("synthetic corpus needs d_a + d_m >= 2");
  if (spec.num_concepts < 1) throw ConfigError("synthetic corpus needs at least one concept");
  if (spec.num_videos < spec.num_concepts)
    throw ConfigError("synthetic corpus needs num_videos >= num_concepts");
  if (spec.frames < 1) throw ConfigError("synthetic corpus needs at least one frame");
  if (spec.captions_per_video < 1) throw ConfigError("captions_per_video must be >= 1");
  if (!(spec.noise_sigma >= 0)) throw ConfigError("noise_sigma must be non-negative");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  SyntheticCorpus out;
  out.prototypes = numerics::Matrix<double>(spec.num_concepts, d);
  for (auto& v : out.prototypes.data()) v = spec.prototype_scale * unit(rng);
  for (std::size_t k = 0; k < spec.num_concepts; ++k) {
    out.nouns.push_back(detail::concept_word(detail::kNouns, std::size(detail::kNouns), "thing", k));
    out.verbs.push_back(
        detail::concept_word(detail::kVerbs, std::size(detail::kVerbs), "acting", k));
  }

  std::uniform_int_distribution<std::size_t> pick_concept(0, spec.num_concepts - 1);
  std::uniform_int_distribution<std::size_t> pick_single(0, std::size(detail::kSingleTemplates) - 1);
  std::uniform_int_distribution<std::size_t> pick_pair(0, std::size(detail::kPairTemplates) - 1);

  for (std::size_t i = 0; i < spec.num_videos; ++i) {
    std::vector<std::size_t> concepts{i < spec.num_concepts ? i : pick_concept(rng)};
    const bool two = spec.num_concepts > 1 && spec.frames > 1 &&
                     coin(rng) < spec.second_concept_prob;
    if (two) {
      std::size_t other = pick_concept(rng);
      while (other == concepts[0]) other = pick_concept(rng);
      concepts.push_back(other);
    }

    char id[32];
    std::snprintf(id, sizeof id, "vid%04zu", i);
    Video video;
    video.id = id;
    video.dim_appearance = spec.dim_appearance;
    video.dim_motion = spec.dim_motion;
    video.features = numerics::Matrix<float>(spec.frames, d);
    std::vector<std::size_t> frame_concept(spec.frames);
    const std::size_t split = two ? (spec.frames + 1) / 2 : spec.frames;
    for (std::size_t f = 0; f < spec.frames; ++f) {
      const std::size_t k = f < split ? concepts[0] : concepts[1];
      frame_concept[f] = k;
      for (std::size_t j = 0; j < d; ++j) {
        video.features(f, j) =
            static_cast<float>(out.prototypes(k, j) + spec.noise_sigma * unit(rng));
      }
    }

    for (std::size_t c = 0; c < spec.captions_per_video; ++c) {
      std::string text;
      if (concepts.size() == 1) {
        text = detail::kSingleTemplates[pick_single(rng)];
      } else {
        text = detail::kPairTemplates[pick_pair(rng)];
        text = detail::fill(text, "{m}", out.nouns[concepts[1]]);
        text = detail::fill(text, "{w}", out.verbs[concepts[1]]);
      }
      text = detail::fill(text, "{n}", out.nouns[concepts[0]]);
      text = detail::fill(text, "{v}", out.verbs[concepts[0]]);
      out.corpus.captions.push_back({video.id, text});
    }

    out.corpus.videos.push_back(std::move(video));
    out.concepts.push_back(std::move(concepts));
    out.frame_concept.push_back(std::move(frame_concept));
  }
  return out;
}

}  // namespace vcrn::corpus
