#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "vcrn/error.hpp"

namespace vcrn::inference {

/// Anything that scores the next token given a decoder state and the token
/// just emitted. `advance` returns the successor state and log-probabilities
/// over the whole vocabulary.
template <class M>
concept StepModel = requires(const M& m, const typename M::State& s, std::int32_t tok) {
  { m.initial_state() } -> std::convertible_to<typename M::State>;
  { m.start_token() } -> std::convertible_to<std::int32_t>;
  { m.advance(s, tok) } -> std::convertible_to<std::pair<typename M::State, std::vector<double>>>;
};

struct DecodeOptions {
  std::size_t max_len = 26;  // decode steps; an emitted eos counts as one
  std::int32_t eos_id = 2;
  std::set<std::int32_t> banned;  // never emitted (e.g. pad, bos)
  double length_alpha = 0;        // score / len^alpha when ranking finished beams
};

struct Hypothesis {
  std::vector<std::int32_t> tokens;  // emitted tokens, eos excluded
  double score = 0;                  // sum of log-probabilities, eos included
  bool finished = false;             // ended with eos
};

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> nbest;  // finished hypotheses, best first
};

namespace detail {

inline double ranked(const Hypothesis& h, double alpha) {
  if (alpha == 0) return h.score;
  const double len = static_cast<double>(h.tokens.size() + (h.finished ? 1 : 0));
  return h.score / std::pow(std::max(len, 1.0), alpha);
}

inline std::int32_t argmax(const std::vector<double>& logp, const std::set<std::int32_t>& banned) {
  std::int32_t best = -1;
  for (std::size_t j = 0; j < logp.size(); ++j) {
    const auto tok = static_cast<std::int32_t>(j);
    if (banned.count(tok)) continue;
    if (best < 0 || logp[j] > logp[static_cast<std::size_t>(best)]) best = tok;
  }
  if (best < 0) throw ContractError("every token is banned");
  return best;
}

}  // namespace detail

/// Repeated argmax (lowest id on ties) until eos or max_len steps.
template <StepModel Model>
Hypothesis greedy_decode(const Model& model, const DecodeOptions& opt = {}) {
  Hypothesis h;
  auto state = model.initial_state();
  std::int32_t prev = model.start_token();
  for (std::size_t t = 0; t < opt.max_len; ++t) {
    auto [next, logp] = model.advance(state, prev);
    const std::int32_t tok = detail::argmax(logp, opt.banned);
    h.score += logp[static_cast<std::size_t>(tok)];
    if (tok == opt.eos_id) {
      h.finished = true;
      break;
    }
    h.tokens.push_back(tok);
    state = std::move(next);
    prev = tok;
  }
  return h;
}

/// Beam search over summed log-probabilities. Each step keeps the `beam_size`
/// best extensions of the live beams; extensions ending in eos retire to the
/// finished pool. Ties prefer the earlier parent, then the lower token id.
template <StepModel Model>
BeamResult beam_search(const Model& model, std::size_t beam_size, const DecodeOptions& opt = {}) {
  if (beam_size < 1) throw ConfigError("beam size must be at least 1");
  struct Live {
    Hypothesis hyp;
    typename Model::State state;
    std::int32_t last;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    double logp;  // separates sums that round to the same value
    std::int32_t token;
  };

  std::vector<Live> alive{{Hypothesis{}, model.initial_state(), model.start_token()}};
  std::vector<Hypothesis> finished;
  for (std::size_t t = 0; t < opt.max_len && !alive.empty(); ++t) {
    std::vector<Candidate> cands;
    std::vector<typename Model::State> next_states;
    next_states.reserve(alive.size());
    for (std::size_t i = 0; i < alive.size(); ++i) {
      auto [next, logp] = model.advance(alive[i].state, alive[i].last);
      next_states.push_back(std::move(next));
      for (std::size_t j = 0; j < logp.size(); ++j) {
        const auto tok = static_cast<std::int32_t>(j);
        if (!opt.banned.count(tok)) cands.push_back({alive[i].hyp.score + logp[j], i, logp[j], tok});
      }
    }
    const std::size_t keep = std::min(beam_size, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        if (a.logp != b.logp) return a.logp > b.logp;
                        return a.token < b.token;
                      });
    std::vector<Live> grown;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = cands[k];
      Hypothesis h = alive[c.parent].hyp;
      h.score = c.score;
      if (c.token == opt.eos_id) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.token);
        grown.push_back({std::move(h), next_states[c.parent], c.token});
      }
    }
    alive = std::move(grown);

    // Without length normalisation scores only fall, so a finished beam that
    // already beats every live one cannot be overtaken.
    if (opt.length_alpha == 0 && !finished.empty() && !alive.empty()) {
      double best_done = -std::numeric_limits<double>::infinity();
      for (const auto& h : finished) best_done = std::max(best_done, h.score);
      if (best_done >= alive.front().hyp.score) break;
    }
  }

  BeamResult result;
  auto better = [&](const Hypothesis& a, const Hypothesis& b) {
    return detail::ranked(a, opt.length_alpha) > detail::ranked(b, opt.length_alpha);
  };
  std::stable_sort(finished.begin(), finished.end(), better);
  if (!finished.empty()) {
    result.best = finished.front();
  } else if (!alive.empty()) {
    result.best = alive.front().hyp;
  }
  result.nbest = std::move(finished);
  return result;
}

}  // namespace vcrn::inference
